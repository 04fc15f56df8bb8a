"""Deterministic scripted backends for tests and offline runs.

The scripted policy replays canned completions per problem; the scripted role
backend renders one templated message per invocation. Both report
content-derived token counts so repeated runs are byte-identical, and the role
backend can inject random scheduling delays to exercise concurrency without
affecting output.
"""

from __future__ import annotations

import random
import threading
import time
from typing import Mapping, Sequence

from ..problem import ProblemSpec
from ..roles import RETRIEVAL_STUB_MESSAGE
from .base import AgentRequest, AgentResponse, ScriptExhausted, TokenUsage, estimate_tokens

FALLBACK_KEY = "*"


def _respond(prompt_text: str, content: str) -> AgentResponse:
    return AgentResponse(
        content=content,
        usage=TokenUsage(
            prompt_tokens=estimate_tokens(prompt_text),
            completion_tokens=estimate_tokens(content),
        ),
    )


class ScriptedPolicy:
    """Replays a fixed list of completions, per problem id.

    ``script`` is either one list shared by every problem or a mapping of
    problem id (or ``"*"``) to a list. Calls beyond the end of a list raise
    :class:`ScriptExhausted`.
    """

    def __init__(self, script: Sequence[str] | Mapping[str, Sequence[str]]):
        if isinstance(script, Mapping):
            self._scripts = {k: list(v) for k, v in script.items()}
        else:
            self._scripts = {FALLBACK_KEY: list(script)}
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def _entries_for(self, problem_id: str) -> list[str]:
        if problem_id in self._scripts:
            return self._scripts[problem_id]
        if FALLBACK_KEY in self._scripts:
            return self._scripts[FALLBACK_KEY]
        raise ScriptExhausted(f"no script for problem {problem_id!r}")

    def generate(self, problem: ProblemSpec, history_prompt: str) -> AgentResponse:
        entries = self._entries_for(problem.id)
        with self._lock:
            cursor = self._cursors.get(problem.id, 0)
            self._cursors[problem.id] = cursor + 1
        if cursor >= len(entries):
            raise ScriptExhausted(
                f"script for problem {problem.id!r} exhausted after {len(entries)} turns"
            )
        return _respond(history_prompt, entries[cursor])


class ScriptedRoleBackend:
    """Templated role messages; the coding role emits a configured solution.

    ``solutions`` maps problem id (or ``"*"``) to a list of programs indexed
    by turn (the last entry repeats for later turns). ``delay_range`` sleeps a
    random interval per call — scheduling noise for determinism tests.
    """

    def __init__(self, *, solutions: Mapping[str, Sequence[str]] | None = None,
                 language: str = "python",
                 message_overrides: Mapping[str, str] | None = None,
                 delay_range: tuple[float, float] | None = None):
        self._solutions = {k: list(v) for k, v in (solutions or {}).items()}
        self._language = language
        self._overrides = dict(message_overrides or {})
        self._delay_range = delay_range
        self._rng = random.Random()  # intentionally unseeded: wall-clock noise

    def _solution_for(self, problem_id: str, turn: int) -> str | None:
        entries = self._solutions.get(problem_id) or self._solutions.get(FALLBACK_KEY)
        if not entries:
            return None
        return entries[min(turn - 1, len(entries) - 1)]

    def respond(self, request: AgentRequest) -> AgentResponse:
        if self._delay_range is not None:
            time.sleep(self._rng.uniform(*self._delay_range))
        prompt_text = request.system + "".join(p.content for p in request.messages)
        if request.role in self._overrides:
            return _respond(prompt_text, self._overrides[request.role])
        if request.role == "retrieval":
            return _respond(prompt_text, RETRIEVAL_STUB_MESSAGE)
        if request.role in ("coding", "debugging"):
            solution = self._solution_for(request.problem_id, request.turn)
            if solution is None:
                content = (
                    f"[{request.role}] {request.agent_id}: no scripted solution "
                    f"configured for {request.problem_id}."
                )
            else:
                content = (
                    f"[{request.role}] {request.agent_id}: implementation below.\n"
                    f"```{self._language}\n{solution}\n```"
                )
            return _respond(prompt_text, content)
        content = (
            f"[{request.role}] {request.agent_id} (turn {request.turn}): "
            f"reviewed {len(request.messages)} input messages for {request.problem_id}."
        )
        return _respond(prompt_text, content)
