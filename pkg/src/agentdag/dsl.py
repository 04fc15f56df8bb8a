"""The YAML interaction-topology DSL: extraction, parsing, validation, canonical form.

A topology document declares, for one orchestration turn, which agents run in
which step (layer) and which earlier agents each one listens to::

    difficulty: 1
    steps:
      - step: 1
        agents:
          - id: planner_1
            role: planning
            ref: []
      - step: 2
        agents:
          - id: coder_1
            role: coding
            ref: [planner_1]

Every failure is classified into exactly one of four classes, tried in a fixed
order: NO_YAML_FOUND (no fenced block), YAML_PARSE_ERROR (the YAML loader
rejected the text), YAML_SCHEMA_INVALID (structural shape), YAML_LOGIC_INVALID
(referential rules).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Sequence

import yaml

from .roles import DEFAULT_ROLE_POOL

DIFFICULTY_LEVELS = (1, 2, 3)


class ErrorClass(str, Enum):
    NO_YAML_FOUND = "NO_YAML_FOUND"
    YAML_PARSE_ERROR = "YAML_PARSE_ERROR"
    YAML_SCHEMA_INVALID = "YAML_SCHEMA_INVALID"
    YAML_LOGIC_INVALID = "YAML_LOGIC_INVALID"


@dataclass(frozen=True)
class ErrorLocation:
    step: int | None = None
    agent: str | None = None

    def to_dict(self) -> dict:
        return {"step": self.step, "agent": self.agent}


class TopologyError(ValueError):
    """A classified topology failure; exactly one class per failure."""

    def __init__(self, error_class: ErrorClass, detail: str,
                 location: ErrorLocation | None = None):
        super().__init__(f"{error_class.value}: {detail}")
        self.error_class = error_class
        self.detail = detail
        self.location = location

    def to_dict(self) -> dict:
        return {
            "class": self.error_class.value,
            "detail": self.detail,
            "location": self.location.to_dict() if self.location else None,
        }


@dataclass(frozen=True)
class AgentSpec:
    id: str
    role: str
    refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Step:
    index: int  # 1-based, contiguous across the document
    agents: tuple[AgentSpec, ...]


@dataclass(frozen=True)
class TopologyDoc:
    """A validated (or at least parsed) topology for one turn. Immutable."""

    difficulty: int
    steps: tuple[Step, ...]
    # True when the difficulty header was absent and a fallback filled it in.
    # Metadata only: never part of equality or the canonical form.
    difficulty_from_fallback: bool = field(default=False, compare=False)

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(agent.id for step in self.steps for agent in step.agents)


@dataclass(frozen=True)
class CheckResult:
    """Total classification outcome: either a document or one error class."""

    doc: TopologyDoc | None
    error_class: ErrorClass | None = None
    detail: str | None = None
    location: ErrorLocation | None = None
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.doc is not None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "class": self.error_class.value if self.error_class else None,
            "detail": self.detail,
            "location": self.location.to_dict() if self.location else None,
            "warnings": list(self.warnings),
        }


_FENCE_RE = re.compile(
    r"```[ \t]*([^\n`]*?)[ \t]*\r?\n(.*?)(?:\r?\n)?```",
    re.DOTALL,
)


def extract_yaml_block(text: str) -> str:
    """Return the first ```yaml fenced block, else the first fenced block of any label.

    Raises TopologyError(NO_YAML_FOUND) when the text contains no complete
    fenced block at all.
    """
    blocks = _FENCE_RE.findall(text)
    if not blocks:
        raise TopologyError(ErrorClass.NO_YAML_FOUND, "no fenced code block in policy output")
    for label, body in blocks:
        first_word = label.split()[0].lower() if label.split() else ""
        if first_word == "yaml":
            return body
    return blocks[0][1]


def _schema_error(detail: str, step: int | None = None, agent: str | None = None) -> TopologyError:
    location = ErrorLocation(step=step, agent=agent) if (step is not None or agent is not None) else None
    return TopologyError(ErrorClass.YAML_SCHEMA_INVALID, detail, location)


def _require_str(value, what: str, step: int | None, agent: str | None) -> str:
    if not isinstance(value, str) or isinstance(value, bool):
        raise _schema_error(f"{what} must be a string, got {type(value).__name__}", step, agent)
    if not value:
        raise _schema_error(f"{what} must be non-empty", step, agent)
    return value


def parse_topology(yaml_text: str, *, fallback_difficulty: int | None = None) -> TopologyDoc:
    """Parse raw YAML into a TopologyDoc, enforcing the structural schema.

    Loader failures raise YAML_PARSE_ERROR; shape problems raise
    YAML_SCHEMA_INVALID. Referential rules are checked separately by
    :func:`validate_logic`.
    """
    try:
        data = yaml.safe_load(yaml_text)
    except yaml.YAMLError as exc:
        first_line = str(exc).strip().splitlines()[0] if str(exc).strip() else "invalid YAML"
        raise TopologyError(ErrorClass.YAML_PARSE_ERROR, first_line) from exc

    if not isinstance(data, dict):
        raise _schema_error(f"top level must be a mapping, got {type(data).__name__}")

    unknown = set(data) - {"difficulty", "steps"}
    if unknown:
        raise _schema_error(f"unknown top-level keys: {sorted(map(str, unknown))}")

    used_fallback = False
    if "difficulty" in data:
        difficulty = data["difficulty"]
        if isinstance(difficulty, bool) or not isinstance(difficulty, int):
            raise _schema_error("difficulty must be an integer")
    elif fallback_difficulty is not None:
        difficulty = fallback_difficulty
        used_fallback = True
    else:
        raise _schema_error("missing required key 'difficulty' and no fallback configured")
    if difficulty not in DIFFICULTY_LEVELS:
        raise _schema_error(f"difficulty must be one of {list(DIFFICULTY_LEVELS)}, got {difficulty!r}")

    if "steps" not in data:
        raise _schema_error("missing required key 'steps'")
    raw_steps = data["steps"]
    if not isinstance(raw_steps, list):
        raise _schema_error("'steps' must be a list")
    if not raw_steps:
        raise _schema_error("'steps' must not be empty")

    steps: list[Step] = []
    for position, raw_step in enumerate(raw_steps, start=1):
        if not isinstance(raw_step, dict):
            raise _schema_error(f"step {position} must be a mapping", position)
        unknown = set(raw_step) - {"step", "agents"}
        if unknown:
            raise _schema_error(f"unknown step keys: {sorted(map(str, unknown))}", position)
        if "step" in raw_step:
            declared = raw_step["step"]
            if isinstance(declared, bool) or not isinstance(declared, int):
                raise _schema_error("'step' must be an integer", position)
            if declared != position:
                raise _schema_error(
                    f"step indices must be contiguous from 1; position {position} declares {declared}",
                    position,
                )
        if "agents" not in raw_step:
            raise _schema_error("step missing required key 'agents'", position)
        raw_agents = raw_step["agents"]
        if not isinstance(raw_agents, list):
            raise _schema_error("'agents' must be a list", position)
        if not raw_agents:
            raise _schema_error("step has an empty agent list", position)

        agents: list[AgentSpec] = []
        for raw_agent in raw_agents:
            if not isinstance(raw_agent, dict):
                raise _schema_error("agent entry must be a mapping", position)
            missing = {"id", "role", "ref"} - set(raw_agent)
            if missing:
                raise _schema_error(f"agent missing required keys: {sorted(missing)}", position)
            unknown = set(raw_agent) - {"id", "role", "ref"}
            if unknown:
                raise _schema_error(f"unknown agent keys: {sorted(map(str, unknown))}", position)
            agent_id = _require_str(raw_agent["id"], "agent 'id'", position, None)
            role = _require_str(raw_agent["role"], "agent 'role'", position, agent_id)
            raw_refs = raw_agent["ref"]
            if raw_refs is None:
                raw_refs = []
            if not isinstance(raw_refs, list):
                raise _schema_error("'ref' must be a list", position, agent_id)
            refs = tuple(
                _require_str(r, "'ref' entry", position, agent_id) for r in raw_refs
            )
            agents.append(AgentSpec(id=agent_id, role=role, refs=refs))
        steps.append(Step(index=position, agents=tuple(agents)))

    return TopologyDoc(
        difficulty=difficulty,
        steps=tuple(steps),
        difficulty_from_fallback=used_fallback,
    )


def _logic_error(rule: str, detail: str, step: int, agent: str) -> TopologyError:
    return TopologyError(
        ErrorClass.YAML_LOGIC_INVALID,
        f"rule '{rule}': {detail}",
        ErrorLocation(step=step, agent=agent),
    )


def validate_logic(doc: TopologyDoc, prior_ids: AbstractSet[str] = frozenset(),
                   role_pool: Sequence[str] = DEFAULT_ROLE_POOL) -> None:
    """Enforce the referential rules; raises YAML_LOGIC_INVALID on the first hit.

    Rules, checked in document order: unique agent ids, roles from the pool,
    empty refs in step 1, no self-references, no duplicate refs, and every ref
    naming an agent from a strictly earlier step of this turn or from
    ``prior_ids`` (the previous turn's agents).
    """
    pool = set(role_pool)
    seen_ids: set[str] = set()
    earlier_ids: set[str] = set()
    for step in doc.steps:
        for agent in step.agents:
            if agent.id in seen_ids:
                raise _logic_error("duplicate-id", f"agent id {agent.id!r} appears more than once",
                                   step.index, agent.id)
            seen_ids.add(agent.id)
            if agent.role not in pool:
                raise _logic_error("unknown-role",
                                   f"role {agent.role!r} is not in the configured pool",
                                   step.index, agent.id)
            if step.index == 1 and agent.refs:
                raise _logic_error("first-step-ref",
                                   "step 1 agents must declare an empty ref list",
                                   step.index, agent.id)
            seen_refs: set[str] = set()
            for ref in agent.refs:
                if ref == agent.id:
                    raise _logic_error("self-ref", f"agent {agent.id!r} references itself",
                                       step.index, agent.id)
                if ref in seen_refs:
                    raise _logic_error("duplicate-ref",
                                       f"ref {ref!r} is listed twice", step.index, agent.id)
                seen_refs.add(ref)
                if ref not in earlier_ids and ref not in prior_ids:
                    raise _logic_error(
                        "dangling-ref",
                        f"ref {ref!r} names no agent from an earlier step or the previous turn",
                        step.index, agent.id,
                    )
        earlier_ids.update(agent.id for agent in step.agents)


def check_topology(text: str, *, prior_ids: AbstractSet[str] = frozenset(),
                   role_pool: Sequence[str] = DEFAULT_ROLE_POOL,
                   fallback_difficulty: int | None = None) -> CheckResult:
    """Run the full pipeline on raw policy output. Total: never raises.

    Extraction, parsing, schema, and logic are tried in that order; the first
    failing stage determines the single reported error class.
    """
    try:
        yaml_text = extract_yaml_block(text)
    except TopologyError as exc:
        return CheckResult(doc=None, error_class=exc.error_class, detail=exc.detail,
                           location=exc.location)
    return check_yaml(yaml_text, prior_ids=prior_ids, role_pool=role_pool,
                      fallback_difficulty=fallback_difficulty)


def check_yaml(yaml_text: str, *, prior_ids: AbstractSet[str] = frozenset(),
               role_pool: Sequence[str] = DEFAULT_ROLE_POOL,
               fallback_difficulty: int | None = None) -> CheckResult:
    """Like :func:`check_topology` but for bare YAML (no fence extraction)."""
    try:
        doc = parse_topology(yaml_text, fallback_difficulty=fallback_difficulty)
        validate_logic(doc, prior_ids=prior_ids, role_pool=role_pool)
    except TopologyError as exc:
        return CheckResult(doc=None, error_class=exc.error_class, detail=exc.detail,
                           location=exc.location)
    warnings = ()
    if doc.difficulty_from_fallback:
        warnings = (f"difficulty header absent; fallback {doc.difficulty} applied",)
    return CheckResult(doc=doc, warnings=warnings)


def doc_to_mapping(doc: TopologyDoc, *, sort_refs: bool = False) -> dict:
    """Plain-data form of a document (steps in order, agents in document order)."""
    return {
        "difficulty": doc.difficulty,
        "steps": [
            {
                "step": step.index,
                "agents": [
                    {
                        "id": agent.id,
                        "role": agent.role,
                        "ref": sorted(agent.refs) if sort_refs else list(agent.refs),
                    }
                    for agent in step.agents
                ],
            }
            for step in doc.steps
        ],
    }


def canonicalize(doc: TopologyDoc) -> bytes:
    """Deterministic byte form: ref lists sorted, UTF-8, LF-terminated.

    Two documents that differ only in ref ordering canonicalize identically;
    any difference in structure, ids, roles, or difficulty changes the bytes.
    """
    payload = doc_to_mapping(doc, sort_refs=True)
    return (json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


def to_yaml(doc: TopologyDoc) -> str:
    """Serialize a document back to YAML that re-parses to an equal document."""
    return yaml.safe_dump(doc_to_mapping(doc), sort_keys=False, default_flow_style=False)
