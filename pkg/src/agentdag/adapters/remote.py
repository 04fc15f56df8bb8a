"""Chat-completion wire adapters (JSON over HTTP).

Request:  {"model": ..., "messages": [{"role": ..., "content": ...}],
           "temperature": ..., "max_tokens": ...}
Response: {"choices": [{"message": {"content": ...}}],
           "usage": {"prompt_tokens": ..., "completion_tokens": ...}}
"""

from __future__ import annotations

import json

import requests

from ..config import AdapterEndpoint
from ..problem import ProblemSpec
from .base import AdapterError, AgentRequest, AgentResponse, TokenUsage


class _ChatClient:
    def __init__(self, endpoint: AdapterEndpoint, session: requests.Session | None = None):
        if not endpoint.url:
            raise AdapterError("remote adapter requires an endpoint url")
        self._endpoint = endpoint
        self._session = session or requests.Session()

    def complete(self, messages: list[dict]) -> AgentResponse:
        payload = {
            "model": self._endpoint.model or "default",
            "messages": messages,
            "temperature": self._endpoint.temperature,
            "max_tokens": self._endpoint.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = self._endpoint.resolve_api_key()
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempts = self._endpoint.retries + 1
        last_error: Exception | None = None
        for _ in range(attempts):
            try:
                response = self._session.post(
                    self._endpoint.url,
                    json=payload,
                    headers=headers,
                    timeout=self._endpoint.timeout_s,
                )
                if response.status_code >= 500:
                    last_error = AdapterError(
                        f"server error {response.status_code} from {self._endpoint.url}"
                    )
                    continue
                if response.status_code != 200:
                    raise AdapterError(
                        f"request rejected ({response.status_code}): {response.text[:200]}"
                    )
                return self._parse(response.text)
            except requests.RequestException as exc:
                last_error = exc
        raise AdapterError(
            f"no response from {self._endpoint.url} after {attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse(body: str) -> AgentResponse:
        try:
            data = json.loads(body)
            content = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
            return AgentResponse(
                content=str(content),
                usage=TokenUsage(
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                ),
            )
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise AdapterError(f"malformed completion response: {exc}") from exc


class RemotePolicy(_ChatClient):
    """The orchestrator policy served by a chat-completion endpoint."""

    def __init__(self, endpoint: AdapterEndpoint, session: requests.Session | None = None,
                 *, system: str | None = None):
        super().__init__(endpoint, session)
        self._system = system

    def generate(self, problem: ProblemSpec, history_prompt: str) -> AgentResponse:
        messages: list[dict] = []
        if self._system:
            messages.append({"role": "system", "content": self._system})
        messages.append({"role": "user", "content": history_prompt})
        return self.complete(messages)


class RemoteRoleBackend(_ChatClient):
    """Role agents served by a chat-completion endpoint.

    Each in-view message is sent as its own user turn, tagged with its source,
    so the server sees exactly what the agent is allowed to see.
    """

    def respond(self, request: AgentRequest) -> AgentResponse:
        messages = [{"role": "system", "content": request.system}]
        for part in request.messages:
            messages.append({"role": "user", "content": f"[{part.source}] {part.content}"})
        return self.complete(messages)
