"""Adapter layer: policy models, role backends, and code executors."""

from .base import (
    AdapterError,
    AgentRequest,
    AgentResponse,
    MessagePart,
    PolicyAdapter,
    RoleBackend,
    Sandbox,
    SandboxError,
    ScriptExhausted,
    TokenUsage,
    estimate_tokens,
)
from .remote import RemotePolicy, RemoteRoleBackend
from .sandbox import LocalExecutor
from .scripted import ScriptedPolicy, ScriptedRoleBackend

__all__ = [
    "AdapterError",
    "AgentRequest",
    "AgentResponse",
    "LocalExecutor",
    "MessagePart",
    "PolicyAdapter",
    "RemotePolicy",
    "RemoteRoleBackend",
    "RoleBackend",
    "Sandbox",
    "SandboxError",
    "ScriptExhausted",
    "ScriptedPolicy",
    "ScriptedRoleBackend",
    "TokenUsage",
    "estimate_tokens",
]
