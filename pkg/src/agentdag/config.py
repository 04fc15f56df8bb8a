"""Run configuration: one declarative file, env-var overrides for secrets."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .roles import DEFAULT_ROLE_POOL, ROLE_PROMPTS


class ConfigError(ValueError):
    """Invalid or unreadable run configuration (a usage error, not a bug)."""


DEFAULT_POLICY_PROMPT = (
    "You are the orchestrator. Read the problem and emit an interaction "
    "topology as YAML inside a ```yaml fenced block, with a top-level "
    "'difficulty' (1, 2, or 3) and a 'steps' list; each step has 'agents' "
    "with 'id', 'role', and 'ref' (ids of earlier agents to listen to). "
    "Step 1 agents must use 'ref: []'."
)


@dataclass(frozen=True)
class AdapterEndpoint:
    """Where one class of completions comes from (the policy, or the roles)."""

    kind: str = "scripted"  # "scripted" | "remote"
    url: str | None = None
    model: str | None = None
    api_key: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout_s: float = 60.0
    retries: int = 2

    def resolve_api_key(self) -> str | None:
        # The environment wins over anything written in the file.
        if self.api_key_env and os.environ.get(self.api_key_env):
            return os.environ[self.api_key_env]
        return self.api_key


@dataclass(frozen=True)
class LanguageSpec:
    run_cmd: tuple[str, ...]
    compile_cmd: tuple[str, ...] | None = None
    source_name: str = "main.txt"


def _default_languages() -> dict[str, LanguageSpec]:
    return {
        "python": LanguageSpec(
            run_cmd=("python3", "{src}"),
            compile_cmd=None,  # syntax-checked in-process by the executor
            source_name="main.py",
        ),
    }


@dataclass(frozen=True)
class ExecutorConfig:
    time_limit_ms: int = 2000
    memory_limit_mb: int = 512
    max_output_bytes: int = 65536
    workers: int = 4
    default_language: str = "python"
    languages: Mapping[str, LanguageSpec] = field(default_factory=_default_languages)


@dataclass(frozen=True)
class RunConfig:
    max_turns: int = 2  # K
    gamma: float = 1.0
    weights: tuple[float, float] = (1.0, 1.0)  # (w_e, w_g)
    eps_clip: float = 0.2
    beta: float = 0.0
    group_size: int = 8  # G
    difficulty_fallback: int | None = None
    message_tokens: int = 100  # m, for cost estimates
    observation_log_cap: int = 4000
    role_pool: tuple[str, ...] = DEFAULT_ROLE_POOL
    role_prompts: Mapping[str, str] = field(default_factory=lambda: dict(ROLE_PROMPTS))
    policy_system_prompt: str = DEFAULT_POLICY_PROMPT
    policy: AdapterEndpoint = field(default_factory=AdapterEndpoint)
    roles: AdapterEndpoint = field(default_factory=AdapterEndpoint)
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)

    def validated(self) -> "RunConfig":
        if self.max_turns < 1:
            raise ConfigError("max_turns must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if len(self.weights) != 2 or any(w < 0 for w in self.weights):
            raise ConfigError("weights must be two non-negative numbers")
        if self.eps_clip <= 0:
            raise ConfigError("eps_clip must be positive")
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2")
        if self.difficulty_fallback is not None and self.difficulty_fallback not in (1, 2, 3):
            raise ConfigError("difficulty_fallback must be 1, 2, or 3")
        if self.message_tokens < 1:
            raise ConfigError("message_tokens must be >= 1")
        if self.observation_log_cap < 1:
            raise ConfigError("observation_log_cap must be >= 1")
        ex = self.executor
        if min(ex.time_limit_ms, ex.memory_limit_mb, ex.max_output_bytes, ex.workers) < 1:
            raise ConfigError("executor limits must all be >= 1")
        if ex.default_language not in ex.languages:
            raise ConfigError(f"default language {ex.default_language!r} has no language spec")
        missing = [r for r in self.role_pool if r not in self.role_prompts]
        if missing:
            raise ConfigError(f"roles without prompts: {missing}")
        return self


def _endpoint_from(data: Mapping[str, Any], where: str) -> AdapterEndpoint:
    allowed = {"kind", "url", "model", "api_key", "api_key_env", "temperature",
               "max_tokens", "timeout_s", "retries"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys under {where}: {sorted(unknown)}")
    endpoint = AdapterEndpoint(**data)
    if endpoint.kind not in ("scripted", "remote"):
        raise ConfigError(f"{where}.kind must be 'scripted' or 'remote'")
    if endpoint.kind == "remote" and not endpoint.url:
        raise ConfigError(f"{where}.kind is 'remote' but no url is set")
    return endpoint


def _languages_from(data: Mapping[str, Any]) -> dict[str, LanguageSpec]:
    languages = _default_languages()
    for tag, spec in data.items():
        if not isinstance(spec, Mapping) or "run_cmd" not in spec:
            raise ConfigError(f"language {tag!r} needs at least run_cmd")
        languages[str(tag)] = LanguageSpec(
            run_cmd=tuple(spec["run_cmd"]),
            compile_cmd=tuple(spec["compile_cmd"]) if spec.get("compile_cmd") else None,
            source_name=str(spec.get("source_name", f"main.{tag}")),
        )
    return languages


def _executor_from(data: Mapping[str, Any]) -> ExecutorConfig:
    allowed = {"time_limit_ms", "memory_limit_mb", "max_output_bytes", "workers",
               "default_language", "languages"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys under executor: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k != "languages"}
    languages = _languages_from(data.get("languages", {}))
    return ExecutorConfig(languages=languages, **kwargs)


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    """Build and validate a RunConfig from plain data (parsed YAML/JSON)."""
    data = dict(data)
    try:
        kwargs: dict[str, Any] = {}
        for key in ("max_turns", "gamma", "eps_clip", "beta", "group_size",
                    "difficulty_fallback", "message_tokens", "observation_log_cap",
                    "policy_system_prompt"):
            if key in data:
                kwargs[key] = data.pop(key)
        if "weights" in data:
            raw = data.pop("weights")
            if isinstance(raw, Mapping):
                kwargs["weights"] = (float(raw.get("execution", 1.0)), float(raw.get("graph", 1.0)))
            else:
                kwargs["weights"] = tuple(float(w) for w in raw)
        if "role_pool" in data:
            kwargs["role_pool"] = tuple(str(r) for r in data.pop("role_pool"))
        if "role_prompts" in data:
            prompts = dict(ROLE_PROMPTS)
            prompts.update({str(k): str(v) for k, v in data.pop("role_prompts").items()})
            kwargs["role_prompts"] = prompts
        if "policy" in data:
            kwargs["policy"] = _endpoint_from(data.pop("policy"), "policy")
        if "roles" in data:
            kwargs["roles"] = _endpoint_from(data.pop("roles"), "roles")
        if "executor" in data:
            kwargs["executor"] = _executor_from(data.pop("executor"))
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")
        return RunConfig(**kwargs).validated()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Load the config file (YAML or JSON — JSON is a YAML subset) and apply overrides.

    ``overrides`` are flat top-level replacements (CLI flags beat the file).
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                loaded = yaml.safe_load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping")
        data = loaded
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(data)
