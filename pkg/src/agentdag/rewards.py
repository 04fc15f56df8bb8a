"""Per-turn rewards, trajectory returns, and the group-relative policy math.

The scalar turn reward is a weighted composite r_phi = w_e*r_e + w_g*r_g:
the execution component comes from fixed tables (validation penalties below
zero, execution verdicts above), and the graph component rewards sparse
topologies within the difficulty's node budget while penalizing oversized
ones through a tanh ramp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .dsl import ErrorClass
from .graph import DensityReport
from .verdicts import Verdict

EPS_STD = 1e-8

# Validation failure penalties, ordered from least to most recoverable.
YAML_PENALTIES: Mapping[ErrorClass, float] = {
    ErrorClass.NO_YAML_FOUND: -2.0,
    ErrorClass.YAML_PARSE_ERROR: -1.5,
    ErrorClass.YAML_SCHEMA_INVALID: -1.0,
    ErrorClass.YAML_LOGIC_INVALID: -0.5,
}

# Execution verdicts; progress through the judge earns partial credit.
EXEC_REWARDS: Mapping[Verdict, float] = {
    Verdict.PASSED: 1.5,
    Verdict.WRONG_ANSWER: 1.0,
    Verdict.TIME_LIMIT_EXCEEDED: 0.9,
    Verdict.MEMORY_LIMIT_EXCEEDED: 0.8,
    Verdict.RUNTIME_ERROR: 0.7,
    Verdict.COMPILATION_ERROR: 0.6,
}


def yaml_error_reward(error_class: ErrorClass) -> float:
    return YAML_PENALTIES[ErrorClass(error_class)]


def exec_reward(verdict: Verdict) -> float:
    return EXEC_REWARDS[Verdict(verdict)]


def graph_reward(report: DensityReport) -> float:
    """Graph component: density score inside the node cap, tanh penalty above it.

    The boundary |V| = N_max stays on the density branch.
    """
    if report.v_count <= report.n_max:
        return report.s_complex
    return math.tanh((report.n_max - report.v_count) / report.n_max)


@dataclass(frozen=True)
class RewardBreakdown:
    r_e: float
    r_g: float
    r_phi: float
    weights: tuple[float, float] = (1.0, 1.0)

    def to_dict(self) -> dict:
        return {"r_e": self.r_e, "r_g": self.r_g, "r_phi": self.r_phi,
                "weights": list(self.weights)}


def turn_reward(validation_error: ErrorClass | None, *,
                report: DensityReport | None = None,
                verdict: Verdict | None = None,
                weights: tuple[float, float] = (1.0, 1.0)) -> RewardBreakdown:
    """Compose the scalar reward for one turn.

    An invalid-YAML turn carries only its penalty (there is no graph to
    score); a valid turn combines the execution verdict with the graph score.
    """
    w_e, w_g = weights
    if w_e < 0 or w_g < 0:
        raise ValueError("weights must be non-negative")
    if validation_error is not None:
        if report is not None or verdict is not None:
            raise ValueError("an invalid turn has no density report or verdict")
        r_e = yaml_error_reward(validation_error)
        r_g = 0.0
    else:
        if report is None or verdict is None:
            raise ValueError("a valid turn requires both a density report and a verdict")
        r_e = exec_reward(verdict)
        r_g = graph_reward(report)
    return RewardBreakdown(r_e=r_e, r_g=r_g, r_phi=w_e * r_e + w_g * r_g, weights=(w_e, w_g))


def trajectory_return(rewards: Iterable[float], gamma: float = 1.0) -> float:
    """Discounted sum of per-turn rewards, discount starting at gamma**0."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma!r}")
    return float(sum(r * gamma**k for k, r in enumerate(rewards)))


def grpo_advantages(group_returns: Sequence[float], eps_std: float = EPS_STD) -> list[float]:
    """Standardize a group of returns: (R_i - mean) / max(pop_std, eps_std).

    Groups whose population std falls below ``eps_std`` carry no learning
    signal and map to all-zero advantages. Centering runs in exact rational
    arithmetic so the mean-0/std-1 invariants hold to ~1e-15 even for badly
    conditioned groups (huge offsets, tiny spreads).
    """
    if len(group_returns) < 2:
        raise ValueError("a group needs at least 2 returns")
    if eps_std <= 0:
        raise ValueError("eps_std must be positive")
    exact = [Fraction(r) for r in group_returns]
    n = len(exact)
    mean = sum(exact) / n
    centered = [r - mean for r in exact]
    variance = sum(c * c for c in centered) / n
    std = math.sqrt(variance)
    if std < eps_std:
        return [0.0] * n
    return [float(c) / std for c in centered]


@dataclass(frozen=True)
class GrpoBatch:
    """One sampled group: raw returns plus their standardized advantages."""

    group_returns: tuple[float, ...]
    advantages: tuple[float, ...]
    eps_std: float = EPS_STD

    @classmethod
    def from_returns(cls, group_returns: Sequence[float], eps_std: float = EPS_STD) -> "GrpoBatch":
        return cls(
            group_returns=tuple(float(r) for r in group_returns),
            advantages=tuple(grpo_advantages(group_returns, eps_std)),
            eps_std=eps_std,
        )

    def to_dict(self) -> dict:
        return {
            "group_returns": list(self.group_returns),
            "advantages": list(self.advantages),
            "eps_std": self.eps_std,
        }


@dataclass(frozen=True)
class TrajectoryLogProbs:
    """Aligned token log-probs for one trajectory under three policies.

    ``mask`` selects the topology tokens; unmasked positions are excluded
    from both the clipped term and the KL term. ``None`` keeps every token.
    """

    new: tuple[float, ...]
    old: tuple[float, ...]
    ref: tuple[float, ...]
    mask: tuple[bool, ...] | None = None

    def masked_triples(self) -> list[tuple[float, float, float]]:
        if len(self.new) != len(self.old) or len(self.new) != len(self.ref):
            raise ValueError("log-prob sequences must have equal lengths")
        mask = self.mask if self.mask is not None else (True,) * len(self.new)
        if len(mask) != len(self.new):
            raise ValueError("mask length must match the log-prob sequences")
        triples = [
            (n, o, r) for keep, n, o, r in zip(mask, self.new, self.old, self.ref) if keep
        ]
        if not triples:
            raise ValueError("a trajectory must keep at least one topology token")
        return triples


def grpo_surrogate(batch: Sequence[TrajectoryLogProbs], advantages: Sequence[float],
                   eps_clip: float = 0.2, beta: float = 0.0, *,
                   kl_estimator: str = "log_ratio",
                   kl_pooling: str = "batch") -> float:
    """Clipped importance-ratio objective with a reference-policy KL term.

        J = (1/G) Σ_i (1/L_i) Σ_t min(ρ_t Â_i, clip(ρ_t, 1±ε) Â_i) − β·KL

    ρ_t = exp(logπ_new − logπ_old). The KL is the token mean of
    logπ_new − logπ_ref pooled over the whole batch (``kl_pooling="batch"``),
    or averaged per trajectory first (``"trajectory"``). The
    ``"exp_ratio"`` estimator swaps in the nonnegative form
    exp(−δ) + δ − 1 with δ = logπ_new − logπ_ref.
    """
    if eps_clip <= 0:
        raise ValueError("eps_clip must be positive")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if kl_estimator not in ("log_ratio", "exp_ratio"):
        raise ValueError(f"unknown kl_estimator {kl_estimator!r}")
    if kl_pooling not in ("batch", "trajectory"):
        raise ValueError(f"unknown kl_pooling {kl_pooling!r}")
    if not batch:
        raise ValueError("batch must not be empty")
    if len(batch) != len(advantages):
        raise ValueError("one advantage per trajectory is required")

    lo, hi = 1.0 - eps_clip, 1.0 + eps_clip
    clip_terms: list[float] = []
    kl_tokens: list[float] = []
    traj_kl_means: list[float] = []
    for traj, advantage in zip(batch, advantages):
        triples = traj.masked_triples()
        token_sum = 0.0
        kl_sum = 0.0
        for lp_new, lp_old, lp_ref in triples:
            ratio = math.exp(lp_new - lp_old)
            clipped = min(max(ratio, lo), hi)
            token_sum += min(ratio * advantage, clipped * advantage)
            delta = lp_new - lp_ref
            if kl_estimator == "log_ratio":
                kl = delta
            else:
                kl = math.exp(-delta) + delta - 1.0
            kl_sum += kl
            kl_tokens.append(kl)
        clip_terms.append(token_sum / len(triples))
        traj_kl_means.append(kl_sum / len(triples))

    objective = math.fsum(clip_terms) / len(batch)
    if beta == 0.0:
        return objective
    if kl_pooling == "batch":
        kl_term = math.fsum(kl_tokens) / len(kl_tokens)
    else:
        kl_term = math.fsum(traj_kl_means) / len(traj_kl_means)
    return objective - beta * kl_term
