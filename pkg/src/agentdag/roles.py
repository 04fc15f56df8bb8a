"""The closed pool of agent roles and their default system prompts."""

from __future__ import annotations

DEFAULT_ROLE_POOL: tuple[str, ...] = (
    "retrieval",
    "planning",
    "algorithmic",
    "coding",
    "debugging",
    "testing",
)

# Shipped defaults; real deployments override these through the run config.
ROLE_PROMPTS: dict[str, str] = {
    "retrieval": (
        "You recall prior problems, known techniques, and reference material "
        "relevant to the task and summarize anything applicable."
    ),
    "planning": (
        "You decompose the problem into concrete implementation steps and state "
        "the input/output contract precisely."
    ),
    "algorithmic": (
        "You select data structures and algorithms, justify the approach, and "
        "bound its time and memory complexity."
    ),
    "coding": (
        "You write one complete, runnable program that reads stdin and writes "
        "stdout, inside a fenced code block."
    ),
    "debugging": (
        "You analyze failing runs, locate the defect, and produce a corrected "
        "program in a fenced code block."
    ),
    "testing": (
        "You propose edge cases and sanity checks for the candidate program and "
        "flag likely failure modes."
    ),
}

RETRIEVAL_STUB_MESSAGE = "no retrieval context available"
