from __future__ import annotations

import random

import pytest
from hypothesis import settings

from agentdag.dsl import AgentSpec, Step, TopologyDoc
from agentdag.roles import DEFAULT_ROLE_POOL

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")


def make_doc(layers, difficulty: int = 1) -> TopologyDoc:
    """Build a TopologyDoc from [[(id, role, refs), ...], ...]."""
    steps = tuple(
        Step(
            index=i + 1,
            agents=tuple(
                AgentSpec(id=aid, role=role, refs=tuple(refs)) for aid, role, refs in layer
            ),
        )
        for i, layer in enumerate(layers)
    )
    return TopologyDoc(difficulty=difficulty, steps=steps)


def random_topology(rng: random.Random, *, max_layers: int = 4, max_width: int = 3,
                    difficulty: int | None = None) -> TopologyDoc:
    """A structurally valid random document: refs resolve, step 1 has none."""
    n_layers = rng.randint(1, max_layers)
    earlier: list[str] = []
    layers = []
    counter = 0
    for layer_idx in range(1, n_layers + 1):
        agents = []
        for _ in range(rng.randint(1, max_width)):
            aid = f"agent_{counter}"
            counter += 1
            role = rng.choice(DEFAULT_ROLE_POOL)
            if layer_idx == 1 or not earlier:
                refs: list[str] = []
            else:
                refs = rng.sample(earlier, k=rng.randint(0, len(earlier)))
            agents.append((aid, role, refs))
        layers.append(agents)
        earlier.extend(a[0] for a in agents)
    return make_doc(layers, difficulty=difficulty or rng.randint(1, 3))


def random_strict_dag_doc(rng: random.Random, *, in_edge_condition: bool,
                          min_layers: int = 2, max_layers: int = 4,
                          max_width: int = 3) -> TopologyDoc:
    """Random document whose decoded DAG satisfies the strict layered-DAG laws.

    Sequentiality holds by construction (refs only reach earlier steps) and a
    fix-up pass guarantees every non-final-layer agent has an outgoing edge.
    With ``in_edge_condition`` every agent beyond layer 1 also references at
    least one agent of the immediately preceding layer.
    """
    n_layers = rng.randint(min_layers, max_layers)
    ids_by_layer: list[list[str]] = []
    counter = 0
    for _ in range(n_layers):
        width = rng.randint(1, max_width)
        ids_by_layer.append([f"n{counter + i}" for i in range(width)])
        counter += width

    refs: dict[str, list[str]] = {aid: [] for layer in ids_by_layer for aid in layer}
    for layer_idx in range(1, n_layers):
        prev_layer = ids_by_layer[layer_idx - 1]
        earlier = [aid for layer in ids_by_layer[:layer_idx] for aid in layer]
        for aid in ids_by_layer[layer_idx]:
            if in_edge_condition:
                chosen = {rng.choice(prev_layer)}
            else:
                # May skip the previous layer entirely.
                chosen = set(rng.sample(earlier, k=rng.randint(0, min(2, len(earlier)))))
            for extra in rng.sample(earlier, k=rng.randint(0, min(2, len(earlier)))):
                chosen.add(extra)
            refs[aid] = sorted(chosen)

    # Conciseness fix-up: every non-final-layer agent must feed someone later.
    referenced = {r for lst in refs.values() for r in lst}
    for layer_idx in range(n_layers - 1):
        for aid in ids_by_layer[layer_idx]:
            if aid in referenced:
                continue
            target_layer = rng.randint(layer_idx + 1, n_layers - 1)
            target = rng.choice(ids_by_layer[target_layer])
            if aid not in refs[target]:
                refs[target].append(aid)
            referenced.add(aid)

    layers = [
        [(aid, rng.choice(DEFAULT_ROLE_POOL), refs[aid]) for aid in layer]
        for layer in ids_by_layer
    ]
    return make_doc(layers, difficulty=rng.randint(1, 3))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
