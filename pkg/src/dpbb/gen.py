"""Random labelled transition systems for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .lts import TAU, Lts


def random_lts(rng: np.random.Generator, num_states: int, num_transitions: int,
               labels=("a", "b"), tau_fraction: float = 0.3, initial: int = 0) -> Lts:
    """Uniformly random edges; each one is silent with probability ``tau_fraction``.

    Duplicate draws collapse, so the result may hold fewer transitions.
    """
    names = sorted(set(labels) | {TAU})
    tau = names.index(TAU)
    visible = np.array([names.index(a) for a in labels], dtype=np.int64)
    src = rng.integers(num_states, size=num_transitions)
    tgt = rng.integers(num_states, size=num_transitions)
    lab = visible[rng.integers(visible.size, size=num_transitions)]
    lab[rng.random(num_transitions) < tau_fraction] = tau
    return Lts.from_arrays(num_states, initial, names, src, lab, tgt)


def stutter(lts: Lts, rng: np.random.Generator, copies: int = 1) -> Lts:
    """Insert silent copies of random states.

    A copy ``c`` of state ``s`` receives all outgoing transitions of ``s`` and
    ``s`` gains ``s -tau-> c``.  This keeps every state's behaviour up to
    divergence-preserving branching bisimilarity while changing the graph.
    """
    triples = set(lts.transitions)
    n = lts.num_states
    for _ in range(copies):
        s = int(rng.integers(n))
        c = n
        n += 1
        for u, a, v in list(triples):
            if u == s:
                triples.add((c, a, v))
        triples.add((s, TAU, c))
    return Lts(n, lts.initial, triples)
