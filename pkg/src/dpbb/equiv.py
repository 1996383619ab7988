"""Branching bisimilarity and its divergence-aware variants.

Two independent deciders live here.  :func:`dpbb_partition` and friends run
signature refinement on the tau-SCC-collapsed system; :func:`naive_gfp`
deletes violating pairs from the full relation until nothing changes.  The
test-suite checks that they agree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .lts import TAU, Lts, Partition, deadlock_states, tau_reach, tau_reach_plus

# Marker label for states that can diverge; not a legal .aut label.
DIV_LABEL = "⟨div⟩"


class Variant(str, enum.Enum):
    BB = "bb"
    DPBB = "dpbb"
    DSBB = "dsbb"
    ROOTED_DPBB = "rooted-dpbb"


PairRelation = frozenset  # frozenset[tuple[int, int]], symmetric


# ---------------------------------------------------------------------------
# signature refinement


def _refine(lts: Lts, divergence: bool) -> Partition:
    tau = lts.tau_id
    is_tau = lts.lab == tau
    comp, k = _kernels.scc(lts.num_states, lts.src[is_tau], lts.tgt[is_tau])
    cs, ct = comp[lts.src], comp[lts.tgt]
    internal = is_tau & (cs == ct)
    keep = ~internal
    src, lab, tgt = cs[keep], lts.lab[keep], ct[keep]
    nlabels = max(len(lts.labels), 1)
    if divergence:
        # every collapsed tau-cycle carries a visible divergence self-loop
        div = np.unique(cs[internal])
        src = np.concatenate([src, div])
        lab = np.concatenate([lab, np.full(div.size, nlabels, dtype=np.int64)])
        tgt = np.concatenate([tgt, div])
        nlabels += 1
    graph = _kernels.SignatureGraph(k, src, lab, tgt, tau, nlabels)
    block = np.zeros(k, dtype=np.int64)
    nblocks = 1
    while True:
        refined, count = graph.refine(block)
        if count == nblocks:
            break
        block, nblocks = refined, count
    return Partition.from_labels(block[comp])


def dpbb_partition(lts: Lts) -> Partition:
    """Classes of divergence-preserving branching bisimilarity."""
    return _refine(lts, divergence=True)


def bb_partition(lts: Lts) -> Partition:
    """Classes of (divergence-blind) branching bisimilarity."""
    return _refine(lts, divergence=False)


def deadlock_to_livelock(lts: Lts) -> Lts:
    """Give every deadlock state a tau-self-loop."""
    dead = np.array(sorted(deadlock_states(lts)), dtype=np.int64)
    if not dead.size:
        return lts
    labels = list(lts.labels)
    if TAU not in labels:
        labels.append(TAU)
    tau = labels.index(TAU)
    return Lts.from_arrays(
        lts.num_states, lts.initial, labels,
        np.concatenate([lts.src, dead]),
        np.concatenate([lts.lab, np.full(dead.size, tau, dtype=np.int64)]),
        np.concatenate([lts.tgt, dead]),
    )


def dsbb_partition(lts: Lts) -> Partition:
    """Divergence-sensitive variant: deadlock and livelock are identified."""
    return dpbb_partition(deadlock_to_livelock(lts))


def partition(lts: Lts, variant: Variant | str) -> Partition:
    variant = Variant(variant)
    if variant is Variant.BB:
        return bb_partition(lts)
    if variant is Variant.DSBB:
        return dsbb_partition(lts)
    return dpbb_partition(lts)


def _root_matches(lts: Lts, p: Partition, s: int, t: int) -> tuple[int, str, int] | None:
    """First transition of ``s`` with no strong answer from ``t`` modulo ``p``."""
    answers = {(a, p.block_of[t2]) for a, t2 in lts.successors(t)}
    for a, s2 in lts.successors(s):
        if (a, p.block_of[s2]) not in answers:
            return (s, a, s2)
    return None


def rooted_dpbb(lts: Lts, s: int, t: int) -> bool:
    lts._check_state(s)
    lts._check_state(t)
    p = dpbb_partition(lts)
    return _root_matches(lts, p, s, t) is None and _root_matches(lts, p, t, s) is None


def check(lts: Lts, s: int, t: int, variant: Variant | str = Variant.DPBB) -> bool:
    lts._check_state(s)
    lts._check_state(t)
    variant = Variant(variant)
    if variant is Variant.ROOTED_DPBB:
        return rooted_dpbb(lts, s, t)
    return partition(lts, variant).same_block(s, t)


# ---------------------------------------------------------------------------
# naive greatest fixpoint (oracle)


def _bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.float32) @ b.astype(np.float32)) > 0.5


def _closure(adj: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by repeated squaring."""
    reach = adj | np.eye(adj.shape[0], dtype=bool)
    while True:
        nxt = _bool_matmul(reach, reach)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


class _Matrices:
    """Dense relations over the states of a (small) LTS."""

    def __init__(self, lts: Lts):
        n = lts.num_states
        self.n = n
        self.tau = lts.tau_id
        self.step = {}
        for a in range(len(lts.labels)):
            m = np.zeros((n, n), dtype=bool)
            sel = lts.lab == a
            m[lts.src[sel], lts.tgt[sel]] = True
            self.step[a] = m
        self.tau_step = self.step.get(self.tau, np.zeros((n, n), dtype=bool))
        self.reach = _closure(self.tau_step)
        self.reach_plus = _bool_matmul(self.tau_step, self.reach)
        self.src, self.lab, self.tgt = lts.src, lts.lab, lts.tgt


def _violations(mx: _Matrices, rel: np.ndarray, divergence: bool) -> np.ndarray:
    """``bad[s, t]``: the ordered pair (s, t) of ``rel`` violates (T) or (D)."""
    n = mx.n
    bad = np.zeros((n, n), dtype=bool)
    if mx.src.size:
        # answer[x, u]: u -(a)-> u' with x rel u', per label
        answer = {
            a: _bool_matmul(rel, m.T) | (rel if a == mx.tau else False)
            for a, m in mx.step.items()
        }
        g = np.empty((mx.src.size, n), dtype=bool)
        for i, (s, a, s2) in enumerate(zip(mx.src, mx.lab, mx.tgt)):
            g[i] = rel[s] & answer[a][s2]
        matched = _bool_matmul(g, mx.reach.T)  # matched[i, t]
        np.logical_or.at(bad, mx.src, rel[mx.src] & ~matched)
    if divergence:
        related_later = _bool_matmul(rel, mx.reach_plus.T)  # s rel t' for some t ->+ t'
        free = rel & ~related_later
        stay = free
        while True:
            nxt = free & _bool_matmul(mx.tau_step, stay)
            if np.array_equal(nxt, stay):
                break
            stay = nxt
        bad |= stay
    return bad


def naive_deletion_rounds(lts: Lts, divergence: bool = True) -> np.ndarray:
    """Sweep number at which each pair leaves the relation (-1 = never).

    Starts from all pairs; each sweep deletes every pair (and its mirror)
    violating (T), or (D) when ``divergence`` is set, with respect to the
    relation left by the previous sweep.
    """
    mx = _Matrices(lts)
    n = mx.n
    rel = np.ones((n, n), dtype=bool)
    rounds = np.full((n, n), -1, dtype=np.int64)
    sweep = 0
    while True:
        sweep += 1
        bad = _violations(mx, rel, divergence)
        bad |= bad.T
        bad &= rel
        if not bad.any():
            return rounds
        rounds[bad] = sweep
        rel &= ~bad


def _pairs(mask: np.ndarray) -> frozenset[tuple[int, int]]:
    return frozenset(zip(*(ix.tolist() for ix in np.nonzero(mask))))


def naive_gfp(lts: Lts, divergence: bool = True) -> frozenset[tuple[int, int]]:
    return _pairs(naive_deletion_rounds(lts, divergence) < 0)


def naive_gfp_dpbb(lts: Lts) -> frozenset[tuple[int, int]]:
    """Greatest divergence-preserving branching bisimulation, by pair deletion."""
    return naive_gfp(lts, divergence=True)


def naive_gfp_bb(lts: Lts) -> frozenset[tuple[int, int]]:
    """Greatest branching bisimulation, by pair deletion."""
    return naive_gfp(lts, divergence=False)


# ---------------------------------------------------------------------------
# literal verification with witnesses


@dataclass(frozen=True)
class Violation:
    """A pair of the candidate relation breaking one condition.

    ``transition`` is the unanswered step for kinds T, R1 and R2.  For kind D,
    ``path`` is a tau-path from the first state of the pair whose last state
    steps back to ``path[loop_start]``; every state on it is related to the
    second state, none to a state that one reaches by tau-steps.
    """

    kind: str
    pair: tuple[int, int]
    transition: tuple[int, str, int] | None = None
    path: tuple[int, ...] = ()
    loop_start: int = 0

    def __str__(self):
        s, t = self.pair
        if self.kind == "D":
            cycle = " -> ".join(map(str, self.path))
            return f"D {s} {t}: divergence {cycle} -> {self.path[self.loop_start]}"
        u, a, v = self.transition
        return f"{self.kind} {s} {t}: {u} -{a}-> {v} unmatched"


def _as_relation(lts: Lts, candidate) -> list[set[int]]:
    n = lts.num_states
    if isinstance(candidate, Partition):
        if candidate.num_states != n:
            raise ValueError("malformed candidate: partition size does not match the LTS")
        rel: list[set[int]] = [set() for _ in range(n)]
        for b in candidate.blocks():
            for s in b:
                rel[s] = set(b)
        return rel
    rel = [set() for _ in range(n)]
    for s, t in candidate:
        if not (0 <= s < n and 0 <= t < n):
            raise ValueError(f"malformed candidate: pair ({s}, {t}) out of range")
        rel[s].add(t)
    for s in range(n):
        for t in rel[s]:
            if s not in rel[t]:
                raise ValueError(f"malformed candidate: ({s}, {t}) present without its mirror")
    return rel


def verify(lts: Lts, candidate, variant: Variant | str = Variant.DPBB,
           root: tuple[int, int] | None = None) -> list[Violation]:
    """Check a relation or partition against the definition, pair by pair.

    Returns one violation per offending ordered pair and condition, in
    lexicographic pair order.  ``rooted-dpbb`` also checks the root condition
    at ``root``, which is then required.
    """
    variant = Variant(variant)
    rel = _as_relation(lts, candidate)
    if variant is Variant.DSBB:
        lts = deadlock_to_livelock(lts)
    if variant is Variant.ROOTED_DPBB and root is None:
        raise ValueError("rooted-dpbb verification needs a root pair")
    divergence = variant is not Variant.BB
    n = lts.num_states
    succ = [lts.successors(s) for s in range(n)]
    tau_succ = [sorted({v for a, v in succ[s] if a == TAU}) for s in range(n)]
    reach: dict[int, frozenset[int]] = {}
    reach_plus: dict[int, frozenset[int]] = {}

    def weak(t):
        if t not in reach:
            reach[t] = tau_reach(lts, t)
        return reach[t]

    def weak_plus(t):
        if t not in reach_plus:
            reach_plus[t] = tau_reach_plus(lts, t)
        return reach_plus[t]

    def step_answered(s, a, s2, t):
        for t2 in weak(t):
            if t2 not in rel[s]:
                continue
            if a == TAU and t2 in rel[s2]:
                return True
            if any(b == a and t3 in rel[s2] for b, t3 in succ[t2]):
                return True
        return False

    out: list[Violation] = []
    for s in range(n):
        for t in sorted(rel[s]):
            for a, s2 in succ[s]:
                if not step_answered(s, a, s2, t):
                    out.append(Violation("T", (s, t), transition=(s, a, s2)))
                    break
            if divergence:
                witness = _divergence_witness(rel, tau_succ, weak_plus(t), s, t)
                if witness is not None:
                    path, loop = witness
                    out.append(Violation("D", (s, t), path=path, loop_start=loop))
    if variant is Variant.ROOTED_DPBB:
        s, t = root
        if t not in rel[s]:
            raise ValueError(f"root pair ({s}, {t}) is not in the candidate")
        for kind, (x, y) in (("R1", (s, t)), ("R2", (t, s))):
            for a, x2 in succ[x]:
                if not any(b == a and y2 in rel[x2] for b, y2 in succ[y]):
                    out.append(Violation(kind, (s, t), transition=(x, a, x2)))
                    break
    return out


def _divergence_witness(rel, tau_succ, t_plus, s, t):
    related = rel[t]  # V: states related to t (relation is symmetric)
    free = {u for u in related if not (rel[u] & t_plus)}  # V minus W
    if s not in free:
        return None
    stay = set(free)
    changed = True
    while changed:
        changed = False
        for u in list(stay):
            if not any(v in stay for v in tau_succ[u]):
                stay.discard(u)
                changed = True
    if s not in stay:
        return None
    path, seen = [s], {s: 0}
    u = s
    while True:
        u = next(v for v in tau_succ[u] if v in stay)
        if u in seen:
            return tuple(path), seen[u]
        seen[u] = len(path)
        path.append(u)


def relation_of(p: Partition) -> frozenset[tuple[int, int]]:
    return p.pairs()


def same_relation(p: Partition, pairs: Iterable[tuple[int, int]]) -> bool:
    return p.pairs() == frozenset(pairs)
