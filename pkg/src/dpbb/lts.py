"""Finite labelled transition systems and the Aldebaran (.aut) format."""

from __future__ import annotations

import re
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

TAU = "tau"

# Largest product state space parallel_compose will build.
MAX_STATES = 2**31 - 1

_LABEL_RE = re.compile(r"^[\x20\x21\x23-\x7e]+$")
_HEADER_RE = re.compile(r"^\s*des\s*\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")
_TRANS_RE = re.compile(r'^\s*\(\s*(\d+)\s*,\s*"([^"]*)"\s*,\s*(\d+)\s*\)\s*$')


def is_tau(label: str) -> bool:
    return label == TAU


def check_label(label: str) -> str:
    """Validate an action name: nonempty printable ASCII without double quotes."""
    if not isinstance(label, str) or not _LABEL_RE.match(label):
        raise ValueError(f"invalid label {label!r}")
    return label


class Lts:
    """An immutable finite labelled transition system.

    Transitions are held as three parallel int64 arrays sorted by
    ``(source, label name, target)``; label ids index :attr:`labels`, which is
    sorted by name, so numeric order coincides with the canonical text order.
    """

    __slots__ = ("num_states", "initial", "labels", "src", "lab", "tgt", "_cache")

    def __init__(self, num_states: int, initial: int, transitions: Iterable[tuple[int, str, int]] = ()):
        triples = list(transitions)
        names = sorted({check_label(a) for _, a, _ in triples})
        ids = {a: i for i, a in enumerate(names)}
        src = np.array([s for s, _, _ in triples], dtype=np.int64)
        lab = np.array([ids[a] for _, a, _ in triples], dtype=np.int64)
        tgt = np.array([t for _, _, t in triples], dtype=np.int64)
        self._init(num_states, initial, tuple(names), src, lab, tgt)

    @classmethod
    def from_arrays(cls, num_states: int, initial: int, labels: Sequence[str], src, lab, tgt) -> "Lts":
        """Build from edge arrays; ``lab`` indexes ``labels``.  Unused labels are dropped."""
        src = np.asarray(src, dtype=np.int64)
        lab = np.asarray(lab, dtype=np.int64)
        tgt = np.asarray(tgt, dtype=np.int64)
        labels = [check_label(a) for a in labels]
        if lab.size and (lab.min() < 0 or lab.max() >= len(labels)):
            raise ValueError("label id out of range")
        used = np.unique(lab)
        names = sorted(labels[i] for i in used)
        if len(set(names)) != len(names):
            raise ValueError("duplicate label names")
        remap = np.zeros(max(len(labels), 1), dtype=np.int64)
        remap[used] = [names.index(labels[i]) for i in used]
        self = cls.__new__(cls)
        self._init(num_states, initial, tuple(names), src, remap[lab] if lab.size else lab, tgt)
        return self

    def _init(self, num_states, initial, labels, src, lab, tgt):
        num_states = int(num_states)
        initial = int(initial)
        if num_states < 1:
            raise ValueError("an LTS needs at least one state")
        if not 0 <= initial < num_states:
            raise ValueError(f"initial state {initial} out of range")
        if src.size and (min(src.min(), tgt.min()) < 0 or max(src.max(), tgt.max()) >= num_states):
            raise ValueError("transition endpoint out of range")
        nl = max(len(labels), 1)
        code = np.unique((src * nl + lab) * num_states + tgt)
        tgt = code % num_states
        rest = code // num_states
        for name, value in (
            ("num_states", num_states),
            ("initial", initial),
            ("labels", labels),
            ("src", rest // nl),
            ("lab", rest % nl),
            ("tgt", tgt),
            ("_cache", {}),
        ):
            if isinstance(value, np.ndarray):
                value = value.astype(np.int64)
                value.flags.writeable = False
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("Lts is immutable")

    # -- views ---------------------------------------------------------

    @property
    def tau_id(self) -> int:
        """Label id of tau, or -1 when no tau-transition exists."""
        try:
            return self.labels.index(TAU)
        except ValueError:
            return -1

    @property
    def num_transitions(self) -> int:
        return int(self.src.size)

    @property
    def transitions(self) -> frozenset[tuple[int, str, int]]:
        if "triples" not in self._cache:
            self._cache["triples"] = frozenset(self.iter_transitions())
        return self._cache["triples"]

    def iter_transitions(self):
        """Transitions in canonical order as ``(source, label, target)``."""
        labels = self.labels
        for s, a, t in zip(self.src.tolist(), self.lab.tolist(), self.tgt.tolist()):
            yield s, labels[a], t

    @property
    def indptr(self) -> np.ndarray:
        """CSR offsets of outgoing transitions (arrays are sorted by source)."""
        if "indptr" not in self._cache:
            indptr = np.zeros(self.num_states + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.src, minlength=self.num_states), out=indptr[1:])
            indptr.flags.writeable = False
            self._cache["indptr"] = indptr
        return self._cache["indptr"]

    def successors(self, s: int) -> list[tuple[str, int]]:
        lo, hi = self.indptr[s], self.indptr[s + 1]
        return [(self.labels[a], t) for a, t in zip(self.lab[lo:hi].tolist(), self.tgt[lo:hi].tolist())]

    def tau_edges(self) -> tuple[np.ndarray, np.ndarray]:
        mask = self.lab == self.tau_id
        return self.src[mask], self.tgt[mask]

    def _check_state(self, s: int) -> int:
        if not 0 <= s < self.num_states:
            raise IndexError(f"state {s} out of range [0, {self.num_states})")
        return int(s)

    def __eq__(self, other):
        if not isinstance(other, Lts):
            return NotImplemented
        return (
            self.num_states == other.num_states
            and self.initial == other.initial
            and self.transitions == other.transitions
        )

    def __hash__(self):
        return hash((self.num_states, self.initial, self.transitions))

    def __repr__(self):
        return f"Lts(num_states={self.num_states}, initial={self.initial}, transitions={self.num_transitions})"


# ---------------------------------------------------------------------------
# Aldebaran format


class AutFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_aut(text: str) -> Lts:
    lines = text.splitlines()
    pos = 0
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos == len(lines):
        raise AutFormatError(1, "missing 'des' header")
    m = _HEADER_RE.match(lines[pos])
    if not m:
        raise AutFormatError(pos + 1, f"malformed header {lines[pos].strip()!r}")
    initial, declared, num_states = (int(g) for g in m.groups())
    if num_states < 1:
        raise AutFormatError(pos + 1, "number of states must be positive")
    if initial >= num_states:
        raise AutFormatError(pos + 1, f"initial state {initial} >= number of states {num_states}")

    labels: dict[str, int] = {}
    src, lab, tgt = [], [], []
    for lineno, line in enumerate(lines[pos + 1:], start=pos + 2):
        if not line.strip():
            continue
        m = _TRANS_RE.match(line)
        if not m:
            if line.count('"') == 1:
                raise AutFormatError(lineno, "unterminated quote")
            raise AutFormatError(lineno, f"malformed transition {line.strip()!r}")
        s, a, t = int(m.group(1)), m.group(2), int(m.group(3))
        for state in (s, t):
            if state >= num_states:
                raise AutFormatError(lineno, f"state {state} >= number of states {num_states}")
        if a not in labels:
            if not _LABEL_RE.match(a):
                raise AutFormatError(lineno, f"invalid label {a!r}")
            labels[a] = len(labels)
        src.append(s)
        lab.append(labels[a])
        tgt.append(t)
    if len(src) != declared:
        raise AutFormatError(
            pos + 1, f"transition count mismatch (declared {declared}, found {len(src)})"
        )
    lts = Lts.from_arrays(num_states, initial, list(labels), src, lab, tgt)
    if lts.num_transitions != declared:
        raise AutFormatError(pos + 1, "duplicate transitions")
    return lts


def write_aut(lts: Lts) -> str:
    out = [f"des ({lts.initial},{lts.num_transitions},{lts.num_states})"]
    out.extend(f'({s},"{a}",{t})' for s, a, t in lts.iter_transitions())
    return "\n".join(out) + "\n"


def read_aut(path) -> Lts:
    with open(path, encoding="ascii", newline="") as fh:
        return parse_aut(fh.read())


# ---------------------------------------------------------------------------
# reachability and divergence


def tau_reach(lts: Lts, s: int) -> frozenset[int]:
    """States reachable from ``s`` by zero or more tau-steps."""
    lts._check_state(s)
    src, tgt = lts.tau_edges()
    seed = np.zeros(lts.num_states, dtype=bool)
    seed[s] = True
    # forward reachability = backward reachability on reversed edges
    return frozenset(np.flatnonzero(_kernels.backward_reach(lts.num_states, tgt, src, seed)).tolist())


def tau_reach_plus(lts: Lts, s: int) -> frozenset[int]:
    """States reachable from ``s`` by one or more tau-steps."""
    lts._check_state(s)
    src, tgt = lts.tau_edges()
    first = tgt[src == s]
    if not first.size:
        return frozenset()
    seed = np.zeros(lts.num_states, dtype=bool)
    seed[first] = True
    return frozenset(np.flatnonzero(_kernels.backward_reach(lts.num_states, tgt, src, seed)).tolist())


def divergent_mask(lts: Lts) -> np.ndarray:
    src, tgt = lts.tau_edges()
    on_cycle = _kernels.cyclic_states(lts.num_states, src, tgt)
    return _kernels.backward_reach(lts.num_states, src, tgt, on_cycle)


def divergent_states(lts: Lts) -> frozenset[int]:
    """States admitting an infinite sequence of tau-steps."""
    return frozenset(np.flatnonzero(divergent_mask(lts)).tolist())


def deadlock_states(lts: Lts) -> frozenset[int]:
    return frozenset(np.flatnonzero(np.diff(lts.indptr) == 0).tolist())


def reachable_states(lts: Lts, roots: Iterable[int] | None = None) -> frozenset[int]:
    """States reachable by any transitions from ``roots`` (default: the initial state)."""
    seed = np.zeros(lts.num_states, dtype=bool)
    seed[list(roots) if roots is not None else [lts.initial]] = True
    return frozenset(np.flatnonzero(_kernels.backward_reach(lts.num_states, lts.tgt, lts.src, seed)).tolist())


# ---------------------------------------------------------------------------
# constructions


def _merge_labels(*systems: Lts) -> tuple[list[str], list[np.ndarray]]:
    names = sorted(set().union(*(l.labels for l in systems)))
    ids = {a: i for i, a in enumerate(names)}
    return names, [np.array([ids[a] for a in l.labels] or [0], dtype=np.int64) for l in systems]


def parallel_compose(l1: Lts, l2: Lts) -> Lts:
    """Interleaving product; state ``(i, j)`` gets index ``i * l2.num_states + j``."""
    n1, n2 = l1.num_states, l2.num_states
    if n1 * n2 > MAX_STATES:
        raise OverflowError(f"product of {n1} x {n2} states exceeds {MAX_STATES}")
    names, (m1, m2) = _merge_labels(l1, l2)
    j = np.arange(n2, dtype=np.int64)
    i = np.arange(n1, dtype=np.int64)
    # left moves: (s,j) -> (s',j) for every j
    src1 = (l1.src[:, None] * n2 + j[None, :]).ravel()
    tgt1 = (l1.tgt[:, None] * n2 + j[None, :]).ravel()
    lab1 = np.repeat(m1[l1.lab] if l1.lab.size else l1.lab, n2)
    # right moves: (i,s) -> (i,s') for every i
    src2 = (i[:, None] * n2 + l2.src[None, :]).ravel()
    tgt2 = (i[:, None] * n2 + l2.tgt[None, :]).ravel()
    lab2 = np.tile(m2[l2.lab] if l2.lab.size else l2.lab, n1)
    return Lts.from_arrays(
        n1 * n2,
        l1.initial * n2 + l2.initial,
        names,
        np.concatenate([src1, src2]),
        np.concatenate([lab1, lab2]),
        np.concatenate([tgt1, tgt2]),
    )


def disjoint_union(l1: Lts, l2: Lts) -> Lts:
    """Juxtapose two systems; states of ``l2`` are shifted by ``l1.num_states``."""
    names, (m1, m2) = _merge_labels(l1, l2)
    off = l1.num_states
    return Lts.from_arrays(
        l1.num_states + l2.num_states,
        l1.initial,
        names,
        np.concatenate([l1.src, l2.src + off]),
        np.concatenate([m1[l1.lab] if l1.lab.size else l1.lab, m2[l2.lab] if l2.lab.size else l2.lab]),
        np.concatenate([l1.tgt, l2.tgt + off]),
    )


def restrict(lts: Lts, roots: Iterable[int]) -> tuple[Lts, np.ndarray]:
    """Sub-system reachable from ``roots``.

    Returns the restricted LTS (initial = first root) and ``index``, mapping
    old state ids to new ones (-1 for dropped states).
    """
    roots = [lts._check_state(r) for r in roots]
    keep = np.zeros(lts.num_states, dtype=bool)
    keep[sorted(reachable_states(lts, roots))] = True
    index = np.full(lts.num_states, -1, dtype=np.int64)
    index[keep] = np.arange(int(keep.sum()))
    mask = keep[lts.src]
    sub = Lts.from_arrays(
        int(keep.sum()), index[roots[0]], lts.labels,
        index[lts.src[mask]], lts.lab[mask], index[lts.tgt[mask]],
    )
    return sub, index


# ---------------------------------------------------------------------------
# partitions


class Partition:
    """Assignment of states to blocks, each block named by its least member."""

    __slots__ = ("block_of",)

    def __init__(self, block_of):
        block_of = np.asarray(block_of, dtype=np.int64)
        if block_of.ndim != 1 or block_of.size == 0:
            raise ValueError("partition must cover at least one state")
        n = block_of.size
        if block_of.min() < 0 or block_of.max() >= n or np.any(block_of[block_of] != block_of):
            raise ValueError("partition is not canonical")
        if np.any(block_of > np.arange(n)):
            raise ValueError("partition is not canonical")
        block_of = block_of.copy()
        block_of.flags.writeable = False
        object.__setattr__(self, "block_of", block_of)

    def __setattr__(self, name, value):
        raise AttributeError("Partition is immutable")

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Canonicalize arbitrary block labels (equal label = same block)."""
        labels = np.asarray(labels)
        _, inverse = np.unique(labels, return_inverse=True)
        inverse = inverse.ravel()
        first = np.full(inverse.max() + 1 if inverse.size else 0, labels.size, dtype=np.int64)
        np.minimum.at(first, inverse, np.arange(labels.size, dtype=np.int64))
        return cls(first[inverse])

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], num_states: int | None = None) -> "Partition":
        blocks = [sorted(set(b)) for b in blocks]
        members = [s for b in blocks for s in b]
        n = num_states if num_states is not None else (max(members) + 1 if members else 0)
        if sorted(members) != list(range(n)):
            raise ValueError("blocks must partition the states 0..n-1 exactly")
        labels = np.empty(n, dtype=np.int64)
        for b in blocks:
            labels[b] = b[0]
        return cls(labels)

    @classmethod
    def identity(cls, num_states: int) -> "Partition":
        return cls(np.arange(num_states))

    @property
    def num_states(self) -> int:
        return int(self.block_of.size)

    @property
    def num_blocks(self) -> int:
        return int(np.count_nonzero(self.block_of == np.arange(self.num_states)))

    def blocks(self) -> list[list[int]]:
        order = np.argsort(self.block_of, kind="stable")
        heads = self.block_of[order]
        cuts = np.flatnonzero(np.diff(heads)) + 1
        return [chunk.tolist() for chunk in np.split(order, cuts)]

    def same_block(self, s: int, t: int) -> bool:
        return bool(self.block_of[s] == self.block_of[t])

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        if other.num_states != self.num_states:
            return False
        return bool(np.all(other.block_of == other.block_of[self.block_of]))

    def pairs(self) -> frozenset[tuple[int, int]]:
        out = set()
        for b in self.blocks():
            out.update((s, t) for s in b for t in b)
        return frozenset(out)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.block_of, other.block_of)

    def __hash__(self):
        return hash(self.block_of.tobytes())

    def __repr__(self):
        return f"Partition({self.blocks()})"


def write_partition(p: Partition) -> str:
    return "".join(" ".join(map(str, b)) + "\n" for b in p.blocks())


def parse_partition(text: str, num_states: int | None = None) -> Partition:
    blocks = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            blocks.append([int(tok) for tok in line.split()])
        except ValueError:
            raise ValueError(f"line {lineno}: expected state indices, got {line.strip()!r}") from None
    return Partition.from_blocks(blocks, num_states)


def quotient(lts: Lts, p: Partition) -> Lts:
    """Collapse every block of ``p`` into one state.

    A tau-step inside a block is dropped, except that a block whose states
    can diverge without leaving it keeps a single tau-self-loop.
    """
    if p.num_states != lts.num_states:
        raise ValueError("partition does not match the LTS")
    heads = np.flatnonzero(p.block_of == np.arange(lts.num_states))
    index = np.empty(lts.num_states, dtype=np.int64)
    index[heads] = np.arange(heads.size)
    block = index[p.block_of]

    bs, bt = block[lts.src], block[lts.tgt]
    tau = lts.tau_id
    internal = (lts.lab == tau) & (bs == bt)
    isrc, itgt = lts.src[internal], lts.tgt[internal]
    cyclic = _kernels.cyclic_states(lts.num_states, isrc, itgt)
    div_blocks = np.unique(block[cyclic])

    keep = ~internal
    src = np.concatenate([bs[keep], div_blocks])
    tgt = np.concatenate([bt[keep], div_blocks])
    lab = np.concatenate([lts.lab[keep], np.full(div_blocks.size, tau, dtype=np.int64)])
    return Lts.from_arrays(heads.size, block[lts.initial], lts.labels, src, lab, tgt)
