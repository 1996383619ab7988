"""Modal logic with just-before and divergence modalities.

Concrete syntax::

    true | false | !f | D f | f & g | f | g | f <label> g | ( f )

``!`` and ``D`` bind tightest, then the infix just-before ``<label>``, then
``&``, then ``|``; binary operators associate to the left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .equiv import dpbb_partition, naive_deletion_rounds
from .lts import TAU, Lts, quotient, restrict


class _Node:
    __slots__ = ()

    def __post_init__(self):
        # trees share subterms heavily; cache the structural hash
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._fields()))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def _fields(self):
        return tuple(getattr(self, f) for f in self.__dataclass_fields__ if f != "_hash")

    def __str__(self):
        return format_phi(self)


@dataclass(frozen=True, eq=False)
class Top(_Node):
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class Not(_Node):
    arg: "Phi"
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class And(_Node):
    left: "Phi"
    right: "Phi"
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class JustBefore(_Node):
    before: "Phi"
    label: str
    after: "Phi"
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class Div(_Node):
    arg: "Phi"
    _hash: int = field(default=0, init=False, repr=False, compare=False)


Phi = Union[Top, Not, And, JustBefore, Div]
TRUE = Top()
FALSE = Not(TRUE)


def Or(left: Phi, right: Phi) -> Phi:
    return Not(And(Not(left), Not(right)))


def conj(parts) -> Phi:
    """Finite conjunction; drops duplicates and ``true``."""
    seen = []
    for p in parts:
        if p != TRUE and p not in seen:
            seen.append(p)
    if not seen:
        return TRUE
    out = seen[0]
    for p in seen[1:]:
        out = And(out, p)
    return out


def disj(parts) -> Phi:
    parts = list(dict.fromkeys(parts))
    if not parts:
        return FALSE
    if TRUE in parts:
        return TRUE
    return parts[0] if len(parts) == 1 else Not(conj(Not(p) for p in parts))


def negate(phi: Phi) -> Phi:
    return phi.arg if isinstance(phi, Not) else Not(phi)


# ---------------------------------------------------------------------------
# parsing


class PhiSyntaxError(ValueError):
    def __init__(self, pos: int, message: str):
        super().__init__(f"position {pos}: {message}")
        self.pos = pos


_TOKEN_RE = re.compile(r"\s*(?:(<)([^<>]*)(>)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        if m.group(1):
            if not m.group(2):
                raise PhiSyntaxError(start, "empty label")
            tokens.append(("label", m.group(2), start))
        elif m.group(4):
            word = m.group(4)
            if word not in ("true", "false", "D"):
                raise PhiSyntaxError(start, f"unknown token {word!r}")
            tokens.append((word, word, start))
        else:
            ch = m.group(5)
            if ch not in "!&|()":
                raise PhiSyntaxError(start, f"unknown token {ch!r}")
            tokens.append((ch, ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _PhiParser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise PhiSyntaxError(tok[2], f"expected {kind!r}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def parse(self):
        phi = self.disjunction()
        self.take("end")
        return phi

    def disjunction(self):
        phi = self.conjunction()
        while self.peek()[0] == "|":
            self.take()
            phi = Or(phi, self.conjunction())
        return phi

    def conjunction(self):
        phi = self.just_before()
        while self.peek()[0] == "&":
            self.take()
            phi = And(phi, self.just_before())
        return phi

    def just_before(self):
        phi = self.unary()
        while self.peek()[0] == "label":
            label = self.take()[1]
            phi = JustBefore(phi, label, self.unary())
        return phi

    def unary(self):
        kind, _, pos = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind == "D":
            self.take()
            return Div(self.unary())
        if kind == "true":
            self.take()
            return TRUE
        if kind == "false":
            self.take()
            return FALSE
        if kind == "(":
            self.take()
            phi = self.disjunction()
            self.take(")")
            return phi
        raise PhiSyntaxError(pos, f"expected a formula, found {self.peek()[1] or 'end of input'!r}")


def parse_phi(text: str) -> Phi:
    return _PhiParser(text).parse()


def format_phi(phi: Phi) -> str:
    """Render ``phi`` in the concrete syntax accepted by :func:`parse_phi`."""

    def go(f, level):
        # levels: 0 conjunction, 1 just-before, 2 unary
        if isinstance(f, Top):
            return "true"
        if isinstance(f, Not):
            if f.arg == TRUE:
                return "false"
            return "!" + go(f.arg, 2)
        if isinstance(f, Div):
            return "D " + go(f.arg, 2)
        if isinstance(f, And):
            text = f"{go(f.left, 0)} & {go(f.right, 1)}"
            return text if level <= 0 else f"({text})"
        text = f"{go(f.before, 1)} <{f.label}> {go(f.after, 2)}"
        return text if level <= 1 else f"({text})"

    return go(phi, 0)


# ---------------------------------------------------------------------------
# evaluation


class _Evaluator:
    def __init__(self, lts: Lts):
        self.lts = lts
        self.n = lts.num_states
        self.tau_src, self.tau_tgt = lts.tau_edges()
        self.alphabet = set(lts.labels) | {TAU}
        self.memo: dict[Phi, np.ndarray] = {}

    def weak_pre(self, target: np.ndarray) -> np.ndarray:
        return _kernels.backward_reach(self.n, self.tau_src, self.tau_tgt, target)

    def sat(self, phi: Phi) -> np.ndarray:
        hit = self.memo.get(phi)
        if hit is not None:
            return hit
        if isinstance(phi, Top):
            out = np.ones(self.n, dtype=bool)
        elif isinstance(phi, Not):
            out = ~self.sat(phi.arg)
        elif isinstance(phi, And):
            out = self.sat(phi.left) & self.sat(phi.right)
        elif isinstance(phi, JustBefore):
            out = self._just_before(phi)
        elif isinstance(phi, Div):
            inside = self.sat(phi.arg)
            keep = inside[self.tau_src] & inside[self.tau_tgt]
            s, t = self.tau_src[keep], self.tau_tgt[keep]
            on_cycle = _kernels.cyclic_states(self.n, s, t)
            forever = _kernels.backward_reach(self.n, s, t, on_cycle)
            out = self.weak_pre(forever)
        else:
            raise TypeError(f"not a formula: {phi!r}")
        self.memo[phi] = out
        return out

    def _just_before(self, phi: JustBefore) -> np.ndarray:
        if phi.label not in self.alphabet:
            raise ValueError(f"unknown label {phi.label!r}")
        before, after = self.sat(phi.before), self.sat(phi.after)
        lts = self.lts
        start = np.zeros(self.n, dtype=bool)
        if phi.label in lts.labels:
            a = lts.labels.index(phi.label)
            sel = (lts.lab == a) & after[lts.tgt]
            start[lts.src[sel]] = True
        if phi.label == TAU:
            start |= after
        return self.weak_pre(start & before)


def sat_mask(lts: Lts, phi: Phi) -> np.ndarray:
    return _Evaluator(lts).sat(phi)


def eval_phi(lts: Lts, phi: Phi | str) -> frozenset[int]:
    """Exact set of states satisfying ``phi``."""
    if isinstance(phi, str):
        phi = parse_phi(phi)
    return frozenset(np.flatnonzero(sat_mask(lts, phi)).tolist())


# ---------------------------------------------------------------------------
# distinguishing formulas


class _Explainer:
    """Builds formulas from the deletion history of the naive fixpoint.

    A pair deleted in sweep r violated (T) or (D) against the relation left
    after sweep r-1, and every pair missing from that relation was deleted
    earlier, so the required sub-formulas are already available.
    """

    def __init__(self, lts: Lts):
        self.lts = lts
        self.n = lts.num_states
        self.rounds = naive_deletion_rounds(lts, divergence=True)
        self.succ = [lts.successors(s) for s in range(self.n)]
        tau = lts.tau_edges()
        self.tau_succ = [[] for _ in range(self.n)]
        for u, v in zip(*(x.tolist() for x in tau)):
            self.tau_succ[u].append(v)
        self.reach = [self._closure(s, plus=False) for s in range(self.n)]
        self.reach_plus = [self._closure(s, plus=True) for s in range(self.n)]
        self.memo: dict[tuple[int, int], Phi] = {}

    def _closure(self, s, plus):
        seen = set() if plus else {s}
        stack = list(self.tau_succ[s]) if plus else [s]
        while stack:
            u = stack.pop()
            if plus and u in seen:
                continue
            seen.add(u)
            stack.extend(v for v in self.tau_succ[u] if v not in seen)
        return sorted(seen)

    def distinguish(self, s: int, t: int) -> Phi:
        """A formula true at ``s`` and false at ``t`` (which must be inequivalent)."""
        key = (s, t)
        if key not in self.memo:
            r = int(self.rounds[s, t])
            assert r > 0, "pair is equivalent"
            own = self._from_violation(s, t, r)
            self.memo[key] = own if own is not None else negate(self._from_violation(t, s, r))
        return self.memo[key]

    def _from_violation(self, s, t, r):
        def related(x, y):
            # relation before sweep r
            return self.rounds[x, y] < 0 or self.rounds[x, y] >= r

        for a, s2 in self.succ[s]:
            before, after = [], []
            answered = False
            for t2 in self.reach[t]:
                steps = [v for b, v in self.succ[t2] if b == a]
                if a == TAU:
                    steps.append(t2)
                if not steps:
                    continue
                if not related(s, t2):
                    before.append((s, t2))
                    continue
                bad = [t3 for t3 in steps if not related(s2, t3)]
                if len(bad) < len(steps):
                    answered = True
                    break
                after.extend((s2, t3) for t3 in bad)
            if answered:
                continue
            return JustBefore(
                conj(self.distinguish(*p) for p in dict.fromkeys(before)),
                a,
                conj(self.distinguish(*p) for p in dict.fromkeys(after)),
            )

        free = {u for u in range(self.n) if related(u, t)
                and not any(related(u, t2) for t2 in self.reach_plus[t])}
        if s not in free:
            return None
        stay = set(free)
        changed = True
        while changed:
            changed = False
            for u in list(stay):
                if not any(v in stay for v in self.tau_succ[u]):
                    stay.discard(u)
                    changed = True
        if s not in stay:
            return None
        lasso, u = [s], s
        while True:
            u = min(v for v in self.tau_succ[u] if v in stay)
            if u in lasso:
                break
            lasso.append(u)
        # true along the divergence, false at every state t reaches by tau-steps
        body = disj(conj(self.distinguish(u, t2) for t2 in self.reach_plus[t]) for u in lasso)
        return Div(body)


def distinguishing_formula(lts: Lts, s: int, t: int) -> Phi | None:
    """A formula separating ``s`` from ``t``, or ``None`` when they are equivalent.

    The search runs on the minimized system reachable from the two states,
    and the answer is checked against ``lts`` before it is returned.
    """
    lts._check_state(s)
    lts._check_state(t)
    p = dpbb_partition(lts)
    if p.same_block(s, t):
        return None
    q = quotient(lts, p)
    heads = np.flatnonzero(p.block_of == np.arange(lts.num_states))
    qs, qt = (int(np.searchsorted(heads, p.block_of[x])) for x in (s, t))
    sub, index = restrict(q, [qs, qt])
    phi = _Explainer(sub).distinguish(int(index[qs]), int(index[qt]))
    sat = sat_mask(lts, phi)
    if not (sat[s] and not sat[t]):
        raise RuntimeError(f"generated formula does not separate {s} and {t}: {format_phi(phi)}")
    return phi


# ---------------------------------------------------------------------------
# random formulas


def random_phi(rng: np.random.Generator, labels, depth: int) -> Phi:
    """A random formula of nesting depth at most ``depth`` over ``labels``."""
    labels = list(labels)
    if depth <= 0:
        return TRUE
    kind = rng.integers(5)
    if kind == 0:
        return TRUE if rng.random() < 0.5 else FALSE
    if kind == 1:
        return Not(random_phi(rng, labels, depth - 1))
    if kind == 2:
        return And(random_phi(rng, labels, depth - 1), random_phi(rng, labels, depth - 1))
    if kind == 3:
        a = labels[rng.integers(len(labels))]
        return JustBefore(random_phi(rng, labels, depth - 1), a, random_phi(rng, labels, depth - 1))
    return Div(random_phi(rng, labels, depth - 1))
