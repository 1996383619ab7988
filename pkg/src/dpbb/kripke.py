"""Kripke structures from LTSs, and CTL model checking without next-state.

Two translations are provided.  :func:`translate_dv` splits every visible
step through a fresh state carrying the action name and closes deadlocks
with a self-loop; :func:`translate_deadlock_preserving` sends deadlocks to a
shared sink labelled ``delta`` instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from . import _kernels
from .lts import TAU, Lts

DELTA = "delta"


@dataclass(frozen=True)
class KripkeStructure:
    num_states: int
    initial: int
    labels: tuple[frozenset[str], ...]
    transitions: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.num_states < 1 or not 0 <= self.initial < self.num_states:
            raise ValueError("bad state count or initial state")
        if len(self.labels) != self.num_states:
            raise ValueError("one label set per state required")
        has_succ = np.zeros(self.num_states, dtype=bool)
        for s, t in self.transitions:
            if not (0 <= s < self.num_states and 0 <= t < self.num_states):
                raise ValueError(f"edge ({s}, {t}) out of range")
            has_succ[s] = True
        if not has_succ.all():
            raise ValueError(f"transition relation is not total at state {int(np.argmin(has_succ))}")

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = sorted(self.transitions)
        arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    def successors(self, s: int) -> list[int]:
        return sorted(t for u, t in self.transitions if u == s)


def _translate(lts: Lts, deadlock_sink: bool) -> KripkeStructure:
    n = lts.num_states
    labels: list[frozenset[str]] = [frozenset()] * n
    edges: set[tuple[int, int]] = set()
    for s, a, t in lts.iter_transitions():  # canonical (source, label, target) order
        if a == TAU:
            edges.add((s, t))
        else:
            fresh = len(labels)
            labels.append(frozenset([a]))
            edges.add((s, fresh))
            edges.add((fresh, t))
    dead = np.flatnonzero(np.diff(lts.indptr) == 0).tolist()
    if deadlock_sink:
        if DELTA in lts.labels:
            raise ValueError(f"action name {DELTA!r} clashes with the deadlock proposition")
        d = len(labels)
        labels.append(frozenset([DELTA]))
        edges.add((d, d))
        edges.update((s, d) for s in dead)
    else:
        edges.update((s, s) for s in dead)
    return KripkeStructure(len(labels), lts.initial, tuple(labels), frozenset(edges))


def translate_dv(lts: Lts) -> KripkeStructure:
    return _translate(lts, deadlock_sink=False)


def translate_deadlock_preserving(lts: Lts) -> KripkeStructure:
    """Like :func:`translate_dv`, but deadlocks step to a ``delta`` sink (last index)."""
    return _translate(lts, deadlock_sink=True)


# ---------------------------------------------------------------------------
# text format


class KripkeFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


_PROP_RE = re.compile(r"^[^\s,]+$")


def write_kripke(ks: KripkeStructure) -> str:
    out = [f"kripke {ks.num_states} {ks.initial}"]
    for s, props in enumerate(ks.labels):
        for p in props:
            if not _PROP_RE.match(p) or p == "-":
                raise ValueError(f"proposition {p!r} cannot be written")
        out.append(f"st {s}: {','.join(sorted(props)) if props else '-'}")
    out.extend(f"tr {s} {t}" for s, t in sorted(ks.transitions))
    return "\n".join(out) + "\n"


def parse_kripke(text: str) -> KripkeStructure:
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise KripkeFormatError(1, "missing 'kripke' header")
    lineno, head = lines[0]
    m = re.match(r"^kripke\s+(\d+)\s+(\d+)$", head)
    if not m:
        raise KripkeFormatError(lineno, f"malformed header {head!r}")
    n, initial = int(m.group(1)), int(m.group(2))
    labels: list[frozenset[str] | None] = [None] * n
    edges = set()
    for lineno, line in lines[1:]:
        if m := re.match(r"^st\s+(\d+)\s*:\s*(\S+)$", line):
            s = int(m.group(1))
            if s >= n:
                raise KripkeFormatError(lineno, f"state {s} out of range")
            if labels[s] is not None:
                raise KripkeFormatError(lineno, f"state {s} declared twice")
            props = m.group(2)
            labels[s] = frozenset() if props == "-" else frozenset(props.split(","))
        elif m := re.match(r"^tr\s+(\d+)\s+(\d+)$", line):
            s, t = int(m.group(1)), int(m.group(2))
            if s >= n or t >= n:
                raise KripkeFormatError(lineno, f"edge ({s}, {t}) out of range")
            edges.add((s, t))
        else:
            raise KripkeFormatError(lineno, f"unrecognised line {line!r}")
    missing = [s for s, l in enumerate(labels) if l is None]
    if missing:
        raise KripkeFormatError(lines[-1][0], f"state {missing[0]} has no 'st' line")
    try:
        return KripkeStructure(n, initial, tuple(labels), frozenset(edges))
    except ValueError as exc:
        raise KripkeFormatError(lines[-1][0], str(exc)) from None


def read_kripke(path) -> KripkeStructure:
    with open(path, encoding="ascii") as fh:
        return parse_kripke(fh.read())


# ---------------------------------------------------------------------------
# CTL without next-state


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class DeltaAtom:
    pass


@dataclass(frozen=True)
class Not:
    arg: "Ctl"


@dataclass(frozen=True)
class And:
    left: "Ctl"
    right: "Ctl"


@dataclass(frozen=True)
class Or:
    left: "Ctl"
    right: "Ctl"


@dataclass(frozen=True)
class EU:
    hold: "Ctl"
    until: "Ctl"


@dataclass(frozen=True)
class AU:
    hold: "Ctl"
    until: "Ctl"


Ctl = Union[Top, Atom, DeltaAtom, Not, And, Or, EU, AU]
TRUE = Top()


def EF(phi: Ctl) -> Ctl:
    return EU(TRUE, phi)


def AF(phi: Ctl) -> Ctl:
    return AU(TRUE, phi)


def AG(phi: Ctl) -> Ctl:
    return Not(EF(Not(phi)))


def EG(phi: Ctl) -> Ctl:
    return Not(AF(Not(phi)))


class CtlSyntaxError(ValueError):
    def __init__(self, pos: int, message: str):
        super().__init__(f"position {pos}: {message}")
        self.pos = pos


_CTL_TOKEN_RE = re.compile(r'\s*(?:"([^"]*)"|([A-Za-z_0-9][A-Za-z_0-9.\-\']*)|(.))')
_UNARY_PATH = {"EF": EF, "AF": AF, "EG": EG, "AG": AG}


def _ctl_tokens(text):
    tokens = []
    pos = 0
    while pos < len(text) and text[pos:].strip():
        m = _CTL_TOKEN_RE.match(text, pos)
        start = m.end() - len(m.group(0).lstrip())
        if m.group(1) is not None:
            tokens.append(("atom", m.group(1), start))
        elif m.group(2) is not None:
            word = m.group(2)
            if word in ("E", "A") and text[m.end():].lstrip().startswith("["):
                tokens.append((word, word, start))
            elif word in _UNARY_PATH or word in ("true", "false", "delta"):
                tokens.append((word, word, start))
            elif word in ("EX", "AX"):
                raise CtlSyntaxError(start, f"next-state operator {word!r} is not supported")
            elif word == "U":
                tokens.append(("U", word, start))
            else:
                tokens.append(("atom", word, start))
        else:
            ch = m.group(3)
            if ch not in "!&|()[]":
                raise CtlSyntaxError(start, f"unknown token {ch!r}")
            tokens.append((ch, ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _CtlParser:
    def __init__(self, text):
        self.tokens = _ctl_tokens(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, word=None):
        tok = self.tokens[self.i]
        if (kind is not None and tok[0] != kind) or (word is not None and tok[1] != word):
            raise CtlSyntaxError(tok[2], f"expected {word or kind!r}, found {tok[1] or 'end of input'!r}")
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
        phi = self.unary()
        while self.peek()[0] == "&":
            self.take()
            phi = And(phi, self.unary())
        return phi

    def unary(self):
        kind, word, pos = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind in _UNARY_PATH:
            self.take()
            return _UNARY_PATH[kind](self.unary())
        if kind in ("E", "A"):
            self.take()
            self.take("[")
            hold = self.disjunction()
            self.take("U")
            until = self.disjunction()
            self.take("]")
            return EU(hold, until) if kind == "E" else AU(hold, until)
        if kind == "true":
            self.take()
            return TRUE
        if kind == "false":
            self.take()
            return Not(TRUE)
        if kind == "delta":
            self.take()
            return DeltaAtom()
        if kind == "atom":
            self.take()
            return Atom(word)
        if kind == "(":
            self.take()
            phi = self.disjunction()
            self.take(")")
            return phi
        raise CtlSyntaxError(pos, f"expected a formula, found {word or 'end of input'!r}")


def parse_ctl(text: str) -> Ctl:
    """Parse CTL without next-state; path operators desugar to EU/AU."""
    return _CtlParser(text).parse()


def eval_ctl(ks: KripkeStructure, phi: Ctl | str) -> frozenset[int]:
    if isinstance(phi, str):
        phi = parse_ctl(phi)
    return frozenset(np.flatnonzero(_CtlEvaluator(ks).sat(phi)).tolist())


class _CtlEvaluator:
    def __init__(self, ks: KripkeStructure):
        self.ks = ks
        self.n = ks.num_states
        self.src, self.tgt = ks.edges()
        self.outdeg = np.bincount(self.src, minlength=self.n)

    def sat(self, phi) -> np.ndarray:
        n = self.n
        if isinstance(phi, Top):
            return np.ones(n, dtype=bool)
        if isinstance(phi, Atom):
            return np.array([phi.name in props for props in self.ks.labels], dtype=bool)
        if isinstance(phi, DeltaAtom):
            return np.array([DELTA in props for props in self.ks.labels], dtype=bool)
        if isinstance(phi, Not):
            return ~self.sat(phi.arg)
        if isinstance(phi, And):
            return self.sat(phi.left) & self.sat(phi.right)
        if isinstance(phi, Or):
            return self.sat(phi.left) | self.sat(phi.right)
        if isinstance(phi, EU):
            hold, until = self.sat(phi.hold), self.sat(phi.until)
            # least fixpoint Z = until | (hold & pre_exists(Z)); restrict edges to hold-sources
            keep = hold[self.src]
            return _kernels.backward_reach(n, self.src[keep], self.tgt[keep], until)
        if isinstance(phi, AU):
            return self._au(self.sat(phi.hold), self.sat(phi.until))
        raise TypeError(f"not a CTL formula: {phi!r}")

    def _au(self, hold, until):
        # least fixpoint Z = until | (hold & pre_forall(Z)) by successor counting
        z = until.copy()
        missing = self.outdeg.copy()
        preds: list[list[int]] = [[] for _ in range(self.n)]
        for s, t in zip(self.src.tolist(), self.tgt.tolist()):
            preds[t].append(s)
        work = np.flatnonzero(z).tolist()
        while work:
            t = work.pop()
            for s in preds[t]:
                missing[s] -= 1
                if missing[s] == 0 and not z[s] and hold[s]:
                    z[s] = True
                    work.append(s)
        return z


def ctl_to_text(phi: Ctl) -> str:
    """Render a CTL formula in the syntax accepted by :func:`parse_ctl`."""
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Atom):
        return f'"{phi.name}"'
    if isinstance(phi, DeltaAtom):
        return DELTA
    if isinstance(phi, Not):
        return f"!{ctl_to_text(phi.arg)}" if isinstance(phi.arg, (Top, Atom, DeltaAtom)) else f"!({ctl_to_text(phi.arg)})"
    if isinstance(phi, And):
        return f"({ctl_to_text(phi.left)} & {ctl_to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({ctl_to_text(phi.left)} | {ctl_to_text(phi.right)})"
    q = "E" if isinstance(phi, EU) else "A"
    return f"{q}[{ctl_to_text(phi.hold)} U {ctl_to_text(phi.until)}]"


def random_ctl(rng: np.random.Generator, atoms: Iterable[str], depth: int) -> Ctl:
    """A random CTL-without-next formula of nesting depth at most ``depth``."""
    atoms = list(atoms)
    if depth <= 0 or rng.random() < 0.2:
        pick = rng.integers(len(atoms) + 2)
        if pick == len(atoms):
            return DeltaAtom()
        if pick == len(atoms) + 1:
            return TRUE
        return Atom(atoms[pick])
    kind = rng.integers(8)
    sub = lambda: random_ctl(rng, atoms, depth - 1)  # noqa: E731
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return EU(sub(), sub())
    if kind == 4:
        return AU(sub(), sub())
    return (EF, AF, EG)[kind - 5](sub())
