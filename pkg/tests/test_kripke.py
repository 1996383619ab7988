import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import S, S1, S2, T, T1, T2, corpus_lts
from dpbb.equiv import dpbb_partition, dsbb_partition
from dpbb.kripke import (
    AF,
    AG,
    AU,
    EF,
    EG,
    EU,
    TRUE,
    And,
    Atom,
    CtlSyntaxError,
    DeltaAtom,
    KripkeFormatError,
    KripkeStructure,
    Not,
    Or,
    ctl_to_text,
    eval_ctl,
    parse_ctl,
    parse_kripke,
    random_ctl,
    translate_deadlock_preserving,
    translate_dv,
    write_kripke,
)
from dpbb.lts import TAU, Lts, deadlock_states
from test_lts import small_lts

A = frozenset({"a"})
E = frozenset()
FIG2 = KripkeStructure(
    8, S, (E, E, E, E, E, E, A, A),
    frozenset({(S, S), (S, S1), (S, 6), (6, S2), (S1, S1), (S2, S2),
               (T, T1), (T, 7), (7, T2), (T1, T1), (T2, T2)}),
)
FIG3 = KripkeStructure(
    9, S, (E, E, E, E, E, E, A, A, frozenset({"delta"})),
    frozenset({(S, S), (S, S1), (S, 6), (6, S2), (S1, S1), (S2, 8),
               (T, T1), (T, 7), (7, T2), (T1, T1), (T2, 8), (8, 8)}),
)


def reference_ctl(ks, phi):
    n = ks.num_states
    succ = {s: {t for u, t in ks.transitions if u == s} for s in range(n)}
    if phi == TRUE:
        return set(range(n))
    if isinstance(phi, Atom):
        return {s for s in range(n) if phi.name in ks.labels[s]}
    if isinstance(phi, DeltaAtom):
        return {s for s in range(n) if "delta" in ks.labels[s]}
    if isinstance(phi, Not):
        return set(range(n)) - reference_ctl(ks, phi.arg)
    if isinstance(phi, And):
        return reference_ctl(ks, phi.left) & reference_ctl(ks, phi.right)
    if isinstance(phi, Or):
        return reference_ctl(ks, phi.left) | reference_ctl(ks, phi.right)
    hold, until = reference_ctl(ks, phi.hold), reference_ctl(ks, phi.until)
    quant = any if isinstance(phi, EU) else all
    z: set[int] = set()
    while True:
        nxt = until | {s for s in hold if quant(t in z for t in succ[s])}
        if nxt == z:
            return z
        z = nxt


# --- translations -----------------------------------------------------------


def test_fig2(fig1):
    assert translate_dv(fig1) == FIG2


def test_fig3(fig1):
    assert translate_deadlock_preserving(fig1) == FIG3


def test_dv_tau_only():
    lts = Lts(2, 0, [(0, TAU, 1), (1, TAU, 0)])
    ks = translate_dv(lts)
    assert ks.num_states == 2 and ks.transitions == {(0, 1), (1, 0)}
    assert ks.labels == (E, E)


def test_single_deadlock():
    assert translate_dv(Lts(1, 0)).transitions == {(0, 0)}
    ks = translate_deadlock_preserving(Lts(1, 0))
    assert ks.num_states == 2 and ks.transitions == {(0, 1), (1, 1)}
    assert ks.labels == (E, frozenset({"delta"}))


def test_deadlock_free_gets_unreachable_sink():
    lts = Lts(2, 0, [(0, "a", 1), (1, TAU, 0)])
    dv, dp = translate_dv(lts), translate_deadlock_preserving(lts)
    assert dp.num_states == dv.num_states + 1
    assert dp.transitions == dv.transitions | {(dv.num_states, dv.num_states)}


def test_fresh_states_follow_transition_order():
    lts = Lts(2, 1, [(1, "b", 0), (0, "b", 1), (0, "a", 1)])
    ks = translate_dv(lts)
    assert ks.labels[2:] == (A, frozenset({"b"}), frozenset({"b"}))
    assert {(0, 2), (2, 1), (0, 3), (3, 1), (1, 4), (4, 0)} <= ks.transitions
    assert ks.initial == 1


def test_delta_action_rejected():
    with pytest.raises(ValueError):
        translate_deadlock_preserving(Lts(1, 0, [(0, "delta", 0)]))


def test_non_total_rejected():
    with pytest.raises(ValueError, match="not total"):
        KripkeStructure(2, 0, (E, E), frozenset({(0, 1)}))


@settings(max_examples=150)
@given(small_lts())
def test_translation_shape(lts):
    visible = sum(a != TAU for _, a, _ in lts.iter_transitions())
    dv, dp = translate_dv(lts), translate_deadlock_preserving(lts)
    assert dv.num_states == lts.num_states + visible
    assert dp.num_states == lts.num_states + visible + 1
    d = dp.num_states - 1
    assert [s for s in range(dp.num_states) if "delta" in dp.labels[s]] == [d]
    for s in deadlock_states(lts):
        assert {t for u, t in dp.transitions if u == s} == {d}
        assert {t for u, t in dv.transitions if u == s} == {s}


# --- text format ------------------------------------------------------------


def test_write_single_delta():
    ks = KripkeStructure(1, 0, (frozenset({"delta"}),), frozenset({(0, 0)}))
    assert write_kripke(ks) == "kripke 1 0\nst 0: delta\ntr 0 0\n"


def test_write_fig3():
    text = write_kripke(FIG3)
    st_lines = [ln for ln in text.splitlines() if ln.startswith("st ")]
    assert len(st_lines) == 9
    assert sum("delta" in ln for ln in st_lines) == 1
    assert sum(ln.endswith(": a") for ln in st_lines) == 2
    assert "st 3: -" in st_lines
    assert parse_kripke(text) == FIG3


@settings(max_examples=100)
@given(small_lts())
def test_kripke_round_trip(lts):
    ks = translate_deadlock_preserving(lts)
    assert parse_kripke(write_kripke(ks)) == ks


@pytest.mark.parametrize("text", [
    "", "kripke x 0\n", "kripke 1 0\nst 0: -\n", "kripke 1 0\nst 0: -\ntr 0 1\n",
    "kripke 2 0\nst 0: -\ntr 0 0\n", "kripke 1 0\nst 0: -\nst 0: -\ntr 0 0\n", "kripke 1 0\nbogus\n",
])
def test_kripke_format_errors(text):
    with pytest.raises(KripkeFormatError):
        parse_kripke(text)


# --- CTL --------------------------------------------------------------------


def test_parse_ctl_examples():
    assert parse_ctl("EF delta") == EF(DeltaAtom())
    assert parse_ctl("EF delta") == EU(TRUE, DeltaAtom())
    assert parse_ctl("E[a U delta]") == EU(Atom("a"), DeltaAtom())
    assert parse_ctl("AG a") == Not(EU(TRUE, Not(Atom("a"))))
    assert parse_ctl("EG a") == Not(AU(TRUE, Not(Atom("a"))))
    assert parse_ctl("AF a") == AU(TRUE, Atom("a"))
    assert parse_ctl("!a & b | delta") == Or(And(Not(Atom("a")), Atom("b")), DeltaAtom())


@pytest.mark.parametrize("text", ["EX a", "AX a", "E[a delta]", "a &", "(a", "a @ b", ""])
def test_parse_ctl_errors(text):
    with pytest.raises(CtlSyntaxError):
        parse_ctl(text)


def test_ef_delta_fig3():
    sat = eval_ctl(FIG3, "EF delta")
    assert sat == {S, S2, T, T2, 6, 7, 8}
    assert S1 not in sat and T1 not in sat


def test_ef_delta_fig2():
    assert eval_ctl(FIG2, "EF delta") == set()


def test_eg_true_everywhere():
    assert eval_ctl(FIG3, "EG true") == set(range(9))


def test_unknown_atom_is_false():
    assert eval_ctl(FIG3, "zzz") == set()


def _random_kripke(rng, n):
    edges = {(s, int(rng.integers(n))) for s in range(n)}
    edges |= {(int(rng.integers(n)), int(rng.integers(n))) for _ in range(n)}
    labels = tuple(frozenset(p for p in ("a", "b", "delta") if rng.random() < 0.3) for _ in range(n))
    return KripkeStructure(n, 0, labels, frozenset(edges))


def test_matches_reference_and_duality():
    rng = np.random.default_rng(9)
    for _ in range(200):
        ks = _random_kripke(rng, int(rng.integers(1, 12)))
        phi = random_ctl(rng, ["a", "b"], 3)
        assert eval_ctl(ks, phi) == reference_ctl(ks, phi)
        assert eval_ctl(ks, parse_ctl(ctl_to_text(phi))) == eval_ctl(ks, phi)
        assert eval_ctl(ks, AG(phi)) == set(range(ks.num_states)) - eval_ctl(ks, EF(Not(phi)))
        assert eval_ctl(ks, EG(phi)) == reference_ctl(ks, Not(AF(Not(phi))))


@given(st.integers(0, 2**32 - 1))
def test_ctl_text_round_trip(seed):
    phi = random_ctl(np.random.default_rng(seed), ["a", "b"], 4)
    assert parse_ctl(ctl_to_text(phi)) == phi


def test_ctl_battery_on_translations():
    rng = np.random.default_rng(10)
    battery = [random_ctl(rng, ["a", "b"], 4) for _ in range(30)]
    for _ in range(150):
        lts = corpus_lts(rng, max_states=15)
        n = lts.num_states
        for ks, part in ((translate_deadlock_preserving(lts), dpbb_partition(lts)),
                         (translate_dv(lts), dsbb_partition(lts))):
            block = part.block_of
            for phi in battery:
                sat = np.zeros(ks.num_states, dtype=bool)
                sat[list(eval_ctl(ks, phi))] = True
                assert np.array_equal(sat[:n], sat[:n][block])
