"""Acceptance criteria 1-9.

Each ``test_criterion_N`` checks one criterion at its stated tolerance; the
terminal summary prints one PASS/FAIL line per criterion.
"""

import io
import time

import numpy as np
import pytest

from conftest import FIG1_AUT, S, S1, S2, T, T1, T2, corpus
from dpbb.cli import main
from dpbb.equiv import (
    bb_partition,
    check,
    deadlock_to_livelock,
    dpbb_partition,
    dsbb_partition,
    naive_gfp_dpbb,
    rooted_dpbb,
    verify,
)
from dpbb.gen import random_lts
from dpbb.kripke import KripkeStructure, eval_ctl, random_ctl, translate_deadlock_preserving, translate_dv
from dpbb.lts import (
    TAU,
    Lts,
    Partition,
    deadlock_states,
    disjoint_union,
    divergent_mask,
    parallel_compose,
    parse_aut,
    quotient,
    write_aut,
)
from dpbb.modal import distinguishing_formula, eval_phi, random_phi, sat_mask

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


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue()


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.aut"
    path.write_text(FIG1_AUT)
    return path


def test_criterion_1(fig1_file, record_property):
    """Figure 1: bb relates s and t, dpbb does not, s1~t1 and s2~t2 under dpbb (< 1 s)."""
    start = time.perf_counter()
    assert cli("check", fig1_file, "--pair", S, T, "--variant", "bb") == (0, "equivalent\n")
    assert cli("check", fig1_file, "--pair", S, T, "--variant", "dpbb") == (1, "not-equivalent\n")
    assert cli("check", fig1_file, "--pair", S1, T1, "--variant", "dpbb") == (0, "equivalent\n")
    assert cli("check", fig1_file, "--pair", S2, T2, "--variant", "dpbb") == (0, "equivalent\n")
    elapsed = time.perf_counter() - start
    record_property("detail", f"{elapsed:.3f} s")
    assert elapsed < 1.0


def test_criterion_2(record_property):
    """Relation {s,t},{s1,t1},{s2,t2}: no (T)-violation, a replayable (D)-violation at (s,t)."""
    lts = parse_aut(FIG1_AUT)
    violations = verify(lts, Partition.from_blocks([[S, T], [S1, T1], [S2, T2]]), "dpbb")
    assert not [v for v in violations if v.kind == "T"]
    d = [v for v in violations if v.kind == "D" and v.pair == (S, T)]
    assert d
    path = d[0].path
    steps = list(zip(path, path[1:])) + [(path[-1], path[d[0].loop_start])]
    assert path[0] == S and all((u, TAU, w) in lts.transitions for u, w in steps)
    record_property("detail", str(d[0]))


def test_criterion_3(record_property):
    """D (true <a> true) holds exactly at s; the generated distinguisher separates s from t."""
    lts = parse_aut(FIG1_AUT)
    assert eval_phi(lts, "D (true <a> true)") == {S}
    phi = distinguishing_formula(lts, S, T)
    sat = eval_phi(lts, phi)
    assert S in sat and T not in sat
    record_property("detail", str(phi))


def test_criterion_4():
    """Figures 2 and 3: pinned translations; EF delta at s2 not s1, and empty under DV."""
    lts = parse_aut(FIG1_AUT)
    dv, dp = translate_dv(lts), translate_deadlock_preserving(lts)
    assert dv == FIG2 and dv.num_states == 8
    assert dp == FIG3 and dp.num_states == 9
    sat = eval_ctl(dp, "EF delta")
    assert S2 in sat and S1 not in sat
    assert eval_ctl(dv, "EF delta") == set()


def test_criterion_5():
    """Figure 4: dsbb has t = t' but s1||t != s1||t'; dpbb separates both pairs."""
    s1 = Lts(2, 0, [(0, "a", 1)])
    t, t_prime = Lts(1, 0), Lts(1, 0, [(0, TAU, 0)])
    single = disjoint_union(t, t_prime)
    p, q = parallel_compose(s1, t), parallel_compose(s1, t_prime)
    products = disjoint_union(p, q)
    pair = (p.initial, p.num_states + q.initial)
    assert check(single, 0, 1, "dsbb")
    assert not check(products, *pair, "dsbb")
    assert not check(products, *pair, "dpbb")
    assert not check(single, 0, 1, "dpbb")


def test_criterion_6(record_property):
    """Oracle equivalence over 500 random LTSs: zero mismatches in under 5 minutes."""
    systems = corpus()
    assert len(systems) >= 500
    assert all(lts.num_states <= 30 and lts.num_transitions <= 90 for lts in systems)
    start = time.perf_counter()
    mismatches = sum(dpbb_partition(lts).pairs() != naive_gfp_dpbb(lts) for lts in systems)
    elapsed = time.perf_counter() - start
    record_property("detail", f"{len(systems)} systems, {mismatches} mismatches, {elapsed:.1f} s")
    assert mismatches == 0
    assert elapsed < 300


def _stutter_closed(lts, p):
    # any state on a tau-path between two members of a block is in that block
    n = lts.num_states
    reach = np.eye(n, dtype=bool)
    is_tau = lts.lab == lts.tau_id
    step = np.zeros((n, n), dtype=bool)
    step[lts.src[is_tau], lts.tgt[is_tau]] = True
    while True:
        nxt = reach | ((reach.astype(np.float32) @ step.astype(np.float32)) > 0)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    member = p.block_of[:, None] == p.block_of[None, :]  # member[b, w]: w in block of b
    f = member.astype(np.float32)
    after = (f @ reach.astype(np.float32)) > 0     # reachable from the block of b
    before = (reach.astype(np.float32) @ f.T) > 0  # reaches the block of b (transposed)
    return not np.any(after & before.T & ~member)


def test_criterion_7(record_property):
    """Metamorphic suite over the corpus: every property holds on every system."""
    rng = np.random.default_rng(77)
    failures: dict[str, int] = {}

    def fail(name):
        failures[name] = failures.get(name, 0) + 1

    deadlock_free = 0
    for lts in corpus():
        n = lts.num_states
        dp, bb = dpbb_partition(lts), bb_partition(lts)
        div = divergent_mask(lts)
        if not np.array_equal(div, div[dp.block_of]):
            fail("divergence preservation")
        if not _stutter_closed(lts, dp):
            fail("stuttering")
        if not dp.refines(bb):
            fail("dpbb refines bb")
        live = deadlock_to_livelock(lts)
        if dsbb_partition(live) != dpbb_partition(live):
            fail("dsbb = dpbb without deadlocks")
        if not deadlock_states(lts):
            deadlock_free += 1
            if dsbb_partition(lts) != dp:
                fail("dsbb = dpbb without deadlocks")
        if verify(lts, Partition.identity(n), "dpbb"):
            fail("identity verifies")
        q = quotient(lts, dp)
        joint = disjoint_union(lts, q)
        if (lts.initial, n + q.initial) not in naive_gfp_dpbb(joint):
            fail("quotient")
        for _ in range(10):
            s, t = (int(x) for x in rng.integers(n, size=2))
            if rooted_dpbb(lts, s, t) and not dp.same_block(s, t):
                fail("rooted implies dpbb")
    record_property("detail", f"failures {failures or 0}; {deadlock_free} deadlock-free inputs")
    assert not failures


def test_criterion_8(record_property):
    """Sampled adequacy: equivalent pairs agree on 50 modal and 30 CTL formulas."""
    rng = np.random.default_rng(88)
    battery = [random_ctl(rng, ["a", "b"], 4) for _ in range(30)]
    phi_bad = ctl_bad = 0
    for lts in corpus():
        n = lts.num_states
        block = dpbb_partition(lts).block_of
        labels = sorted(set(lts.labels) | {TAU})
        for _ in range(50):
            sat = sat_mask(lts, random_phi(rng, labels, 4))
            phi_bad += int(np.count_nonzero(sat != sat[block]))
        ks = translate_deadlock_preserving(lts)
        for f in battery:
            sat = np.zeros(ks.num_states, dtype=bool)
            sat[list(eval_ctl(ks, f))] = True
            ctl_bad += int(np.count_nonzero(sat[:n] != sat[:n][block]))
    record_property("detail", f"modal disagreements {phi_bad}, CTL disagreements {ctl_bad}")
    assert phi_bad == 0 and ctl_bad == 0


def test_criterion_9(tmp_path, record_property):
    """Minimize a random 100 000-state / 500 000-transition LTS with dpbb in under 60 s."""
    lts = random_lts(np.random.default_rng(7), 100_000, 500_000, labels=("a", "b"), tau_fraction=0.3)
    src = tmp_path / "big.aut"
    src.write_text(write_aut(lts))
    start = time.perf_counter()
    code, out = cli("minimize", src, "--variant", "dpbb", "-o", tmp_path / "min.aut")
    elapsed = time.perf_counter() - start
    record_property("detail", f"{out.strip()}, {elapsed:.1f} s")
    assert code == 0 and out.startswith("states: 100000 blocks: ")
    assert elapsed < 60
