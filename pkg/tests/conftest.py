import math
from functools import lru_cache

import numpy as np
import pytest

from dpbb import _kernels
from dpbb.lts import TAU, Lts, parse_aut

FIG1_AUT = """des (0,7,6)
(0,"tau",0)
(0,"tau",1)
(0,"a",2)
(1,"tau",1)
(3,"tau",4)
(3,"a",5)
(4,"tau",4)
"""

# s -> 0, s1 -> 1, s2 -> 2, t -> 3, t1 -> 4, t2 -> 5
S, S1, S2, T, T1, T2 = range(6)


@pytest.fixture
def fig1() -> Lts:
    return parse_aut(FIG1_AUT)


@pytest.fixture(params=["numba", "numpy"])
def each_backend(request):
    prev = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


def corpus_lts(rng: np.random.Generator, max_states: int = 30, max_transitions: int = 90,
               min_tau: float = 0.3) -> Lts:
    """Random LTS over tau/a/b with at least ``min_tau`` of its transitions silent."""
    n = int(rng.integers(1, max_states + 1))
    m = int(rng.integers(0, min(max_transitions, 3 * n * n) + 1))
    m_tau = min(n * n, math.ceil(float(rng.uniform(min_tau, 0.7)) * m))
    m_vis = min(2 * n * n, m - m_tau)
    triples: set[tuple[int, str, int]] = set()
    while sum(a == TAU for _, a, _ in triples) < m_tau:
        triples.add((int(rng.integers(n)), TAU, int(rng.integers(n))))
    while len(triples) < m_tau + m_vis:
        triples.add((int(rng.integers(n)), "ab"[int(rng.integers(2))], int(rng.integers(n))))
    return Lts(n, int(rng.integers(n)), triples)


@lru_cache(maxsize=None)
def corpus(size: int = 500, seed: int = 2024) -> tuple[Lts, ...]:
    rng = np.random.default_rng(seed)
    return tuple(corpus_lts(rng) for _ in range(size))


# --- one summary line per acceptance criterion -------------------------------

_criteria: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = item.name
    if not name.startswith("test_criterion_") or item.module.__name__ != "test_acceptance":
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        number = int(name.split("_")[2])
        title = (item.function.__doc__ or "").strip().splitlines()[0]
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _criteria[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        verdict, title, detail = _criteria[number]
        line = f"criterion {number}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
