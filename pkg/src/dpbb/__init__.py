"""Divergence-preserving branching bisimilarity for finite LTSs."""

from .equiv import (
    Variant,
    Violation,
    bb_partition,
    check,
    dpbb_partition,
    dsbb_partition,
    naive_gfp_bb,
    naive_gfp_dpbb,
    rooted_dpbb,
    verify,
)
from .kripke import (
    KripkeStructure,
    eval_ctl,
    parse_ctl,
    translate_deadlock_preserving,
    translate_dv,
    write_kripke,
)
from .lts import (
    TAU,
    Lts,
    Partition,
    deadlock_states,
    divergent_states,
    parallel_compose,
    parse_aut,
    quotient,
    tau_reach,
    tau_reach_plus,
    write_aut,
)
from .modal import distinguishing_formula, eval_phi, parse_phi

__version__ = "0.1.0"
