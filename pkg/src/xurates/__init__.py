"""Explicit rates for Xu's iteration over common fixed points of nonexpansive maps.

Modules
-------
hilbert   finite-dimensional Hilbert space and the strongly positive operator
nonexp    projections, cyclic families and their composites
sched     step-size schedules with rate witnesses
ratekit   saturating natural arithmetic and quantitative Xu lemmas
asreg     asymptotic-regularity and cycle-gap rates
meta      rates of metastability
engine    trajectories, invariant monitors, Yamada embedding, KKT oracle
verify    empirical validation harness
cli       command-line front end
"""

from .ratekit import DEFAULT_CAP, ExtNat

__all__ = ["DEFAULT_CAP", "ExtNat"]
__version__ = "0.1.0"
