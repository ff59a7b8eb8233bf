"""Computational ergodic theory on interval and circle maps.

The package covers four instruments: conformal measures and pressure via
transfer operators, hyperbolic-time statistics along orbits, entropy and
Pesin-defect estimates for empirical measures, and pseudo-basin scans that
flag weak-SRB-like behaviour. Orbits run on an exact fixed-point
representation so the doubling map is a true bit shift.
"""

from .errors import ConfigError, ConvergenceError, ErgolabError, UnsupportedError
from .fixedpoint import CirclePoint
from .hyperbolic import (
    contraction_check,
    expanding_membership,
    ht_frequency,
    scan_hyperbolic_times,
    scan_naive,
    scan_stream,
)
from .maps import MapModel, make_map
from .measures import (
    EmpiricalMeasure,
    TestFunctionBasis,
    UlamMeasure,
    default_basis,
    empirical,
    weak_star_dist,
)
from .orbits import OrbitRecord, iterate
from .potentials import Potential, make_potential
from .pressure import (
    entropy_spanning,
    local_entropy,
    pesin_defect,
    pressure_separated,
    pressure_spectral,
)
from .srb import ldp_rate, pseudo_basin_mass, srb_cluster, weak_srb_scan, weak_srb_verdict
from .transfer import conformal_solve, gibbs_check, jacobian_check

__version__ = "0.1.0"

__all__ = [
    "CirclePoint",
    "ConfigError",
    "ConvergenceError",
    "EmpiricalMeasure",
    "ErgolabError",
    "MapModel",
    "OrbitRecord",
    "Potential",
    "TestFunctionBasis",
    "UlamMeasure",
    "UnsupportedError",
    "conformal_solve",
    "contraction_check",
    "default_basis",
    "empirical",
    "entropy_spanning",
    "expanding_membership",
    "gibbs_check",
    "ht_frequency",
    "iterate",
    "jacobian_check",
    "ldp_rate",
    "local_entropy",
    "make_map",
    "make_potential",
    "pesin_defect",
    "pressure_separated",
    "pressure_spectral",
    "pseudo_basin_mass",
    "scan_hyperbolic_times",
    "scan_naive",
    "scan_stream",
    "srb_cluster",
    "weak_srb_scan",
    "weak_srb_verdict",
    "weak_star_dist",
]
