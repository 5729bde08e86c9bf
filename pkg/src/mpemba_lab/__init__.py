"""Relaxation crossings (quantum Mpemba effects) in a driven-dissipative two-level system."""

__version__ = "0.1.0"

from .lambertw import WBranch, lambert_w
from .lindblad_core import (
    ControlParams,
    DensityVector,
    QuenchExperiment,
    build_lindbladian,
    initial_condition,
    is_physical,
    state_from_bloch,
    steady_state,
)
from .spectrum import E_POINT, RegionTag, SpectralData, classify_region, eigensystem
from .evolution import Trajectory, analytic_trajectory, propagate_analytic, propagate_rk4, rk4_trajectory
from .observables import ObservableKind, evaluate
from .mpemba import MpembaReport, WrongRegionError, analyze, find_crossings_grid, scan_plane
from .presets import PRESETS, preset

__all__ = [
    "WBranch",
    "lambert_w",
    "ControlParams",
    "DensityVector",
    "QuenchExperiment",
    "build_lindbladian",
    "initial_condition",
    "is_physical",
    "state_from_bloch",
    "steady_state",
    "E_POINT",
    "RegionTag",
    "SpectralData",
    "classify_region",
    "eigensystem",
    "Trajectory",
    "analytic_trajectory",
    "propagate_analytic",
    "propagate_rk4",
    "rk4_trajectory",
    "ObservableKind",
    "evaluate",
    "MpembaReport",
    "WrongRegionError",
    "analyze",
    "find_crossings_grid",
    "scan_plane",
    "PRESETS",
    "preset",
]
