"""Named quench experiments that exhibit the characteristic crossing patterns.

Post-quench points on exceptional lines are built from the exact line
constructors, never from typed decimals.
"""

from __future__ import annotations

from .lindblad_core import ControlParams, QuenchExperiment
from .spectrum import E_POINT, region_b_m2_gamma, region_d_gamma

__all__ = ["PRESETS", "preset", "D_LINE_POST", "M2_LINE_POST", "A1_POST", "D_LINE_SCAN"]

D_LINE_POST = ControlParams(4.0, region_d_gamma(4.0))
M2_LINE_POST = ControlParams(6.0, region_b_m2_gamma(6.0))
A1_POST = ControlParams(2.5, 0.5)


def _fixed(d_I: float, d_II: float, post: ControlParams) -> QuenchExperiment:
    return QuenchExperiment.fixed_dissipation(d_I, d_II, post)


PRESETS: dict[str, QuenchExperiment] = {
    # double crossing in rho_gg (second one weak) and in energy
    "d-line-double": _fixed(10.0, 12.0, D_LINE_POST),
    # variable dissipation; temperature difference changes sign
    "d-line-thermal": QuenchExperiment(ControlParams(3.0, 15.0), ControlParams(22.9, 2.1), D_LINE_POST),
    # single crossing in KL divergence and in its speed, at different times
    "d-line-kl": QuenchExperiment(ControlParams(10.0, 20.0), ControlParams(2.0, 4.5), D_LINE_POST),
    # oscillatory relaxation with many crossings
    "a1-multiple": _fixed(2.1, 0.51, A1_POST),
    # KL divergence crosses once while its speed crosses repeatedly
    "a1-kl": _fixed(1.0, 0.51, A1_POST),
    # equal-gap line: quadratic in exp(-(lam3 - lam2) t)
    "m2-line-double": _fixed(16.3, 13.4, M2_LINE_POST),
    # third-order exceptional point: quadratic in t
    "e-point-double": _fixed(5.0, 7.0, E_POINT),
}

#: scan window for the (d_I, d_II) plane at the region-D post-quench point;
#: the d_II axis is offset by half a step so no cell has identical copies
D_LINE_SCAN = {"d_I_range": (1.0, 20.0, 50), "d_II_range": (1.0 + 19.0 / 98, 20.0 + 19.0 / 98, 50)}


def preset(name: str) -> QuenchExperiment:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None

