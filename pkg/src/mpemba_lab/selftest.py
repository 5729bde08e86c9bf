"""Deterministic regression checks behind ``mpemba-lab selftest``.

Random inputs come from ``numpy.random.default_rng(seed)`` only, and the
result dict carries no timestamps or host details, so two runs with the same
seed serialize to identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from .evolution import default_horizon, propagate_deviations, propagate_rk4, propagate_states
from .lambertw import BRANCH_POINT, WBranch, lambert_w
from .lindblad_core import ControlParams, state_from_bloch, steady_state
from .mpemba import analyze
from .observables import ObservableKind, evaluate
from .presets import A1_POST, D_LINE_POST, PRESETS
from .spectrum import E_POINT, RegionTag, classify_region, eigensystem, region_c_gamma

__all__ = ["REGION_POINTS", "random_states", "run_selftest"]

#: one representative post-quench point per region
REGION_POINTS = {
    RegionTag.A1: A1_POST,
    RegionTag.A2: ControlParams(1.0, 1.0),
    RegionTag.B: ControlParams(6.0, 30.0),
    RegionTag.C: ControlParams(3.0, region_c_gamma(3.0)),
    RegionTag.D: D_LINE_POST,
    RegionTag.E: E_POINT,
}

_EXPECTED_COUNTS = (
    ("d-line-double", ObservableKind.GroundPop, 2),
    ("d-line-double", ObservableKind.Energy, 2),
    ("m2-line-double", ObservableKind.GroundPop, 2),
    ("e-point-double", ObservableKind.GroundPop, 2),
    ("e-point-double", ObservableKind.Energy, 2),
    ("a1-kl", ObservableKind.KLDivergence, 1),
)


def random_states(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` physical states with Bloch vectors uniform in the unit ball."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    radius = rng.random(n) ** (1 / 3)
    return state_from_bloch(v * radius[:, None])


def _check(name: str, value: float, tol: float, passed: bool | None = None) -> dict:
    ok = bool(value <= tol) if passed is None else passed
    return {"name": name, "passed": ok, "value": float(value), "tolerance": float(tol)}


def _regions() -> list[dict]:
    out = []
    for tag, p in REGION_POINTS.items():
        got = classify_region(p)
        out.append({"name": f"region/{tag.value}", "passed": got is tag, "value": got.value, "tolerance": None})
    return out


def _e_point() -> list[dict]:
    spec = eigensystem(E_POINT)
    err = float(np.max(np.abs(spec.lambdas[1:] - 4 * math.sqrt(3))))
    return [_check("e_point/triple_eigenvalue", err, 1e-12), _check("e_point/jordan_residual", spec.residual, 1e-10)]


def _lambert(rng: np.random.Generator, n: int) -> list[dict]:
    x0 = np.concatenate([10.0 ** rng.uniform(-300, 34, n // 2), rng.uniform(BRANCH_POINT, 0, n - n // 2)])
    xm = -(10.0 ** rng.uniform(-33, math.log10(-BRANCH_POINT), n))
    out = []
    for branch, xs in ((WBranch.W0, x0), (WBranch.Wm1, xm)):
        worst = 0.0
        for x in xs:
            w = lambert_w(branch, float(x))
            worst = max(worst, abs(w * math.exp(w) - x) / abs(x))
        out.append(_check(f"lambert/{branch.name}/round_trip", worst, 1e-14))
    out.append(_check("lambert/branch_point", max(abs(lambert_w(b, BRANCH_POINT) + 1) for b in WBranch), 1e-7))
    return out


def _propagators(rng: np.random.Generator, per_region: int) -> list[dict]:
    out = []
    for tag, p in REGION_POINTS.items():
        spec = eigensystem(p)
        times = (0.1, 1.0, 5.0, default_horizon(spec))
        worst = 0.0
        for rho0 in random_states(rng, per_region):
            analytic = propagate_states(rho0, spec, times)
            for k, t in enumerate(times):
                worst = max(worst, float(np.max(np.abs(analytic[k] - np.asarray(propagate_rk4(rho0, p, t))))))
        out.append(_check(f"propagator/{tag.value}/analytic_vs_rk4", worst, 1e-8))
    return out


def _counts() -> list[dict]:
    out = []
    for name, kind, expected in _EXPECTED_COUNTS:
        rep = analyze(PRESETS[name], kind)
        out.append(
            {
                "name": f"crossings/{name}/{kind.value}",
                "passed": rep.count == expected,
                "value": rep.count,
                "tolerance": expected,
                "crossings": list(rep.crossings),
            }
        )
    return out


def _kl_monotone() -> list[dict]:
    out = []
    for name in ("a1-kl", "d-line-kl"):
        exp = PRESETS[name]
        spec = eigensystem(exp.post)
        t = np.linspace(0.0, default_horizon(spec), 2000)
        ss = np.asarray(steady_state(exp.post))
        worst = 0.0
        for pre in (exp.pre_I, exp.pre_II):
            rho0 = steady_state(pre)
            kl = evaluate(ObservableKind.KLDivergence, propagate_states(rho0, spec, t), exp.post, ss,
                          propagate_deviations(rho0, spec, t))
            worst = max(worst, float(np.max(np.diff(kl))))
        out.append(_check(f"kl_monotone/{name}", max(worst, 0.0), 1e-10))
    return out


def run_selftest(seed: int = 0, lambert_points: int = 200, states_per_region: int = 3) -> dict:
    """Run every check; ``result["passed"]`` is true only if all pass."""
    rng = np.random.default_rng(seed)
    checks = _regions() + _e_point() + _lambert(rng, lambert_points)
    checks += _propagators(rng, states_per_region) + _counts() + _kl_monotone()
    return {
        "seed": seed,
        "passed": all(c["passed"] for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c["passed"] for c in checks),
        "checks": checks,
    }
