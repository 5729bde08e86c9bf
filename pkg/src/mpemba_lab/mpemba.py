"""Detection and classification of (multiple) quantum Mpemba crossings.

Two copies relax from different initial conditions under the same
post-quench generator.  A crossing is a time ``t > 0`` where the difference
of an observable between the copies changes sign.  Where the difference has
a closed form (``rho_gg`` and energy at the second-order exceptional line, on
the equal-gap line and at the third-order exceptional point) the crossing
times come from Lambert W or a quadratic; every other case uses a grid scan
with bisection, which also serves as the oracle for the closed forms.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolution import default_horizon, mode_coefficients, propagate_deviations, propagate_states, DEFAULT_SAMPLES
from .lambertw import BRANCH_POINT, WBranch, lambert_w
from .lindblad_core import ControlParams, QuenchExperiment, initial_condition, steady_state
from .observables import ObservableKind, evaluate, observable_rate, temperature
from .spectrum import RegionTag, SpectralData, eigensystem

__all__ = [
    "Multiplicity",
    "Parity",
    "DeltaCoefficients",
    "MpembaReport",
    "WrongRegionError",
    "delta_coefficients",
    "crossing_times_region_d",
    "crossing_times_region_b",
    "crossing_times_region_e",
    "region_a1_criterion",
    "find_crossings_grid",
    "observable_tracks",
    "negative_temperature_epochs",
    "analyze",
    "closed_form_available",
    "ScanRow",
    "scan_plane",
    "GAP_RATIO_TOL",
    "MAX_GRID",
]

GAP_RATIO_TOL = 1e-9
MAX_GRID = 2**16
_DEGENERATE_DELTA = 1e-13
_NOISE_REL = 1e-13
_LINEAR_REL = 1e-14
_MIN_SEPARATION_STEPS = 5
_A1_PERIODS = 10
_A1_SAMPLES = 10_000


class WrongRegionError(ValueError):
    """A closed form was requested at a point where it does not hold."""


class Multiplicity(enum.Enum):
    NONE = "none"
    SINGLE = "single"
    DOUBLE = "double"
    MULTIPLE = "multiple"

    @classmethod
    def from_count(cls, n: int) -> "Multiplicity":
        return (cls.NONE, cls.SINGLE, cls.DOUBLE)[n] if n < 3 else cls.MULTIPLE


class Parity(enum.Enum):
    """Whether the initial ordering of the copies is restored at late times."""

    RESTORED = "restored"
    REVERSED = "reversed"


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MpembaReport:
    """Ordered crossing times of one observable difference.

    ``labels`` name the closed-form branch behind each time (``W0``/``Wm1``,
    ``+``/``-``), ``flagged`` marks crossings inside a negative-temperature
    epoch, and ``degenerate`` is set when the copies are indistinguishable.
    """

    kind: ObservableKind
    crossings: tuple[float, ...]
    method: str
    labels: tuple[str, ...] = ()
    flagged: tuple[bool, ...] = ()
    degenerate: bool = False
    criterion: str = ""
    grid_size: int | None = None

    def __post_init__(self):
        t = self.crossings
        if any(not (x > 0 and math.isfinite(x)) for x in t):
            raise ValueError("crossing times must be finite and positive")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("crossing times must be strictly increasing")
        if self.labels and len(self.labels) != len(t):
            raise ValueError("one label per crossing")
        if not self.flagged:
            object.__setattr__(self, "flagged", (False,) * len(t))
        elif len(self.flagged) != len(t):
            raise ValueError("one flag per crossing")

    @property
    def count(self) -> int:
        return len(self.crossings)

    @property
    def classification(self) -> Multiplicity:
        return Multiplicity.from_count(self.count)

    @property
    def classification_label(self) -> str:
        m = self.classification
        return f"multiple({self.count})" if m is Multiplicity.MULTIPLE else m.value

    @property
    def parity(self) -> Parity:
        return Parity.RESTORED if self.count % 2 == 0 else Parity.REVERSED

    def to_dict(self) -> dict:
        return {
            "observable": self.kind.value,
            "method": self.method,
            "criterion": self.criterion,
            "count": self.count,
            "classification": self.classification_label,
            "parity": self.parity.value,
            "crossings": list(self.crossings),
            "labels": list(self.labels),
            "negative_temperature": list(self.flagged),
            "degenerate": self.degenerate,
            "grid_size": self.grid_size,
        }


# --------------------------------------------------------------------------
# closed-form coefficients

_LINEAR_KINDS = (ObservableKind.GroundPop, ObservableKind.Energy)


def _weights(kind: ObservableKind, p: ControlParams) -> np.ndarray:
    """Linear functional ``w`` with ``f(rho) = const + w . rho``."""
    if kind is ObservableKind.GroundPop:
        return np.array([0, 0, 0, 1], dtype=complex)
    if kind is ObservableKind.Energy:
        h = p.d_tilde / 2
        return np.array([h, h, 0, -1], dtype=complex)
    raise ValueError(f"closed forms exist for rho_gg and energy only, not {kind.value}")


def _real(z: complex, scale: float, name: str) -> float:
    if abs(z.imag) > 1e-8 * max(scale, 1e-300):
        raise ValueError(f"coefficient {name} is not real: {z}")
    return float(z.real)


@dataclass(frozen=True)
class DeltaCoefficients:
    """Named coefficients of the closed-form difference ``f_I(t) - f_II(t)``.

    Region D (``kappa = lam4 - lam2``), ``rho_gg``:
        ``e^{-lam2 t} [alpha1 e^{-kappa t} + alpha2 t + alpha3]``;
    energy:
        ``-e^{-lam2 t} [gamma1 e^{-kappa t} + gamma2 t + gamma3]``.
    Region B: ``e^{-lam2 t} [alpha4 x^m + alpha3 x + alpha2]`` with
    ``x = e^{-(lam3 - lam2) t}`` and gap ratio ``m``.
    Region E: ``e^{-lam t} [gamma2 t^2 + gamma1 t + gamma0]``.
    Regions A1/A2: ``e^{-lam2 t} da2 + 2 e^{-lam_re t} |da| cos(lam_im t - theta)``
    with ``da = da_re + i da_im``.

    For energy the B, E and A coefficients carry the observable weights
    of the modes, so the same expressions hold verbatim.
    """

    region: RegionTag
    kind: ObservableKind
    values: dict
    rates: dict

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v, r = self.values, self.rates
        if self.region is RegionTag.D:
            lam2, kappa = r["lam2"], r["lam4"] - r["lam2"]
            if self.kind is ObservableKind.GroundPop:
                c1, c2, c3, sign = v["alpha1"], v["alpha2"], v["alpha3"], 1.0
            else:
                c1, c2, c3, sign = v["gamma1"], v["gamma2"], v["gamma3"], -1.0
            return sign * np.exp(-lam2 * t) * (c1 * np.exp(-kappa * t) + c2 * t + c3)
        if self.region is RegionTag.B:
            x = np.exp(-(r["lam3"] - r["lam2"]) * t)
            return np.exp(-r["lam2"] * t) * (v["alpha4"] * x ** v["m"] + v["alpha3"] * x + v["alpha2"])
        if self.region is RegionTag.E:
            return np.exp(-r["lam"] * t) * (v["gamma2"] * t * t + v["gamma1"] * t + v["gamma0"])
        amp = math.hypot(v["da_re"], v["da_im"])
        return np.exp(-r["lam2"] * t) * v["da2"] + 2 * amp * np.exp(-r["lam_re"] * t) * np.cos(
            r["lam_im"] * t - v["theta"]
        )

    @property
    def scale(self) -> float:
        return max((abs(x) for k, x in self.values.items() if k not in ("m", "theta")), default=0.0)

    def is_zero(self, tol: float = 1e-12) -> bool:
        return self.scale <= tol


def delta_coefficients(
    exp: QuenchExperiment, kind: ObservableKind, spec: SpectralData | None = None
) -> DeltaCoefficients:
    """Closed-form coefficients of the difference of ``kind`` between the copies.

    Raises
    ------
    WrongRegionError
        If the post-quench point is in region C, where no closed form is used.
    """
    post = exp.post
    if spec is None:
        spec = eigensystem(post)
    w = _weights(kind, post)
    da = mode_coefficients(initial_condition(exp.pre_I), spec).a - mode_coefficients(initial_condition(exp.pre_II), spec).a
    u = w @ spec.right
    lam = spec.lambdas
    scale = float(np.max(np.abs(u * da))) if np.any(da) else 0.0
    region = spec.region

    if region is RegionTag.D:
        # block (lam2, lam2) with chain r2 <- r3, then the simple mode lam4
        c1 = u[3] * da[3]
        c2 = -1j * u[1] * da[2]
        c3 = u[1] * da[1] + u[2] * da[2]
        cs = {"1": c1, "2": c2, "3": c3}
        if kind is ObservableKind.GroundPop:
            values = {f"alpha{k}": _real(c, scale, f"alpha{k}") for k, c in cs.items()}
        else:
            values = {f"gamma{k}": _real(-c, scale, f"gamma{k}") for k, c in cs.items()}
        rates = {"lam2": float(lam[1].real), "lam4": float(lam[3].real)}
    elif region is RegionTag.B:
        values = {f"alpha{k + 1}": _real(u[k] * da[k], scale, f"alpha{k + 1}") for k in (1, 2, 3)}
        l2, l3, l4 = (float(x.real) for x in lam[1:])
        values["m"] = (l4 - l2) / (l3 - l2)
        rates = {"lam2": l2, "lam3": l3, "lam4": l4}
    elif region is RegionTag.E:
        values = {
            "gamma2": _real(-u[1] * da[3] / 2, scale, "gamma2"),
            "gamma1": _real(-1j * (u[1] * da[2] + u[2] * da[3]), scale, "gamma1"),
            "gamma0": _real(np.sum(u[1:] * da[1:]), scale, "gamma0"),
        }
        rates = {"lam": float(lam[1].real)}
    elif region in (RegionTag.A1, RegionTag.A2):
        z = u[2] * da[2]
        values = {
            "da2": _real(u[1] * da[1], scale, "da2"),
            "da_re": float(z.real),
            "da_im": float(z.imag),
            "theta": math.atan2(z.imag, z.real),
        }
        rates = {"lam2": float(lam[1].real), "lam_re": float(lam[2].real), "lam_im": float(lam[2].imag)}
    else:
        raise WrongRegionError(f"no closed-form difference in region {region.value}")
    return DeltaCoefficients(region, kind, values, rates)


# --------------------------------------------------------------------------
# closed-form crossing times


def _require(c: DeltaCoefficients, *regions: RegionTag) -> None:
    if c.region not in regions:
        names = "/".join(r.value for r in regions)
        raise WrongRegionError(f"coefficients are for region {c.region.value}, expected {names}")


def _lambert_from_log(branch: WBranch, sign: float, log_abs: float) -> float | None:
    """``W(sign * exp(log_abs))`` without overflow; ``None`` when out of domain."""
    if -700.0 < log_abs < 700.0:
        z = sign * math.exp(log_abs)
        if z < BRANCH_POINT or (branch is WBranch.Wm1 and z >= 0):
            return None
        return lambert_w(branch, z)
    if log_abs >= 700.0:
        if sign < 0 or branch is WBranch.Wm1:
            return None
        # w + ln w = log_abs
        w = log_abs - math.log(log_abs)
        for _ in range(50):
            step = (w + math.log(w) - log_abs) / (1 + 1 / w)
            w -= step
            if abs(step) <= 4 * math.ulp(w):
                break
        return w
    if branch is WBranch.W0:
        return sign * math.exp(log_abs)
    if sign > 0:
        return None
    # w + ln(-w) = log_abs, w < -1
    w = log_abs - math.log(-log_abs)
    for _ in range(50):
        step = (w + math.log(-w) - log_abs) / (1 + 1 / w)
        w -= step
        if abs(step) <= 4 * math.ulp(w):
            break
    return w


def _finish(kind, times_labels, method, criterion, degenerate=False) -> MpembaReport:
    pts = sorted((t, lab) for t, lab in times_labels)
    kept: list[tuple[float, str]] = []
    for t, lab in pts:
        if kept and abs(t - kept[-1][0]) <= 1e-12 * max(1.0, t):
            # a double root is a tangential contact, not a crossing
            kept.pop()
            continue
        kept.append((t, lab))
    return MpembaReport(
        kind,
        tuple(t for t, _ in kept),
        method,
        labels=tuple(lab for _, lab in kept),
        degenerate=degenerate,
        criterion=criterion,
    )


def _positive(t: float, rate: float) -> bool:
    return math.isfinite(t) and t > 1e-12 / max(rate, 1e-300)


def crossing_times_region_d(c: DeltaCoefficients) -> MpembaReport:
    """Crossings ``t = W(z)/kappa - C3/C2`` on both real Lambert branches.

    With ``(C1, C2, C3)`` the region-D coefficients the zeros of
    ``C1 e^{-kappa t} + C2 t + C3`` have Lambert argument
    ``z = -kappa (C1/C2) exp(kappa C3/C2)``.  A root is admitted when ``z``
    lies in the domain of its branch and the time is positive.
    """
    _require(c, RegionTag.D)
    kappa = c.rates["lam4"] - c.rates["lam2"]
    if kappa < 1e-12:
        raise ValueError(f"degenerate gap lam4 - lam2 = {kappa}")
    key = "alpha" if c.kind is ObservableKind.GroundPop else "gamma"
    c1, c2, c3 = (c.values[f"{key}{k}"] for k in (1, 2, 3))
    if c.is_zero():
        return _finish(c.kind, [], "closed_form", "lambert_w", degenerate=True)
    scale = max(abs(c1), abs(c2), abs(c3))
    found: list[tuple[float, str]] = []
    if abs(c2) <= _LINEAR_REL * scale:
        # pure exponential against a constant: C1 e^{-kappa t} = -C3
        if c1 != 0 and -c3 / c1 > 0:
            t = -math.log(-c3 / c1) / kappa
            if _positive(t, kappa):
                found.append((t, "exp"))
        return _finish(c.kind, found, "closed_form", "lambert_w")
    ratio = c1 / c2
    if ratio == 0:
        t = -c3 / c2
        if _positive(t, kappa):
            found.append((t, "linear"))
        return _finish(c.kind, found, "closed_form", "lambert_w")
    sign = -math.copysign(1.0, ratio)
    log_abs = math.log(kappa * abs(ratio)) + kappa * c3 / c2
    for branch in (WBranch.W0, WBranch.Wm1):
        w = _lambert_from_log(branch, sign, log_abs)
        if w is None:
            continue
        t = w / kappa - c3 / c2
        if _positive(t, kappa):
            found.append((t, branch.value))
    return _finish(c.kind, found, "closed_form", "lambert_w")


def _quadratic_roots(a: float, b: float, c: float) -> dict[str, float]:
    """Real roots labelled ``+``/``-`` as in ``(-b +- sqrt(b^2 - 4ac)) / 2a``.

    Evaluated in the cancellation-free form; a vanishing leading coefficient
    (relative to the others) falls back to the linear root.
    """
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0:
        return {}
    if abs(a) <= _LINEAR_REL * scale:
        return {"lin": -c / b} if b != 0 else {}
    disc = b * b - 4 * a * c
    if disc < 0:
        return {}
    sq = math.sqrt(disc)
    if b >= 0:
        q = -(b + sq) / 2
        minus, plus = q / a, (c / q if q != 0 else 0.0)
    else:
        q = (-b + sq) / 2
        plus, minus = q / a, (c / q if q != 0 else 0.0)
    return {"+": plus, "-": minus}


def crossing_times_region_b(c: DeltaCoefficients, gap_tol: float = GAP_RATIO_TOL) -> MpembaReport:
    """Crossings from ``alpha4 x^2 + alpha3 x + alpha2 = 0`` on the equal-gap line.

    A root ``x`` is admitted when ``0 < x < 1``; its time is
    ``-ln(x)/(lam3 - lam2)``.

    Raises
    ------
    WrongRegionError
        If the gap ratio differs from 2 by more than ``gap_tol``.
    """
    _require(c, RegionTag.B)
    m = c.values["m"]
    if abs(m - 2) > gap_tol:
        raise WrongRegionError(f"gap ratio {m!r} is off the m = 2 line")
    if c.is_zero():
        return _finish(c.kind, [], "closed_form", "quadratic_x", degenerate=True)
    gap = c.rates["lam3"] - c.rates["lam2"]
    roots = _quadratic_roots(c.values["alpha4"], c.values["alpha3"], c.values["alpha2"])
    found = [(-math.log(x) / gap, lab) for lab, x in roots.items() if 0 < x < 1]
    found = [(t, lab) for t, lab in found if _positive(t, gap)]
    return _finish(c.kind, found, "closed_form", "quadratic_x")


def crossing_times_region_e(c: DeltaCoefficients) -> MpembaReport:
    """Crossings from ``gamma2 t^2 + gamma1 t + gamma0 = 0`` at the third-order point.

    Roots keep the ``+``/``-`` labels of the quadratic formula with a
    nonnegative square root; which label is the later time therefore
    follows the sign of ``gamma2``.
    """
    _require(c, RegionTag.E)
    if c.is_zero():
        return _finish(c.kind, [], "closed_form", "quadratic_t", degenerate=True)
    lam = c.rates["lam"]
    roots = _quadratic_roots(c.values["gamma2"], c.values["gamma1"], c.values["gamma0"])
    found = [(t, lab) for lab, t in roots.items() if _positive(t, lam)]
    return _finish(c.kind, found, "closed_form", "quadratic_t")


def region_a1_criterion(c: DeltaCoefficients, spec: SpectralData | None = None) -> bool:
    """Whether the oscillating difference in regions A1/A2 has a crossing.

    The difference is ``2|da| e^{-lam2 t} [c + f(t)]`` with
    ``c = da2 / (2|da|)`` and ``f(t) = e^{-(lam_re - lam2) t} cos(lam_im t - theta)``,
    so a sign change exists iff ``-c`` lies strictly between the extremes of
    ``f`` over ``t > 0``.  The extremes are sampled over ten periods and
    polished at the closed-form stationary points of ``f``.
    """
    _require(c, RegionTag.A1, RegionTag.A2)
    rates = c.rates if spec is None else {
        "lam2": float(spec.lambdas[1].real),
        "lam_re": float(spec.lambdas[2].real),
        "lam_im": float(spec.lambdas[2].imag),
    }
    amp = math.hypot(c.values["da_re"], c.values["da_im"])
    if amp == 0:
        return False
    target = -c.values["da2"] / (2 * amp)
    mu = rates["lam_re"] - rates["lam2"]
    om = abs(rates["lam_im"])
    theta = c.values["theta"] if rates["lam_im"] >= 0 else -c.values["theta"]
    if mu < 0:
        return True
    if mu == 0:
        return abs(target) < 1
    period = 2 * math.pi / om

    def f(t):
        return np.exp(-mu * t) * np.cos(om * t - theta)

    t = np.linspace(0.0, _A1_PERIODS * period, _A1_SAMPLES)
    vals = f(t)
    # stationary points of f: tan(om t - theta) = -mu/om
    phase0 = theta - math.atan2(mu, om)
    n0 = math.ceil(-phase0 / math.pi)
    ts = (phase0 + math.pi * np.arange(n0, n0 + 2 * _A1_PERIODS + 2)) / om
    ts = ts[ts > 0]
    cand = np.concatenate([vals, f(ts), [0.0]])
    return bool(cand.min() < target < cand.max())


# --------------------------------------------------------------------------
# grid oracle


def _linear_weights(kind: ObservableKind, post: ControlParams) -> np.ndarray | None:
    return _weights(kind, post) if kind in _LINEAR_KINDS else None


class _Pair:
    """Both copies of an experiment, evaluable at arbitrary times."""

    def __init__(self, exp: QuenchExperiment, kind: ObservableKind, spec: SpectralData):
        self.exp, self.kind, self.spec = exp, kind, spec
        self.post = exp.post
        self.rho0 = [initial_condition(exp.pre_I), initial_condition(exp.pre_II)]
        self.rho_ss = np.asarray(steady_state(self.post))
        self.w = _linear_weights(kind, self.post)

    def tracks(self, t: np.ndarray):
        """``(f_I, f_II, delta, scale, s_rates)`` on the times ``t``."""
        out, parts, srates = [], [], []
        for r0 in self.rho0:
            st = propagate_states(r0, self.spec, t)
            dev = propagate_deviations(r0, self.spec, t)
            out.append(evaluate(self.kind, st, self.post, self.rho_ss, dev))
            if self.w is not None:
                parts.append((dev @ self.w).real)
            if self.kind is ObservableKind.Temperature:
                srates.append(observable_rate(st, self.post, ObservableKind.Entropy, dev))
        f1, f2 = out
        if self.w is not None:
            delta = parts[0] - parts[1]
            scale = np.abs(parts[0]) + np.abs(parts[1])
        else:
            with np.errstate(invalid="ignore"):
                delta = f1 - f2
            scale = np.abs(f1) + np.abs(f2)
        return f1, f2, delta, scale, srates

    def valid(self, f1, f2, srates) -> np.ndarray:
        ok = np.isfinite(f1) & np.isfinite(f2)
        for s in srates:
            ok &= np.isfinite(s)
        return ok


def _brackets(t, delta, scale, ok, srates) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)`` around sign changes inside validity segments."""
    out = []
    sign = np.sign(delta)
    noisy = np.abs(delta) <= _NOISE_REL * scale
    n = len(t)
    i = 1
    while i < n:
        j = i
        if sign[i] == 0 and i + 1 < n:
            j = i + 1  # step over an exact zero
        prev = i - 1
        seg_ok = ok[prev] and ok[j] and (j == i or ok[i])
        for s in srates:
            if seg_ok and not (np.sign(s[prev]) == np.sign(s[j]) and (j == i or np.sign(s[i]) == np.sign(s[prev]))):
                seg_ok = False  # an entropy-rate zero is a temperature pole
        if seg_ok and sign[prev] * sign[j] < 0 and not (noisy[prev] and noisy[j]):
            out.append((prev, j))
        i = j + 1 if j > i else i + 1
    return out


def _bisect(pair: _Pair, lo: np.ndarray, hi: np.ndarray, dlo: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized bisection of all brackets at once."""
    lo, hi, dlo = lo.copy(), hi.copy(), dlo.copy()
    for _ in range(200):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        _, _, dm, _, _ = pair.tracks(mid)
        left = np.sign(dm) == np.sign(dlo)
        exact = dm == 0
        lo = np.where(left & ~exact, mid, lo)
        dlo = np.where(left & ~exact, dm, dlo)
        hi = np.where(~left | exact, mid, hi)
        lo = np.where(exact, mid, lo)
    return 0.5 * (lo + hi)


def find_crossings_grid(
    exp: QuenchExperiment,
    kind: ObservableKind,
    horizon: float | None = None,
    n: int = DEFAULT_SAMPLES,
    spec: SpectralData | None = None,
    max_n: int = MAX_GRID,
) -> MpembaReport:
    """Sign changes of the observable difference on a uniform grid.

    Each bracket is bisected to a width of ``1e-12 * horizon``.  Samples
    where either copy is undefined (temperature sentinel, rank-deficient
    states) split the grid into segments, as do zeros of either copy's
    entropy rate for the temperature.  Sign changes below the floating-point
    resolution of the two tracks are ignored.  The grid is doubled, up to
    ``max_n`` points, while two crossings are closer than five grid steps.
    Temperature crossings where either copy is at negative temperature are
    reported and flagged.
    """
    if spec is None:
        spec = eigensystem(exp.post)
    if horizon is None:
        horizon = default_horizon(spec)
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if n < 2:
        raise ValueError("need at least two grid points")
    pair = _Pair(exp, kind, spec)
    while True:
        t = np.linspace(0.0, horizon, n)
        f1, f2, delta, scale, srates = pair.tracks(t)
        ok = pair.valid(f1, f2, srates)
        if np.all(np.abs(delta[ok]) < _DEGENERATE_DELTA):
            return MpembaReport(kind, (), "grid_oracle", degenerate=True, criterion="grid", grid_size=n)
        br = _brackets(t, delta, scale, ok, srates)
        if br:
            lo = np.array([t[i] for i, _ in br])
            hi = np.array([t[j] for _, j in br])
            dlo = np.array([delta[i] for i, _ in br])
            times = _bisect(pair, lo, hi, dlo, 1e-12 * horizon)
        else:
            times = np.array([])
        step = horizon / (n - 1)
        crowded = len(times) > 1 and np.min(np.diff(times)) < _MIN_SEPARATION_STEPS * step
        if crowded and 2 * n <= max_n:
            n *= 2
            continue
        break
    times = times[times > 0]
    flags: tuple[bool, ...] = ()
    if kind is ObservableKind.Temperature and len(times):
        st = [propagate_states(r0, spec, times) for r0 in pair.rho0]
        dv = [propagate_deviations(r0, spec, times) for r0 in pair.rho0]
        temps = [np.atleast_1d(temperature(s, exp.post, d)) for s, d in zip(st, dv)]
        flags = tuple(bool(a < 0 or b < 0) for a, b in zip(*temps))
    return MpembaReport(
        kind,
        tuple(float(x) for x in times),
        "grid_oracle",
        flagged=flags,
        criterion="grid",
        grid_size=n,
    )


def observable_tracks(exp: QuenchExperiment, kind: ObservableKind, times, spec: SpectralData | None = None):
    """Values of ``kind`` for copies I and II on ``times``."""
    if spec is None:
        spec = eigensystem(exp.post)
    f1, f2, _, _, _ = _Pair(exp, kind, spec).tracks(np.asarray(times, dtype=float))
    return f1, f2


def negative_temperature_epochs(t, T_I, T_II) -> list[tuple[float, float]]:
    """Maximal runs of samples ``t`` where either copy has ``T < 0``.

    Each run is reported by its first and last sampled time; ``NaN`` samples
    (temperature undefined) break runs.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        neg = (np.asarray(T_I) < 0) | (np.asarray(T_II) < 0)
    out, start = [], None
    for k, flag in enumerate(neg):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            out.append((float(t[start]), float(t[k - 1])))
            start = None
    if start is not None:
        out.append((float(t[start]), float(t[-1])))
    return out


def closed_form_available(spec: SpectralData, kind: ObservableKind) -> bool:
    if kind not in _LINEAR_KINDS:
        return False
    if spec.region in (RegionTag.D, RegionTag.E):
        return True
    if spec.region is RegionTag.B:
        l2, l3, l4 = (float(x.real) for x in spec.lambdas[1:])
        return abs((l4 - l2) / (l3 - l2) - 2) <= GAP_RATIO_TOL
    return False


def analyze(
    exp: QuenchExperiment,
    kind: ObservableKind,
    method: str = "auto",
    horizon: float | None = None,
    n: int = DEFAULT_SAMPLES,
    spec: SpectralData | None = None,
) -> MpembaReport:
    """Crossing report by closed form when one applies (``auto``), or as requested.

    ``method`` is ``auto``, ``closed_form`` or ``grid``.
    """
    if spec is None:
        spec = eigensystem(exp.post)
    if method not in ("auto", "closed_form", "grid"):
        raise ValueError(f"unknown method {method!r}")
    use_closed = method == "closed_form" or (method == "auto" and closed_form_available(spec, kind))
    if not use_closed:
        return find_crossings_grid(exp, kind, horizon, n, spec)
    c = delta_coefficients(exp, kind, spec)
    if c.region is RegionTag.D:
        return crossing_times_region_d(c)
    if c.region is RegionTag.B:
        return crossing_times_region_b(c)
    if c.region is RegionTag.E:
        return crossing_times_region_e(c)
    raise WrongRegionError(f"no closed-form crossing times in region {c.region.value}")


# --------------------------------------------------------------------------
# parameter-plane scans


@dataclass(frozen=True)
class ScanRow:
    i: int
    j: int
    d_I: float
    d_II: float
    report: MpembaReport = field(compare=False)


def _thread_cap() -> int:
    raw = os.environ.get("MPEMBA_LAB_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ValueError(f"MPEMBA_LAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, cap)


def scan_plane(
    post: ControlParams,
    d_I_values,
    d_II_values,
    kind: ObservableKind,
    gamma_I: float | None = None,
    gamma_II: float | None = None,
    method: str = "auto",
    horizon: float | None = None,
    n: int = DEFAULT_SAMPLES,
    threads: int | None = None,
) -> list[ScanRow]:
    """Crossing reports over a rectangular ``(d_I, d_II)`` grid.

    Pre-quench dissipations default to the post-quench value (fixed
    dissipation).  Rows come back in row-major grid order regardless of
    how many worker threads (capped by ``MPEMBA_LAB_THREADS``) were used.
    """
    spec = eigensystem(post)
    g_I = post.gamma_tilde if gamma_I is None else gamma_I
    g_II = post.gamma_tilde if gamma_II is None else gamma_II
    tasks = [
        (i, j, float(a), float(b))
        for i, a in enumerate(np.atleast_1d(d_I_values))
        for j, b in enumerate(np.atleast_1d(d_II_values))
    ]

    def run(task):
        i, j, a, b = task
        exp = QuenchExperiment(ControlParams(a, g_I), ControlParams(b, g_II), post)
        return ScanRow(i, j, a, b, analyze(exp, kind, method, horizon, n, spec))

    workers = min(threads or _thread_cap(), _thread_cap(), len(tasks) or 1)
    if workers == 1:
        return [run(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, tasks))
