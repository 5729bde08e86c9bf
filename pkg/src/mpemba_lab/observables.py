"""Scalar observables of a vectorized two-level state.

Everything goes through the Bloch vector ``r`` of ``rho = (I + r.sigma)/2``,
whose eigenvalues are ``p = (1 +- |r|)/2``.  Logarithms of 2x2 density
matrices then have the closed form

    ln rho = ln(sqrt(p+ p-)) I + artanh(|r|) r_hat.sigma

so entropy, relative entropy and their time derivatives need no
eigensolver.  All functions broadcast over leading axes of ``(..., 4)``
arrays; time derivatives use ``d rho/dt = -i L rho`` exactly.
"""

from __future__ import annotations

import enum

import numpy as np

from .lindblad_core import ControlParams, build_lindbladian, steady_state

__all__ = [
    "ObservableKind",
    "UNDEFINED",
    "DEGENERATE_EIG",
    "bloch_vector",
    "ground_population",
    "energy",
    "entropy",
    "observable_rate",
    "temperature",
    "kl_divergence",
    "kl_speed",
    "evaluate",
]

#: sentinel for a temperature that cannot be formed (vanishing entropy rate)
UNDEFINED = float("nan")

#: eigenvalues below this make ``ln rho`` unusable
DEGENERATE_EIG = 1e-14
_EIG_CHECK = -1e-10
_TEMP_REL = 1e-12


class ObservableKind(enum.Enum):
    GroundPop = "rho_gg"
    Energy = "energy"
    Entropy = "entropy"
    Temperature = "temperature"
    KLDivergence = "kl"
    KLSpeed = "kl_speed"

    @classmethod
    def parse(cls, name: str) -> "ObservableKind":
        """Accept either the enum name or the short column name."""
        for k in cls:
            if name in (k.name, k.value) or name.lower() == k.name.lower():
                return k
        raise ValueError(f"unknown observable {name!r}; choose from {[k.value for k in cls]}")


def bloch_vector(rho) -> np.ndarray:
    v = np.asarray(rho, dtype=complex)
    eg, ge, ee, gg = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    return np.stack([(eg + ge).real, (ge - eg).imag, (ee - gg).real], axis=-1)


def _norm_and_unit(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(r, axis=-1)
    safe = np.where(n > 0, n, 1.0)
    return n, r / safe[..., None]


def _derivative(rho, p: ControlParams) -> np.ndarray:
    return np.asarray(rho, dtype=complex) @ (-1j * build_lindbladian(p)).T


def _eigs(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.any(1 - n < 2 * _EIG_CHECK):
        raise ValueError("state is not positive semidefinite")
    n = np.clip(n, 0.0, 1.0)
    return (1 + n) / 2, (1 - n) / 2


def _xlogx(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def ground_population(rho):
    return _scalar(np.asarray(rho, dtype=complex)[..., 3].real)


def energy(rho, p: ControlParams):
    """``Tr[rho H]`` with ``H = [[1, d/2], [d/2, 0]]``: ``1 - rho_gg + d rho_re``."""
    v = np.asarray(rho, dtype=complex)
    rho_re = (v[..., 0] + v[..., 1]).real / 2
    return _scalar(1 - v[..., 3].real + p.d_tilde * rho_re)


def entropy(rho):
    """Von Neumann entropy in nats, in ``[0, ln 2]``."""
    n, _ = _norm_and_unit(bloch_vector(rho))
    pp, pm = _eigs(n)
    return _scalar(-_xlogx(pp) - _xlogx(pm))


def _entropy_rate(rho, p: ControlParams, deviation=None) -> np.ndarray:
    r = bloch_vector(rho)
    n, u = _norm_and_unit(r)
    rdot = bloch_vector(_derivative(rho if deviation is None else deviation, p))
    _, pm = _eigs(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = -np.arctanh(np.minimum(n, 1.0)) * np.sum(rdot * u, axis=-1)
    return np.where(pm < DEGENERATE_EIG, np.nan, rate)


def _energy_rate(rho, p: ControlParams, deviation=None) -> np.ndarray:
    v = _derivative(rho if deviation is None else deviation, p)
    return -v[..., 3].real + p.d_tilde * (v[..., 0] + v[..., 1]).real / 2


def observable_rate(rho, p: ControlParams, kind: ObservableKind, deviation=None):
    """Time derivative of energy or entropy along ``d rho/dt = -i L rho``.

    ``deviation = rho - rho_ss(p)`` may be supplied to form ``d rho/dt``
    from the decaying part alone, which is exact since ``L rho_ss = 0``.
    The entropy rate is ``NaN`` where the smaller eigenvalue of ``rho`` is
    below :data:`DEGENERATE_EIG`.
    """
    if kind is ObservableKind.Energy:
        return _scalar(_energy_rate(rho, p, deviation))
    if kind is ObservableKind.Entropy:
        return _scalar(_entropy_rate(rho, p, deviation))
    raise ValueError(f"rates are defined for Energy and Entropy, not {kind}")


def temperature(rho, p: ControlParams, deviation=None):
    """``dE/dS`` along the trajectory; :data:`UNDEFINED` where ``dS/dt`` vanishes."""
    de = _energy_rate(rho, p, deviation)
    ds = _entropy_rate(rho, p, deviation)
    bad = ~(np.abs(ds) >= _TEMP_REL * np.maximum(1.0, np.abs(de)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = de / np.where(bad, 1.0, ds)
    return _scalar(np.where(bad, UNDEFINED, t))


def _phi(u: np.ndarray) -> np.ndarray:
    """``(1 + u) ln(1 + u) - u`` without cancellation for small ``u``."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-2
    us = np.where(small, u, 0.0)
    series = np.zeros_like(us)
    for n in range(9, 1, -1):
        series = us * (series + (-1.0) ** n / (n * (n - 1)))
    series = series * us
    ul = np.where(small, 0.0, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = _xlogx(1 + ul) - ul
    return np.where(small, series, direct)


def _kl_parts(dr: np.ndarray, s: np.ndarray):
    """Pieces of ``ln rho - ln sigma`` for ``r = s + dr``, free of cancellation.

    Returns ``|r|``, ``|s|``, ``|r| - |s|``, ``r_hat - s_hat`` and ``s_hat``.
    """
    r = s + dr
    a, _ = _norm_and_unit(r)
    b, s_hat = _norm_and_unit(s)
    a_safe = np.where(a > 0, a, 1.0)
    b_safe = np.where(b > 0, b, 1.0)
    ab = a + b
    gap = np.sum(dr * (r + s), axis=-1) / np.where(ab > 0, ab, 1.0)
    dhat = dr / a_safe[..., None] - s * (gap / (a_safe * b_safe))[..., None]
    dhat = np.where((a > 0)[..., None], dhat, -s_hat)
    return a, b, gap, dhat, s_hat


def _kl_bloch(dr: np.ndarray, s: np.ndarray) -> np.ndarray:
    a, b, gap, dhat, _ = _kl_parts(dr, s)
    _eigs(a)
    _, qm = _eigs(b)
    # binary relative entropy of the eigenvalue distributions ...
    with np.errstate(divide="ignore", invalid="ignore"):
        u = gap / (1 + b)
        v = -gap / np.where(qm > 0, 1 - b, 1.0)
        spectral = 0.5 * ((1 + b) * _phi(u) + (1 - b) * _phi(v))
        # ... plus the cost of rotating the eigenbasis
        rotation = np.arctanh(np.minimum(b, 1.0)) * a * np.sum(dhat * dhat, axis=-1) / 2
    d = np.maximum(spectral + rotation, 0.0)
    return np.where(qm < DEGENERATE_EIG, np.inf, d)


def _kl_speed_bloch(dr: np.ndarray, s: np.ndarray, rdot: np.ndarray) -> np.ndarray:
    a, b, gap, dhat, s_hat = _kl_parts(dr, s)
    _, pm = _eigs(a)
    _, qm = _eigs(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        at_a = np.arctanh(np.minimum(a, 1.0))
        # artanh(a) - artanh(b) = artanh((a - b)/(1 - a b))
        d_at = np.arctanh(gap / (1 - a * b))
        grad = at_a[..., None] * dhat + d_at[..., None] * s_hat
    v = -np.sum(rdot * grad, axis=-1)
    v = np.where(pm < DEGENERATE_EIG, np.nan, v)
    return np.where(qm < DEGENERATE_EIG, np.inf, v)


def kl_divergence(rho, rho_ss, deviation=None):
    """Quantum relative entropy ``Tr[rho (ln rho - ln rho_ss)]``.

    Evaluated as the relative entropy of the two spectra plus a nonnegative
    eigenbasis-rotation term, so it keeps full relative precision as
    ``rho -> rho_ss``.  Pass ``deviation = rho - rho_ss`` when it is known more
    accurately than the difference of the two states.  Returns ``+inf`` when
    ``rho_ss`` is (numerically) rank deficient.
    """
    s = bloch_vector(rho_ss)
    dev = np.asarray(rho, dtype=complex) - np.asarray(rho_ss, dtype=complex) if deviation is None else deviation
    return _scalar(_kl_bloch(bloch_vector(dev), s))


def kl_speed(rho, p: ControlParams, rho_ss, deviation=None):
    """``-dD_KL/dt = -Tr[rho_dot (ln rho - ln rho_ss)]``.

    ``NaN`` for rank-deficient ``rho``; ``+inf`` if ``rho_ss`` is rank deficient.
    """
    s = bloch_vector(rho_ss)
    dev = np.asarray(rho, dtype=complex) - np.asarray(rho_ss, dtype=complex) if deviation is None else deviation
    rdot = bloch_vector(_derivative(dev, p))
    return _scalar(_kl_speed_bloch(bloch_vector(dev), s, rdot))


def evaluate(kind: ObservableKind, states, post: ControlParams, rho_ss=None, deviations=None) -> np.ndarray:
    """Observable ``kind`` along an array of states evolving under ``post``.

    ``deviations`` (states minus the post-quench steady state, computed
    without the steady-state mode) sharpen the KL observables near the end
    of relaxation.
    """
    states = np.asarray(states, dtype=complex)
    if kind in (ObservableKind.KLDivergence, ObservableKind.KLSpeed) and rho_ss is None:
        rho_ss = np.asarray(steady_state(post))
    if kind is ObservableKind.GroundPop:
        out = ground_population(states)
    elif kind is ObservableKind.Energy:
        out = energy(states, post)
    elif kind is ObservableKind.Entropy:
        out = entropy(states)
    elif kind is ObservableKind.Temperature:
        out = temperature(states, post, deviations)
    elif kind is ObservableKind.KLDivergence:
        out = kl_divergence(states, rho_ss, deviations)
    else:
        out = kl_speed(states, post, rho_ss, deviations)
    return np.asarray(out, dtype=float)
