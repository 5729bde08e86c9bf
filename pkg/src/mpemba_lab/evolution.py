"""Time evolution of the vectorized density matrix.

``propagate_analytic`` sums the relaxation modes of :func:`eigensystem`, with
the polynomial-in-time factors that Jordan blocks contribute at exceptional
points.  ``propagate_rk4`` is an independent classical fourth-order
integrator of ``d rho/dt = -i L rho`` used as the validation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lindblad_core import ControlParams, DensityVector, build_lindbladian, is_physical
from .spectrum import RegionTag, SpectralData, eigensystem

__all__ = [
    "ModeCoefficients",
    "Trajectory",
    "mode_coefficients",
    "propagate_analytic",
    "propagate_states",
    "propagate_deviations",
    "propagate_rk4",
    "rk4_step_matrix",
    "time_derivative",
    "default_horizon",
    "analytic_trajectory",
    "rk4_trajectory",
    "DEFAULT_DT",
    "DEFAULT_SAMPLES",
]

DEFAULT_DT = 1e-4
DEFAULT_SAMPLES = 2000
HORIZON_FACTOR = 20.0


@dataclass(frozen=True)
class ModeCoefficients:
    """Weights ``a_k = <l_k | rho(0)>`` of the four modes."""

    a: np.ndarray
    region: RegionTag

    @property
    def a_re(self) -> float:
        return float(self.a[2].real)

    @property
    def a_im(self) -> float:
        return float(self.a[2].imag)

    @property
    def phase(self) -> float:
        """Phase of the oscillating pair, ``atan2(a_im, a_re)``."""
        return math.atan2(self.a_im, self.a_re)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    provenance: str = "analytic"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a non-empty 1-d grid")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if t[0] < 0:
            raise ValueError("times must be non-negative")
        s = np.asarray(self.states, dtype=complex)
        if s.shape != (t.size, 4):
            raise ValueError(f"states must have shape ({t.size}, 4), got {s.shape}")

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> DensityVector:
        return DensityVector.from_array(self.states[i])

    def is_physical(self, tol: float = 1e-10, positivity_tol: float = 1e-8) -> bool:
        return is_physical(self.states, tol=tol, positivity_tol=positivity_tol)


def mode_coefficients(rho0, spec: SpectralData) -> ModeCoefficients:
    a = spec.left @ np.asarray(rho0, dtype=complex)
    return ModeCoefficients(a, spec.region)


def _evolve_modes(spec: SpectralData, a: np.ndarray, times: np.ndarray, skip_zero_mode: bool = False) -> np.ndarray:
    """States at ``times`` (shape ``(n, 4)``) from mode weights ``a``."""
    t = np.asarray(times, dtype=float)
    out = np.zeros((t.size, 4), dtype=complex)
    R = spec.right
    for start, size in spec.jordan_blocks():
        if skip_zero_mode and start == 0:
            continue
        decay = np.exp(-spec.lambdas[start] * t)
        for j in range(size):
            # coefficient of r_{start+j}: sum_m a_{start+m} (-i t)^(m-j) / (m-j)!
            coef = np.zeros_like(t, dtype=complex)
            for m in range(j, size):
                n = m - j
                coef = coef + a[start + m] * (-1j * t) ** n / math.factorial(n)
            out += np.outer(coef * decay, R[:, start + j])
    return out


def propagate_states(rho0, spec: SpectralData, times) -> np.ndarray:
    """Vectorized analytic propagation on a grid of times."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0):
        raise ValueError("propagation time must be non-negative")
    a = mode_coefficients(rho0, spec).a
    return _evolve_modes(spec, a, t)


def propagate_deviations(rho0, spec: SpectralData, times) -> np.ndarray:
    """``rho(t) - rho_ss`` summed over the decaying modes only.

    Unlike subtracting the steady state from :func:`propagate_states`, this
    keeps full relative precision as the deviation decays.
    """
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0):
        raise ValueError("propagation time must be non-negative")
    a = mode_coefficients(rho0, spec).a
    return _evolve_modes(spec, a, t, skip_zero_mode=True)


def propagate_analytic(rho0, post: ControlParams, t: float, spec: SpectralData | None = None) -> DensityVector:
    """State at time ``t`` after the quench to ``post``.

    Raises
    ------
    ValueError
        If ``t < 0``.
    """
    if t < 0:
        raise ValueError(f"propagation time must be non-negative, got {t}")
    if spec is None:
        spec = eigensystem(post)
    return DensityVector.from_array(propagate_states(rho0, spec, [t])[0])


def time_derivative(rho, p: ControlParams) -> np.ndarray:
    """``d rho/dt = -i L rho``, batched over leading axes."""
    L = build_lindbladian(p)
    return np.asarray(rho, dtype=complex) @ (-1j * L).T


def rk4_step_matrix(p: ControlParams, h: float) -> np.ndarray:
    """One classical RK4 step of the linear system as a matrix.

    For ``y' = A y`` the four stages compose to ``I + hA + (hA)^2/2 +
    (hA)^3/6 + (hA)^4/24``.
    """
    A = -1j * build_lindbladian(p)
    k1 = A
    k2 = A @ (np.eye(4) + h / 2 * k1)
    k3 = A @ (np.eye(4) + h / 2 * k2)
    k4 = A @ (np.eye(4) + h * k3)
    return np.eye(4) + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_plan(t: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil(t / dt - 1e-9))
    return n, t / n


def propagate_rk4(rho0, post: ControlParams, t: float, dt: float = DEFAULT_DT) -> DensityVector:
    """Fixed-step RK4 integration of the master equation to time ``t``.

    The step count is ``ceil(t/dt)`` with the step shrunk to land on ``t``.
    Because the generator is constant, the ``n`` identical steps are applied
    as the ``n``-th power of the single-step matrix.
    """
    if t < 0:
        raise ValueError(f"propagation time must be non-negative, got {t}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(rho0, dtype=complex)
    if t == 0:
        return DensityVector.from_array(v)
    n, h = _step_plan(t, dt)
    M = np.linalg.matrix_power(rk4_step_matrix(post, h), n)
    return DensityVector.from_array(M @ v)


def rk4_trajectory(rho0, post: ControlParams, times, dt: float = DEFAULT_DT) -> Trajectory:
    times = np.asarray(times, dtype=float)
    states = np.array([np.asarray(propagate_rk4(rho0, post, float(t), dt)) for t in times])
    return Trajectory(times, states, provenance="rk4")


def default_horizon(spec: SpectralData) -> float:
    slow = spec.lambda_slow
    if not slow > 0:
        raise ValueError(f"no relaxation at {spec.params}; pass an explicit horizon")
    return HORIZON_FACTOR / slow


def analytic_trajectory(
    rho0,
    post: ControlParams,
    horizon: float | None = None,
    n: int = DEFAULT_SAMPLES,
    spec: SpectralData | None = None,
) -> Trajectory:
    """Uniform grid of ``n`` samples on ``[0, horizon]`` (default ``20/lam_slow``)."""
    if spec is None:
        spec = eigensystem(post)
    if horizon is None:
        horizon = default_horizon(spec)
    if n < 2:
        raise ValueError("need at least two samples")
    times = np.linspace(0.0, horizon, n)
    return Trajectory(times, propagate_states(rho0, spec, times), provenance="analytic")
