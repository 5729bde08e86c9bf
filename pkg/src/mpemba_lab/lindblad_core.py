"""State and parameter types of the driven-dissipative two-level model.

The density matrix is carried as the vector ``(rho_eg, rho_ge, rho_ee, rho_gg)``
and evolves as ``i d/dt |rho> = L |rho>``.  The detuning is the unit of energy,
so a model point is fully described by the dimensionless drive ``d_tilde`` and
dissipation ``gamma_tilde``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ControlParams",
    "DensityVector",
    "CoherenceParts",
    "QuenchExperiment",
    "build_lindbladian",
    "steady_state",
    "initial_condition",
    "is_physical",
    "density_matrix",
    "state_from_bloch",
]


@dataclass(frozen=True)
class ControlParams:
    """Dimensionless drive and dissipation of one model point."""

    d_tilde: float
    gamma_tilde: float

    def __post_init__(self):
        if not (math.isfinite(self.d_tilde) and math.isfinite(self.gamma_tilde)):
            raise ValueError(f"parameters must be finite, got {self!r}")
        if self.gamma_tilde < 0:
            raise ValueError(f"gamma_tilde must be >= 0, got {self.gamma_tilde}")


@dataclass(frozen=True)
class CoherenceParts:
    rho_re: float
    rho_im: float

    @classmethod
    def from_coherences(cls, rho_eg: complex, rho_ge: complex) -> "CoherenceParts":
        # inverse of to_coherences; exact for a conjugate pair
        return cls((rho_eg.real + rho_ge.real) / 2, (rho_eg.imag - rho_ge.imag) / 2)

    def to_coherences(self) -> tuple[complex, complex]:
        return complex(self.rho_re, self.rho_im), complex(self.rho_re, -self.rho_im)


@dataclass(frozen=True)
class DensityVector:
    """Vectorized 2x2 density matrix, index order (eg, ge, ee, gg).

    All four components are complex; physicality is checked with
    :func:`is_physical` rather than enforced, because intermediate spectral
    arithmetic is genuinely complex.
    """

    rho_eg: complex
    rho_ge: complex
    rho_ee: complex
    rho_gg: complex

    def __array__(self, dtype=None, copy=None):
        arr = np.array([self.rho_eg, self.rho_ge, self.rho_ee, self.rho_gg], dtype=complex)
        return arr if dtype is None else arr.astype(dtype)

    @classmethod
    def from_array(cls, arr) -> "DensityVector":
        a = np.asarray(arr, dtype=complex).reshape(4)
        return cls(*(complex(v) for v in a))

    @classmethod
    def from_parts(cls, coherence: CoherenceParts, rho_gg: float) -> "DensityVector":
        eg, ge = coherence.to_coherences()
        return cls(eg, ge, complex(1.0 - rho_gg), complex(rho_gg))

    @property
    def coherence(self) -> CoherenceParts:
        return CoherenceParts.from_coherences(self.rho_eg, self.rho_ge)

    @property
    def rho_re(self) -> float:
        return self.coherence.rho_re

    @property
    def rho_im(self) -> float:
        return self.coherence.rho_im


@dataclass(frozen=True)
class QuenchExperiment:
    """Two pre-quench points I and II relaxing under a common post-quench point."""

    pre_I: ControlParams
    pre_II: ControlParams
    post: ControlParams

    @classmethod
    def fixed_dissipation(cls, d_I: float, d_II: float, post: ControlParams) -> "QuenchExperiment":
        g = post.gamma_tilde
        return cls(ControlParams(d_I, g), ControlParams(d_II, g), post)


def build_lindbladian(p: ControlParams) -> np.ndarray:
    """Return the 4x4 generator ``L`` with ``i d|rho>/dt = L|rho>``."""
    d, g = p.d_tilde, p.gamma_tilde
    h = d / 2
    return np.array(
        [
            [1 - 0.5j * g, 0, -h, h],
            [0, -1 - 0.5j * g, h, -h],
            [-h, h, -1j * g, 0],
            [h, -h, 1j * g, 0],
        ],
        dtype=complex,
    )


def steady_state(p: ControlParams) -> DensityVector:
    """Zero mode of ``L`` normalized to unit trace."""
    d, g = p.d_tilde, p.gamma_tilde
    den = 4 + 2 * d * d + g * g
    rho_re = -2 * d / den
    rho_im = -d * g / den
    rho_ee = d * d / den
    return DensityVector(
        complex(rho_re, rho_im),
        complex(rho_re, -rho_im),
        complex(rho_ee),
        complex((4 + d * d + g * g) / den),
    )


def initial_condition(pre: ControlParams) -> DensityVector:
    """Pre-quench state of one copy: the steady state at its own parameters."""
    return steady_state(pre)


def density_matrix(rho) -> np.ndarray:
    """2x2 matrix ``[[ee, eg], [ge, gg]]`` of a vectorized state (batched on leading axes)."""
    v = np.asarray(rho, dtype=complex)
    out = np.empty(v.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = v[..., 2]
    out[..., 0, 1] = v[..., 0]
    out[..., 1, 0] = v[..., 1]
    out[..., 1, 1] = v[..., 3]
    return out


def is_physical(rho, tol: float = 1e-10, positivity_tol: float | None = None) -> bool:
    """Hermiticity, unit trace and positivity of a vectorized state.

    ``positivity_tol`` defaults to ``tol``; trajectories are usually checked
    with a looser positivity bound than the equality constraints.
    """
    v = np.asarray(rho, dtype=complex)
    ptol = tol if positivity_tol is None else positivity_tol
    eg, ge, ee, gg = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    ok = np.abs(ge - np.conj(eg)) <= tol
    ok &= (np.abs(ee.imag) <= tol) & (np.abs(gg.imag) <= tol)
    ok &= np.abs(ee + gg - 1) <= tol
    ok &= ee.real * gg.real - np.abs(eg) ** 2 >= -ptol
    return bool(np.all(ok))


def state_from_bloch(r) -> np.ndarray:
    """Vectorized state ``(I + r.sigma)/2`` for Bloch vectors ``r`` of shape ``(..., 3)``."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([(x - 1j * y) / 2, (x + 1j * y) / 2, (1 + z) / 2 + 0j, (1 - z) / 2 + 0j], axis=-1)
