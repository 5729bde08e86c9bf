"""Liouvillian spectrum, eigenvalue regions and (generalized) eigenvector tables.

The eigenvalues of ``L`` are written ``-i*lam`` with ``lam_1 = 0``.  The three
nonzero ``lam`` solve

    lam^3 - 2G lam^2 + (5G^2/4 + d^2 + 1) lam - G (G^2/4 + d^2/2 + 1) = 0

which after ``lam = y + 2G/3`` becomes ``y^3 + P y + Q = 0`` with
``P = (12 + 12 d^2 - G^2)/12`` and ``Q = G (18 d^2 - 36 - G^2)/108``.

Right eigenvectors share the form ``r(lam) = (-d/(1 - i x), -d/(1 + i x), -1, 1)``
with ``x = G/2 - lam``; the matching left vectors are rational functions of
the three nonzero eigenvalues and stay valid for complex ``lam`` by analytic
continuation.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .lindblad_core import ControlParams, build_lindbladian, steady_state

__all__ = [
    "RegionTag",
    "SpectralData",
    "SpectralError",
    "nonzero_eigenvalues",
    "classify_region",
    "normalized_discriminant",
    "region_d_gamma",
    "region_c_gamma",
    "region_b_m2_gamma",
    "E_POINT",
    "eigensystem",
    "right_vector",
    "left_vectors_generic",
    "left_vectors_region_a1",
    "left_vectors_region_d",
    "REGION_E_RIGHT",
    "REGION_E_LEFT",
]

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

#: the single third-order exceptional point
E_POINT = ControlParams(2 * SQRT2, 6 * SQRT3)

DEFAULT_EP_TOL = 1e-9
JORDAN_RESIDUAL_TOL = 1e-8


class RegionTag(enum.Enum):
    A1 = "A1"
    A2 = "A2"
    B = "B"
    C = "C"
    D = "D"
    E = "E"


class SpectralError(RuntimeError):
    """Raised when a constructed eigensystem fails its Jordan residual check."""


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues and a (generalized) eigenbasis of ``L`` at one point.

    ``right`` holds the vectors ``r_k`` as columns, ``left`` the vectors
    ``l_k`` as rows with ``left @ right = I``, and ``jordan`` satisfies
    ``L @ right = right @ jordan``.
    """

    params: ControlParams
    region: RegionTag
    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray
    jordan: np.ndarray
    ambiguous: bool = False
    source: str = "closed_form"
    residual: float = field(default=0.0, compare=False)

    @property
    def lambda_slow(self) -> float:
        """Smallest nonzero real part among the relaxation rates."""
        return float(np.min(self.lambdas[1:].real))

    @property
    def is_defective(self) -> bool:
        return self.region in (RegionTag.C, RegionTag.D, RegionTag.E)

    def jordan_blocks(self) -> list[tuple[int, int]]:
        """``(start, size)`` of each Jordan block, in column order."""
        blocks = []
        k = 0
        while k < 4:
            size = 1
            while k + size < 4 and self.jordan[k + size - 1, k + size] != 0:
                size += 1
            blocks.append((k, size))
            k += size
        return blocks


# --------------------------------------------------------------------------
# cubic and classification


def _depressed(p: ControlParams) -> tuple[float, float]:
    d2, g = p.d_tilde ** 2, p.gamma_tilde
    return (12 + 12 * d2 - g * g) / 12, g * (18 * d2 - 36 - g * g) / 108


def normalized_discriminant(p: ControlParams) -> float:
    """``(4P^3 + 27Q^2) / (4|P|^3 + 27Q^2)`` in ``[-1, 1]``.

    Positive: one real root and a complex pair.  Negative: three distinct
    real roots.  Zero: a repeated root.
    """
    P, Q = _depressed(p)
    num = 4 * P ** 3 + 27 * Q * Q
    den = 4 * abs(P) ** 3 + 27 * Q * Q
    return 0.0 if den == 0 else num / den


def _is_triple(p: ControlParams, ep_tol: float) -> bool:
    d2, g = p.d_tilde ** 2, p.gamma_tilde
    P, Q = _depressed(p)
    p_scale = (12 + 12 * d2 + g * g) / 12
    q_scale = g * (18 * d2 + 36 + g * g) / 108
    return abs(P) <= ep_tol * p_scale and abs(Q) <= ep_tol * max(q_scale, 1e-300)


def _real_cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _cardano(p: ControlParams) -> tuple[list[complex], int]:
    """Roots ``y`` of the depressed cubic and the root structure.

    Structure code: 1 = one real + pair, 3 = three distinct real.
    """
    P, Q = _depressed(p)
    disc = Q * Q / 4 + P ** 3 / 27
    if disc > 0:
        s = math.sqrt(disc)
        # pick the sign that avoids cancellation in the outer cube root
        A = -_real_cbrt(Q / 2 + math.copysign(s, Q)) if Q != 0 else _real_cbrt(s)
        B = -P / (3 * A) if A != 0 else 0.0
        y1 = A + B
        re = -y1 / 2
        im = SQRT3 / 2 * abs(A - B)
        return [complex(y1), complex(re, im), complex(re, -im)], 1
    if P == 0:
        return [0j, 0j, 0j], 3
    m = 2 * math.sqrt(-P / 3)
    arg = 3 * Q / (P * m)
    arg = min(1.0, max(-1.0, arg))
    phi = math.acos(arg) / 3
    ys = [m * math.cos(phi - 2 * math.pi * k / 3) for k in range(3)]
    return [complex(y) for y in sorted(ys)], 3


def _polish(lam: complex, p: ControlParams) -> complex:
    d2, g = p.d_tilde ** 2, p.gamma_tilde
    c2, c1, c0 = -2 * g, 1.25 * g * g + d2 + 1, -g * (g * g / 4 + d2 / 2 + 1)
    for _ in range(2):
        f = ((lam + c2) * lam + c1) * lam + c0
        fp = (3 * lam + 2 * c2) * lam + c1
        if fp == 0:
            break
        lam = lam - f / fp
    return lam


def _roots_for_region(p: ControlParams, region: RegionTag) -> np.ndarray:
    g = p.gamma_tilde
    shift = 2 * g / 3
    if region is RegionTag.E:
        return np.array([shift] * 3, dtype=complex)
    if region in (RegionTag.C, RegionTag.D):
        P, Q = _depressed(p)
        y_double = -3 * Q / (2 * P)
        y_single = 3 * Q / P
        ys = sorted([y_double, y_double, y_single])
        return np.array([y + shift for y in ys], dtype=complex)
    ys, kind = _cardano(p)
    lams = [_polish(y + shift, p) for y in ys]
    if kind == 1:
        real = complex(lams[0].real, 0.0)
        pair = lams[1]
        pair = complex(pair.real, abs(pair.imag))
        return np.array([real, pair, pair.conjugate()], dtype=complex)
    return np.array(sorted(lam.real for lam in lams), dtype=complex)


def classify_region(p: ControlParams, ep_tol: float = DEFAULT_EP_TOL) -> RegionTag:
    """Eigenvalue region of a parameter point.

    ``ep_tol`` bounds the normalized cubic discriminant below which a repeated
    root is declared.  Exceptional points are measure-zero; reach them through
    :func:`region_d_gamma`, :func:`region_c_gamma` or :data:`E_POINT`.
    """
    return _classify(p, ep_tol)[0]


def _classify(p: ControlParams, ep_tol: float) -> tuple[RegionTag, bool]:
    if ep_tol <= 0:
        raise ValueError("ep_tol must be positive")
    if p.gamma_tilde > 0 and _is_triple(p, ep_tol):
        return RegionTag.E, False
    delta = normalized_discriminant(p)
    if abs(delta) <= ep_tol and p.gamma_tilde > 0:
        P, Q = _depressed(p)
        if P != 0 and -3 * Q / (2 * P) < 3 * Q / P:
            return RegionTag.D, False
        return RegionTag.C, False
    if delta < 0:
        return RegionTag.B, False
    lams = _roots_for_region(p, RegionTag.A1)
    lam2, lam_re = lams[0].real, lams[1].real
    if lam2 < lam_re:
        return RegionTag.A1, False
    return RegionTag.A2, lam2 == lam_re


def nonzero_eigenvalues(p: ControlParams, ep_tol: float = DEFAULT_EP_TOL) -> np.ndarray:
    """The three nonzero ``lam`` (eigenvalues of ``i L``).

    Real roots are sorted ascending.  With a complex pair the real root comes
    first, followed by ``lam_re + i lam_im`` and ``lam_re - i lam_im`` with
    ``lam_im > 0``.  At exceptional points the repeated root is returned
    exactly degenerate.
    """
    region = classify_region(p, ep_tol)
    return _roots_for_region(p, region)


def region_d_gamma(d_tilde: float) -> float:
    """Dissipation on the line of second-order EPs where the two slow rates merge."""
    d2 = d_tilde * d_tilde
    if d2 < 8:
        raise ValueError(f"region (d) line needs d^2 >= 8, got d={d_tilde}")
    return math.sqrt(d2 * d2 / 2 + 10 * d2 - 4 + abs(d_tilde) / 2 * (d2 - 8) ** 1.5)


def region_c_gamma(d_tilde: float) -> float:
    """Dissipation on the line of second-order EPs where the two fast rates merge."""
    d2 = d_tilde * d_tilde
    if d2 < 8:
        raise ValueError(f"region (c) line needs d^2 >= 8, got d={d_tilde}")
    return math.sqrt(d2 * d2 / 2 + 10 * d2 - 4 - abs(d_tilde) / 2 * (d2 - 8) ** 1.5)


def region_b_m2_gamma(d_tilde: float) -> float:
    """Dissipation for which the three rates are equally spaced."""
    d2 = d_tilde * d_tilde
    if d2 < 2:
        raise ValueError(f"equal-gap line needs d^2 >= 2, got d={d_tilde}")
    return 3 * SQRT2 * math.sqrt(d2 - 2)


# --------------------------------------------------------------------------
# eigenvector tables


def right_vector(p: ControlParams, lam: complex) -> np.ndarray:
    d, g = p.d_tilde, p.gamma_tilde
    x = g / 2 - lam
    return np.array([-d / (1 - 1j * x), -d / (1 + 1j * x), -1.0, 1.0], dtype=complex)


def _zero_mode_pair(p: ControlParams) -> tuple[np.ndarray, np.ndarray]:
    d, g = p.d_tilde, p.gamma_tilde
    n = 4 + d * d + g * g
    r1 = np.array([-d * (2 + 1j * g) / n, -d * (2 - 1j * g) / n, d * d / n, 1.0], dtype=complex)
    w = n / (4 + 2 * d * d + g * g)
    l1 = np.array([0, 0, w, w], dtype=complex)
    return r1, l1


def left_vectors_generic(p: ControlParams, lams) -> np.ndarray:
    """Rows ``l_2, l_3, l_4`` dual to ``right_vector`` at three distinct rates."""
    d, g = p.d_tilde, p.gamma_tilde
    d0 = 4 + 2 * d * d + g * g
    rows = []
    for k in range(3):
        lk = lams[k]
        others = [lams[j] for j in range(3) if j != k]
        a = 4 + (g - 2 * lk) ** 2
        prod = (lk - others[0]) * (lk - others[1])
        po = others[0] * others[1]
        l_re = -a * (-4 + (g - 2 * others[0]) * (g - 2 * others[1])) / (32 * d * prod)
        l_im = -a * (g - others[0] - others[1]) / (8 * d * prod)
        l3 = -a * (d0 + 4 * po) / (8 * d0 * prod)
        l4 = a * (d0 - 4 * po) / (8 * d0 * prod)
        rows.append([l_re + 1j * l_im, l_re - 1j * l_im, l3, l4])
    return np.array(rows, dtype=complex)


def left_vectors_region_a1(p: ControlParams, lam2: float, lam_re: float, lam_im: float) -> np.ndarray:
    """Rows ``l_2, l_3, l_4`` written in real and imaginary parts of the rates.

    Equivalent to :func:`left_vectors_generic` for a complex pair; kept as an
    independent route for cross-checks.
    """
    d, g = p.d_tilde, p.gamma_tilde
    d0 = 4 + 2 * d * d + g * g
    w = lam_im ** 2 + (lam2 - lam_re) ** 2
    a2 = 4 + (g - 2 * lam2) ** 2
    mod2 = lam_im ** 2 + lam_re ** 2
    l21re = -a2 * (4 * (lam_im ** 2 - 1) + (g - 2 * lam_re) ** 2) / (32 * d * w)
    l21im = -a2 * (g - 2 * lam_re) / (8 * d * w)
    l23 = -a2 * (2 * d * d + g * g + 4 * (1 + mod2)) / (8 * d0 * w)
    l24 = a2 * (2 * d * d + g * g + 4 * (1 - mod2)) / (8 * d0 * w)

    xi1 = g * g * lam_im - 4 * g * lam2 * lam_im + 4 * lam_im * (lam2 ** 2 - 1)
    xi2 = 4 * g * (lam2 - lam_re) + 4 * (lam_re ** 2 - lam2 ** 2 + lam_im ** 2)
    xi3 = (
        -g * g * lam2
        + 2 * lam2 ** 2 * (g - 2 * lam_re)
        - 4 * lam_re
        + g * lam_re * (g - 2 * lam_re)
        + 4 * lam2 * lam_re ** 2
    )
    bp = 4 * (1 + lam_im) ** 2 + (g - 2 * lam_re) ** 2
    bm = 4 * (lam_im - 1) ** 2 + (g - 2 * lam_re) ** 2
    den = 64 * d * lam_im * w
    l31re = (xi1 + xi2) * bp / den
    l32re = (xi1 - xi2) * bm / den
    l31im = (xi3 - 2 * g * lam_im * (lam_im - 2) + 4 * lam2 * (lam_im - 1) ** 2) * bp / den
    l32im = (xi3 - 2 * g * lam_im * (lam_im + 2) + 4 * lam2 * (lam_im + 1) ** 2) * bm / den

    s_re, s_im = l31re + l32re, l31im + l32im
    t_re, t_im = l31re - l32re, l32im - l31im
    u = 8 * lam2 ** 2 - 8 * g * lam2
    v3 = 4 * g * lam2 ** 2 + 4 * lam2 * (4 + d * d) - g * d0
    v4 = 4 * g * lam2 ** 2 - 4 * lam2 * (g * g + d * d) + g * d0
    norm = d / (d0 * a2)
    l33re = norm * (s_re * (u - 2 * d0) + t_im * v3)
    l33im = norm * (s_im * (u - 2 * d0) + t_re * v3)
    l34re = norm * (s_re * (u + 2 * d0) + t_im * v4)
    l34im = norm * (s_im * (u + 2 * d0) + t_re * v4)

    row2 = [l21re + 1j * l21im, l21re - 1j * l21im, l23, l24]
    row3 = [l31re + 1j * l31im, l32re + 1j * l32im, l33re + 1j * l33im, l34re + 1j * l34im]
    row4 = [np.conj(row3[1]), np.conj(row3[0]), np.conj(row3[2]), np.conj(row3[3])]
    return np.array([row2, row3, row4], dtype=complex)


def _region_d_generalized(p: ControlParams, lam4: float) -> np.ndarray:
    d, g = p.d_tilde, p.gamma_tilde
    y = g / 2 - lam4
    return np.array([(1 - 1j * y) / d, (-1 - 1j * y) / d, 0, 0], dtype=complex)


def left_vectors_region_d(p: ControlParams, lam2: float, lam4: float) -> np.ndarray:
    """Rows ``l_2, l_3, l_4`` dual to the Jordan chain on the region-(d) line."""
    d, g = p.d_tilde, p.gamma_tilde
    d0 = 4 + 2 * d * d + g * g
    eta = (
        g ** 3
        - 2 * g * g * (lam2 + 2 * lam4)
        + 4 * g * (-3 + 2 * lam2 * lam4 + lam4 ** 2)
        + 8 * (lam2 + 2 * lam4 - lam2 * lam4 ** 2)
    )
    dl1 = -16 + g ** 4 + 2 * d * d * ((g - 2 * lam4) ** 2 - 4)
    dl2 = -16 + g ** 4 - 8 * g * lam4 - 2 * g ** 3 * lam4 + 2 * d * d * ((g - 2 * lam2) * (g - 2 * lam4) - 4)
    dl3 = 4 * lam2 ** 2 * (g * g - 2 * g * lam4 - 4)
    a2 = 4 + (g - 2 * lam2) ** 2
    a4 = 4 + (g - 2 * lam4) ** 2
    gap = lam2 - lam4

    l21re = -a2 * a4 / (4 * d * gap * eta)
    l21im = -a2 * (g - 2 * lam4) * a4 / (8 * d * gap * eta)
    l23 = a2 * (dl1 - 2 * g * lam4 * (20 + g * g - 4 * lam4 ** 2) - 4 * lam4 ** 2 * (g * g - 12)) / (4 * d0 * gap * eta)
    l24 = -a2 * (dl1 + 2 * g * lam4 * (4 - 3 * g * g - 4 * lam4 ** 2) - 4 * lam4 ** 2 * (4 - 3 * g * g)) / (
        4 * d0 * gap * eta
    )
    l31re = 4 * d * (lam2 + lam4 - g) / eta
    l31im = d * ((g - 2 * lam2) * (g - 2 * lam4) - 4) / eta
    l33 = 4j * d * d * (d0 + 4 * lam2 * lam4) / (d0 * eta)
    l34 = -4j * d * d * (d0 - 4 * lam2 * lam4) / (d0 * eta)
    l43 = -a4 * (dl2 - dl3 - 32 * lam2 * (g - lam4)) / (4 * gap * d0 * eta)
    l44 = a4 * (dl2 + dl3 + 4 * g * lam2 * (4 - g * g + 2 * g * lam4)) / (4 * gap * d0 * eta)
    return np.array(
        [
            [-l21re - 1j * l21im, -l21re + 1j * l21im, l23, l24],
            [l31re + 1j * l31im, -l31re + 1j * l31im, l33, l34],
            [l21re + 1j * l21im, l21re - 1j * l21im, l43, l44],
        ],
        dtype=complex,
    )


#: right vectors (columns) at the third-order EP
REGION_E_RIGHT = np.array(
    [
        [(-1 - 3j * SQRT3) / (15 * SQRT2), (-1 + 1j * SQRT3) / SQRT2, (1 + 1j * SQRT3) / (2 * SQRT2), 1 / (2 * SQRT2)],
        [(-1 + 3j * SQRT3) / (15 * SQRT2), (-1 - 1j * SQRT3) / SQRT2, (-1 + 1j * SQRT3) / (2 * SQRT2), 1 / (2 * SQRT2)],
        [1 / 15, -1, 0, 0],
        [1, 1, 0, 0],
    ],
    dtype=complex,
)
REGION_E_RIGHT.flags.writeable = False

#: left vectors (rows) at the third-order EP
REGION_E_LEFT = np.array(
    [
        [0, 0, 15 / 16, 15 / 16],
        [0, 0, -15 / 16, 1 / 16],
        [SQRT2, -SQRT2, 9j * SQRT3 / 4, 1j * SQRT3 / 4],
        [SQRT2 - 1j * math.sqrt(6), SQRT2 + 1j * math.sqrt(6), 5, 1],
    ],
    dtype=complex,
)
REGION_E_LEFT.flags.writeable = False


def _jordan(lams: np.ndarray, defects: tuple[int, ...] = ()) -> np.ndarray:
    J = np.diag(-1j * lams).astype(complex)
    for k in defects:
        J[k, k + 1] = 1.0
    return J


def _residual(L: np.ndarray, R: np.ndarray, J: np.ndarray) -> float:
    return float(np.max(np.abs(L @ R - R @ J)))


def _numeric_diagonal(p: ControlParams, region: RegionTag) -> SpectralData:
    L = build_lindbladian(p)
    mu, vecs = np.linalg.eig(L)
    lams = 1j * mu
    order = np.argsort(np.abs(lams))
    zero = order[0]
    rest = [k for k in order[1:]]
    rest.sort(key=lambda k: (round(lams[k].real, 12), -lams[k].imag))
    idx = [zero] + rest
    lams = lams[idx]
    lams[0] = 0.0
    R = vecs[:, idx].astype(complex)
    R[:, 0] = np.asarray(steady_state(p))
    left = np.linalg.inv(R)
    J = _jordan(lams)
    return SpectralData(p, region, lams, R, left, J, source="numeric", residual=_residual(L, R, J))


def _region_c_chain(p: ControlParams, lams: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    L = build_lindbladian(p)
    r1, _ = _zero_mode_pair(p)
    r2 = right_vector(p, lams[1])
    r3 = right_vector(p, lams[2])
    A = L + 1j * lams[2] * np.eye(4)
    r4, *_ = np.linalg.lstsq(A, r3, rcond=1e-7)
    # remove any component along the eigenvector so the chain is canonical
    r4 = r4 - (np.vdot(r3, r4) / np.vdot(r3, r3)) * r3
    R = np.column_stack([r1, r2, r3, r4])
    return R, np.linalg.inv(R)


def eigensystem(p: ControlParams, ep_tol: float = DEFAULT_EP_TOL) -> SpectralData:
    """Eigenvalues plus right/left (generalized) eigenvectors at ``p``.

    Raises
    ------
    SpectralError
        If the assembled basis violates ``|L R - R J| <= 1e-8``.
    """
    region, ambiguous = _classify(p, ep_tol)
    L = build_lindbladian(p)
    r1, l1 = _zero_mode_pair(p)

    if region is RegionTag.E:
        lam = 2 * p.gamma_tilde / 3
        lams = np.array([0, lam, lam, lam], dtype=complex)
        R = np.array(REGION_E_RIGHT)
        left = np.array(REGION_E_LEFT)
        J = _jordan(lams, (1, 2))
        source = "closed_form"
    elif region is RegionTag.D:
        nz = _roots_for_region(p, region)
        lam2, lam4 = nz[0].real, nz[2].real
        lams = np.concatenate([[0], nz])
        R = np.column_stack([r1, right_vector(p, lam2), _region_d_generalized(p, lam4), right_vector(p, lam4)])
        left = np.vstack([l1, left_vectors_region_d(p, lam2, lam4)])
        J = _jordan(lams, (1,))
        source = "closed_form"
    elif region is RegionTag.C:
        nz = _roots_for_region(p, region)
        lams = np.concatenate([[0], nz])
        R, left = _region_c_chain(p, lams)
        J = _jordan(lams, (2,))
        source = "numeric_chain"
    else:
        nz = _roots_for_region(p, region)
        lams = np.concatenate([[0], nz])
        if p.d_tilde == 0:
            return _numeric_diagonal(p, region)
        R = np.column_stack([r1] + [right_vector(p, lam) for lam in nz])
        with np.errstate(all="ignore"):
            left = np.vstack([l1, left_vectors_generic(p, nz)])
        J = _jordan(lams)
        source = "closed_form"
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(left))) or _residual(L, R, J) > JORDAN_RESIDUAL_TOL:
            return _numeric_diagonal(p, region)
        if np.max(np.abs(left @ R - np.eye(4))) > 1e-9:
            return _numeric_diagonal(p, region)

    res = _residual(L, R, J)
    if not res <= JORDAN_RESIDUAL_TOL:
        raise SpectralError(f"Jordan residual {res:.3e} exceeds {JORDAN_RESIDUAL_TOL} at {p} ({region.value})")
    R.flags.writeable = False
    left.flags.writeable = False
    J.flags.writeable = False
    return SpectralData(p, region, lams, R, left, J, ambiguous=ambiguous, source=source, residual=res)
