"""Real branches of the Lambert W function.

``W0`` is the principal branch on ``[-1/e, inf)`` and ``Wm1`` the lower branch
on ``[-1/e, 0)``.  Values come from Halley iteration started from the
branch-point series or the logarithmic asymptotics (Corless et al. 1996).
"""

from __future__ import annotations

import enum
import math

__all__ = ["WBranch", "lambert_w", "BRANCH_POINT"]

# nearest double to -exp(-1); it lies 1.24e-17 below the true branch point,
# which is folded back in through _BRANCH_OFFSET
BRANCH_POINT = -math.exp(-1.0)
_BRANCH_OFFSET = -1.2428753672788363e-17  # BRANCH_POINT + 1/e, from mpmath

_MAX_ITER = 50

# coefficients of W = -1 + p - p^2/3 + ... with p = sqrt(2 (e x + 1)); Wm1 uses -p
_SERIES = (-1.0, 1.0, -1.0 / 3, 11.0 / 72, -43.0 / 540, 769.0 / 17280, -221.0 / 8505)


class WBranch(enum.Enum):
    W0 = "W0"
    Wm1 = "Wm1"


def _branch_series(p: float) -> float:
    acc = 0.0
    for c in reversed(_SERIES):
        acc = acc * p + c
    return acc


def _initial_guess(branch: WBranch, x: float, p: float) -> float:
    if branch is WBranch.W0:
        if p < 0.5:
            return _branch_series(p)
        if x < 3.0:
            # Pade-like guess valid on (-1/e + eps, 3)
            return x * (1 + 4.0 / 3 * x) / (1 + 7.0 / 3 * x + 5.0 / 6 * x * x)
        l1 = math.log(x)
        l2 = math.log(l1)
        return l1 - l2 + l2 / l1
    if p < 0.5:
        return _branch_series(-p)
    l1 = math.log(-x)
    l2 = math.log(-l1)
    return l1 - l2 + l2 / l1


def lambert_w(branch: WBranch | str, x: float) -> float:
    """Solve ``w * exp(w) = x`` on the requested real branch.

    Parameters
    ----------
    branch : WBranch or {"W0", "Wm1"}
    x : float
        ``x >= -1/e`` for ``W0``; ``-1/e <= x < 0`` for ``Wm1``.

    Returns
    -------
    float

    Raises
    ------
    ValueError
        If ``x`` is outside the branch domain.
    """
    branch = WBranch(branch)
    x = float(x)
    if math.isnan(x):
        raise ValueError("lambert_w of NaN")
    if x < BRANCH_POINT:
        raise ValueError(f"x={x!r} is below the branch point -1/e")
    if branch is WBranch.Wm1 and x >= 0:
        raise ValueError(f"Wm1 is defined on [-1/e, 0), got x={x!r}")
    if branch is WBranch.W0:
        if x == 0.0:
            return 0.0
        if math.isinf(x):
            return math.inf

    # distance to the branch point without cancellation against -1/e
    offset = (x - BRANCH_POINT) + _BRANCH_OFFSET
    p = math.sqrt(max(2.0 * math.e * offset, 0.0))
    if p < 1e-3:
        return _branch_series(p if branch is WBranch.W0 else -p)

    w = _initial_guess(branch, x, p)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w_new = w - step
        if abs(step) <= 4 * math.ulp(w_new):
            return w_new
        w = w_new
    return w
