"""
Real dilogarithm.

    dilog(x) = -integral_0^x ln|1 - y| / y dy

This equals Re Li2(x) on the whole real line. scipy's `spence(z)` is
Li2(1 - z) for z >= 0, which covers x <= 1 directly; x > 1 goes through
the inversion identity.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy.special import spence

PI2_3 = math.pi ** 2 / 3.0

ArrayLike = Union[float, np.ndarray]


def dilog(x: ArrayLike) -> ArrayLike:
    """
    Real dilogarithm, defined on all of R.

    Args:
        x: scalar or array

    Returns:
        dilog(x), same shape as x (float for scalar input)
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full_like(xs, np.nan)

    inside = xs <= 1.0
    out[inside] = spence(1.0 - xs[inside])

    # Re Li2(x) = pi^2/3 - ln^2(x)/2 - Li2(1/x) for x > 1
    above = xs > 1.0
    if np.any(above):
        xa = xs[above]
        out[above] = PI2_3 - 0.5 * np.log(xa) ** 2 - spence(1.0 - 1.0 / xa)

    if scalar:
        return float(out[0])
    return out.reshape(np.shape(x))


__all__ = ["dilog"]
