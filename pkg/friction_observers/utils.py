"""
Utility functions. These are small numerical helpers shared by the observers, the scenario
runner and the tests. They are compiled with numba and work on plain floats, so the integration
kernels call them directly and Python callers get the same results bit for bit.
"""

import math
from typing import Tuple

from numba import njit

LOG_2: float = math.log(2.0)


@njit(cache=True)
def logcosh(z: float) -> float:
    """
    Evaluate log(cosh(z)) without overflow.

    Uses log(cosh(z)) = |z| - log(2) + log(1 + exp(-2|z|)), which stays finite for every
    representable z. The naive form overflows once |z| exceeds roughly 710.

    Args:
        z (float): Argument.

    Returns:
        float: log(cosh(z)).
    """
    a = abs(z)
    return a - LOG_2 + math.log1p(math.exp(-2.0 * a))


@njit(cache=True)
def symmetrize(
    g11: float, g12: float, g21: float, g22: float
) -> Tuple[float, float, float, float]:
    """
    Replace a 2x2 matrix, given row major, by (G + G^T) / 2.

    Returns:
        Tuple[float, float, float, float]: The symmetric matrix, row major.
    """
    off = 0.5 * (g12 + g21)
    return g11, off, off, g22


@njit(cache=True)
def leading_minors(g11: float, g12: float, g21: float, g22: float) -> Tuple[float, float]:
    """
    Leading principal minors of a 2x2 matrix, given row major.

    Returns:
        Tuple[float, float]: (g11, det G).
    """
    return g11, g11 * g22 - g12 * g21


@njit(cache=True)
def is_positive_definite(g11: float, g12: float, g21: float, g22: float) -> bool:
    """
    Sylvester's criterion for a symmetric 2x2 matrix. The caller is responsible for symmetry;
    non-finite entries are never positive-definite.
    """
    first, det = leading_minors(g11, g12, g21, g22)
    return first > 0.0 and det > 0.0
