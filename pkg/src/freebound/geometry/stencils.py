"""Finite-difference stencils on integer offsets.

Weights come from Fornberg's recursion evaluated in exact rational
arithmetic, so every stencil used in the package is reproducible to the
last bit regardless of platform.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def fornberg_weights(offsets: tuple[int, ...], deriv: int) -> tuple[Fraction, ...]:
    """Weights ``w`` with ``f^(deriv)(0) ~ sum_k w_k f(offsets[k]) / h**deriv``."""
    x = [Fraction(o) for o in offsets]
    m = len(x)
    if deriv >= m:
        raise ValueError("need more points than the derivative order")
    c = [[[Fraction(0)] * m for _ in range(m)] for _ in range(deriv + 1)]
    c[0][0][0] = Fraction(1)
    c1 = Fraction(1)
    for i in range(1, m):
        c2 = Fraction(1)
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for k in range(min(i, deriv), -1, -1):
                prev = c[k - 1][i - 1][j] if k > 0 else 0
                c[k][i][j] = (x[i] * c[k][i - 1][j] - k * prev) / c3
        for k in range(min(i, deriv), -1, -1):
            prev = c[k - 1][i - 1][i - 1] if k > 0 else 0
            c[k][i][i] = c1 / c2 * (k * prev - x[i - 1] * c[k][i - 1][i - 1])
        c1 = c2
    return tuple(c[deriv][m - 1][j] for j in range(m))


CENTRAL, FORWARD, BACKWARD = 0, 1, -1


def stencil(deriv: int, order: int, side: int = CENTRAL) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and float weights for a derivative of the given accuracy order.

    ``side`` selects a central, forward (offsets >= 0) or backward stencil.
    """
    if side == CENTRAL:
        half = (deriv + order - 1) // 2
        offs = tuple(range(-half, half + 1))
    else:
        npts = deriv + order
        offs = tuple(side * k for k in range(npts))
    w = fornberg_weights(offs, deriv)
    keep = [(o, wk) for o, wk in zip(offs, w) if wk != 0]
    return (
        np.array([o for o, _ in keep], dtype=int),
        np.array(
            [np.longdouble(wk.numerator) / np.longdouble(wk.denominator) for _, wk in keep],
            dtype=np.longdouble,
        ),
    )


def reach(order: int, side: int = CENTRAL) -> int:
    """Largest offset magnitude used by first/second derivative stencils."""
    r1 = np.abs(stencil(1, order, side)[0]).max()
    r2 = np.abs(stencil(2, order, side)[0]).max()
    return int(max(r1, r2))
