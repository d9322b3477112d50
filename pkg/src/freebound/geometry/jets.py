"""Second-order forward-mode jets for chart maps.

A :class:`Jet` carries a batch of values together with their first and
second partial derivatives with respect to the chart parameters.  Chart
functions are written once against the elementary functions in this
module (``cos``, ``cosh``, ``power`` ...) and then work both on plain
arrays (for finite differences) and on jets (for exact derivatives).

All arithmetic happens in the dtype of the input, normally
``numpy.longdouble``.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.longdouble


class Jet:
    """Value, gradient and Hessian of a scalar field, batched.

    Shapes: ``v`` is ``(B,)``, ``d`` is ``(B, n)``, ``dd`` is ``(B, n, n)``.
    """

    __array_priority__ = 1000
    __slots__ = ("v", "d", "dd")

    def __init__(self, v, d, dd):
        self.v = v
        self.d = d
        self.dd = dd

    @staticmethod
    def variables(p):
        """Independent variables for a batch of parameter points ``(B, n)``."""
        p = np.asarray(p, dtype=DTYPE)
        b, n = p.shape
        out = []
        for i in range(n):
            d = np.zeros((b, n), dtype=p.dtype)
            d[:, i] = 1
            out.append(Jet(p[:, i].copy(), d, np.zeros((b, n, n), dtype=p.dtype)))
        return out

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        o = np.broadcast_to(np.asarray(other, dtype=self.v.dtype), self.v.shape)
        return Jet(o, np.zeros_like(self.d), np.zeros_like(self.dd))

    def chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives."""
        dd = f2[:, None, None] * self.d[:, :, None] * self.d[:, None, :]
        dd = dd + f1[:, None, None] * self.dd
        return Jet(f0, f1[:, None] * self.d, dd)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.v + o.v, self.d + o.d, self.dd + o.dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d, -self.dd)

    def __sub__(self, other):
        o = self._lift(other)
        return Jet(self.v - o.v, self.d - o.d, self.dd - o.dd)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            o = np.asarray(other, dtype=self.v.dtype)
            if o.ndim == 0:
                return Jet(self.v * o, self.d * o, self.dd * o)
            other = self._lift(o)
        o = other
        dd = self.v[:, None, None] * o.dd + o.v[:, None, None] * self.dd
        dd = dd + self.d[:, :, None] * o.d[:, None, :] + o.d[:, :, None] * self.d[:, None, :]
        return Jet(self.v * o.v, self.v[:, None] * o.d + o.v[:, None] * self.d, dd)

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1 / self.v
        return self.chain(r, -r * r, 2 * r * r * r)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1 / np.asarray(other, dtype=self.v.dtype))

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, p):
        return power(self, p)


def _unary(x, f, f1, f2):
    if isinstance(x, Jet):
        v = x.v
        return x.chain(f(v), f1(v), f2(v))
    return f(x)


def sin(x):
    return _unary(x, np.sin, np.cos, lambda v: -np.sin(v))


def cos(x):
    return _unary(x, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))


def sinh(x):
    return _unary(x, np.sinh, np.cosh, np.sinh)


def cosh(x):
    return _unary(x, np.cosh, np.sinh, np.cosh)


def exp(x):
    return _unary(x, np.exp, np.exp, np.exp)


def sqrt(x):
    if isinstance(x, Jet):
        s = np.sqrt(x.v)
        return x.chain(s, 0.5 / s, -0.25 / (s * x.v))
    return np.sqrt(x)


def power(x, p):
    """``x**p`` for a real constant exponent (``x > 0`` unless ``p`` is integral)."""
    if isinstance(x, Jet):
        v = x.v
        return x.chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))
    return x**p


def value(x):
    """Plain values of a jet (or the array itself)."""
    return x.v if isinstance(x, Jet) else x


def stack_chart(components, batch, dtype=DTYPE):
    """Assemble chart components into ``F (B, m)``, ``D (B, n, m)``, ``DD (B, n, n, m)``.

    Constant components (plain scalars) get zero derivatives.
    """
    n = None
    for c in components:
        if isinstance(c, Jet):
            n = c.d.shape[1]
            break
    if n is None:
        raise ValueError("chart returned no parameter-dependent component")
    m = len(components)
    F = np.empty((batch, m), dtype=dtype)
    D = np.zeros((batch, n, m), dtype=dtype)
    DD = np.zeros((batch, n, n, m), dtype=dtype)
    for k, c in enumerate(components):
        if isinstance(c, Jet):
            F[:, k] = c.v
            D[:, :, k] = c.d
            DD[:, :, :, k] = c.dd
        else:
            F[:, k] = c
    return F, D, DD
