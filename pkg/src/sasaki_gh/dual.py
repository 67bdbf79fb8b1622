"""Forward-mode dual numbers that nest.

A ``Dual`` carries a primal part and a tangent part; either part may itself be
a ``Dual``, which is how iterated differentials ``d(d(...f))`` are evaluated
without symbolic work.  Numpy ufuncs dispatch here through
``__array_ufunc__``, so maps written with ``np.sin``/``np.sqrt`` etc. accept
duals unchanged.
"""
from __future__ import annotations

import numpy as np


class Dual:
    __slots__ = ("re", "du")
    # make numpy defer to our reflected operators
    __array_priority__ = 1000

    def __init__(self, re, du):
        self.re = re
        self.du = du

    def __repr__(self):
        return f"Dual({self.re!r}, {self.du!r})"

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re + other.re, self.du + other.du)
        return Dual(self.re + other, self.du)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re - other.re, self.du - other.du)
        return Dual(self.re - other, self.du)

    def __rsub__(self, other):
        return Dual(other - self.re, -self.du)

    def __neg__(self):
        return Dual(-self.re, -self.du)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re * other.re, self.re * other.du + self.du * other.re)
        return Dual(self.re * other, self.du * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.re
            q = self.re * inv
            return Dual(q, (self.du - q * other.du) * inv)
        return Dual(self.re / other, self.du / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.re
        return Dual(other * inv, -other * self.du * inv * inv)

    def __pow__(self, p):
        if isinstance(p, Dual):
            return np.exp(p * np.log(self))
        if p == 0:
            return Dual(self.re ** 0, self.du * 0.0)
        return Dual(self.re ** p, p * self.re ** (p - 1) * self.du)

    # numpy interop ----------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        handler = _UFUNCS.get(ufunc)
        if handler is None:
            return NotImplemented
        return handler(*inputs)


def primal(x):
    """Strip every nesting level and return the innermost real value."""
    while isinstance(x, Dual):
        x = x.re
    return x


def split(x, like=None):
    """Return ``(re, du)``; a plain value has zero tangent."""
    if isinstance(x, Dual):
        return x.re, x.du
    zero = np.zeros_like(np.asarray(primal(like) if like is not None else x, dtype=float))
    return x, zero + 0.0 * np.asarray(x, dtype=float)


def lift_unary(f, fprime):
    """Build a nesting-aware unary op from ``f`` and its derivative ``fprime``.

    ``fprime`` receives the (possibly dual) primal part, so higher derivatives
    come out of the recursion.
    """

    def op(x):
        if isinstance(x, Dual):
            return Dual(op(x.re), x.du * fprime(x.re))
        return f(x)

    op.__name__ = getattr(f, "__name__", "op")
    return op


def _sin(x):
    if isinstance(x, Dual):
        return Dual(_sin(x.re), x.du * _cos(x.re))
    return np.sin(x)


def _cos(x):
    if isinstance(x, Dual):
        return Dual(_cos(x.re), -x.du * _sin(x.re))
    return np.cos(x)


def _exp(x):
    if isinstance(x, Dual):
        e = _exp(x.re)
        return Dual(e, x.du * e)
    return np.exp(x)


def _log(x):
    if isinstance(x, Dual):
        return Dual(_log(x.re), x.du / x.re)
    return np.log(x)


def _sqrt(x):
    if isinstance(x, Dual):
        s = _sqrt(x.re)
        return Dual(s, x.du / (2.0 * s))
    return np.sqrt(x)


def _sinh(x):
    if isinstance(x, Dual):
        return Dual(_sinh(x.re), x.du * _cosh(x.re))
    return np.sinh(x)


def _cosh(x):
    if isinstance(x, Dual):
        return Dual(_cosh(x.re), x.du * _sinh(x.re))
    return np.cosh(x)


def _arcsinh(x):
    if isinstance(x, Dual):
        return Dual(_arcsinh(x.re), x.du / _sqrt(x.re * x.re + 1.0))
    return np.arcsinh(x)


def _arctan(x):
    if isinstance(x, Dual):
        return Dual(_arctan(x.re), x.du / (x.re * x.re + 1.0))
    return np.arctan(x)


def _square(x):
    return x * x


def _binary(name):
    def op(a, b):
        if name == "add":
            return a + b if isinstance(a, Dual) else b + a
        if name == "subtract":
            return a - b if isinstance(a, Dual) else b.__rsub__(a)
        if name == "multiply":
            return a * b if isinstance(a, Dual) else b * a
        if name == "divide":
            return a / b if isinstance(a, Dual) else b.__rtruediv__(a)
        raise AssertionError(name)

    return op


_UFUNCS = {
    np.sin: _sin,
    np.cos: _cos,
    np.exp: _exp,
    np.log: _log,
    np.sqrt: _sqrt,
    np.sinh: _sinh,
    np.cosh: _cosh,
    np.arcsinh: _arcsinh,
    np.arctan: _arctan,
    np.square: _square,
    np.negative: lambda x: -x,
    np.add: _binary("add"),
    np.subtract: _binary("subtract"),
    np.multiply: _binary("multiply"),
    np.true_divide: _binary("divide"),
}


def jvp(f, x, v):
    """Push the tangent ``v`` through ``f`` at ``x``.

    ``f`` maps a sequence of coordinate components to a sequence of output
    components.  Returns ``(f(x), df_x v)`` as two lists.
    """
    out = f([Dual(xi, vi) for xi, vi in zip(x, v)])
    values, tangents = [], []
    for o in out:
        if isinstance(o, Dual):
            values.append(o.re)
            tangents.append(o.du)
        else:
            values.append(o)
            tangents.append(_zero_like(o, x))
    return values, tangents


def _zero_like(o, x):
    # a constant output still needs a tangent with the batch shape of x
    ref = np.asarray(primal(x[0]), dtype=float) if len(x) else np.asarray(0.0)
    zero = np.zeros(np.broadcast(ref, np.asarray(primal(o), dtype=float)).shape)
    # keep nesting depth consistent with the inputs
    probe = x[0] if len(x) else 0.0
    if isinstance(probe, Dual):
        return probe * 0.0 + zero
    return zero


def nested_jet(f, point, order):
    """Evaluate the ``order``-fold nested differential ``d^order f``.

    ``point`` is a list of ``2**order * n`` components laid out as
    ``[base half, fiber half]`` recursively; the result uses the same layout
    with ``m`` components per block.
    """
    if order == 0:
        return list(f(list(point)))
    half = len(point) // 2
    inner = lambda comps: nested_jet(f, comps, order - 1)  # noqa: E731
    values, tangents = jvp(inner, point[:half], point[half:])
    return values + tangents
