"""Truncated Taylor arithmetic in one variable (time).

A :class:`Taylor` holds normalized coefficients ``c[k] = d^k u / dt^k / k!`` of an
array-valued function, stacked along a leading axis. Material laws written with
ordinary array operators (``+``, ``*``, ``@``, indexing, ``sum``) accept Taylor
inputs unchanged, which is how coefficient time-jets are computed without a
table of chain-rule constants.
"""
from __future__ import annotations

from math import factorial
from typing import Callable, Sequence

import numpy as np


class Taylor:
    __array_ufunc__ = None  # make ndarray operators defer to us

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs)
        if self.c.ndim < 1:
            raise ValueError("Taylor coefficients need a leading order axis")

    # construction ---------------------------------------------------------
    @classmethod
    def variable(cls, t0: float, order: int) -> "Taylor":
        c = np.zeros(order)
        c[0] = t0
        if order > 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def from_derivatives(cls, derivs: Sequence[np.ndarray]) -> "Taylor":
        return cls(np.stack([np.asarray(d) / factorial(k) for k, d in enumerate(derivs)]))

    def derivatives(self) -> list[np.ndarray]:
        return [self.c[k] * factorial(k) for k in range(self.order)]

    @property
    def order(self) -> int:
        return self.c.shape[0]

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    # helpers --------------------------------------------------------------
    def _lift(self, other) -> np.ndarray:
        if isinstance(other, Taylor):
            if other.order != self.order:
                raise ValueError("Taylor order mismatch")
            return other.c
        arr = np.asarray(other)
        out = np.zeros((self.order,) + arr.shape, dtype=np.result_type(arr, self.c))
        out[0] = arr
        return out

    @staticmethod
    def _align(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        da, db = a.ndim - 1, b.ndim - 1
        if da < db:
            a = a.reshape((a.shape[0],) + (1,) * (db - da) + a.shape[1:])
        elif db < da:
            b = b.reshape((b.shape[0],) + (1,) * (da - db) + b.shape[1:])
        return a, b

    def _binary(self, other, op):
        a, b = self._align(self.c, self._lift(other))
        return Taylor(op(a, b))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __neg__(self):
        return Taylor(-self.c)

    def __pos__(self):
        return self

    @staticmethod
    def _cauchy(a: np.ndarray, b: np.ndarray, prod) -> np.ndarray:
        K = a.shape[0]
        terms = [sum(prod(a[i], b[k - i]) for i in range(k + 1)) for k in range(K)]
        return np.stack([np.asarray(t) for t in terms])

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            arr = np.asarray(other)
            a, b = self._align(self.c, arr[None])
            return Taylor(a * b)
        a, b = self._align(self.c, other.c)
        return Taylor(self._cauchy(a, b, np.multiply))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Taylor):
            return self * other.reciprocal()
        arr = np.asarray(other)
        a, b = self._align(self.c, arr[None])
        return Taylor(a / b)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Taylor":
        a = self.c
        r = [1.0 / a[0]]
        for k in range(1, self.order):
            s = sum(a[j] * r[k - j] for j in range(1, k + 1))
            r.append(-s * r[0])
        return Taylor(np.stack(r))

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = Taylor(self._lift(np.ones(self.shape)))
        for _ in range(n):
            out = out * self
        return out

    def __matmul__(self, other):
        b = self._lift(other)
        return Taylor(self._cauchy(self.c, b, np.matmul))

    def __rmatmul__(self, other):
        a = self._lift(other)
        return Taylor(self._cauchy(a, self.c, np.matmul))

    # shape manipulation ---------------------------------------------------
    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Taylor(self.c[(slice(None),) + key])

    def sum(self, axis=None):
        if axis is None:
            return Taylor(self.c.reshape(self.order, -1).sum(axis=1))
        axes = axis if isinstance(axis, tuple) else (axis,)
        shifted = tuple(a + 1 if a >= 0 else a for a in axes)
        return Taylor(self.c.sum(axis=shifted))

    def swapaxes(self, a1: int, a2: int):
        s1 = a1 + 1 if a1 >= 0 else a1
        s2 = a2 + 1 if a2 >= 0 else a2
        return Taylor(self.c.swapaxes(s1, s2))

    @property
    def mT(self):
        return self.swapaxes(-1, -2)

    def __repr__(self) -> str:
        return f"Taylor(order={self.order}, shape={self.shape})"


# elementary functions ------------------------------------------------------
def _sincos(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    K = a.shape[0]
    s = [np.sin(a[0])]
    c = [np.cos(a[0])]
    for k in range(1, K):
        s.append(sum(j * a[j] * c[k - j] for j in range(1, k + 1)) / k)
        c.append(-sum(j * a[j] * s[k - j] for j in range(1, k + 1)) / k)
    return np.stack(s), np.stack(c)


def sin(x):
    if isinstance(x, Taylor):
        return Taylor(_sincos(x.c)[0])
    return np.sin(x)


def cos(x):
    if isinstance(x, Taylor):
        return Taylor(_sincos(x.c)[1])
    return np.cos(x)


def exp(x):
    if not isinstance(x, Taylor):
        return np.exp(x)
    a = x.c
    e = [np.exp(a[0])]
    for k in range(1, x.order):
        e.append(sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k)
    return Taylor(np.stack(e))


def value_of(x) -> np.ndarray:
    """Zeroth coefficient of a Taylor, or the array itself."""
    return x.value if isinstance(x, Taylor) else np.asarray(x)


def derivatives_of(result, order: int, like: np.ndarray | None = None) -> list[np.ndarray]:
    """Derivative list of ``result``; constants get exact zero higher entries."""
    if isinstance(result, Taylor):
        return result.derivatives()
    arr = np.asarray(result)
    return [arr] + [np.zeros_like(arr) for _ in range(order - 1)]


def time_derivatives(func: Callable, t0: float, order: int) -> list[np.ndarray]:
    """Exact derivatives ``func^(k)(t0)``, k < order, for jet-aware ``func``."""
    return derivatives_of(func(Taylor.variable(t0, order)), order)
