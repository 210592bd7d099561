"""Truncated power-series arithmetic in one and two variables.

Everything the operator-expansion flow needs (products, reciprocals,
logarithms, derivatives) is done on coefficient arrays, discarding every
term whose (total) degree exceeds the truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d


class SeriesDomainError(ValueError):
    """Raised when a series function is evaluated outside its domain."""


@dataclass(frozen=True, eq=False)
class TruncatedSeries1:
    """Series ``sum_k coeffs[k] * phi**k`` truncated at ``order``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, order: int) -> "TruncatedSeries1":
        return cls(np.zeros(order + 1))

    @classmethod
    def constant(cls, value: float, order: int) -> "TruncatedSeries1":
        c = np.zeros(order + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order: int) -> "TruncatedSeries1":
        c = np.zeros(order + 1)
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def _coerce(self, other) -> "TruncatedSeries1":
        if isinstance(other, TruncatedSeries1):
            if other.order != self.order:
                raise ValueError(f"order mismatch: {self.order} vs {other.order}")
            return other
        return TruncatedSeries1.constant(float(other), self.order)

    def __add__(self, other):
        return TruncatedSeries1(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return TruncatedSeries1(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other):
        return TruncatedSeries1(self._coerce(other).coeffs - self.coeffs)

    def __neg__(self):
        return TruncatedSeries1(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries1):
            other = self._coerce(other)
            return TruncatedSeries1(np.convolve(self.coeffs, other.coeffs)[: self.order + 1])
        return TruncatedSeries1(self.coeffs * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries1):
            return self * other.reciprocal()
        return TruncatedSeries1(self.coeffs / float(other))

    def __pow__(self, k: int):
        if k < 0:
            return self.reciprocal() ** (-k)
        out = TruncatedSeries1.constant(1.0, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def reciprocal(self) -> "TruncatedSeries1":
        c = self.coeffs
        if c[0] == 0.0:
            raise SeriesDomainError("reciprocal of a series with zero constant term")
        n = self.order
        out = np.zeros(n + 1)
        out[0] = 1.0 / c[0]
        for k in range(1, n + 1):
            out[k] = -np.dot(c[1 : k + 1], out[k - 1 :: -1][:k]) / c[0]
        return TruncatedSeries1(out)

    def derivative(self, m: int = 1) -> "TruncatedSeries1":
        """m-th derivative, zero-padded back to the same order."""
        c = self.coeffs
        out = np.zeros_like(c)
        if m <= self.order:
            k = np.arange(m, self.order + 1)
            fall = np.ones(k.size)
            for j in range(m):
                fall *= k - j
            out[: self.order + 1 - m] = c[m:] * fall
        return TruncatedSeries1(out)

    def exp(self) -> "TruncatedSeries1":
        c = self.coeffs
        n = self.order
        out = np.zeros(n + 1)
        out[0] = math.exp(c[0])
        # a' = c' a  =>  k a_k = sum_j j c_j a_{k-j}
        for k in range(1, n + 1):
            j = np.arange(1, k + 1)
            out[k] = np.dot(j * c[1 : k + 1], out[k - j]) / k
        return TruncatedSeries1(out)


def series_log1p(u: TruncatedSeries1) -> TruncatedSeries1:
    """``log(1 + u)`` for a truncated series with ``u_0 > -1``.

    Split as ``log(1 + u_0) + log(1 + w)`` with ``w = (u - u_0)/(1 + u_0)``
    and sum the alternating Mercator series; ``w`` has no constant term so
    ``order`` terms are exact.
    """
    c = u.coeffs
    base = 1.0 + c[0]
    if not base > 0.0:
        raise SeriesDomainError(f"log1p needs constant term > -1, got {c[0]!r}")
    n = u.order
    w = c.copy()
    w[0] = 0.0
    w /= base
    out = np.zeros(n + 1)
    out[0] = math.log(base)
    power = np.zeros(n + 1)
    power[0] = 1.0
    for k in range(1, n + 1):
        power = np.convolve(power, w)[: n + 1]
        if not power.any():
            break
        out += ((-1) ** (k + 1) / k) * power
    return TruncatedSeries1(out)


def log1p_coeffs(u: np.ndarray) -> np.ndarray:
    """Coefficients of ``log(1 + u)`` from the derivative recurrence.

    Same result as :func:`series_log1p` on raw arrays, ``O(N^2)`` and free of
    intermediate objects; used inside integrator right-hand sides.  With
    ``f = 1 + u`` and ``L = log f``: ``k f_0 L_k = k f_k - sum_j j L_j f_{k-j}``.
    """
    f = np.array(u, dtype=float)
    f[0] += 1.0
    if not f[0] > 0.0:
        raise SeriesDomainError(f"log1p needs constant term > -1, got {u[0]!r}")
    n = f.size - 1
    out = np.empty(n + 1)
    out[0] = math.log(f[0])
    jl = np.zeros(n + 1)  # j * L_j
    for k in range(1, n + 1):
        acc = k * f[k] - np.dot(jl[1:k], f[k - 1 : 0 : -1])
        jl[k] = acc / f[0]
        out[k] = jl[k] / k
    return out


def _tri_mask(order: int) -> np.ndarray:
    i, j = np.indices((order + 1, order + 1))
    return (i + j) <= order


@dataclass(frozen=True, eq=False)
class TruncatedSeries2:
    """Two-variable series ``sum c[i, j] x1**i x2**j`` with ``i + j <= order``.

    Stored as a square ``(order+1, order+1)`` array whose entries above the
    anti-diagonal are kept at exactly zero.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficients must be a square 2-D array")
        c = np.where(_tri_mask(c.shape[0] - 1), c, 0.0)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, order: int) -> "TruncatedSeries2":
        return cls(np.zeros((order + 1, order + 1)))

    @classmethod
    def constant(cls, value: float, order: int) -> "TruncatedSeries2":
        c = np.zeros((order + 1, order + 1))
        c[0, 0] = value
        return cls(c)

    @classmethod
    def from_dict(cls, terms: dict, order: int) -> "TruncatedSeries2":
        c = np.zeros((order + 1, order + 1))
        for (i, j), v in terms.items():
            if i + j > order:
                raise ValueError(f"term x1^{i} x2^{j} exceeds order {order}")
            c[i, j] += v
        return cls(c)

    def to_dict(self) -> dict:
        return {(int(i), int(j)): float(self.coeffs[i, j]) for i, j in zip(*np.nonzero(self.coeffs))}

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def _coerce(self, other) -> "TruncatedSeries2":
        if isinstance(other, TruncatedSeries2):
            if other.order != self.order:
                raise ValueError(f"order mismatch: {self.order} vs {other.order}")
            return other
        return TruncatedSeries2.constant(float(other), self.order)

    def __add__(self, other):
        return TruncatedSeries2(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return TruncatedSeries2(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other):
        return TruncatedSeries2(self._coerce(other).coeffs - self.coeffs)

    def __neg__(self):
        return TruncatedSeries2(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries2):
            other = self._coerce(other)
            n = self.order + 1
            return TruncatedSeries2(convolve2d(self.coeffs, other.coeffs)[:n, :n])
        return TruncatedSeries2(self.coeffs * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries2):
            return self * other.reciprocal()
        return TruncatedSeries2(self.coeffs / float(other))

    def __call__(self, x1, x2):
        return np.polynomial.polynomial.polyval2d(x1, x2, self.coeffs)

    def derivative(self, axis: int, m: int = 1) -> "TruncatedSeries2":
        c = self.coeffs
        for _ in range(m):
            k = np.arange(c.shape[axis], dtype=float)
            d = np.zeros_like(c)
            if axis == 0:
                d[:-1, :] = c[1:, :] * k[1:, None]
            else:
                d[:, :-1] = c[:, 1:] * k[None, 1:]
            c = d
        return TruncatedSeries2(c)

    def _geometric(self, w: "TruncatedSeries2", weights) -> np.ndarray:
        # sum_k weights(k) * w**k for w without constant term
        out = np.zeros_like(w.coeffs)
        power = TruncatedSeries2.constant(1.0, self.order)
        for k in range(1, self.order + 1):
            power = power * w
            if not power.coeffs.any():
                break
            out += weights(k) * power.coeffs
        return out

    def reciprocal(self) -> "TruncatedSeries2":
        c0 = self.coeffs[0, 0]
        if c0 == 0.0:
            raise SeriesDomainError("reciprocal of a series with zero constant term")
        w = TruncatedSeries2(self.coeffs / c0 - TruncatedSeries2.constant(1.0, self.order).coeffs)
        out = self._geometric(w, lambda k: (-1.0) ** k)
        out[0, 0] += 1.0
        return TruncatedSeries2(out / c0)


def series2_log1p(u: TruncatedSeries2) -> TruncatedSeries2:
    """Two-variable analogue of :func:`series_log1p`."""
    base = 1.0 + u.coeffs[0, 0]
    if not base > 0.0:
        raise SeriesDomainError(f"log1p needs constant term > -1, got {u.coeffs[0, 0]!r}")
    wc = u.coeffs.copy()
    wc[0, 0] = 0.0
    w = TruncatedSeries2(wc / base)
    out = u._geometric(w, lambda k: (-1) ** (k + 1) / k)
    out[0, 0] = math.log(base)
    return TruncatedSeries2(out)


def log_coeffs_2d(f: np.ndarray) -> np.ndarray:
    """``log f`` for a square coefficient array with ``f[0, 0] > 0``.

    Graded by total degree: with ``E = x1 d/dx1 + x2 d/dx2`` one has
    ``E log f = (E f)/f``, so the degree-``k`` part obeys
    ``f_0 k L_k = k f_k - sum_{j<k} j L_j f_{k-j}``; products of homogeneous
    parts are plain 1-D convolutions.  Array twin of :func:`series2_log1p`.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0] - 1
    f0 = f[0, 0]
    if not f0 > 0.0:
        raise SeriesDomainError(f"log needs a positive constant term, got {f0!r}")
    idx = np.arange(n + 1)
    parts = [f[idx[: k + 1], k - idx[: k + 1]] for k in range(n + 1)]  # entry i: x1^i x2^(k-i)
    jl = [None] * (n + 1)  # j * L_j
    out = np.zeros_like(f)
    out[0, 0] = math.log(f0)
    for k in range(1, n + 1):
        acc = k * parts[k]
        for j in range(1, k):
            acc = acc - np.convolve(jl[j], parts[k - j])
        jl[k] = acc / f0
        out[idx[: k + 1], k - idx[: k + 1]] = jl[k] / k
    return out


def series_log(u):
    """Natural log of a series with positive constant term (1-D or 2-D)."""
    if isinstance(u, TruncatedSeries2):
        return series2_log1p(u - 1.0)
    return series_log1p(u - 1.0)
