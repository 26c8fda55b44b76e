"""Special functions and shifted Jacobi polynomials on [0, 1].

The shifted Jacobi polynomial ``G_n^{(a,b)}(t) = P_n^{(a,b)}(2t - 1)`` is
orthogonal on (0, 1) under the weight ``rho^{(a,b)}(t) = (1 - t)^a t^b``.
Note the order of the exponents: ``a`` sits at t = 1 and ``b`` at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NumericalFailure

__all__ = [
    "JacobiParams",
    "log_gamma",
    "rho",
    "jacobi_G",
    "jacobi_table",
    "jacobi_series",
    "jacobi_G_deriv",
    "jacobi_norm_sq",
    "hyp2f1",
    "incomplete_beta",
    "beta_function",
]


@dataclass(frozen=True)
class JacobiParams:
    """Exponent pair ``(a, b)`` of the weight ``(1 - t)^a t^b``."""

    a: float
    b: float

    def check_weight(self) -> None:
        if not (self.a > -1.0 and self.b > -1.0):
            raise DomainError(
                f"weight (1-t)^{self.a} t^{self.b} is not integrable on (0, 1)"
            )

    def swapped(self) -> JacobiParams:
        return JacobiParams(self.b, self.a)

    def shifted(self, k: float) -> JacobiParams:
        return JacobiParams(self.a + k, self.b + k)


def log_gamma(x):
    """``ln Gamma(x)`` for positive ``x`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return special.gammaln(arr)


def rho(p: JacobiParams, t):
    """Weight ``(1 - t)^a t^b``."""
    t = np.asarray(t, dtype=float)
    return (1.0 - t) ** p.a * t**p.b


def _recurrence_coeffs(n: int, a: float, b: float) -> tuple[float, float, float]:
    # G_{n+1} = (A t + B) G_n - C G_{n-1} for n >= 1. Working in t rather than
    # x = 2t - 1 keeps full relative precision for small t.
    s = 2 * n + a + b
    denom = 2.0 * (n + 1) * (n + a + b + 1) * s
    A = 2.0 * (s + 1) * (s + 2) * s / denom
    B = (s + 1) * ((a * a - b * b) - s * (s + 2)) / denom
    C = 2.0 * (n + a) * (n + b) * (s + 2) / denom
    return A, B, C


def _degree_one(a: float, b: float, t):
    return (a + b + 2.0) * t - (b + 1.0)


def jacobi_table(nmax: int, p: JacobiParams, t) -> np.ndarray:
    """Values ``G_0 .. G_nmax`` at ``t``; shape ``(nmax + 1,) + shape(t)``."""
    t = np.asarray(t, dtype=float)
    out = np.empty((nmax + 1,) + t.shape)
    out[0] = 1.0
    if nmax == 0:
        return out
    a, b = p.a, p.b
    out[1] = _degree_one(a, b, t)
    for n in range(1, nmax):
        A, B, C = _recurrence_coeffs(n, a, b)
        out[n + 1] = (A * t + B) * out[n] - C * out[n - 1]
    return out


def jacobi_G(n: int, p: JacobiParams, t):
    """Shifted Jacobi polynomial ``G_n^{(a,b)}(t)``; zero for ``n < 0``."""
    t = np.asarray(t, dtype=float)
    if n < 0:
        return np.zeros_like(t)[()]
    prev = np.ones_like(t)
    if n == 0:
        return prev[()]
    a, b = p.a, p.b
    cur = _degree_one(a, b, t)
    for k in range(1, n):
        A, B, C = _recurrence_coeffs(k, a, b)
        prev, cur = cur, (A * t + B) * cur - C * prev
    return cur[()]


def jacobi_series(coeffs, p: JacobiParams, t):
    """``sum_i coeffs[i] * G_i^{(a,b)}(t)`` in one recurrence sweep."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    if coeffs.size == 0:
        return total[()]
    prev = np.ones_like(t)
    total += coeffs[0] * prev
    if coeffs.size == 1:
        return total[()]
    a, b = p.a, p.b
    cur = _degree_one(a, b, t)
    total += coeffs[1] * cur
    for k in range(1, coeffs.size - 1):
        A, B, C = _recurrence_coeffs(k, a, b)
        prev, cur = cur, (A * t + B) * cur - C * prev
        total += coeffs[k + 1] * cur
    return total[()]


def jacobi_G_deriv(n: int, p: JacobiParams, k: int, t):
    """``d^k/dt^k G_n^{(a,b)}(t)`` via the parameter-raising identity."""
    if k < 0:
        raise DomainError(f"derivative order must be nonnegative, got {k}")
    if k == 0:
        return jacobi_G(n, p, t)
    if k > n:
        return np.zeros_like(np.asarray(t, dtype=float))[()]
    s = n + p.a + p.b + 1.0
    factor = math.exp(math.lgamma(s + k) - math.lgamma(s))
    return factor * jacobi_G(n - k, p.shifted(k), t)


def jacobi_norm_sq(n: int, p: JacobiParams) -> float:
    """``int_0^1 rho^{(a,b)} G_n^2`` in closed form; log-gamma differences for large ``n``."""
    p.check_weight()
    a, b = p.a, p.b
    if n == 0:
        # (a+b+1) Gamma(a+b+1) = Gamma(a+b+2) keeps the sign right when a+b+1 < 0
        return math.exp(math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2))
    if n + max(a, b, a + b) + 1 < 171:
        # direct products are several ulp more accurate than log-gamma differences
        g = math.gamma
        # paired as two ratios so no intermediate overflows
        ratio = (g(n + a + 1) / g(n + 1)) * (g(n + b + 1) / g(n + a + b + 1))
        return ratio / (2 * n + a + b + 1)
    lg = (
        math.lgamma(n + a + 1)
        + math.lgamma(n + b + 1)
        - math.lgamma(n + 1)
        - math.lgamma(n + a + b + 1)
    )
    return math.exp(lg) / (2 * n + a + b + 1)


def beta_function(p: float, q: float) -> float:
    """Complete beta function ``B(p, q)`` for positive arguments."""
    if not (p > 0 and q > 0):
        raise DomainError(f"beta function requires p, q > 0, got ({p}, {q})")
    return float(special.beta(p, q))


def incomplete_beta(x, p: float, q: float):
    """Non-regularized incomplete beta ``int_0^x s^{p-1} (1-s)^{q-1} ds``."""
    if not (p > 0 and q > 0):
        raise DomainError(f"incomplete_beta requires p, q > 0, got ({p}, {q})")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("incomplete_beta requires 0 <= x <= 1")
    return (special.betainc(p, q, x) * beta_function(p, q))[()]


_SERIES_CAP = 1_000_000
_SERIES_RTOL = 1e-16


def _is_nonpositive_int(z: float) -> bool:
    return z <= 0 and z == math.floor(z)


def _rgamma(z: float) -> float:
    return 0.0 if _is_nonpositive_int(z) else 1.0 / math.gamma(z)


def _hyp2f1_series(a: float, b: float, c: float, x: np.ndarray) -> np.ndarray:
    term = np.ones_like(x)
    total = np.ones_like(x)
    for n in range(_SERIES_CAP):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * x
        total = total + term
        if np.all(np.abs(term) <= _SERIES_RTOL * np.abs(total)):
            return total
    raise NumericalFailure(
        f"2F1({a}, {b}; {c}; x) series did not converge in {_SERIES_CAP} terms"
    )


def hyp2f1(a: float, b: float, c: float, x):
    """Gauss hypergeometric function for real parameters and ``0 <= x <= 1``.

    The power series is summed directly for ``x <= 0.8``. Above that the
    standard ``x -> 1 - x`` connection formula is used, unless ``c - a - b``
    is an integer, in which case the series is summed directly.
    """
    if _is_nonpositive_int(c):
        raise DomainError(f"2F1 is undefined for c = {c}")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("hyp2f1 is implemented for 0 <= x <= 1 only")
    s = c - a - b
    if np.any(x == 1.0) and not s > 0:
        raise DomainError(f"2F1 diverges at x = 1 when c - a - b = {s} <= 0")

    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    at_one = x == 1.0
    if np.any(at_one):
        out[at_one] = math.gamma(c) * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
    connect = (x > 0.8) & ~at_one
    if s == math.floor(s):
        connect[...] = False
    direct = ~connect & ~at_one
    if np.any(direct):
        out[direct] = _hyp2f1_series(a, b, c, x[direct])
    if np.any(connect):
        y = 1.0 - x[connect]
        gc = math.gamma(c)
        first = gc * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
        second = gc * math.gamma(-s) * _rgamma(a) * _rgamma(b)
        val = np.zeros_like(y)
        if first != 0.0:
            val += first * _hyp2f1_series(a, b, 1.0 - s, y)
        if second != 0.0:
            val += second * y**s * _hyp2f1_series(c - a, c - b, 1.0 + s, y)
        out[connect] = val
    return out[0] if scalar else out
