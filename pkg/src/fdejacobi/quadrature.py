"""Gauss-Jacobi quadrature on (0, 1) and Riemann-Liouville fractional integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, NumericalFailure
from .specfun import JacobiParams, beta_function, jacobi_G

__all__ = [
    "MAX_ORDER",
    "QuadratureRule",
    "FracIntegralSpec",
    "gauss_jacobi",
    "graded_rule",
    "integrate",
    "frac_integral",
    "apply_N",
]

MAX_ORDER = 512


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights approximating ``int_0^1 (1-t)^a t^b g(t) dt``.

    Rules built by :func:`gauss_jacobi` are exact for polynomials of degree
    ``2 * order - 1``. Composite rules from :func:`graded_rule` reuse the
    type but carry no such guarantee.
    """

    params: JacobiParams
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.nodes.size


def _jacobi_matrix(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(n, dtype=float)
    s = 2.0 * k + a + b
    diag = np.empty(n)
    diag[0] = (b - a) / (a + b + 2.0)
    if n > 1:
        diag[1:] = (b * b - a * a) / (s[1:] * (s[1:] + 2.0))
    off = np.empty(max(n - 1, 0))
    if n > 1:
        # k = 1 written in cancelled form; the general one is 0/0 when a + b = -1
        off[0] = 4.0 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        kk = k[2:]
        ss = s[2:]
        off[1:] = (
            4.0 * kk * (kk + a) * (kk + b) * (kk + a + b)
            / (ss * ss * (ss + 1.0) * (ss - 1.0))
        )
    return diag, np.sqrt(off)


def _jacobi_pair(n: int, a, b, t):
    """``G_n^{(a,b)}`` and ``G_{n-1}^{(a+1,b+1)}`` at ``t`` in the dtype of ``t``."""

    def run(m, a, b):
        prev = np.ones_like(t)
        if m == 0:
            return prev
        cur = (a + b + 2) * t - (b + 1)
        for k in range(1, m):
            s = 2 * k + a + b
            denom = 2 * (k + 1) * (k + a + b + 1) * s
            A = 2 * (s + 1) * (s + 2) * s / denom
            B = (s + 1) * ((a * a - b * b) - s * (s + 2)) / denom
            C = 2 * (k + a) * (k + b) * (s + 2) / denom
            prev, cur = cur, (A * t + B) * cur - C * prev
        return cur

    return run(n, a, b), run(n - 1, a + 1, b + 1)


def _polish(n: int, a: float, b: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton steps on ``G_n`` in ``t``; returns nodes and ``dG_n/dt`` there.

    Rounding in the recurrence limits how well a double-precision root can be
    located near an endpoint, so the polish runs in extended precision where
    the platform provides it.
    """
    ext = np.longdouble
    a_x, b_x = ext(a), ext(b)
    scale = n + a_x + b_x + 1
    tx = t.astype(ext)
    for _ in range(3):
        g, raised = _jacobi_pair(n, a_x, b_x, tx)
        tx = tx - g / (scale * raised)
    _, raised = _jacobi_pair(n, a_x, b_x, tx)
    return tx, scale * raised


def _half_rule(n: int, a: float, b: float, x: np.ndarray, log_c: float, *, middle: bool):
    """Nodes below 1/2 (and at 1/2 if ``middle``) with weights, accurate relative to ``t``."""
    t0 = 0.5 * (1.0 + x[(x <= 0.0) if middle else (x < 0.0)])
    t, dg = _polish(n, a, b, t0)
    w = np.exp(np.longdouble(log_c)) / (t * (1 - t) * dg * dg)
    return t.astype(float), w.astype(float)


@lru_cache(maxsize=256)
def _gauss_jacobi_cached(n: int, a: float, b: float) -> QuadratureRule:
    diag, off = _jacobi_matrix(n, a, b)
    try:
        x = eigh_tridiagonal(diag, off, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Jacobi matrix eigensolve failed for n={n}") from exc
    x = np.sort(x)
    log_c = (
        math.lgamma(n + a + 1)
        + math.lgamma(n + b + 1)
        - math.lgamma(n + a + b + 1)
        - math.lgamma(n + 1)
    )
    # Each half is computed in the variable measured from its own endpoint:
    # the upper half comes from the mirrored rule, where it is the lower half.
    t_lo, w_lo = _half_rule(n, a, b, x, log_c, middle=True)
    s_hi, w_hi = _half_rule(n, b, a, np.sort(-x), log_c, middle=False)
    t = np.concatenate([t_lo, (1.0 - s_hi)[::-1]])
    w = np.concatenate([w_lo, w_hi[::-1]])
    # The log-gamma constant is good to only ~1e-13 for large n; the exact
    # zeroth moment fixes the common scale.
    w *= beta_function(a + 1, b + 1) / math.fsum(w)

    if t.size != n or not (np.all(t > 0) and np.all(t < 1) and np.all(np.diff(t) > 0)):
        raise NumericalFailure(f"Gauss-Jacobi nodes left (0, 1) for n={n}, a={a}, b={b}")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise NumericalFailure(f"non-positive Gauss-Jacobi weight for n={n}, a={a}, b={b}")
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(JacobiParams(a, b), n, t, w)


def gauss_jacobi(n: int, p: JacobiParams) -> QuadratureRule:
    """Gauss rule for the weight ``(1-t)^a t^b`` on (0, 1).

    Nodes are the eigenvalues of the Jacobi matrix (Golub-Welsch), polished
    by Newton steps on ``G_n``. Weights come from the closed form in terms of
    the derivative of ``G_n`` at the nodes.
    """
    if not 1 <= n <= MAX_ORDER:
        raise DomainError(f"quadrature order must lie in [1, {MAX_ORDER}], got {n}")
    p.check_weight()
    return _gauss_jacobi_cached(int(n), float(p.a), float(p.b))


@lru_cache(maxsize=64)
def _graded_cached(a: float, b: float, order: int, levels: int, ratio: float, central: int):
    left_end = 0.5 * ratio**levels
    nodes: list[np.ndarray] = []
    weights: list[np.ndarray] = []

    # end panels absorb the weight singularity exactly
    r0 = gauss_jacobi(order, JacobiParams(0.0, b))
    x = left_end * r0.nodes
    nodes.append(x)
    weights.append(left_end ** (b + 1.0) * r0.weights * (1.0 - x) ** a)

    breaks = [0.5 * ratio**k for k in range(levels, 0, -1)]
    inner = np.linspace(0.5 * ratio, 1.0 - 0.5 * ratio, central + 1)
    breaks += list(inner[1:-1])
    breaks += [1.0 - 0.5 * ratio**k for k in range(1, levels + 1)]
    leg = gauss_jacobi(order, JacobiParams(0.0, 0.0))
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        x = lo + (hi - lo) * leg.nodes
        nodes.append(x)
        weights.append((hi - lo) * leg.weights * (1.0 - x) ** a * x**b)

    r1 = gauss_jacobi(order, JacobiParams(0.0, a))
    s = left_end * r1.nodes
    x = 1.0 - s
    nodes.append(x[::-1])
    weights.append((left_end ** (a + 1.0) * r1.weights * x**b)[::-1])

    t = np.concatenate(nodes)
    w = np.concatenate(weights)
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(JacobiParams(a, b), order, t, w)


def graded_rule(
    p: JacobiParams,
    order: int = 48,
    *,
    levels: int = 12,
    ratio: float = 0.15,
    central: int = 4,
) -> QuadratureRule:
    """Composite rule for ``int_0^1 (1-t)^a t^b g(t) dt`` with singular ``g``.

    Panels are refined geometrically toward both endpoints, so integrands
    with algebraic endpoint behaviour beyond the weight still converge
    quickly. ``order`` is the Gauss order on each panel.
    """
    p.check_weight()
    return _graded_cached(float(p.a), float(p.b), int(order), levels, ratio, central)


def _evaluate(g: Callable, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(g(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    return vals


def integrate(rule: QuadratureRule, g: Callable) -> float:
    """``sum_m w_m g(x_m)``, approximating ``int_0^1 rho^{(a,b)} g``."""
    vals = _evaluate(g, rule.nodes)
    if not np.all(np.isfinite(vals)):
        bad = rule.nodes[~np.isfinite(vals)][0]
        raise NumericalFailure(f"integrand is not finite at node t={bad!r}")
    # numpy reduces float arrays pairwise, so the result is order-deterministic
    return float(np.sum(rule.weights * vals))


@dataclass(frozen=True)
class FracIntegralSpec:
    sigma: float
    side: Literal["left", "right"] = "left"

    def __post_init__(self) -> None:
        if not 0.0 < self.sigma < 1.0:
            raise DomainError(f"fractional order must lie in (0, 1), got {self.sigma}")
        if self.side not in ("left", "right"):
            raise DomainError(f"side must be 'left' or 'right', got {self.side!r}")


def frac_integral(
    spec: FracIntegralSpec,
    w: Callable,
    x: float,
    n: int = 64,
    *,
    singular: tuple[float, float] = (0.0, 0.0),
) -> float:
    """Left or right Riemann-Liouville integral of ``w`` at ``x``.

    The substitution onto (0, 1) turns the kernel ``(x - s)^{sigma - 1}`` into
    a Jacobi weight. ``singular = (a_w, b_w)`` declares that ``w`` behaves
    like ``(1 - s)^{a_w} s^{b_w}`` near the endpoint being integrated from;
    that factor is absorbed into the rule as well.
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"evaluation point must lie in (0, 1), got {x}")
    sigma = spec.sigma
    a_w, b_w = singular
    if spec.side == "left":
        rule = gauss_jacobi(n, JacobiParams(sigma - 1.0, b_w))
        t = rule.nodes
        vals = _evaluate(w, x * t) / t**b_w
        scale = x**sigma
    else:
        rule = gauss_jacobi(n, JacobiParams(a_w, sigma - 1.0))
        t = rule.nodes
        vals = _evaluate(w, x + (1.0 - x) * t) / (1.0 - t) ** a_w
        scale = (1.0 - x) ** sigma
    if not np.all(np.isfinite(vals)):
        raise NumericalFailure(f"fractional integrand is not finite near x={x}")
    return scale * float(np.sum(rule.weights * vals)) / math.gamma(sigma)


def apply_N(
    alpha: float,
    r: float,
    q: Callable,
    x: float,
    *,
    h: float = 1e-3,
    n: int = 64,
    singular: tuple[float, float] = (0.0, 0.0),
) -> float:
    """Numerical ``D (r 0I^{2-alpha} + (1-r) xI1^{2-alpha}) q`` at ``x``.

    Validation only: the fractional integrals use :func:`frac_integral` and
    the outer derivative a five-point centred difference with step ``h``.
    """
    if not h * 2 < x < 1.0 - 2 * h:
        raise DomainError(f"x={x} too close to the boundary for step h={h}")
    left = FracIntegralSpec(2.0 - alpha, "left")
    right = FracIntegralSpec(2.0 - alpha, "right")

    def g(y: float) -> float:
        val = 0.0
        if r != 0.0:
            val += r * frac_integral(left, q, y, n, singular=singular)
        if r != 1.0:
            val += (1.0 - r) * frac_integral(right, q, y, n, singular=singular)
        return val

    return (-g(x + 2 * h) + 8 * g(x + h) - 8 * g(x - h) + g(x - 2 * h)) / (12 * h)
