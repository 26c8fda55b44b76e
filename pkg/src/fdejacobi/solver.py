"""Spectral solver for the flux formulation of the two-sided fractional problem.

The flux ``q~ = -K u'`` satisfies ``N q~ = f`` with
``N = D (r 0I^{2-alpha} + (1-r) xI1^{2-alpha})``. The operator is diagonal on
the weighted Jacobi basis ``(1-x)^{alpha-beta} x^beta G_n^{(alpha-beta, beta)}``
and maps it onto ``G_{n+1}^{(beta-1, alpha-beta-1)}``, so the coefficients
follow directly from the Jacobi coefficients of ``f``. The kernel of ``N`` is
spanned by ``k(x) = (1-x)^{alpha-beta-1} x^{beta-1}``; its multiple ``c_{-2}``
is fixed by ``u(1) = 0``.

Problems with ``r < 1/2`` are solved on the mirrored interval ``x -> 1 - x``
(which swaps ``r`` and ``1 - r``) and mapped back.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericalFailure
from .quadrature import MAX_ORDER, gauss_jacobi
from .specfun import (
    JacobiParams,
    incomplete_beta,
    jacobi_norm_sq,
    jacobi_series,
    jacobi_table,
)

log = logging.getLogger(__name__)

__all__ = [
    "PowerSum",
    "ProblemSpec",
    "SpectralParams",
    "SpectralSolution",
    "beta_from_r",
    "r_from_beta",
    "build_params",
    "kernel",
    "compute_f_coeffs",
    "assemble",
    "eval_qN",
    "eval_uN",
    "compute_c_minus2",
    "constraint_residual",
    "write_cache",
    "read_cache",
]


@dataclass(frozen=True)
class PowerSum:
    """``sum_k coef_k x^{p_k} (1-x)^{q_k}`` with the exponents kept explicit.

    Keeping the endpoint powers lets quadrature absorb them into the weight,
    so Jacobi coefficients of such right-hand sides are exact.
    """

    terms: tuple[tuple[float, float, float], ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for coef, p, q in self.terms:
            total = total + coef * x**p * (1.0 - x) ** q
        return total[()]

    def reflected(self) -> PowerSum:
        return PowerSum(tuple((c, q, p) for c, p, q in self.terms))

    @property
    def least_power(self) -> float:
        return min(min(p, q) for _, p, q in self.terms)


def _mirror(g: Callable | None, sign: float = 1.0) -> Callable | None:
    if g is None:
        return None
    return lambda x: sign * g(1.0 - np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Fractional diffusion problem ``-D((r 0I + (1-r) xI1)^{2-alpha} K Du) = f``.

    ``K`` is either a positive number (constant diffusivity) or a vectorised
    callable. ``f_coeffs``, when given, are the Jacobi coefficients
    ``f_i = int rho^{(beta-1, alpha-beta-1)} f G_i`` and replace quadrature of ``f``.
    """

    alpha: float
    r: float
    f: Callable
    K: float | Callable = 1.0
    exact_u: Callable | None = None
    exact_q: Callable | None = None
    K_min: float | None = None
    K_max: float | None = None
    f_coeffs: np.ndarray | None = None
    singular_power: float | None = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not 0.0 <= self.r <= 1.0:
            raise DomainError(f"r must lie in [0, 1], got {self.r}")
        if callable(self.K):
            if self.K_min is None or self.K_max is None:
                vals = np.asarray(self.K(np.linspace(0.0, 1.0, 1001)), dtype=float)
                object.__setattr__(self, "K_min", float(vals.min()))
                object.__setattr__(self, "K_max", float(vals.max()))
        else:
            object.__setattr__(self, "K", float(self.K))
            object.__setattr__(self, "K_min", self.K)
            object.__setattr__(self, "K_max", self.K)
        if not self.K_min > 0:
            raise DomainError(f"diffusivity must be positive, K_min = {self.K_min}")
        if self.f_coeffs is not None:
            object.__setattr__(self, "f_coeffs", np.asarray(self.f_coeffs, dtype=float))

    @property
    def K_constant(self) -> float | None:
        return None if callable(self.K) else self.K

    def K_at(self, x):
        x = np.asarray(x, dtype=float)
        if callable(self.K):
            return np.asarray(self.K(x), dtype=float)
        return np.full_like(x, self.K)

    def reflected(self) -> ProblemSpec:
        """The same problem posed on ``x -> 1 - x``; flux changes sign."""
        f = self.f.reflected() if isinstance(self.f, PowerSum) else _mirror(self.f)
        coeffs = None
        if self.f_coeffs is not None:
            coeffs = self.f_coeffs * (-1.0) ** np.arange(self.f_coeffs.size)
        return replace(
            self,
            r=1.0 - self.r,
            f=f,
            K=_mirror(self.K) if callable(self.K) else self.K,
            exact_u=_mirror(self.exact_u),
            exact_q=_mirror(self.exact_q, -1.0),
            f_coeffs=coeffs,
        )


def _sin_ratio(alpha: float, beta: float) -> float:
    sb = math.sin(math.pi * beta)
    return sb / (math.sin(math.pi * (alpha - beta)) + sb)


def r_from_beta(alpha: float, beta: float) -> float:
    """Weight ``r`` that produces the exponent ``beta``."""
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    if not alpha - 1.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [alpha - 1, 1] = [{alpha - 1}, 1], got {beta}")
    return _sin_ratio(alpha, beta)


def beta_from_r(alpha: float, r: float) -> float:
    """Root ``beta`` in ``[alpha - 1, 1]`` of ``r (sin pi(alpha-beta) + sin pi beta) = sin pi beta``.

    The residual is nonpositive at ``alpha - 1`` and nonnegative at ``1``, so
    bisection always brackets the root.
    """
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [0, 1], got {r}")
    if r == 1.0:
        warnings.warn("r = 1 gives lambda_{-1} = 0; the kernel term is undefined", stacklevel=2)
        return alpha - 1.0
    if r == 0.0:
        return 1.0

    def resid(b: float) -> float:
        return r * (math.sin(math.pi * (alpha - b)) + math.sin(math.pi * b)) - math.sin(math.pi * b)

    lo, hi = alpha - 1.0, 1.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if resid(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class SpectralParams:
    alpha: float
    r: float
    beta: float
    lambda_minus1: float
    lambdas: np.ndarray

    @property
    def test_params(self) -> JacobiParams:
        """Exponents ``(beta-1, alpha-beta-1)`` of the range basis."""
        return JacobiParams(self.beta - 1.0, self.alpha - self.beta - 1.0)

    @property
    def trial_params(self) -> JacobiParams:
        """Exponents ``(alpha-beta, beta)`` of the weighted trial basis."""
        return JacobiParams(self.alpha - self.beta, self.beta)


def build_params(alpha: float, r: float, n_max: int) -> SpectralParams:
    """``beta``, ``lambda_{-1}`` and ``lambda_0 .. lambda_{n_max}``."""
    beta = beta_from_r(alpha, r)
    s_ab = math.sin(math.pi * (alpha - beta))
    s_a = math.sin(math.pi * alpha)
    prefactor = s_a / (s_ab + math.sin(math.pi * beta))
    n = np.arange(n_max + 1, dtype=float)
    from scipy.special import gammaln

    lambdas = prefactor * np.exp(gammaln(n + alpha) - gammaln(n + 1.0))
    lambda_minus1 = 0.0 if r == 1.0 else -(1.0 - r) * math.gamma(alpha) * s_a / s_ab
    lambdas.setflags(write=False)
    return SpectralParams(alpha, r, beta, lambda_minus1, lambdas)


def kernel(alpha: float, beta: float, x):
    """Null-space function ``k(x) = (1-x)^{alpha-beta-1} x^{beta-1}``."""
    x = np.asarray(x, dtype=float)
    return ((1.0 - x) ** (alpha - beta - 1.0) * x ** (beta - 1.0))[()]


def compute_f_coeffs(
    problem: ProblemSpec, params: SpectralParams, M: int, n_quad: int
) -> np.ndarray:
    """``f_0 .. f_M`` against ``G_i^{(beta-1, alpha-beta-1)}``.

    A :class:`PowerSum` right-hand side is integrated term by term with its
    endpoint powers folded into the Gauss-Jacobi weight.
    """
    if problem.f_coeffs is not None:
        out = np.zeros(M + 1)
        n = min(M + 1, problem.f_coeffs.size)
        out[:n] = problem.f_coeffs[:n]
        return out
    if n_quad < M + 16:
        raise DomainError(f"n_quad={n_quad} is below the required M + 16 = {M + 16}")
    base = params.test_params
    f = problem.f
    if isinstance(f, PowerSum):
        out = np.zeros(M + 1)
        for coef, p, q in f.terms:
            rule = gauss_jacobi(n_quad, JacobiParams(base.a + q, base.b + p))
            table = jacobi_table(M, base, rule.nodes)
            out += coef * np.sum(table * rule.weights, axis=1)
        return out
    rule = gauss_jacobi(n_quad, base)
    vals = np.asarray(f(rule.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = rule.nodes[~np.isfinite(vals)][0]
        raise NumericalFailure(f"right-hand side is not finite at quadrature node x={bad!r}")
    table = jacobi_table(M, base, rule.nodes)
    return np.sum(table * (rule.weights * vals), axis=1)


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Truncated series ``q_N`` and the data needed to post-process ``u_N``.

    Coefficients live in the working coordinates; when ``reflected`` is set
    those are the mirrored ones. Evaluation methods always take points in the
    coordinates of ``problem``.
    """

    N: int
    f_coeffs: np.ndarray
    c_minus1: float
    c: np.ndarray
    c_minus2: float
    params: SpectralParams
    problem: ProblemSpec
    n_quad: int
    reflected: bool = False
    working: ProblemSpec = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.working is None:
            work = self.problem.reflected() if self.reflected else self.problem
            object.__setattr__(self, "working", work)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        """``beta`` in the caller's coordinates."""
        return self.alpha - self.params.beta if self.reflected else self.params.beta

    @property
    def r(self) -> float:
        return self.problem.r

    @cached_property
    def u_coeffs(self) -> np.ndarray:
        # antiderivative of rho^{(a-b, b)} G_i is -rho^{(a-b+1, b+1)} G_{i-1}^{(a-b+1, b+1)} / i
        i = np.arange(1, self.N, dtype=float)
        return self.c[1:] / i

    def q(self, x):
        return eval_qN(self, x)

    def u(self, x, method: str = "auto"):
        return eval_uN(self, x, method=method)


def _default_n_quad(N: int) -> int:
    return min(MAX_ORDER, max(2 * N, 128))


def assemble(
    problem: ProblemSpec,
    N: int,
    n_quad: int | None = None,
    *,
    f_coeffs: Sequence[float] | None = None,
) -> SpectralSolution:
    """Build ``q_N`` and ``c_{-2}`` for ``problem``.

    ``f_coeffs`` may supply precomputed working-coordinate coefficients
    ``f_0 .. f_N`` (a cache hit); otherwise they are computed by quadrature.
    """
    if N < 1:
        raise DomainError(f"truncation level must be at least 1, got {N}")
    if n_quad is None:
        n_quad = _default_n_quad(N)
    reflected = problem.r < 0.5
    work = problem.reflected() if reflected else problem
    if work.r >= 1.0:
        raise DomainError(
            "r in {0, 1} is not supported: lambda_{-1} vanishes and c_{-1} is undefined"
        )
    params = build_params(work.alpha, work.r, N)
    if f_coeffs is None:
        f = compute_f_coeffs(work, params, N, n_quad)
    else:
        f = np.array(f_coeffs[: N + 1], dtype=float)
        if f.size != N + 1:
            raise DomainError(f"need {N + 1} cached coefficients, got {f.size}")
    test = params.test_params
    c_minus1 = f[0] / (params.lambda_minus1 * jacobi_norm_sq(0, test))
    norms = np.array([jacobi_norm_sq(i + 1, test) for i in range(N)])
    c = f[1:] / (params.lambdas[:N] * norms)
    f.setflags(write=False)
    c.setflags(write=False)
    c_minus2 = _c_minus2(params, work, c_minus1, c, n_quad)
    log.debug("assembled N=%d beta=%.15g c_-2=%.15g", N, params.beta, c_minus2)
    return SpectralSolution(
        N, f, c_minus1, c, c_minus2, params, problem, n_quad, reflected, work
    )


def _c_minus2(
    params: SpectralParams,
    problem: ProblemSpec,
    c_minus1: float,
    c: np.ndarray,
    n_quad: int,
    closed_form: bool | None = None,
) -> float:
    alpha, beta = params.alpha, params.beta
    ab = alpha - beta
    if closed_form is None:
        closed_form = problem.K_constant is not None
    if closed_form:
        if problem.K_constant is None:
            raise DomainError("closed-form c_{-2} needs a constant diffusivity")
        B = math.exp
        den = B(math.lgamma(beta) + math.lgamma(ab) - math.lgamma(alpha))
        num = c_minus1 * B(math.lgamma(beta + 1) + math.lgamma(ab) - math.lgamma(alpha + 1))
        if c.size:
            # G_0 = 1 and orthogonality kill every other mode
            num += c[0] * B(math.lgamma(beta + 1) + math.lgamma(ab + 1) - math.lgamma(alpha + 2))
        return -num / den
    order = min(MAX_ORDER, max(n_quad, c.size + 16))
    rule = gauss_jacobi(order, JacobiParams(ab - 1.0, beta - 1.0))
    den = float(np.sum(rule.weights / problem.K_at(rule.nodes)))
    if abs(den) < 1e-300:
        raise NumericalFailure("degenerate kernel integral in c_{-2}")
    rule = gauss_jacobi(order, JacobiParams(ab - 1.0, beta))
    num = c_minus1 * float(np.sum(rule.weights / problem.K_at(rule.nodes)))
    rule = gauss_jacobi(order, params.trial_params)
    series = jacobi_series(c, params.trial_params, rule.nodes)
    num += float(np.sum(rule.weights * series / problem.K_at(rule.nodes)))
    return -num / den


def compute_c_minus2(
    sol: SpectralSolution, n_quad: int | None = None, *, closed_form: bool | None = None
) -> float:
    """Kernel multiple enforcing ``int_0^1 (c_{-2} k + q_N) / K = 0``."""
    return _c_minus2(
        sol.params, sol.working, sol.c_minus1, sol.c, n_quad or sol.n_quad, closed_form
    )


def constraint_residual(sol: SpectralSolution, n_quad: int = 128) -> float:
    """``int_0^1 (c_{-2} k + q_N) / K`` by a single rule on the kernel weight."""
    p = sol.params
    ab = p.alpha - p.beta
    rule = gauss_jacobi(min(MAX_ORDER, max(n_quad, sol.N + 16)), JacobiParams(ab - 1.0, p.beta - 1.0))
    x = rule.nodes
    poly = jacobi_series(sol.c, p.trial_params, x)
    # (c_{-2} k + q_N) / k, smooth on [0, 1]
    g = sol.c_minus2 + sol.c_minus1 * x + (1.0 - x) * x * poly
    return float(np.sum(rule.weights * g / sol.working.K_at(x)))


def _check_interior(x: np.ndarray) -> None:
    if np.any((x <= 0.0) | (x >= 1.0)) or np.any(np.isnan(x)):
        raise DomainError(
            "q_N is evaluated on the open interval (0, 1); its endpoint values are "
            "limits that may be infinite"
        )


def _q_working(sol: SpectralSolution, x: np.ndarray) -> np.ndarray:
    p = sol.params
    ab = p.alpha - p.beta
    poly = jacobi_series(sol.c, p.trial_params, x)
    one_minus = 1.0 - x
    return x**p.beta * one_minus ** (ab - 1.0) * (sol.c_minus1 + one_minus * poly)


def eval_qN(sol: SpectralSolution, x):
    """``q_N(x)`` for ``0 < x < 1``."""
    x = np.asarray(x, dtype=float)
    _check_interior(x)
    if sol.reflected:
        return (-_q_working(sol, 1.0 - x))[()]
    return _q_working(sol, x)[()]


def _u_closed(sol: SpectralSolution, x: np.ndarray) -> np.ndarray:
    p = sol.params
    beta, ab = p.beta, p.alpha - p.beta
    K0 = sol.working.K_constant
    total = sol.c_minus2 * incomplete_beta(x, beta, ab)
    total = total + sol.c_minus1 * incomplete_beta(x, beta + 1.0, ab)
    if sol.N >= 1:
        total = total + sol.c[0] * incomplete_beta(x, beta + 1.0, ab + 1.0)
    if sol.N >= 2:
        shifted = JacobiParams(ab + 1.0, beta + 1.0)
        weight = (1.0 - x) ** (ab + 1.0) * x ** (beta + 1.0)
        total = total - weight * jacobi_series(sol.u_coeffs, shifted, x)
    return -total / K0


def _u_quadrature(sol: SpectralSolution, x: np.ndarray, order: int | None = None) -> np.ndarray:
    p = sol.params
    beta, ab = p.beta, p.alpha - p.beta
    work = sol.working
    if order is None:
        order = min(MAX_ORDER, sol.N + 48)
    out = np.zeros_like(x)

    left = (x > 0.0) & (x <= 0.5)
    if np.any(left):
        xl = x[left][:, None]
        rule = gauss_jacobi(order, JacobiParams(0.0, beta - 1.0))
        s = xl * rule.nodes
        one_minus = 1.0 - s
        poly = jacobi_series(sol.c, p.trial_params, s)
        # integrand divided by s^{beta-1}, absorbed into the rule after s = x t
        h = one_minus ** (ab - 1.0) * (
            sol.c_minus2 + sol.c_minus1 * s + one_minus * s * poly
        ) / work.K_at(s)
        out[left] = -(xl[:, 0] ** beta) * np.sum(rule.weights * h, axis=1)

    right = (x > 0.5) & (x < 1.0)
    if np.any(right):
        # u(x) = int_x^1 (c_{-2} k + q_N)/K because the full integral vanishes
        xr = x[right][:, None]
        rule = gauss_jacobi(order, JacobiParams(0.0, ab - 1.0))
        s = 1.0 - (1.0 - xr) * rule.nodes
        one_minus = (1.0 - xr) * rule.nodes
        poly = jacobi_series(sol.c, p.trial_params, s)
        m = (
            sol.c_minus2 * s ** (beta - 1.0)
            + sol.c_minus1 * s**beta
            + one_minus * s**beta * poly
        ) / work.K_at(s)
        out[right] = (1.0 - xr[:, 0]) ** ab * np.sum(rule.weights * m, axis=1)
    return out


def eval_uN(sol: SpectralSolution, x, method: str = "auto"):
    """``u_N(x) = -int_0^x (c_{-2} k + q_N) / K`` on ``[0, 1]``.

    ``method`` is ``"closed"`` (constant ``K`` only: incomplete beta functions
    plus the antiderivative identity for the Jacobi modes), ``"quadrature"``,
    or ``"auto"``, which picks the closed form whenever ``K`` is constant.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise DomainError("u_N is defined on [0, 1]")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    xw = 1.0 - x if sol.reflected else x
    scalar = xw.ndim == 0
    xw = np.atleast_1d(xw)
    interior = (xw > 0.0) & (xw < 1.0)
    out = np.zeros_like(xw)
    if method == "auto":
        method = "closed" if sol.working.K_constant is not None else "quadrature"
    if method == "closed":
        if sol.working.K_constant is None:
            raise DomainError("closed-form u_N needs a constant diffusivity")
        out[interior] = _u_closed(sol, xw[interior])
    else:
        out[interior] = _u_quadrature(sol, xw[interior])
    return out[0] if scalar else out


_CACHE_MAGIC = "# fdejacobi coefficient cache v1"


def write_cache(path: str | Path, sol: SpectralSolution) -> None:
    """Persist the working-coordinate coefficients as text.

    Layout: a comment line naming the problem, the header
    ``alpha r beta N n_quad``, then one ``i f_{i+1} c_i`` line for
    ``i = -1 .. N-1``, all reals with 17 significant digits.
    """
    p = sol.params
    lines = [
        f"{_CACHE_MAGIC} problem={sol.problem.name}",
        f"{p.alpha:.16e} {p.r:.16e} {p.beta:.16e} {sol.N} {sol.n_quad}",
        f"-1 {sol.f_coeffs[0]:.16e} {sol.c_minus1:.16e}",
    ]
    lines += [f"{i} {sol.f_coeffs[i + 1]:.16e} {ci:.16e}" for i, ci in enumerate(sol.c)]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class CacheContents:
    problem: str
    alpha: float
    r: float
    beta: float
    N: int
    n_quad: int
    f_coeffs: np.ndarray

    def matches(self, alpha: float, r: float, name: str, N: int, n_quad: int) -> bool:
        """True when this cache holds working-coordinate data for the run."""
        return (
            self.problem == name
            and self.alpha == alpha
            and self.r == r
            and self.n_quad == n_quad
            and self.N >= N
        )


def read_cache(path: str | Path) -> CacheContents:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or not lines[0].startswith(_CACHE_MAGIC):
        raise ConfigError(f"{path}: not a coefficient cache file")
    name = lines[0].split("problem=", 1)[-1].strip()
    try:
        head = lines[1].split()
        alpha, r, beta = (float(v) for v in head[:3])
        N, n_quad = int(head[3]), int(head[4])
        rows = [ln.split() for ln in lines[2:] if ln.strip()]
        f = np.array([float(row[1]) for row in rows])
        idx = [int(row[0]) for row in rows]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed cache ({exc})") from exc
    if idx != list(range(-1, N)):
        raise ConfigError(f"{path}: cache rows do not run from -1 to N-1 = {N - 1}")
    return CacheContents(name, alpha, r, beta, N, n_quad, f)
