"""Error norms, experimental convergence rates and predicted rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .quadrature import MAX_ORDER, graded_rule
from .solver import ProblemSpec, SpectralSolution, assemble
from .specfun import JacobiParams, jacobi_norm_sq

__all__ = [
    "ErrorReport",
    "Prediction",
    "RateReport",
    "weighted_q_error",
    "weighted_u_error",
    "linf_u_error",
    "parseval_q_error",
    "error_report",
    "convergence_rate",
    "predicted_rates",
]


@dataclass(frozen=True)
class ErrorReport:
    N: int
    err_q: float
    err_u: float
    err_u_inf: float

    def __post_init__(self) -> None:
        for name in ("err_q", "err_u", "err_u_inf"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0.0):
                raise DomainError(f"{name} must be finite and nonnegative, got {val}")


@dataclass(frozen=True)
class Prediction:
    """Rates implied by the regularity index ``j_max`` of ``f``.

    The sup-norm rate is the q-rate; the available bound for it is known to
    be pessimistic, so it is a floor rather than an expectation.
    """

    j_max: float
    q: float
    u: float
    u_inf: float


@dataclass(frozen=True)
class RateReport:
    kappas: Mapping[str, tuple[float, ...]]
    prediction: Prediction | None = field(default=None)


def _order(sol: SpectralSolution, n_quad: int | None) -> int:
    if n_quad is None:
        n_quad = max(48, sol.N + 16)
    return min(MAX_ORDER, n_quad)


def _weighted_error(sol, exact, approx, shift: float, n_quad) -> float:
    ab, b = sol.alpha - sol.beta + shift, sol.beta + shift
    rule = graded_rule(JacobiParams(ab, b), _order(sol, n_quad))
    x = rule.nodes
    e = (np.asarray(exact(x), dtype=float) - approx(x)) / ((1.0 - x) ** ab * x**b)
    return math.sqrt(float(np.sum(rule.weights * e * e)))


def _problem(sol: SpectralSolution, problem: ProblemSpec | None) -> ProblemSpec:
    return sol.problem if problem is None else problem


def weighted_q_error(
    sol: SpectralSolution, problem: ProblemSpec | None = None, n_quad: int | None = None
) -> float:
    """``||q - q_N||`` in ``L^2`` with weight ``rho^{(-(alpha-beta), -beta)}``.

    The error is divided by ``rho^{(alpha-beta, beta)}`` and integrated against
    that weight with a graded composite rule (per-panel order ``n_quad``),
    so the endpoint singularities of ``q - q_N`` do not limit accuracy.
    """
    problem = _problem(sol, problem)
    if problem.exact_q is None:
        raise PreconditionError("weighted_q_error needs an exact flux")
    return _weighted_error(sol, problem.exact_q, sol.q, 0.0, n_quad)


def weighted_u_error(
    sol: SpectralSolution, problem: ProblemSpec | None = None, n_quad: int | None = None
) -> float:
    """``||u - u_N||`` in ``L^2`` with weight ``rho^{(-(alpha-beta+1), -(beta+1))}``."""
    problem = _problem(sol, problem)
    if problem.exact_u is None:
        raise PreconditionError("weighted_u_error needs an exact solution")
    return _weighted_error(sol, problem.exact_u, sol.u, 1.0, n_quad)


def linf_u_error(
    sol: SpectralSolution, problem: ProblemSpec | None = None, grid_size: int = 4096
) -> float:
    """Largest ``|u - u_N|`` over ``grid_size + 1`` equispaced points of ``[0, 1]``."""
    problem = _problem(sol, problem)
    if problem.exact_u is None:
        raise PreconditionError("linf_u_error needs an exact solution")
    x = np.linspace(0.0, 1.0, grid_size + 1)
    return float(np.max(np.abs(problem.exact_u(x) - sol.u(x))))


def parseval_q_error(sol: SpectralSolution, n_ref: int = 200) -> float:
    """Flux error from the coefficient tail ``sum_{i=N}^{n_ref} c_i^2 |||G_i|||^2``.

    Needs no exact solution; it is the truncation error against the
    level-``n_ref`` series.
    """
    if n_ref <= sol.N:
        raise DomainError(f"reference level {n_ref} must exceed N = {sol.N}")
    ref = assemble(sol.problem, n_ref)
    trial = ref.params.trial_params
    tail = sum(
        ref.c[i] ** 2 * jacobi_norm_sq(i, trial) for i in range(sol.N, n_ref)
    )
    return math.sqrt(tail)


def error_report(
    sol: SpectralSolution,
    problem: ProblemSpec | None = None,
    *,
    n_quad: int | None = None,
    grid_size: int = 4096,
) -> ErrorReport:
    return ErrorReport(
        sol.N,
        weighted_q_error(sol, problem, n_quad),
        weighted_u_error(sol, problem, n_quad),
        linf_u_error(sol, problem, grid_size),
    )


def convergence_rate(errors: Sequence[float], Ns: Sequence[int]) -> list[float]:
    """``kappa = log(e_1 / e_2) / log(N_2 / N_1)`` for each adjacent pair."""
    if len(errors) != len(Ns):
        raise DomainError("errors and Ns differ in length")
    if len(Ns) < 2:
        raise DomainError("need at least two truncation levels")
    if any(not e > 0 for e in errors):
        raise DomainError("errors must be positive")
    if any(n2 <= n1 for n1, n2 in zip(Ns, Ns[1:])):
        raise DomainError("Ns must be strictly increasing")
    return [
        math.log(e1 / e2) / math.log(n2 / n1)
        for (e1, e2), (n1, n2) in zip(zip(errors, errors[1:]), zip(Ns, Ns[1:]))
    ]


def predicted_rates(
    alpha: float,
    beta: float,
    singular_power: float,
    singular_power_right: float | None = None,
) -> Prediction | None:
    """Rates from the largest ``j`` with ``D^j f`` square integrable.

    ``f ~ x^s`` near 0 tested against ``x^{alpha-beta-1+j}`` requires
    ``j < alpha - beta + 2s``. When ``singular_power_right`` gives the
    exponent of ``(1-x)`` at the other end, the bound ``beta + 2 s_right``
    from that end also applies. Returns ``None`` if no positive ``j`` exists.
    """
    j = alpha - beta + 2.0 * singular_power
    if singular_power_right is not None:
        j = min(j, beta + 2.0 * singular_power_right)
    if not j > 0.0:
        return None
    return Prediction(j, alpha - 1.0 + j, alpha + j, alpha - 1.0 + j)
