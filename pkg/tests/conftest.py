from functools import lru_cache

import pytest

from fdejacobi.problems import example1, example2
from fdejacobi.solver import assemble

# (alpha, r) of the three experiments run for each benchmark problem
PAIRS = [(1.6, 0.39), (1.4, 0.5), (1.8, 0.5)]
BUILDERS = {1: example1, 2: example2}


@lru_cache(maxsize=None)
def problem(example, alpha, r):
    return BUILDERS[example](alpha, r)


@lru_cache(maxsize=None)
def solution(example, alpha, r, N, n_quad=None):
    return assemble(problem(example, alpha, r), N, n_quad)


@pytest.fixture(params=PAIRS, ids=lambda p: f"alpha={p[0]}-r={p[1]}")
def pair(request):
    return request.param


NS = (30, 32, 34, 36, 38)

# Reference error tables: per configuration, the columns err_q, err_u and
# err_uinf for N = 30..38 step 2, then kappa_q, kappa_u and kappa_uinf for
# each adjacent pair.
REFERENCE = {
    (1, 1.6, 0.39): dict(
        q=(5.23e-4, 4.54e-4, 3.98e-4, 3.51e-4, 3.12e-4),
        u=(1.40e-5, 1.13e-5, 9.29e-6, 7.69e-6, 6.43e-6),
        uinf=(1.51e-6, 1.17e-6, 9.63e-7, 7.83e-7, 6.46e-7),
        kq=(2.18, 2.18, 2.18, 2.18), ku=(3.26, 3.28, 3.30, 3.33), kinf=(3.90, 3.27, 3.62, 3.54),
    ),
    (1, 1.4, 0.5): dict(
        q=(5.10e-4, 4.40e-4, 3.83e-4, 3.36e-4, 2.97e-4),
        u=(1.37e-5, 1.10e-5, 8.94e-6, 7.34e-6, 6.09e-6),
        uinf=(1.59e-6, 1.22e-6, 1.02e-6, 8.28e-7, 6.72e-7),
        kq=(2.29, 2.29, 2.29, 2.29), ku=(3.39, 3.42, 3.44, 3.47), kinf=(4.16, 2.87, 3.72, 3.86),
    ),
    (1, 1.8, 0.5): dict(
        q=(4.21e-4, 3.69e-4, 3.25e-4, 2.89e-4, 2.58e-4),
        u=(1.11e-5, 9.07e-6, 7.48e-6, 6.23e-6, 5.23e-6),
        uinf=(1.08e-6, 8.40e-7, 7.08e-7, 5.76e-7, 4.64e-7),
        kq=(2.07, 2.07, 2.08, 2.08), ku=(3.16, 3.18, 3.21, 3.24), kinf=(3.85, 2.82, 3.60, 4.03),
    ),
    (2, 1.6, 0.39): dict(
        q=(3.01e-4, 2.59e-4, 2.26e-4, 1.98e-4, 1.75e-4),
        u=(5.57e-6, 4.50e-6, 3.68e-6, 3.05e-6, 2.56e-6),
        uinf=(7.21e-7, 5.54e-7, 4.54e-7, 3.63e-7, 2.92e-7),
        kq=(2.28, 2.28, 2.28, 2.27), ku=(3.31, 3.30, 3.28, 3.27), kinf=(4.07, 3.28, 3.95, 4.01),
    ),
    (2, 1.4, 0.5): dict(
        q=(2.90e-4, 2.49e-4, 2.16e-4, 1.89e-4, 1.66e-4),
        u=(5.49e-6, 4.40e-6, 3.58e-6, 2.95e-6, 2.45e-6),
        uinf=(7.73e-7, 6.08e-7, 4.79e-7, 3.82e-7, 3.10e-7),
        kq=(2.37, 2.36, 2.36, 2.35), ku=(3.42, 3.41, 3.40, 3.39), kinf=(3.72, 3.92, 3.97, 3.83),
    ),
    (2, 1.8, 0.5): dict(
        q=(2.38e-4, 2.07e-4, 1.82e-4, 1.61e-4, 1.43e-4),
        u=(4.40e-6, 3.58e-6, 2.95e-6, 2.46e-6, 2.08e-6),
        uinf=(5.22e-7, 4.10e-7, 3.32e-7, 2.68e-7, 2.16e-7),
        kq=(2.14, 2.14, 2.14, 2.14), ku=(3.19, 3.18, 3.17, 3.16), kinf=(3.73, 3.49, 3.77, 4.00),
    ),
}


@lru_cache(maxsize=None)
def study(example, alpha, r):
    """Errors and rates over N = 30..38, computed the way the CLI computes them."""
    from fdejacobi.analysis import convergence_rate, error_report

    prob = problem(example, alpha, r)
    top = solution(example, alpha, r, NS[-1], 128)
    sols = [assemble(prob, N, 128, f_coeffs=top.f_coeffs) for N in NS]
    reps = [error_report(s) for s in sols]
    cols = dict(
        q=tuple(rep.err_q for rep in reps),
        u=tuple(rep.err_u for rep in reps),
        uinf=tuple(rep.err_u_inf for rep in reps),
    )
    for key, col in (("kq", "q"), ("ku", "u"), ("kinf", "uinf")):
        cols[key] = tuple(convergence_rate(cols[col], NS))
    return cols
