import dataclasses
import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import PAIRS, problem, solution
from fdejacobi.errors import ConfigError, DomainError, NumericalFailure
from fdejacobi.problems import example1, example2
from fdejacobi.quadrature import apply_N
from fdejacobi.solver import (
    PowerSum,
    ProblemSpec,
    SpectralSolution,
    assemble,
    beta_from_r,
    build_params,
    compute_c_minus2,
    compute_f_coeffs,
    constraint_residual,
    eval_qN,
    eval_uN,
    kernel,
    r_from_beta,
    read_cache,
    write_cache,
)
from fdejacobi.solver import _u_closed
from fdejacobi.specfun import JacobiParams, beta_function, jacobi_G, jacobi_norm_sq

INTERIOR = np.array([0.13, 0.31, 0.47, 0.66, 0.88])


# --- beta and r -----------------------------------------------------------


def test_beta_symmetric_case():
    assert beta_from_r(1.4, 0.5) == pytest.approx(0.7, abs=1e-13)


@pytest.mark.parametrize("alpha", [1.05, 1.3, 1.6, 1.95])
def test_half_weight_gives_half_alpha(alpha):
    assert beta_from_r(alpha, 0.5) == pytest.approx(alpha / 2, abs=1e-13)


def test_beta_for_asymmetric_weight_rounds_to_caption():
    b = beta_from_r(1.6, 0.39)
    assert round(b, 2) == 0.85
    assert r_from_beta(1.6, b) == pytest.approx(0.39, abs=1e-13)


@pytest.mark.parametrize("alpha", [1.2, 1.6, 1.9])
@pytest.mark.parametrize("r", [0.0, 0.1, 0.39, 0.5, 0.77, 0.99])
def test_beta_solves_sine_relation(alpha, r):
    b = beta_from_r(alpha, r)
    assert alpha - 1 <= b <= 1
    assert r_from_beta(alpha, b) == pytest.approx(r, abs=1e-13)


def test_beta_decreases_with_r():
    bs = [beta_from_r(1.7, r) for r in np.linspace(0.0, 0.99, 23)]
    assert all(b2 < b1 for b1, b2 in zip(bs, bs[1:]))


def test_r_one_warns_and_returns_lower_end():
    with pytest.warns(UserWarning):
        assert beta_from_r(1.5, 1.0) == 0.5


@pytest.mark.parametrize("r", [-0.1, 1.2, float("nan")])
def test_r_out_of_range(r):
    with pytest.raises(DomainError):
        beta_from_r(1.5, r)


def test_alpha_out_of_range():
    with pytest.raises(DomainError):
        beta_from_r(2.0, 0.5)
    with pytest.raises(DomainError):
        r_from_beta(1.5, 0.2)


# --- spectral parameters ----------------------------------------------------


@pytest.mark.parametrize("alpha,r", PAIRS)
def test_lambda_ratio(alpha, r):
    lam = build_params(alpha, r, 60).lambdas
    n = np.arange(1, 61)
    assert_allclose(lam[1:] / lam[:-1], (n - 1 + alpha) / n, rtol=1e-13)


def test_lambda_minus1_positive():
    assert build_params(1.6, 0.39, 0).lambda_minus1 > 0


@pytest.mark.parametrize("alpha,r", PAIRS)
def test_lambdas_grow_in_magnitude(alpha, r):
    lam = np.abs(build_params(alpha, r, 2000).lambdas)
    assert np.all(np.diff(lam[1:]) >= 0)
    scaled = lam[1:] / np.arange(2, 2002) ** (alpha - 1)
    assert 0 < scaled.min() and scaled.max() < 2 * scaled.min()


def test_lambdas_carry_sine_sign():
    # sin(pi alpha) < 0 on (1, 2), so every lambda_n is negative
    assert np.all(build_params(1.6, 0.7, 10).lambdas < 0)


def test_kernel_values():
    assert kernel(1.6, 0.85, 0.5) == pytest.approx(0.5 ** (-0.25) * 0.5 ** (-0.15))


# --- f coefficients -----------------------------------------------------------


def _spec(f, alpha=1.6, r=0.61, **kw):
    return ProblemSpec(alpha, r, f, **kw)


def test_f_coeffs_of_single_test_polynomial():
    prm = build_params(1.6, 0.61, 10)
    test = prm.test_params
    f = compute_f_coeffs(_spec(lambda x: jacobi_G(3, test, x)), prm, 10, 64)
    expect = np.zeros(11)
    expect[3] = jacobi_norm_sq(3, test)
    assert_allclose(f, expect, atol=1e-13)


def test_f_coeffs_of_constant():
    prm = build_params(1.6, 0.61, 10)
    b = prm.beta
    f = compute_f_coeffs(_spec(lambda x: np.ones_like(x)), prm, 10, 64)
    assert f[0] == pytest.approx(beta_function(1.6 - b, b), rel=1e-13)
    assert np.max(np.abs(f[1:])) < 1e-13


def test_f_coeffs_stable_under_refinement():
    a = assemble(problem(1, 1.6, 0.39), 40, 128)
    b = assemble(problem(1, 1.6, 0.39), 40, 256)
    assert np.max(np.abs(a.f_coeffs - b.f_coeffs)) <= 1e-10


def test_f_coeffs_need_enough_nodes():
    prm = build_params(1.6, 0.61, 40)
    with pytest.raises(DomainError):
        compute_f_coeffs(_spec(lambda x: x), prm, 40, 50)


def test_f_coeffs_report_bad_node():
    prm = build_params(1.6, 0.61, 4)
    bad = _spec(lambda x: np.where(x > 0.5, np.inf, 1.0))
    with pytest.raises(NumericalFailure, match="x="):
        compute_f_coeffs(bad, prm, 4, 32)


# --- assembly -----------------------------------------------------------------


@pytest.mark.parametrize("alpha,r", [(1.4, 0.5), (1.6, 0.61), (1.8, 0.5)])
@pytest.mark.parametrize("mode", [0, 3])
def test_single_mode_right_hand_side(alpha, r, mode):
    prm = build_params(alpha, r, mode)
    test = prm.test_params
    # f_{i+1} = lambda_i |||G_{i+1}|||^2 is what makes c_i = 1
    lam = prm.lambdas[mode]
    sol = assemble(_spec(lambda x: lam * jacobi_G(mode + 1, test, x), alpha, r), 8)
    expect = np.zeros(8)
    expect[mode] = 1.0
    assert_allclose(sol.c, expect, atol=1e-12)
    assert abs(sol.c_minus1) < 1e-12


@pytest.mark.parametrize("alpha,r", [(1.4, 0.5), (1.6, 0.61), (1.8, 0.5)])
def test_single_mode_flux_is_mapped_back_onto_f(alpha, r):
    prm = build_params(alpha, r, 2)
    test = prm.test_params
    scale = 2.5 / jacobi_norm_sq(3, test)
    f = lambda x: scale * jacobi_G(3, test, x)  # noqa: E731
    sol = assemble(_spec(f, alpha, r), 6)
    assert np.count_nonzero(np.abs(sol.c) > 1e-12) == 1
    beta = prm.beta
    for x in INTERIOR:
        got = apply_N(alpha, r, sol.q, x, singular=(alpha - beta, beta))
        assert got == pytest.approx(f(x), rel=1e-4, abs=1e-4)


def test_coefficients_follow_diagonal_formula():
    sol = solution(1, 1.6, 0.39, 20)
    prm, test = sol.params, sol.params.test_params
    assert sol.c_minus1 == pytest.approx(
        sol.f_coeffs[0] / (prm.lambda_minus1 * jacobi_norm_sq(0, test)), rel=1e-15
    )
    for i, ci in enumerate(sol.c):
        expect = sol.f_coeffs[i + 1] / (prm.lambdas[i] * jacobi_norm_sq(i + 1, test))
        assert ci == pytest.approx(expect, rel=1e-15)


@pytest.mark.parametrize("N", [3, 30])
def test_example1_flux_at_midpoint(N):
    sol = assemble(problem(1, 1.6, 0.39), N)
    assert abs(sol.q(0.5) + 1.5) <= 1e-8


def test_example2_flux_at_quarter():
    sol = solution(2, 1.8, 0.5, 30)
    exact = problem(2, 1.8, 0.5).exact_q(0.25)
    assert abs(sol.q(0.25) - exact) <= 1e-5


def test_truncation_must_be_positive():
    with pytest.raises(DomainError):
        assemble(problem(1, 1.6, 0.39), 0)


def test_unit_weight_is_rejected():
    with pytest.raises(DomainError):
        assemble(_spec(lambda x: x, r=1.0), 4)


def test_pure_right_weight_is_rejected():
    # mirrored onto r = 1 where the c_{-1} term is undefined
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(DomainError):
            assemble(_spec(lambda x: x, r=0.0), 4)


# --- flux evaluation --------------------------------------------------------------


def _with_coeffs(sol, c_minus1, c):
    return dataclasses.replace(sol, c_minus1=c_minus1, c=np.asarray(c, dtype=float))


def test_zero_coefficients_give_zero_flux():
    sol = _with_coeffs(solution(1, 1.4, 0.5, 6), 0.0, np.zeros(6))
    assert_allclose(sol.q(INTERIOR), 0.0, atol=0)


def test_c_minus1_alone_gives_x_times_kernel():
    sol = _with_coeffs(solution(1, 1.4, 0.5, 6), 1.0, np.zeros(6))
    b = sol.params.beta
    assert_allclose(sol.q(INTERIOR), INTERIOR**b * (1 - INTERIOR) ** (1.4 - b - 1), rtol=1e-15)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.2, float("nan")])
def test_flux_outside_open_interval(x):
    with pytest.raises(DomainError):
        eval_qN(solution(1, 1.4, 0.5, 6), x)


def test_flux_is_vectorised():
    sol = solution(2, 1.6, 0.39, 10)
    assert_allclose(sol.q(INTERIOR), [sol.q(x) for x in INTERIOR], rtol=1e-15)


# --- c_{-2} and the constraint ------------------------------------------------------


def test_c_minus2_vanishes_with_zero_flux():
    sol = _with_coeffs(solution(1, 1.4, 0.5, 6), 0.0, np.zeros(6))
    assert compute_c_minus2(sol) == 0.0
    assert compute_c_minus2(sol, closed_form=False) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("alpha,r", PAIRS)
def test_c_minus2_closed_form_matches_quadrature(alpha, r):
    sol = solution(1, alpha, r, 30)
    assert compute_c_minus2(sol, closed_form=False) == pytest.approx(sol.c_minus2, rel=1e-12)


def test_closed_form_needs_constant_diffusivity():
    with pytest.raises(DomainError):
        compute_c_minus2(solution(2, 1.4, 0.5, 6), closed_form=True)


def test_example1_closed_form_vanishes_at_right_end():
    sol = solution(1, 1.6, 0.39, 30)
    assert abs(_u_closed(sol, np.array([1.0]))[0]) <= 1e-10


def test_example2_c_minus2_stable_under_refinement():
    a = assemble(problem(2, 1.8, 0.5), 30, 128)
    b = assemble(problem(2, 1.8, 0.5), 30, 256)
    assert abs(a.c_minus2 - b.c_minus2) <= 1e-9


@pytest.mark.parametrize("example", [1, 2])
@pytest.mark.parametrize("alpha,r", PAIRS)
def test_constraint_holds(example, alpha, r):
    assert abs(constraint_residual(solution(example, alpha, r, 30))) <= 1e-10


# --- u_N ----------------------------------------------------------------------------


@pytest.mark.parametrize("example", [1, 2])
def test_u_vanishes_at_both_ends(example):
    sol = solution(example, 1.6, 0.39, 30)
    assert sol.u(0.0) == 0.0 and sol.u(1.0) == 0.0
    assert_allclose(sol.u(np.array([0.0, 1.0])), 0.0, atol=0)


def test_example1_u_at_midpoint():
    sol = solution(1, 1.6, 0.39, 30)
    assert abs(sol.u(0.5) - problem(1, 1.6, 0.39).exact_u(0.5)) <= 1.6e-6


@pytest.mark.parametrize("alpha,r", PAIRS)
def test_u_closed_form_matches_quadrature(alpha, r):
    x = np.linspace(0.1, 0.9, 9)
    sol = solution(1, alpha, r, 30)
    closed = sol.u(x, method="closed")
    quad = sol.u(x, method="quadrature")
    assert np.max(np.abs(closed - quad)) <= 1e-10


def test_u_quadrature_with_callable_unit_diffusivity():
    # K = 1 given as a function takes the quadrature path for c_{-2} as well
    base = problem(1, 1.6, 0.39)
    as_fn = dataclasses.replace(base, K=lambda x: np.ones_like(np.asarray(x, dtype=float)))
    assert as_fn.K_constant is None
    a, b = solution(1, 1.6, 0.39, 30), assemble(as_fn, 30)
    assert b.c_minus2 == pytest.approx(a.c_minus2, rel=1e-12)
    x = np.linspace(0.1, 0.9, 9)
    assert np.max(np.abs(a.u(x) - b.u(x))) <= 1e-10


def test_u_domain_checks():
    sol = solution(1, 1.4, 0.5, 6)
    with pytest.raises(DomainError):
        sol.u(1.5)
    with pytest.raises(DomainError):
        solution(2, 1.4, 0.5, 6).u(0.5, method="closed")
    with pytest.raises(ValueError):
        sol.u(0.5, method="spline")


@pytest.mark.parametrize("example", [1, 2])
def test_reflection_consistency(example):
    # r < 1/2 is solved internally on the mirror; compare with the mirrored
    # problem solved directly (r > 1/2) and read at mirrored points
    direct = problem(example, 1.6, 0.39)
    mirrored = direct.reflected()
    assert mirrored.r == pytest.approx(0.61)
    a, b = assemble(direct, 24), assemble(mirrored, 24)
    assert a.reflected and not b.reflected
    x = np.linspace(0.05, 0.95, 19)
    assert np.max(np.abs(a.u(x) - b.u(1 - x))) <= 1e-10
    assert np.max(np.abs(a.q(x) + b.q(1 - x))) <= 1e-10
    assert a.beta == pytest.approx(1.6 - b.beta, abs=1e-13)


# --- Parseval tail ------------------------------------------------------------------


@pytest.mark.parametrize("example", [1, 2])
def test_parseval_tail_monotone_and_bounded(example):
    ref = solution(example, 1.6, 0.39, 120)
    prm = ref.params
    trial, test = prm.trial_params, prm.test_params
    terms = np.array([ref.c[i] ** 2 * jacobi_norm_sq(i, trial) for i in range(120)])
    tails = np.cumsum(terms[::-1])[::-1]
    assert np.all(np.diff(tails) <= 0)
    f2 = np.array([ref.f_coeffs[i] ** 2 / jacobi_norm_sq(i, test) for i in range(121)])
    for N in range(5, 100, 7):
        assert tails[N] * prm.lambdas[N] ** 2 <= f2[N + 1 :].sum() * (1 + 1e-12)


# --- cache ---------------------------------------------------------------------------


def test_cache_roundtrip(tmp_path):
    sol = solution(2, 1.6, 0.39, 12)
    path = tmp_path / "coeffs.txt"
    write_cache(path, sol)
    text = path.read_text().splitlines()
    assert len(text) == 2 + 13
    cache = read_cache(path)
    assert cache.problem == "example2" and cache.N == 12 and cache.n_quad == sol.n_quad
    assert cache.r == pytest.approx(0.61)
    assert cache.matches(1.6, sol.params.r, "example2", 10, sol.n_quad)
    assert not cache.matches(1.6, sol.params.r, "example2", 13, sol.n_quad)
    assert not cache.matches(1.6, sol.params.r, "example1", 10, sol.n_quad)
    assert np.array_equal(cache.f_coeffs, sol.f_coeffs)
    warm = assemble(sol.problem, 12, sol.n_quad, f_coeffs=cache.f_coeffs)
    assert np.array_equal(warm.c, sol.c) and warm.c_minus2 == sol.c_minus2


@pytest.mark.parametrize(
    "body",
    ["hello\n", "# fdejacobi coefficient cache v1 problem=x\n1.6 0.5\n-1 0 0\n",
     "# fdejacobi coefficient cache v1 problem=x\n1.6 0.5 0.8 2 64\n-1 0 0\n1 0 0\n"],
)
def test_cache_rejects_malformed(tmp_path, body):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(ConfigError):
        read_cache(path)


def test_cached_coefficients_need_full_length():
    sol = solution(1, 1.4, 0.5, 6)
    with pytest.raises(DomainError):
        assemble(sol.problem, 8, f_coeffs=sol.f_coeffs)


# --- data types ----------------------------------------------------------------------


def test_power_sum():
    ps = PowerSum(((2.0, 0.5, 0.0), (-1.0, 0.0, 1.5)))
    x = np.array([0.2, 0.7])
    assert_allclose(ps(x), 2 * x**0.5 - (1 - x) ** 1.5, rtol=1e-15)
    assert_allclose(ps.reflected()(x), ps(1 - x), rtol=1e-15)
    assert ps.least_power == 0.0
    assert PowerSum(((1.0, 0.4, 0.6),)).least_power == 0.4


@pytest.mark.parametrize(
    "kw",
    [dict(alpha=1.0), dict(alpha=2.0), dict(r=-0.1), dict(r=1.1), dict(K=0.0),
     dict(K=lambda x: np.asarray(x) - 0.5)],
)
def test_problem_spec_validation(kw):
    args = dict(alpha=1.5, r=0.5, f=lambda x: x)
    args.update(kw)
    with pytest.raises(DomainError):
        ProblemSpec(**args)


def test_problem_spec_screens_callable_diffusivity():
    spec = ProblemSpec(1.5, 0.5, lambda x: x, K=lambda x: 2 + np.asarray(x))
    assert spec.K_min == pytest.approx(2.0) and spec.K_max == pytest.approx(3.0)
    assert spec.K_constant is None
    assert ProblemSpec(1.5, 0.5, lambda x: x, K=3).K_constant == 3.0


def test_solution_is_immutable():
    sol = solution(1, 1.4, 0.5, 6)
    assert isinstance(sol, SpectralSolution)
    with pytest.raises(dataclasses.FrozenInstanceError):
        sol.N = 3
    with pytest.raises(ValueError):
        sol.c[0] = 1.0
