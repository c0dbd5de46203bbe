import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from mfsynth.dlm import (
    DiscountPair,
    DlmState,
    StudentT,
    backward_sample,
    filter_step,
    forward_filter,
    log_pdf,
    predict_one_step,
)
from mfsynth.errors import DegeneracyError, ValidationError
from oracles import discount_kalman_smoother, static_conjugate_posterior

NO_DISCOUNT = DiscountPair(1.0, 1.0)


def scalar_state(m=0.0, C=1.0, n=1.0, s=1.0):
    return DlmState(np.array([m]), np.array([[C]]), n, s)


def test_hand_evaluated_scalar_step():
    rec = filter_step(scalar_state(), [1.0], 1.0, NO_DISCOUNT)
    assert rec.R[0, 0] == 1.0
    assert (rec.f, rec.q, rec.e, rec.A[0], rec.r) == (0.0, 2.0, 1.0, 0.5, 0.75)
    assert rec.post.m[0] == 0.5
    assert rec.post.C[0, 0] == 0.375
    assert (rec.post.n, rec.post.s) == (2.0, 0.75)


def test_hand_evaluated_predictive():
    d = predict_one_step(scalar_state(), [1.0], NO_DISCOUNT)
    assert d == StudentT(1.0, 0.0, 2.0)


def test_zero_error_leaves_mean():
    state = DlmState(np.array([0.3, -1.0]), np.diag([0.5, 2.0]), 4.0, 0.7)
    F = np.array([1.0, 2.0])
    rec = filter_step(state, F, float(F @ state.m), DiscountPair(0.9, 0.95))
    assert np.array_equal(rec.post.m, state.m)


def test_zero_regressor_predictive_is_observation_scale():
    state = DlmState(np.array([0.3, -1.0]), np.diag([0.5, 2.0]), 4.0, 0.7)
    d = predict_one_step(state, np.zeros(2), DiscountPair(0.9, 0.95))
    assert (d.location, d.scale) == (0.0, 0.7)


def test_predictive_matches_filter_record():
    state = DlmState(np.array([0.3, -1.0]), np.array([[0.5, 0.1], [0.1, 2.0]]), 4.0, 0.7)
    disc = DiscountPair(0.97, 0.9)
    F = np.array([1.2, -0.4])
    rec = filter_step(state, F, 2.0, disc)
    assert predict_one_step(state, F, disc) == rec.predictive()


def test_dof_fixed_point():
    disc = DiscountPair(0.99, 0.99)
    state = scalar_state()
    rng = np.random.default_rng(0)
    for _ in range(3000):
        state = filter_step(state, [rng.normal()], rng.normal(), disc).post
    assert abs(predict_one_step(state, [1.0], disc).dof / 0.99 - 100.0) < 1e-6


def test_degenerate_scale_raises():
    state = DlmState(np.zeros(1), np.zeros((1, 1)), 1.0, 1e-14)
    with pytest.raises(DegeneracyError):
        filter_step(state, [1.0], 1.0, NO_DISCOUNT)


def test_dimension_mismatch_raises():
    with pytest.raises(ValidationError):
        filter_step(scalar_state(), [1.0, 2.0], 1.0, NO_DISCOUNT)


@pytest.mark.parametrize("pair", [(0.0, 0.5), (1.2, 0.9), (0.9, -0.1)])
def test_discount_range(pair):
    with pytest.raises(ValidationError):
        DiscountPair(*pair)


@given(seed=st.integers(0, 10_000), d=st.integers(1, 4))
def test_discount_off_equals_static_posterior(seed, d):
    rng = np.random.default_rng(seed)
    T = 30
    X = rng.normal(size=(T, d))
    y = X @ rng.normal(size=d) + rng.normal(scale=0.5, size=T)
    A = rng.normal(size=(d, d))
    C0 = A @ A.T + np.eye(d)
    m0, n0, s0 = rng.normal(size=d), 3.0, 0.8
    hist = forward_filter(DlmState(m0, C0, n0, s0), X, y, NO_DISCOUNT)
    m, C, n, s = static_conjugate_posterior(X, y, m0, C0, n0, s0)
    post = hist[-1].post
    assert np.allclose(post.m, m, atol=1e-10, rtol=0)
    assert np.allclose(post.C, C, atol=1e-10, rtol=0)
    assert abs(post.n - n) < 1e-10 and abs(post.s - s) < 1e-10


@given(seed=st.integers(0, 10_000))
def test_filter_covariance_stays_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    d = 3
    state = DlmState(np.zeros(d), np.eye(d), 2.0, 1.0)
    disc = DiscountPair(0.9, 0.95)
    for _ in range(50):
        state = filter_step(state, rng.normal(size=d), rng.normal(), disc).post
    assert np.array_equal(state.C, state.C.T)
    assert np.linalg.eigvalsh(state.C).min() > -1e-12


def test_single_step_backward_draw_is_final_posterior():
    rec = filter_step(scalar_state(), [1.0], 1.0, NO_DISCOUNT)
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    traj = backward_sample([rec], NO_DISCOUNT, rng_a)
    post = rec.post
    inv_v = rng_b.standard_gamma(post.n / 2) / (post.n * post.s / 2)
    theta_T = post.m + np.sqrt(post.C[0, 0] / (inv_v * post.s)) * rng_b.standard_normal(1)
    assert np.isclose(traj.theta[1, 0], theta_T[0], rtol=0, atol=1e-15)
    assert np.isclose(traj.v[0], 1 / inv_v)


def test_single_step_draws_follow_student_t():
    rec = filter_step(scalar_state(), [1.0], 1.0, DiscountPair(0.9, 0.9))
    rng = np.random.default_rng(1)
    draws = np.array([backward_sample([rec], DiscountPair(0.9, 0.9), rng).theta[1, 0] for _ in range(4000)])
    post = rec.post
    assert stats.kstest(draws, stats.t(post.n, post.m[0], math.sqrt(post.C[0, 0])).cdf).pvalue > 0.01


def test_zero_covariance_draws_are_means():
    state = DlmState(np.array([1.0, 2.0]), np.zeros((2, 2)), 5.0, 1.0)
    disc = DiscountPair(0.95, 0.9)
    rng = np.random.default_rng(0)
    hist = forward_filter(state, rng.normal(size=(6, 2)), rng.normal(size=6), disc)
    means = np.array([hist[0].prev.m] + [r.post.m for r in hist])
    assert all(np.allclose(r.post.C, 0) for r in hist)
    for _ in range(5):
        assert np.array_equal(backward_sample(hist, disc, rng).theta, means)


def test_backward_sampler_matches_kalman_smoother():
    rng = np.random.default_rng(0)
    T, d, V, delta = 20, 2, 0.4, 0.9
    X = np.column_stack([np.ones(T), rng.normal(size=T)])
    y = X @ np.array([0.5, 1.0]) + rng.normal(scale=math.sqrt(V), size=T)
    m0, C0 = np.zeros(d), np.eye(d)
    disc = DiscountPair(delta, 1.0)
    hist = forward_filter(DlmState(m0, C0, 1e12, V), X, y, disc)
    draws = np.array([backward_sample(hist, disc, rng).theta for _ in range(10_000)])
    smooth = discount_kalman_smoother(X, y, m0, C0, V, delta)
    se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - smooth) <= 3 * se + 1e-12)


def test_backward_sample_empty_history():
    with pytest.raises(ValidationError):
        backward_sample([], NO_DISCOUNT, np.random.default_rng(0))


def test_log_pdf_normal_limit():
    assert abs(log_pdf(StudentT(1e6, 0.0, 1.0), 0.0) + 0.918939) < 1e-6


@given(
    dof=st.floats(0.5, 200), loc=st.floats(-50, 50), scale=st.floats(1e-3, 50), a=st.floats(0, 20)
)
def test_log_pdf_symmetry(dof, loc, scale, a):
    d = StudentT(dof, loc, scale)
    assert math.isclose(log_pdf(d, loc + a), log_pdf(d, loc - a), rel_tol=1e-12, abs_tol=1e-12)


@pytest.mark.parametrize("dof,scale", [(1.0, 0.5), (3.0, 2.0), (30.0, 0.1)])
def test_log_pdf_integrates_to_one(dof, scale):
    d = StudentT(dof, 0.7, scale)
    total = sum(
        integrate.quad(lambda u: math.exp(log_pdf(d, u)), lo, hi, limit=500, epsabs=1e-13)[0]
        for lo, hi in [(-math.inf, -1e3), (-1e3, 0.7), (0.7, 1e3), (1e3, math.inf)]
    )
    assert abs(total - 1.0) < 1e-6


def test_log_pdf_matches_scipy():
    d = StudentT(4.5, -1.0, 2.5)
    y = np.linspace(-10, 10, 21)
    assert np.allclose(log_pdf(d, y), stats.t.logpdf(y, 4.5, -1.0, math.sqrt(2.5)), atol=1e-12)


def test_student_t_moments_and_sampler():
    d = StudentT(8.0, 1.0, 2.0)
    assert d.mean == 1.0 and math.isclose(d.variance, 2.0 * 8 / 6)
    assert math.isinf(StudentT(2.0, 0.0, 1.0).variance)
    draws = d.sample(np.random.default_rng(3), 20_000)
    assert stats.kstest(draws, stats.t(8.0, 1.0, math.sqrt(2.0)).cdf).pvalue > 0.01
