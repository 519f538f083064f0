# -*- coding: utf-8 -*-
"""响应模型：似然、θ/β 的自适应 Metropolis、τ_Y 共轭更新"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.data_model import Hyperparameters, path_graph, validate_dataset
from src.errors import InputError
from src.response_model import (
    AdaptiveStep,
    gaussian_log_likelihood,
    linear_predictor,
    metropolis_log_accept,
    poisson_log_likelihood,
    sample_beta,
    sample_tauY,
    sample_theta,
    sample_theta_all,
    t_logpdf,
    tauY_conditional,
)

from conftest import make_dataset, make_state


# ============================================================================
# 似然
# ============================================================================

def test_linear_predictor_examples():
    assert linear_predictor(1.0, [], []) == 1.0
    assert linear_predictor(0.0, [2.0], [3.0]) == 6.0
    assert linear_predictor(0.5, [1.0, -1.0], [2.0, 2.0], 0.25) == pytest.approx(0.75)


def test_linear_predictor_dimension_mismatch():
    with pytest.raises(InputError):
        linear_predictor(0.0, [1.0, 2.0], [1.0])


def test_gaussian_log_likelihood_examples():
    assert gaussian_log_likelihood(1.0, 1.0, 1.0) == pytest.approx(-0.5 * np.log(2 * np.pi))
    assert gaussian_log_likelihood(2.0, 1.0, 1.0) == pytest.approx(-0.5 * np.log(2 * np.pi) - 0.5)
    oracle = stats.norm.logpdf(2.3, loc=1.1, scale=0.5)
    assert gaussian_log_likelihood(2.3, 1.1, 0.25) == pytest.approx(oracle, abs=1e-12)


def test_gaussian_density_integrates_to_one():
    value, _ = integrate.quad(lambda y: np.exp(gaussian_log_likelihood(y, 0.3, 2.0)), -np.inf, np.inf)
    assert value == pytest.approx(1.0, abs=1e-8)


def test_poisson_log_likelihood_examples():
    assert poisson_log_likelihood(0, 1.0, 0.0) == pytest.approx(-1.0, abs=1e-12)
    assert poisson_log_likelihood(1, 1.0, 0.0) == pytest.approx(-1.0, abs=1e-12)
    mu = 2.5 * math.exp(0.4)
    oracle = 7 * math.log(mu) - mu - math.log(math.factorial(7))
    assert poisson_log_likelihood(7, 2.5, 0.4) == pytest.approx(oracle, abs=1e-10)


def test_poisson_mass_sums_to_one():
    y = np.arange(200)
    total = np.exp(poisson_log_likelihood(y, 3.0, 0.7)).sum()
    assert total == pytest.approx(1.0, abs=1e-10)


def test_poisson_rejects_negative_counts():
    with pytest.raises(InputError):
        poisson_log_likelihood(-1, 1.0, 0.0)


def test_t_logpdf_matches_scipy():
    values = np.linspace(-10, 10, 41)
    expected = stats.t.logpdf(values, df=7, loc=0.5, scale=2.5)
    assert np.allclose(t_logpdf(values, 0.5, 2.5, 7), expected, atol=1e-12)


# ============================================================================
# Metropolis 与自适应步长
# ============================================================================

def test_metropolis_detailed_balance_on_three_states():
    log_pi = np.log(np.array([0.2, 0.5, 0.3]))
    P = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i != j:
                P[i, j] = 0.5 * np.exp(metropolis_log_accept(log_pi[i], log_pi[j]))
        P[i, i] = 1.0 - P[i].sum()
    pi = np.exp(log_pi)
    assert np.allclose(pi @ P, pi, atol=1e-3)
    flows = pi[:, None] * P
    assert np.allclose(flows, flows.T, atol=1e-12)


def test_metropolis_nan_is_rejected():
    assert metropolis_log_accept(0.0, np.nan) == -np.inf


def test_adaptive_step_grows_then_freezes():
    step = AdaptiveStep(size=2)
    before = step.steps().copy()
    for _ in range(200):
        step.record(np.array([0, 1]), np.array([1.0, 0.0]))
    after = step.steps()
    assert after[0] > before[0]
    assert after[1] < before[1]

    step.freeze()
    frozen = step.steps().copy()
    for _ in range(200):
        step.record(np.array([0, 1]), np.array([1.0, 1.0]))
    assert np.array_equal(step.steps(), frozen)
    assert 0.0 < step.acceptance_rate < 1.0


def test_adaptive_step_extends_slots():
    step = AdaptiveStep(size=1)
    assert step.steps(4).shape == (4,)
    assert step.size == 4


# ============================================================================
# θ_c
# ============================================================================

def test_empty_cluster_theta_follows_prior(rng):
    dataset = make_dataset(3, categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    C = 100001
    state = make_state([0, 0, 0], np.zeros(C), [])
    theta = sample_theta_all(state, dataset, hyper, rng)
    assert np.median(theta[1:]) == pytest.approx(hyper.mu_theta, abs=0.02 * hyper.sigma_theta)


def test_single_theta_update_empty_cluster(rng):
    dataset = make_dataset(3, categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    state = make_state([0, 0, 0], [0.0, 99.0], [])
    value = sample_theta(1, state, dataset, hyper, rng)
    assert value != 99.0
    assert state.theta[1] == value


def _concentrated_dataset(rng, n=1000):
    table = {'y': 5.0 + rng.standard_normal(n), 'x_0': np.zeros(n, dtype=int)}
    return validate_dataset(table, path_graph(n), categories=(2,))


def test_theta_concentrates_at_sample_mean(rng):
    dataset = _concentrated_dataset(rng)
    hyper = Hyperparameters.default(dataset.categories)
    state = make_state(np.zeros(dataset.n, dtype=int), [0.0], [])
    draws = []
    for iteration in range(4000):
        sample_theta_all(state, dataset, hyper, rng)
        if iteration >= 3000:
            draws.append(state.theta[0])
    assert np.mean(draws) == pytest.approx(5.0, abs=0.1)


def test_theta_acceptance_after_adaptation(rng):
    dataset = _concentrated_dataset(rng)
    hyper = Hyperparameters.default(dataset.categories, mu_theta=5.0)
    state = make_state(np.zeros(dataset.n, dtype=int), [5.0], [])
    for _ in range(5000):
        sample_theta(0, state, dataset, hyper, rng)
    state.theta_step.freeze()
    state.theta_step.reset_counts()
    for _ in range(2000):
        sample_theta(0, state, dataset, hyper, rng)
    assert 0.1 < state.theta_step.acceptance_rate < 0.9


# ============================================================================
# β 与 τ_Y
# ============================================================================

def test_beta_noop_without_fixed_effects(tiny_dataset, tiny_hyper, rng):
    state = make_state([0, 0, 1], [0.0, 1.0], [])
    beta = sample_beta(state, tiny_dataset, tiny_hyper, rng)
    assert beta.size == 0


def test_beta_recovers_strong_effect(rng):
    n = 1000
    w = rng.integers(0, 2, size=n).astype(float)
    table = {'y': 1.0 + 2.0 * w + rng.standard_normal(n), 'x_0': np.zeros(n, dtype=int), 'w_0': w}
    dataset = validate_dataset(table, path_graph(n), categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    state = make_state(np.zeros(n, dtype=int), [1.0], [], beta=[0.0])
    draws = []
    for iteration in range(3000):
        sample_beta(state, dataset, hyper, rng)
        if iteration >= 2000:
            draws.append(state.globals.beta[0])
    assert np.mean(draws) == pytest.approx(2.0, abs=0.2)


def test_tauY_conditional_parameters():
    hyper = Hyperparameters.default((2,))
    assert tauY_conditional(np.array([1.0, -1.0]), hyper) == (3.5, 3.5)
    assert tauY_conditional(np.zeros(10), hyper) == (hyper.s_tauY + 5, hyper.r_tauY)


def test_tauY_draws_match_gamma(rng):
    table = {'y': [1.0, -1.0], 'x_0': [0, 0]}
    dataset = validate_dataset(table, path_graph(2), categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    state = make_state([0, 0], [0.0], [])
    draws = np.array([sample_tauY(state, dataset, hyper, rng) for _ in range(100000)])
    assert draws.mean() == pytest.approx(1.0, abs=0.02)
    assert stats.kstest(draws[:5000], stats.gamma(3.5, scale=1 / 3.5).cdf).pvalue > 0.01
    assert state.globals.sigmaY2 == pytest.approx(1.0 / draws[-1])


def test_tauY_undefined_for_poisson(rng):
    dataset = make_dataset(4, kind='poisson', categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    state = make_state([0, 0, 0, 0], [0.0], [])
    with pytest.raises(InputError):
        sample_tauY(state, dataset, hyper, rng)
