# -*- coding: utf-8 -*-
"""截断棍断裂 DP 混合的分块 Gibbs 采样器"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from src import sampler
from src.data_model import Hyperparameters, ResponseKind, grid_graph, path_graph, validate_dataset
from src.errors import ChainError, InputError, NumericalError, ProfileRegressionWarning
from src.sampler import (
    Schedule,
    allocation_probabilities,
    check_state,
    extend_sticks,
    gibbs_sweep,
    init_state,
    label_moves,
    log_joint,
    log_likelihood,
    relabel_by_occupancy,
    run_chain,
    sample_allocations,
    sample_alpha,
    sample_sticks,
    stick_weights,
    sweep_components,
)
from src.synth import enumerate_posterior

from conftest import make_dataset, make_state


def _two_area_dataset(y=(0.0, 0.0)):
    return validate_dataset({'y': list(y), 'x_0': [0, 1]}, path_graph(2), categories=(2,))


# ============================================================================
# 棍断裂与 α
# ============================================================================

def test_stick_weights_halves():
    psi, residual = stick_weights(np.array([0.5, 0.5, 0.5]))
    assert psi.tolist() == [0.5, 0.25, 0.125]
    assert residual == 0.125


def test_first_stick_posterior_mean(rng):
    n = 3
    draws = np.array([sample_sticks(np.zeros(n, dtype=int), 1.0, rng)[0][0] for _ in range(5000)])
    assert draws.mean() == pytest.approx((n + 1) / (n + 2), abs=0.01)


def test_sticks_cover_residual_mass(rng):
    for alpha in (0.1, 1.0, 5.0):
        V, psi = sample_sticks(np.array([0, 0, 1, 3]), alpha, rng)
        _, residual = stick_weights(V)
        assert residual < 1e-8
        assert V.size >= 4
        assert psi.sum() == pytest.approx(1.0, abs=1e-8)


def test_truncation_cap_warns(rng):
    with pytest.warns(ProfileRegressionWarning):
        V = extend_sticks(np.zeros(0), 1e6, rng, max_truncation=50)
    assert V.size == 50


def test_sample_sticks_rejects_nonpositive_alpha(rng):
    with pytest.raises(InputError):
        sample_sticks(np.zeros(3, dtype=int), 0.0, rng)


def test_alpha_without_sticks_uses_prior(rng):
    draws = np.array([sample_alpha(np.zeros(0), 2.0, 1.0, rng) for _ in range(5000)])
    assert stats.kstest(draws, stats.gamma(2.0, scale=1.0).cdf).pvalue > 0.01


def test_alpha_single_stick(rng):
    V = np.array([1.0 - math.exp(-1.0)])
    draws = np.array([sample_alpha(V, 2.0, 1.0, rng) for _ in range(5000)])
    assert stats.kstest(draws, stats.gamma(3.0, scale=0.5).cdf).pvalue > 0.01


def test_alpha_rejects_degenerate_sticks(rng):
    with pytest.raises(NumericalError):
        sample_alpha(np.array([0.3, 1.0]), 2.0, 1.0, rng)


# ============================================================================
# 初始化
# ============================================================================

def test_init_respects_initial_cluster_count():
    dataset = make_dataset(4767, categories=(5,))
    hyper = Hyperparameters.default(dataset.categories)
    state = init_state(dataset, hyper, 50, np.random.default_rng(0))
    assert state.z.max() < 50
    assert state.C_total >= 50


def test_init_small_state_is_valid(tiny_dataset, tiny_hyper):
    state = init_state(tiny_dataset, tiny_hyper, 2, np.random.default_rng(1))
    check_state(state, tiny_dataset)
    assert np.all(state.spatial.u == 0.0)


def test_init_is_deterministic(tiny_dataset, tiny_hyper):
    a = init_state(tiny_dataset, tiny_hyper, 5, np.random.default_rng(42))
    b = init_state(tiny_dataset, tiny_hyper, 5, np.random.default_rng(42))
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.V, b.V)
    assert np.array_equal(a.theta, b.theta)
    assert a.alpha == b.alpha


def test_init_rejects_mismatched_hyperparameters(tiny_dataset):
    hyper = Hyperparameters.default((2,))
    with pytest.raises(InputError):
        init_state(tiny_dataset, hyper, 5, np.random.default_rng(0))


# ============================================================================
# 分配
# ============================================================================

def test_allocation_probabilities_bayes_normalization():
    dataset = _two_area_dataset()
    shift = math.sqrt(2.0 * math.log(2.0))
    state = make_state([0, 0], [0.0, shift], [np.full((2, 2), 0.5)], psi=[0.5, 0.5])
    probs = allocation_probabilities(state, dataset)
    assert np.allclose(probs, [[2 / 3, 1 / 3], [2 / 3, 1 / 3]], atol=1e-12)


def test_degenerate_weights_send_all_to_first_cluster(rng):
    dataset = _two_area_dataset(y=(0.3, -2.0))
    state = make_state([1, 1], [0.0, 0.0], [np.full((2, 2), 0.5)], psi=[1.0, 0.0])
    z = sample_allocations(state, dataset, rng)
    assert z.tolist() == [0, 0]


def test_all_minus_infinity_names_area():
    dataset = _two_area_dataset()
    state = make_state([0, 0], [0.0, 0.0], [np.array([[1.0, 0.0], [1.0, 0.0]])], psi=[0.5, 0.5])
    with pytest.raises(NumericalError) as excinfo:
        allocation_probabilities(state, dataset)
    assert excinfo.value.area == 1


def test_allocation_frequencies_match_enumeration(rng):
    dataset = _two_area_dataset(y=(0.4, -0.7))
    phi = [np.array([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]])]
    state = make_state([0, 0], [0.0, -1.0, 0.8], phi, psi=[0.5, 0.3, 0.2], tauY=2.0)
    # 逐个簇直接计算未归一化权重
    expected = np.zeros((2, 3))
    for i in range(2):
        for c in range(3):
            expected[i, c] = (state.psi[c] * phi[0][c, dataset.x[i, 0]]
                              * stats.norm.pdf(dataset.y[i], state.theta[c], math.sqrt(0.5)))
    expected /= expected.sum(axis=1, keepdims=True)

    counts = np.zeros((2, 3))
    draws = 100000
    for _ in range(draws):
        z = sample_allocations(state, dataset, rng)
        counts[[0, 1], z] += 1
    freq = counts / draws
    se = np.sqrt(expected * (1 - expected) / draws)
    assert np.all(np.abs(freq - expected) < 4 * se + 1e-12)


# ============================================================================
# 标签移动
# ============================================================================

def _random_state(rng, n=8, C=4):
    phi = [rng.dirichlet(np.ones(3), size=C), rng.dirichlet(np.ones(2), size=C)]
    psi = rng.dirichlet(np.ones(C))
    return make_state(rng.integers(0, C, size=n), rng.normal(size=C), phi, psi=psi)


def _partition(z):
    return frozenset(frozenset(np.flatnonzero(z == c).tolist()) for c in np.unique(z))


def test_label_moves_preserve_likelihood(rng):
    dataset = make_dataset(8, seed=4, categories=(3, 2))
    for _ in range(100):
        state = _random_state(rng)
        before = log_likelihood(state, dataset)
        partition = _partition(state.z)
        for _ in range(5):
            label_moves(state, rng)
        assert log_likelihood(state, dataset) == pytest.approx(before, abs=1e-10)
        assert _partition(state.z) == partition


def test_swap_of_empty_clusters_always_accepted(rng):
    state = make_state([0, 0], [5.0, 1.0, 2.0], [np.full((3, 2), 0.5)], psi=[0.5, 0.3, 0.2])
    swapped = 0
    for _ in range(200):
        occupied, previous = state.z[0], state.theta.copy()
        label_moves(state, rng)
        assert state.theta[state.z[0]] == 5.0
        assert np.all(state.z == state.z[0])
        # 占用标签不变而 θ 变了，说明交换的是两个空聚类
        if state.z[0] == occupied and not np.array_equal(state.theta, previous):
            swapped += 1
    assert swapped > 0


# ============================================================================
# 联合密度
# ============================================================================

@pytest.mark.parametrize('kind', ['gaussian', 'poisson'])
def test_log_joint_finite_at_init(kind):
    dataset = make_dataset(10, seed=2, kind=kind, p=1, categories=(3, 2))
    hyper = Hyperparameters.default(dataset.categories)
    state = init_state(dataset, hyper, 4, np.random.default_rng(5))
    assert np.isfinite(log_joint(state, dataset, hyper))


def test_log_joint_spatial_block_on_path_graph():
    dataset = make_dataset(5, seed=3, categories=(3, 3))
    hyper = Hyperparameters.default(dataset.categories)
    u = np.array([0.4, -0.2, 0.1, -0.5, 0.2])
    state = make_state([0, 0, 1, 1, 0], [0.0, 1.0], [np.full((2, 3), 1 / 3)] * 2, u=u, tau=2.5)
    spatial = log_joint(state, dataset, hyper) - log_joint(state, dataset, hyper, spatial_enabled=False)
    # 路径图：秩 n-1，二次型为相邻差的平方和
    expected = 0.5 * 4 * math.log(2.5) - 0.5 * 2.5 * float(np.sum(np.diff(u) ** 2))
    expected += stats.gamma.logpdf(2.5, hyper.a_tau, scale=1.0 / hyper.b_tau)
    assert spatial == pytest.approx(expected, abs=1e-10)


def test_accepted_swap_carries_adapted_steps(rng):
    state = make_state([0, 1], [1.0, 2.0], [np.eye(2)], psi=[0.5, 0.5])
    state.theta_step.log_step[:] = [0.1, -0.7]
    state.theta_step.batch_trials[:] = [3.0, 5.0]
    # 两个聚类占用数相同，交换总被接受
    label_moves(state, rng)
    assert state.theta.tolist() == [2.0, 1.0]
    assert state.theta_step.log_step.tolist() == [-0.7, 0.1]
    assert state.theta_step.batch_trials.tolist() == [5.0, 3.0]


def test_frozen_steps_stay_with_label_index(rng):
    state = make_state([0, 1], [1.0, 2.0], [np.eye(2)], psi=[0.5, 0.5])
    state.theta_step.log_step[:] = [0.1, -0.7]
    state.theta_step.freeze()
    label_moves(state, rng)
    assert state.theta.tolist() == [2.0, 1.0]
    assert state.theta_step.log_step.tolist() == [0.1, -0.7]


def test_relabel_by_occupancy():
    state = make_state([2, 2, 0], [0.0, 1.0, 2.0], [np.eye(3)], psi=[0.2, 0.3, 0.5])
    z, theta, phi, psi = relabel_by_occupancy(state)
    assert z.tolist() == [0, 0, 1]
    assert theta.tolist() == [2.0, 0.0, 1.0]
    assert psi.tolist() == [0.5, 0.2, 0.3]
    assert phi[0][0].tolist() == [0.0, 0.0, 1.0]
    # 链状态本身不变
    assert state.z.tolist() == [2, 2, 0]


# ============================================================================
# 扫描与链
# ============================================================================

def test_sweep_order():
    names = [name for name, _ in sweep_components(ResponseKind.GAUSSIAN, True)]
    assert names == ['allocations', 'sticks', 'alpha', 'phi', 'theta', 'beta', 'tauY',
                     'u', 'recenter', 'tau', 'label_moves']
    names = [name for name, _ in sweep_components(ResponseKind.POISSON, False)]
    assert 'tauY' not in names and 'u' not in names


def test_sweep_keeps_invariants(rng):
    dataset = make_dataset(12, seed=2, p=1, categories=(3, 2))
    hyper = Hyperparameters.default(dataset.categories)
    state = init_state(dataset, hyper, 5, rng)
    for iteration in range(1, 31):
        gibbs_sweep(state, dataset, hyper, rng, iteration=iteration)
        check_state(state, dataset)
    assert math.isfinite(log_joint(state, dataset, hyper))


def test_spatial_sweeps_keep_bookkeeping_consistent(rng):
    dataset = validate_dataset(
        {'y': [0.2, -1.0, 1.5, 0.4, -0.3, 2.1, 0.0, 1.1], 'x_0': [0, 1, 2, 0, 1, 2, 0, 1]},
        grid_graph(2, 4), categories=(3,),
    )
    hyper = Hyperparameters.default(dataset.categories)
    state = init_state(dataset, hyper, 4, rng)
    for iteration in range(1, 101):
        gibbs_sweep(state, dataset, hyper, rng, iteration=iteration)
        check_state(state, dataset)
        fresh = state.copy()
        fresh.psi, _ = stick_weights(fresh.V)
        assert abs(state.spatial.u.sum()) < 1e-8
        assert log_joint(state, dataset, hyper) == pytest.approx(log_joint(fresh, dataset, hyper), abs=1e-8)


@pytest.mark.slow
def test_coclustering_invariant_under_area_permutation():
    dataset = make_dataset(5, seed=8, categories=(2, 2))
    hyper = Hyperparameters.default(dataset.categories)
    perm = np.array([3, 0, 4, 1, 2])
    schedule = Schedule(40000, 2000, 1, n_init_clusters=3, seed=21)
    base = run_chain(dataset, hyper, schedule).allocations
    moved = run_chain(dataset.permuted(perm), hyper, replace(schedule, seed=22)).allocations
    S = (base[:, :, None] == base[:, None, :]).mean(axis=0)
    S_moved = (moved[:, :, None] == moved[:, None, :]).mean(axis=0)
    assert np.allclose(S_moved, S[np.ix_(perm, perm)], atol=0.03)


def test_poisson_sweep_keeps_invariants(rng):
    dataset = make_dataset(10, seed=5, kind='poisson', categories=(2,))
    hyper = Hyperparameters.default(dataset.categories)
    state = init_state(dataset, hyper, 4, rng)
    for iteration in range(1, 21):
        gibbs_sweep(state, dataset, hyper, rng, iteration=iteration)
        check_state(state, dataset)
    assert state.globals.tauY == 1.0


def test_check_state_detects_broken_psi(tiny_dataset, tiny_hyper):
    state = init_state(tiny_dataset, tiny_hyper, 3, np.random.default_rng(0))
    state.psi = state.psi * 0.5
    with pytest.raises(NumericalError):
        check_state(state, tiny_dataset)


def test_check_state_detects_uncentered_field(tiny_dataset, tiny_hyper):
    state = init_state(tiny_dataset, tiny_hyper, 3, np.random.default_rng(0))
    state.spatial.u = np.array([1.0, 0.0, 0.0])
    with pytest.raises(NumericalError):
        check_state(state, tiny_dataset)
    check_state(state, tiny_dataset, spatial_enabled=False)


def test_schedule_retained_count():
    assert Schedule(10000, 5000, 1).n_retained == 5000
    assert Schedule(20, 10, 3).n_retained == 3
    schedule = Schedule(20, 10, 3)
    assert [t for t in range(1, 21) if schedule.is_retained(t)] == [13, 16, 19]


@pytest.mark.parametrize('kwargs', [
    dict(n_iter=10, burn_in=10),
    dict(n_iter=10, burn_in=2, thin=0),
    dict(n_iter=10, burn_in=2, n_init_clusters=1),
    dict(n_iter=0, burn_in=0),
])
def test_schedule_validation(kwargs):
    with pytest.raises(InputError):
        Schedule(**kwargs)


def test_run_chain_retains_expected_rows(tiny_dataset, tiny_hyper):
    trace = run_chain(tiny_dataset, tiny_hyper, Schedule(20, 10, 1, n_init_clusters=5, seed=3))
    assert len(trace) == 10
    assert trace.allocations.shape == (10, 3)
    assert [r.iteration for r in trace.records] == list(range(11, 21))
    frame = trace.scalar_frame()
    assert list(frame.columns) == ['iteration', 'alpha', 'tau', 'tauY', 'n_occupied',
                                   'accept_theta', 'accept_beta']
    assert trace.u_count == 10


def test_run_chain_is_reproducible(tiny_dataset, tiny_hyper):
    schedule = Schedule(30, 10, 2, n_init_clusters=5, seed=11)
    a = run_chain(tiny_dataset, tiny_hyper, schedule)
    b = run_chain(tiny_dataset, tiny_hyper, schedule)
    assert np.array_equal(a.allocations, b.allocations)
    assert a.scalar_frame().equals(b.scalar_frame())
    assert np.array_equal(a.u_mean, b.u_mean)


def test_run_chain_without_spatial_effects(tiny_dataset, tiny_hyper):
    schedule = Schedule(15, 5, 1, n_init_clusters=3, seed=2, spatial_enabled=False, debug=True)
    trace = run_chain(tiny_dataset, tiny_hyper, schedule)
    assert np.all(np.isnan(trace.scalar_frame()['tau']))
    assert trace.u_count == 0
    assert np.all(trace.u_mean == 0.0)


def test_run_chain_debug_mode(tiny_dataset, tiny_hyper):
    trace = run_chain(tiny_dataset, tiny_hyper, Schedule(15, 5, 1, n_init_clusters=3, seed=2, debug=True))
    assert len(trace) == 10


def test_u_snapshots_are_thinned(tiny_dataset, tiny_hyper):
    trace = run_chain(tiny_dataset, tiny_hyper, Schedule(30, 10, 1, n_init_clusters=3, seed=2, u_thin=5))
    kept = [r.u is not None for r in trace.records]
    assert sum(kept) == 4
    assert trace.u_count == 20


def test_progress_callback_sees_every_iteration(tiny_dataset, tiny_hyper):
    seen = []
    run_chain(tiny_dataset, tiny_hyper, Schedule(12, 2, 1, n_init_clusters=3, seed=1),
              progress=lambda iteration, state: seen.append(iteration))
    assert seen == list(range(1, 13))


def test_component_failure_becomes_chain_error(tiny_dataset, tiny_hyper, monkeypatch):
    def failing(state, dataset, hyper, rng):
        raise NumericalError("boom", area=1)

    monkeypatch.setattr(sampler, '_update_theta', failing)
    with pytest.raises(ChainError) as excinfo:
        run_chain(tiny_dataset, tiny_hyper, Schedule(5, 1, 1, n_init_clusters=3, seed=1))
    assert excinfo.value.iteration == 1
    assert excinfo.value.component == 'theta'
    assert excinfo.value.area == 1
    assert excinfo.value.exit_code == 2


@pytest.mark.slow
def test_coclustering_matches_enumeration(tiny_dataset, tiny_hyper):
    exact = enumerate_posterior(tiny_dataset, tiny_hyper)
    schedule = Schedule(100000, 1000, 1, n_init_clusters=3, seed=7, spatial_enabled=False)
    trace = run_chain(tiny_dataset, tiny_hyper, schedule)
    z = trace.allocations
    empirical = (z[:, :, None] == z[:, None, :]).mean(axis=0)
    assert np.allclose(empirical, exact.coclustering, atol=0.02)
