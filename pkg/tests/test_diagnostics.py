# -*- coding: utf-8 -*-
"""收敛诊断：split R-hat、批均值标准误与有效样本量"""

import math

import numpy as np
import pytest

from src.errors import InputError
from src.utils.diagnostics import batch_means_se, effective_sample_size, split_rhat


def _ar1(rng, T, rho):
    x = np.empty(T)
    x[0] = rng.standard_normal()
    noise = rng.standard_normal(T) * math.sqrt(1 - rho ** 2)
    for t in range(1, T):
        x[t] = rho * x[t - 1] + noise[t]
    return x


def test_rhat_near_one_for_iid_chains(rng):
    chains = rng.standard_normal((4, 1000))
    assert split_rhat(chains) == pytest.approx(1.0, abs=0.01)


def test_rhat_flags_disagreeing_chains(rng):
    chains = rng.standard_normal((2, 500))
    chains[1] += 5.0
    assert split_rhat(chains) > 1.5


def test_rhat_flags_drift_within_one_chain():
    chain = np.linspace(0.0, 10.0, 400)
    assert split_rhat(chain) > 1.5


def test_rhat_constant_chains():
    assert split_rhat(np.full((3, 20), 2.5)) == 1.0
    assert split_rhat([[1.0] * 10, [2.0] * 10]) == math.inf


def test_rhat_short_chain_is_nan():
    assert math.isnan(split_rhat([1.0, 2.0, 3.0]))


def test_rhat_minimum_chain_count(rng):
    with pytest.raises(InputError):
        split_rhat(rng.standard_normal(100), min_chains=2)


def test_batch_means_se_iid(rng):
    x = rng.standard_normal(10000)
    assert batch_means_se(x) == pytest.approx(0.01, rel=0.3)


def test_batch_means_se_explicit_batches(rng):
    x = rng.standard_normal(4000)
    assert batch_means_se(x, n_batches=40) == pytest.approx(1 / math.sqrt(4000), rel=0.4)


def test_batch_means_se_short_input():
    assert math.isnan(batch_means_se([1.0, 2.0, 3.0]))


def test_ess_iid_close_to_length(rng):
    x = rng.standard_normal(10000)
    ess = effective_sample_size(x)
    assert 0.5 * x.size < ess < 2.0 * x.size


def test_ess_shrinks_with_autocorrelation(rng):
    x = _ar1(rng, 10000, 0.9)
    assert effective_sample_size(x) < x.size / 5


def test_ess_edge_cases():
    assert effective_sample_size(np.full(100, 1.0)) == 100.0
    assert math.isnan(effective_sample_size([0.1, 0.2]))
