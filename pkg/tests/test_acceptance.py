# -*- coding: utf-8 -*-
"""合成数据上的整体恢复检验（慢）"""

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from src.data_model import Hyperparameters
from src.postprocess import PseudoProfile, pam, predict, similarity
from src.sampler import Schedule, run_chain
from src.synth import SynthSpec, generate

pytestmark = pytest.mark.slow

CHAIN_SEEDS = (101, 202)


@pytest.fixture(scope='module')
def recovery():
    spec = SynthSpec(n_areas=200, grid_shape=(20, 10), k_true=3, separation=3.0,
                     tau_true=2.0, seed=17)
    truth = generate(spec)
    hyper = Hyperparameters.default(truth.dataset.categories)
    traces = []
    for chain, seed in enumerate(CHAIN_SEEDS):
        schedule = Schedule(n_iter=10000, burn_in=5000, thin=1, n_init_clusters=20, seed=seed, u_thin=10)
        traces.append(run_chain(truth.dataset, hyper, schedule, chain=chain))
    return spec, truth, hyper, traces


def test_partition_recovers_true_clusters(recovery):
    _, truth, _, traces = recovery
    partition = pam(similarity(traces))
    assert adjusted_rand_score(truth.true_labels, partition.labels) >= 0.9


def test_spatial_field_tracks_truth(recovery):
    _, truth, _, traces = recovery
    u_mean = np.mean([trace.u_mean for trace in traces], axis=0)
    assert np.corrcoef(u_mean, truth.true_u)[0, 1] >= 0.7


def test_all_missing_profile_follows_stick_weights(recovery):
    _, truth, hyper, traces = recovery
    J = truth.dataset.J
    profiles = [PseudoProfile(name=f'open{r}', codes=(None,) * J) for r in range(10)]
    draws = predict(profiles, traces, hyper, np.random.default_rng(3))

    psi = [r.psi / r.psi.sum() for trace in traces for r in trace.records]
    width = max(p.size for p in psi)
    expected = np.mean([np.pad(p, (0, width - p.size)) for p in psi], axis=0)
    observed = np.bincount(draws['cluster'], minlength=width)[:width] / len(draws)
    assert np.abs(observed - expected).max() < 0.02


def test_modal_profile_selects_matching_cluster(recovery):
    spec, truth, hyper, traces = recovery
    target = 1
    codes = tuple((target + j) % spec.n_categories for j in range(spec.n_covariates))
    draws = predict([PseudoProfile(name='modal', codes=codes)], traces, hyper, np.random.default_rng(4))

    records = [r for trace in traces for r in trace.records]
    hits = 0
    for record, cluster in zip(records, draws['cluster']):
        members = truth.true_labels[record.z == cluster]
        if members.size and np.mean(members == target) > 0.5:
            hits += 1
    assert hits / len(draws) >= 0.9
