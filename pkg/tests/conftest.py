# -*- coding: utf-8 -*-
"""共享的测试夹具：小数据集、默认超参数、固定种子的生成器、手工构造的状态与轨迹"""

import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.data_model import Hyperparameters, ResponseKind, path_graph, validate_dataset  # noqa: E402
from src.response_model import AdaptiveStep, ResponseGlobals  # noqa: E402
from src.sampler import MCMCState, SampleTrace, TraceRecord, stick_weights  # noqa: E402
from src.spatial import SpatialField  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_dataset():
    """3 个面积的路径图，2 个二分类协变量，高斯响应"""
    table = {
        'y': [0.1, 0.3, 4.0],
        'x_0': [0, 0, 1],
        'x_1': [1, 1, 0],
    }
    return validate_dataset(table, path_graph(3), ResponseKind.GAUSSIAN)


@pytest.fixture
def tiny_hyper(tiny_dataset):
    return Hyperparameters.default(tiny_dataset.categories)


def make_dataset(n: int, seed: int = 0, kind: str = 'gaussian', p: int = 0,
                 categories: Sequence[int] = (3, 3)):
    """路径图上的随机数据集"""
    local = np.random.default_rng(seed)
    table = {}
    if kind == 'poisson':
        table['y'] = local.poisson(5.0, size=n).astype(float)
        table['offset'] = local.uniform(1.0, 3.0, size=n)
    else:
        table['y'] = local.normal(size=n)
    for j, k in enumerate(categories):
        table[f'x_{j}'] = local.integers(0, k, size=n)
    for k in range(p):
        table[f'w_{k}'] = local.normal(size=n)
    return validate_dataset(table, path_graph(n), kind, categories=categories)


def make_state(
    z: Sequence[int],
    theta: Sequence[float],
    phi: Sequence[np.ndarray],
    psi: Optional[Sequence[float]] = None,
    tauY: float = 1.0,
    beta: Sequence[float] = (),
    u: Optional[Sequence[float]] = None,
    tau: float = 1.0,
    alpha: float = 1.0,
) -> MCMCState:
    """按给定参数手工构造状态；ψ 缺省时取均匀棍子"""
    theta = np.asarray(theta, dtype=float)
    C = theta.size
    if psi is None:
        V = np.full(C, 0.5)
        V[-1] = 1.0 - 1e-12
        psi_arr, _ = stick_weights(V)
    else:
        psi_arr = np.asarray(psi, dtype=float)
        remaining = 1.0 - np.concatenate([[0.0], np.cumsum(psi_arr)[:-1]])
        with np.errstate(divide='ignore', invalid='ignore'):
            V = np.clip(np.where(remaining > 0, psi_arr / remaining, 0.5), 1e-12, 1 - 1e-12)
    z = np.asarray(z, dtype=int)
    return MCMCState(
        z=z,
        V=V,
        psi=psi_arr,
        theta=theta,
        phi=[np.asarray(p, dtype=float) for p in phi],
        globals=ResponseGlobals(beta=np.asarray(beta, dtype=float), tauY=tauY),
        spatial=SpatialField(u=np.zeros(z.size) if u is None else np.asarray(u, dtype=float), tau=tau),
        alpha=alpha,
        theta_step=AdaptiveStep(size=C),
        beta_step=AdaptiveStep(size=len(beta)),
    )


def make_record(
    z: Sequence[int],
    psi: Sequence[float],
    theta: Sequence[float],
    phi: Sequence[np.ndarray],
    iteration: int = 1,
    beta: Sequence[float] = (),
    tauY: float = 1.0,
) -> TraceRecord:
    z = np.asarray(z, dtype=int)
    return TraceRecord(
        iteration=iteration,
        z=z,
        psi=np.asarray(psi, dtype=float),
        theta=np.asarray(theta, dtype=float),
        phi=tuple(np.asarray(p, dtype=float) for p in phi),
        beta=np.asarray(beta, dtype=float),
        alpha=1.0,
        tau=1.0,
        tauY=tauY,
        n_occupied=int(np.unique(z).size),
    )


def make_trace(records, categories, kind=ResponseKind.GAUSSIAN, chain: int = 0) -> SampleTrace:
    trace = SampleTrace(n=records[0].z.size, response_kind=kind,
                        categories=tuple(categories), chain=chain)
    for r in records:
        trace.append(r)
    return trace
