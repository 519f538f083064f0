# -*- coding: utf-8 -*-
"""
收敛诊断模块

- 分半潜在尺度缩减因子（split R-hat）
- 批均值蒙特卡洛标准误与有效样本量
"""

import math
from typing import Sequence

import numpy as np

from ..errors import InputError


def split_rhat(chains: Sequence[Sequence[float]], min_chains: int = 1) -> float:
    """把每条链对半切开后计算潜在尺度缩减因子

    Args:
        chains: m 条等长链
        min_chains: 最少链数

    Returns:
        R-hat；所有序列均为常数且彼此相同时返回 1.0，序列太短时返回 nan
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[0] < min_chains:
        raise InputError(f"split R-hat 需要至少 {min_chains} 条链，当前 {arr.shape[0]} 条")
    half = arr.shape[1] // 2
    if half < 2:
        return float('nan')
    seqs = np.vstack([arr[:, :half], arr[:, arr.shape[1] - half:]])

    n = seqs.shape[1]
    means = seqs.mean(axis=1)
    within = float(seqs.var(axis=1, ddof=1).mean())
    between = float(n * means.var(ddof=1))
    if within == 0.0:
        return 1.0 if between == 0.0 else float('inf')
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def batch_means_se(samples: Sequence[float], n_batches: int = 0) -> float:
    """批均值法估计样本均值的蒙特卡洛标准误

    默认批大小为 ⌊√T⌋。
    """
    x = np.asarray(samples, dtype=float)
    T = x.size
    if T < 4:
        return float('nan')
    if n_batches <= 0:
        size = int(math.sqrt(T))
        n_batches = T // size
    else:
        size = T // n_batches
    if n_batches < 2 or size < 1:
        return float('nan')
    means = x[: n_batches * size].reshape(n_batches, size).mean(axis=1)
    return float(math.sqrt(means.var(ddof=1) / n_batches))


def effective_sample_size(samples: Sequence[float]) -> float:
    """var(x) / se²，常数序列返回样本数"""
    x = np.asarray(samples, dtype=float)
    se = batch_means_se(x)
    if not math.isfinite(se):
        return float('nan')
    var = float(x.var(ddof=1))
    if se == 0.0:
        return float(x.size)
    return var / (se * se)
