# -*- coding: utf-8 -*-
"""
后处理模块

把分配轨迹转换为可报告的结果：
- 后验共聚类相似度矩阵 S
- 在 D = 1 − S 上运行 PAM（BUILD + SWAP），按平均轮廓宽度选择 k
- 代表性聚类的响应均值、θ 与 φ 分位数（按最大重叠匹配轨迹聚类）
- 伪剖面的后验预测抽样（缺失协变量被边际化）
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import silhouette_score

from . import config
from .data_model import Dataset, Hyperparameters, ResponseKind
from .errors import InputError, NumericalError, ProfileRegressionWarning
from .sampler import SampleTrace, TraceRecord

Traces = Union[SampleTrace, Sequence[SampleTrace]]


def _as_list(traces: Traces) -> List[SampleTrace]:
    if isinstance(traces, SampleTrace):
        return [traces]
    return list(traces)


# ============================================================================
# 相似度矩阵
# ============================================================================

@dataclass
class SimilarityMatrix:
    """S_ij = i 与 j 同类的迭代数 / 保留迭代数"""

    S: np.ndarray
    n_iterations: int

    @property
    def n(self) -> int:
        return int(self.S.shape[0])

    @property
    def dissimilarity(self) -> np.ndarray:
        D = 1.0 - self.S
        np.fill_diagonal(D, 0.0)
        return D


def similarity(traces: Union[Traces, np.ndarray]) -> SimilarityMatrix:
    """累加每次迭代的共聚类指示矩阵

    Args:
        traces: 单条或多条 SampleTrace，或 (T, n) 分配矩阵

    Raises:
        InputError: 轨迹为空
    """
    if isinstance(traces, np.ndarray):
        allocations = np.atleast_2d(traces).astype(int)
    else:
        blocks = [t.allocations for t in _as_list(traces) if len(t)]
        allocations = np.vstack(blocks) if blocks else np.zeros((0, 0), dtype=int)
    if allocations.shape[0] == 0:
        raise InputError("轨迹为空，无法计算相似度矩阵")

    n_iter, n = allocations.shape
    counts = np.zeros((n, n))
    rows = np.arange(n)
    for z in allocations:
        onehot = np.zeros((n, int(z.max()) + 1))
        onehot[rows, z] = 1.0
        counts += onehot @ onehot.T
    return SimilarityMatrix(S=counts / n_iter, n_iterations=n_iter)


# ============================================================================
# PAM
# ============================================================================

@dataclass
class Partition:
    """代表性划分"""

    labels: np.ndarray
    medoids: np.ndarray
    k: int
    silhouette: float = float('nan')
    cost: float = float('nan')
    warnings: List[str] = field(default_factory=list)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def pam_cost(D: np.ndarray, medoids: Sequence[int]) -> float:
    """每个点到最近中心点的相异度之和"""
    return float(D[:, list(medoids)].min(axis=1).sum())


def _assign(D: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    labels = np.argmin(D[:, medoids], axis=1)
    labels[medoids] = np.arange(medoids.size)
    return labels


def pam_fixed_k(D: np.ndarray, k: int, max_swaps: int = config.PAM_MAX_SWAPS):
    """固定 k 的 PAM

    Returns:
        (medoids, labels, 每次 SWAP 后的目标值列表)
    """
    n = D.shape[0]
    if not 1 <= k <= n:
        raise InputError(f"k={k} 超出范围 [1, {n}]")

    # BUILD
    medoids = [int(np.argmin(D.sum(axis=1)))]
    nearest = D[medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[None, :] - D, 0.0).sum(axis=1)
        gains[medoids] = -np.inf
        best = int(np.argmax(gains))
        medoids.append(best)
        nearest = np.minimum(nearest, D[best])
    medoids = np.array(medoids, dtype=int)

    # SWAP
    history = [pam_cost(D, medoids)]
    for _ in range(max_swaps):
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        best_cost, best_move = history[-1], None
        for slot in range(k):
            others = np.delete(medoids, slot)
            without = D[:, others].min(axis=1) if others.size else np.full(n, np.inf)
            costs = np.minimum(without[None, :], D).sum(axis=1)
            costs[is_medoid] = np.inf
            h = int(np.argmin(costs))
            if costs[h] < best_cost - 1e-12:
                best_cost, best_move = float(costs[h]), (slot, h)
        if best_move is None:
            break
        medoids = medoids.copy()
        medoids[best_move[0]] = best_move[1]
        history.append(best_cost)
    return medoids, _assign(D, medoids), history


def pam(S: Union[SimilarityMatrix, np.ndarray], k_range: Optional[Iterable[int]] = None) -> Partition:
    """在 D = 1 − S 上运行 PAM，按平均轮廓宽度选择 k（并列取较小的 k）

    Args:
        S: 相似度矩阵
        k_range: 候选 k，默认 2…min(PAM_MAX_K, n−1)

    Returns:
        Partition；D 全为 0 时返回单一聚类并附带警告
    """
    matrix = S.S if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=float)
    n = matrix.shape[0]
    D = 1.0 - matrix
    np.fill_diagonal(D, 0.0)
    D = np.clip(D, 0.0, 1.0)

    degenerate = None
    if np.max(D, initial=0.0) <= 1e-15:
        degenerate = "相异度矩阵全为 0，返回单一聚类"
    elif n < 3:
        degenerate = f"面积数 {n} 过少，无法比较 k ≥ 2 的划分，返回单一聚类"
    if degenerate is not None:
        warnings.warn(degenerate, ProfileRegressionWarning, stacklevel=2)
        medoid = int(np.argmin(D.sum(axis=1))) if n else 0
        return Partition(labels=np.zeros(n, dtype=int), medoids=np.array([medoid]), k=1,
                         cost=float(D[medoid].sum()) if n else 0.0, warnings=[degenerate])

    if k_range is None:
        k_values = list(range(2, min(config.PAM_MAX_K, n - 1) + 1))
    else:
        k_values = sorted(set(int(k) for k in k_range))
    if not k_values or k_values[0] < 2 or k_values[-1] > n - 1:
        raise InputError(f"k 范围 {k_values} 必须位于 [2, {n - 1}] 内")

    best: Optional[Partition] = None
    for k in k_values:
        medoids, labels, history = pam_fixed_k(D, k)
        if np.unique(labels).size < 2:
            continue
        score = float(silhouette_score(D, labels, metric='precomputed'))
        if best is None or score > best.silhouette + 1e-12:
            best = Partition(labels=labels, medoids=medoids, k=k, silhouette=score, cost=history[-1])
    return best


def order_partition(partition: Partition, y: np.ndarray) -> Partition:
    """按观测响应均值升序重新编号聚类"""
    y = np.asarray(y, dtype=float)
    means = np.array([y[partition.labels == c].mean() for c in range(partition.k)])
    order = np.argsort(means, kind='stable')
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return replace(partition, labels=inverse[partition.labels], medoids=partition.medoids[order])


# ============================================================================
# 聚类摘要
# ============================================================================

def match_clusters(z: np.ndarray, labels: np.ndarray, k: int) -> dict:
    """把一次迭代中的每个非空轨迹聚类映射到重叠成员最多的代表性聚类

    Returns:
        {轨迹聚类: 代表性聚类}，重叠数并列时取较小的代表性标签
    """
    overlap = np.zeros((int(z.max()) + 1, k), dtype=int)
    np.add.at(overlap, (z, labels), 1)
    occupied = np.flatnonzero(overlap.sum(axis=1) > 0)
    return {int(c): int(np.argmax(overlap[c])) for c in occupied}


def cluster_summaries(partition: Partition, traces: Traces, dataset: Dataset) -> pd.DataFrame:
    """每个代表性聚类的响应均值与 θ、φ 的后验分位数

    聚类按观测响应均值排序并重新编号。

    Returns:
        长格式表：cluster, size, response_mean, parameter, covariate, category,
        mean 与各分位数列
    """
    traces = _as_list(traces)
    if partition.labels.size != dataset.n:
        raise InputError(f"划分长度 {partition.labels.size} 与面积数 {dataset.n} 不符")
    partition = order_partition(partition, dataset.y)
    k = partition.k

    theta_pool: List[List[float]] = [[] for _ in range(k)]
    phi_pool = [[[] for _ in range(dataset.J)] for _ in range(k)]
    for trace in traces:
        for record in trace.records:
            for c, r in match_clusters(record.z, partition.labels, k).items():
                theta_pool[r].append(record.theta[c])
                for j in range(dataset.J):
                    phi_pool[r][j].append(record.phi[j][c])

    names = dataset.covariate_names or tuple(f"x_{j}" for j in range(dataset.J))
    quantile_columns = [f"q{q * 100:g}" for q in config.SUMMARY_QUANTILES]
    rows = []
    sizes = partition.sizes()
    for r in range(k):
        members = partition.labels == r
        base = {
            'cluster': r,
            'size': int(sizes[r]),
            'response_mean': float(dataset.y[members].mean()),
        }
        rows.append({**base, 'parameter': 'theta', 'covariate': '', 'category': -1,
                     **_quantile_row(np.asarray(theta_pool[r]), quantile_columns)})
        for j in range(dataset.J):
            samples = np.asarray(phi_pool[r][j]).reshape(-1, dataset.categories[j])
            for cat in range(dataset.categories[j]):
                rows.append({**base, 'parameter': 'phi', 'covariate': names[j], 'category': cat,
                             **_quantile_row(samples[:, cat], quantile_columns)})
    return pd.DataFrame(rows)


def _quantile_row(values: np.ndarray, columns: List[str]) -> dict:
    if values.size == 0:
        return {'n_samples': 0, 'mean': float('nan'), **{c: float('nan') for c in columns}}
    quantiles = np.quantile(values, config.SUMMARY_QUANTILES)
    return {'n_samples': int(values.size), 'mean': float(values.mean()),
            **dict(zip(columns, map(float, quantiles)))}


# ============================================================================
# 伪剖面预测
# ============================================================================

@dataclass
class PseudoProfile:
    """预测情景

    codes 中的 None 表示 MISSING（该协变量被边际化）。
    """

    name: str
    codes: Tuple[Optional[int], ...]
    fixed_effects: Optional[np.ndarray] = None
    spatial_offset: float = 0.0
    expected: float = 1.0

    def validate(self, categories: Sequence[int], p: int) -> None:
        """检查编码范围、固定效应维度与期望计数

        Raises:
            InputError: 任一检查失败
        """
        if len(self.codes) != len(categories):
            raise InputError(f"伪剖面 {self.name} 有 {len(self.codes)} 个协变量，模型有 {len(categories)} 个")
        for j, (code, k) in enumerate(zip(self.codes, categories)):
            if code is not None and not 0 <= code < k:
                raise InputError(f"伪剖面 {self.name} 的协变量 {j} 编码 {code} 超出范围 [0, {k})")
        w = self.w(p)
        if w.size != p:
            raise InputError(f"伪剖面 {self.name} 的固定效应长度 {w.size} 与 p={p} 不符")
        if not (math.isfinite(self.expected) and self.expected > 0):
            raise InputError(f"伪剖面 {self.name} 的期望计数 E 必须为正")

    def w(self, p: int) -> np.ndarray:
        if self.fixed_effects is None:
            return np.zeros(p)
        return np.asarray(self.fixed_effects, dtype=float)


def profile_log_weights(profile: PseudoProfile, record: TraceRecord) -> np.ndarray:
    """log ψ_c + Σ_{j: 非缺失} log φ_{c,j,code_j}"""
    with np.errstate(divide='ignore'):
        log_w = np.log(record.psi)
        for j, code in enumerate(profile.codes):
            if code is not None:
                log_w = log_w + np.log(record.phi[j][:, code])
    return log_w


def profile_cluster_weights(profile: PseudoProfile, record: TraceRecord) -> np.ndarray:
    """归一化的聚类选择概率

    Raises:
        NumericalError: 所有权重均为 -inf
    """
    log_w = profile_log_weights(profile, record)
    top = np.max(log_w)
    if not np.isfinite(top):
        raise NumericalError(f"伪剖面 {profile.name} 在迭代 {record.iteration} 的聚类权重全部为 -inf")
    w = np.exp(log_w - top)
    return w / w.sum()


def selection_entropy(profile: PseudoProfile, traces: Traces) -> float:
    """聚类选择分布的熵，在轨迹上取平均"""
    values = []
    for trace in _as_list(traces):
        for record in trace.records:
            w = profile_cluster_weights(profile, record)
            nz = w[w > 0]
            values.append(float(-(nz * np.log(nz)).sum()))
    return float(np.mean(values))


def predict(
    profiles: Sequence[PseudoProfile],
    traces: Traces,
    hyper: Optional[Hyperparameters] = None,
    rng: Optional[np.random.Generator] = None,
) -> pd.DataFrame:
    """对每个伪剖面在每次保留迭代上抽一个聚类与一个预测响应

    Args:
        profiles: 伪剖面列表
        traces: 拟合得到的轨迹
        hyper: 超参数（用于校验类别数，缺省时使用轨迹记录的类别数）
        rng: 随机数生成器

    Returns:
        列为 profile_id, chain, iteration, cluster, mean, draw 的表
    """
    traces = _as_list(traces)
    if not traces or not any(len(t) for t in traces):
        raise InputError("轨迹为空，无法预测")
    rng = np.random.default_rng() if rng is None else rng
    categories = hyper.categories if hyper is not None else traces[0].categories
    kind = traces[0].response_kind
    p = traces[0].p
    for profile in profiles:
        profile.validate(categories, p)

    rows = []
    for profile in profiles:
        w = profile.w(p)
        for trace in traces:
            for record in trace.records:
                weights = profile_cluster_weights(profile, record)
                c = int(rng.choice(weights.size, p=weights))
                eta = float(record.theta[c] + record.beta @ w + profile.spatial_offset)
                if kind is ResponseKind.POISSON:
                    mean = profile.expected * math.exp(eta)
                    draw = float(rng.poisson(mean))
                else:
                    mean = eta
                    draw = float(rng.normal(eta, math.sqrt(1.0 / record.tauY)))
                rows.append({
                    'profile_id': profile.name,
                    'chain': trace.chain,
                    'iteration': record.iteration,
                    'cluster': c,
                    'mean': mean,
                    'draw': draw,
                })
    return pd.DataFrame(rows, columns=['profile_id', 'chain', 'iteration', 'cluster', 'mean', 'draw'])
