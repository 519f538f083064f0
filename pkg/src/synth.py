# -*- coding: utf-8 -*-
"""
合成数据与独立校验模块

提供：
- 已知划分与空间场的合成数据生成
- 小规模模型的穷举后验（所有集合划分 + 参数网格积分）
- Geweke 联合分布检验的两个模拟器
- 基于 KMeans 的基线聚类
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, stats
from scipy.spatial import Delaunay
from scipy.special import gammaln, logsumexp
from sklearn.cluster import KMeans

from . import config
from .data_model import (
    Dataset,
    Hyperparameters,
    NeighborhoodGraph,
    ResponseKind,
    build_graph,
    grid_graph,
    path_graph,
    validate_dataset,
)
from .errors import InputError
from .response_model import fixed_effect_part
from .sampler import gibbs_sweep, prior_state
from .spatial import sample_icar
from .utils.diagnostics import batch_means_se

GRAPH_KINDS = ('grid', 'path', 'random-planar')


# ============================================================================
# 合成数据
# ============================================================================

@dataclass
class SynthSpec:
    """合成数据参数

    separation 同时控制 θ 间距和 Φ 集中程度：Φ = (1−s)·均匀 + s·独热(众数)，
    s = 1 − exp(−separation)。
    """

    n_areas: int = 200
    graph_kind: str = 'grid'
    k_true: int = 3
    separation: float = 3.0
    tau_true: float = 2.0
    response_kind: ResponseKind = ResponseKind.GAUSSIAN
    seed: int = config.DEFAULT_SEED
    n_covariates: int = 6
    n_categories: int = 5
    noise_sd: float = 1.0
    grid_shape: Optional[Tuple[int, int]] = None
    beta: Tuple[float, ...] = ()
    spatial: bool = True

    def __post_init__(self) -> None:
        self.response_kind = ResponseKind.parse(self.response_kind)
        if self.n_areas < 1:
            raise InputError(f"n_areas 必须为正，当前为 {self.n_areas}")
        if self.graph_kind not in GRAPH_KINDS:
            raise InputError(f"未知的图类型 {self.graph_kind}（可选 {', '.join(GRAPH_KINDS)}）")
        if self.k_true < 1:
            raise InputError(f"k_true 必须 ≥ 1，当前为 {self.k_true}")
        if not self.tau_true > 0:
            raise InputError(f"tau_true 必须为正，当前为 {self.tau_true}")
        if self.separation < 0:
            raise InputError(f"separation 必须 ≥ 0，当前为 {self.separation}")
        if self.n_covariates < 1 or self.n_categories < 2:
            raise InputError("至少需要 1 个协变量，且每个协变量至少 2 个类别")
        if self.grid_shape is not None and self.grid_shape[0] * self.grid_shape[1] != self.n_areas:
            raise InputError(f"网格 {self.grid_shape} 与 n_areas={self.n_areas} 不符")


@dataclass
class SynthResult:
    dataset: Dataset
    true_labels: np.ndarray
    true_u: np.ndarray
    theta: np.ndarray
    phi: List[np.ndarray]

    def truth_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'area': np.arange(self.true_labels.size),
            'label': self.true_labels,
            'u': self.true_u,
        })

    def __iter__(self):
        # 支持 dataset, labels, u = generate(spec)
        return iter((self.dataset, self.true_labels, self.true_u))


def _grid_shape(n: int) -> Tuple[int, int]:
    rows = max(d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0)
    return rows, n // rows


def make_graph(kind: str, n: int, rng: np.random.Generator,
               grid_shape: Optional[Tuple[int, int]] = None) -> NeighborhoodGraph:
    """构建合成邻接图：规则网格、路径或随机平面三角剖分"""
    if kind == 'grid':
        rows, cols = grid_shape or _grid_shape(n)
        return grid_graph(rows, cols)
    if kind == 'path' or n < 4:
        return path_graph(n)
    points = rng.random((n, 2))
    triangulation = Delaunay(points)
    edges = set()
    for simplex in triangulation.simplices:
        a, b, c = (int(v) for v in simplex)
        edges.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(a, c), max(a, c))})
    return build_graph(sorted(edges), n=n)


def synthetic_phi(spec: SynthSpec) -> List[np.ndarray]:
    """每个协变量的 (k_true, K) 概率矩阵；聚类 c 在协变量 j 上的众数为 (c + j) mod K"""
    K = spec.n_categories
    weight = 1.0 - math.exp(-spec.separation)
    phi = []
    for j in range(spec.n_covariates):
        matrix = np.full((spec.k_true, K), (1.0 - weight) / K)
        for c in range(spec.k_true):
            matrix[c, (c + j) % K] += weight
        phi.append(matrix)
    return phi


def generate(spec: SynthSpec) -> SynthResult:
    """按模型的生成过程抽取一份合成数据集

    Returns:
        SynthResult，可解包为 (dataset, true_labels, true_u)
    """
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_areas, spec.k_true
    graph = make_graph(spec.graph_kind, n, rng, spec.grid_shape)

    labels = rng.permutation(np.arange(n) % k)
    phi = synthetic_phi(spec)
    theta = spec.separation * (np.arange(k) - (k - 1) / 2.0)
    u = sample_icar(graph, spec.tau_true, rng) if spec.spatial else np.zeros(n)

    columns: Dict[str, np.ndarray] = {}
    for j, matrix in enumerate(phi):
        cumulative = np.cumsum(matrix[labels], axis=1)
        draws = rng.random(n)[:, None] * cumulative[:, -1:]
        columns[f'x_{j}'] = (cumulative <= draws).sum(axis=1)

    beta = np.asarray(spec.beta, dtype=float)
    w = (rng.random((n, beta.size)) < 0.5).astype(float)
    for k_idx in range(beta.size):
        columns[f'w_{k_idx}'] = w[:, k_idx]

    eta = theta[labels] + (w @ beta if beta.size else 0.0) + u
    if spec.response_kind is ResponseKind.POISSON:
        offsets = rng.uniform(5.0, 15.0, size=n)
        y = rng.poisson(offsets * np.exp(eta)).astype(float)
        columns['offset'] = offsets
    else:
        y = eta + spec.noise_sd * rng.standard_normal(n)

    table = pd.DataFrame({'y': y, **columns})
    dataset = validate_dataset(table, graph, spec.response_kind,
                               categories=(spec.n_categories,) * spec.n_covariates)
    return SynthResult(dataset=dataset, true_labels=labels, true_u=u, theta=theta, phi=phi)


def kmeans_baseline(dataset: Dataset, k: int, seed: int = 0) -> np.ndarray:
    """在标准化响应与独热协变量上运行 KMeans"""
    y = (dataset.y - dataset.y.mean()) / (dataset.y.std() or 1.0)
    blocks = [y[:, None]]
    for j, K in enumerate(dataset.categories):
        blocks.append(np.eye(K)[dataset.x[:, j]])
    features = np.hstack(blocks)
    return KMeans(n_clusters=k, n_init=10, random_state=seed).fit_predict(features)


# ============================================================================
# 穷举后验
# ============================================================================

MAX_ENUMERATION_AREAS = 4
MAX_ENUMERATION_COVARIATES = 2


def set_partitions(n: int) -> Iterator[Tuple[int, ...]]:
    """以限制增长串的形式枚举 {0,…,n−1} 的所有集合划分"""
    if n == 0:
        yield ()
        return

    def extend(prefix: List[int], top: int):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(top + 2):
            yield from extend(prefix + [label], max(top, label))

    yield from extend([0], 0)


@dataclass
class EnumerationResult:
    """所有划分的后验概率与共聚类矩阵"""

    partitions: List[Tuple[int, ...]]
    probabilities: np.ndarray
    coclustering: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.partitions[0]) if self.partitions else 0
        self.coclustering = np.zeros((n, n))
        for labels, prob in zip(self.partitions, self.probabilities):
            arr = np.asarray(labels)
            self.coclustering += prob * (arr[:, None] == arr[None, :])


def _log_partition_prior(sizes: List[int], n: int, s_alpha: float, r_alpha: float) -> float:
    """对 α ~ Gamma(s, r) 积分后的 DP 划分先验"""
    k = len(sizes)

    def integrand(alpha: float) -> float:
        if alpha <= 0:
            return 0.0
        return math.exp(
            stats.gamma.logpdf(alpha, s_alpha, scale=1.0 / r_alpha)
            + k * math.log(alpha) + gammaln(alpha) - gammaln(alpha + n)
        )

    value, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return math.log(value) + float(sum(gammaln(s) for s in sizes))


def _log_covariate_marginal(x_block: np.ndarray, a: Tuple[np.ndarray, ...]) -> float:
    """Dirichlet-多项边际似然"""
    total = 0.0
    for j, a_j in enumerate(a):
        counts = np.bincount(x_block[:, j], minlength=a_j.size)
        total += float(gammaln(a_j.sum()) - gammaln(a_j.sum() + x_block.shape[0])
                       + np.sum(gammaln(a_j + counts) - gammaln(a_j)))
    return total


def enumerate_posterior(
    dataset: Dataset,
    hyper: Hyperparameters,
    n_theta: int = 4001,
    theta_halfwidth: float = 40.0,
    n_tau: int = 400,
) -> EnumerationResult:
    """穷举所有集合划分的精确后验（无空间项、无固定效应、高斯响应）

    θ_c 在 μ_θ ± theta_halfwidth·σ_θ 的均匀网格上积分；τ_Y 在其先验的
    n_tau 个等概率分位中点上取平均。

    Raises:
        InputError: 问题规模超出穷举范围
    """
    if dataset.n > MAX_ENUMERATION_AREAS or dataset.J > MAX_ENUMERATION_COVARIATES:
        raise InputError(f"穷举只支持 n ≤ {MAX_ENUMERATION_AREAS}、J ≤ {MAX_ENUMERATION_COVARIATES}")
    if dataset.response_kind is not ResponseKind.GAUSSIAN or dataset.p:
        raise InputError("穷举只支持无固定效应的高斯响应")

    n = dataset.n
    theta_grid = np.linspace(hyper.mu_theta - theta_halfwidth * hyper.sigma_theta,
                             hyper.mu_theta + theta_halfwidth * hyper.sigma_theta, n_theta)
    log_dtheta = math.log(theta_grid[1] - theta_grid[0])
    log_prior_theta = stats.t.logpdf(theta_grid, hyper.t_df, loc=hyper.mu_theta, scale=hyper.sigma_theta)
    tau_grid = stats.gamma.ppf((np.arange(n_tau) + 0.5) / n_tau, hyper.s_tauY, scale=1.0 / hyper.r_tauY)

    partitions = list(set_partitions(n))
    log_post = []
    for labels in partitions:
        arr = np.asarray(labels)
        blocks = [np.flatnonzero(arr == b) for b in range(arr.max() + 1)]
        log_p = _log_partition_prior([b.size for b in blocks], n, hyper.s_alpha, hyper.r_alpha)
        log_p += sum(_log_covariate_marginal(dataset.x[b], hyper.a) for b in blocks)

        # 对每个 τ_Y 网格点，各块独立地对 θ 积分
        log_response = np.zeros(n_tau)
        for b in blocks:
            y = dataset.y[b]
            sq = ((y[None, :] - theta_grid[:, None]) ** 2).sum(axis=1)
            log_lik = (0.5 * b.size * np.log(tau_grid[:, None] / (2.0 * np.pi))
                       - 0.5 * tau_grid[:, None] * sq[None, :])
            log_response += logsumexp(log_lik + log_prior_theta[None, :], axis=1) + log_dtheta
        log_p += float(logsumexp(log_response) - math.log(n_tau))
        log_post.append(log_p)

    log_post = np.asarray(log_post)
    probs = np.exp(log_post - logsumexp(log_post))
    return EnumerationResult(partitions=partitions, probabilities=probs / probs.sum())


# ============================================================================
# Geweke 模拟器
# ============================================================================

GEWEKE_SUMMARIES = (
    'alpha', 'tauY', 'n_occupied', 'y_mean', 'y_var',
    'theta_area0', 'phi_area0', 'beta_0', 'x_indicator', 'y_0',
)
SPATIAL_GEWEKE_SUMMARIES = ('tau', 'u_0')


def simulate_data(state, template: Dataset, rng: np.random.Generator) -> Dataset:
    """给定参数状态，按模型重新抽取 x 与 y（固定效应矩阵沿用模板）"""
    n = template.n
    x = np.empty((n, template.J), dtype=int)
    for j, phi_j in enumerate(state.phi):
        cumulative = np.cumsum(phi_j[state.z], axis=1)
        draws = rng.random(n)[:, None] * cumulative[:, -1:]
        x[:, j] = np.minimum((cumulative <= draws).sum(axis=1), phi_j.shape[1] - 1)
    lam = state.theta[state.z] + fixed_effect_part(template, state.globals.beta) + state.spatial.u
    y = lam + math.sqrt(state.globals.sigmaY2) * rng.standard_normal(n)
    return replace(template, y=y, x=x)


def _summaries(state, data: Dataset, spatial_enabled: bool = False) -> Dict[str, float]:
    c0 = state.z[0]
    summaries = {
        'alpha': state.alpha,
        'tauY': state.globals.tauY,
        'n_occupied': float(state.C_active),
        'y_mean': float(data.y.mean()),
        'y_var': float(data.y.var()),
        'theta_area0': float(state.theta[c0]),
        'phi_area0': float(state.phi[0][c0, 0]),
        'beta_0': float(state.globals.beta[0]) if data.p else 0.0,
        'x_indicator': float(data.x[0, 0] == 0),
        'y_0': float(data.y[0]),
    }
    if spatial_enabled:
        summaries['tau'] = state.spatial.tau
        summaries['u_0'] = float(state.spatial.u[0])
    return summaries


def _check_geweke_template(template: Dataset) -> None:
    if template.response_kind is not ResponseKind.GAUSSIAN:
        raise InputError("Geweke 模拟器只支持高斯响应")


def _geweke_columns(spatial_enabled: bool) -> List[str]:
    return list(GEWEKE_SUMMARIES) + (list(SPATIAL_GEWEKE_SUMMARIES) if spatial_enabled else [])


def geweke_prior_draws(template: Dataset, hyper: Hyperparameters, n_draws: int,
                       rng: np.random.Generator, spatial_enabled: bool = False) -> pd.DataFrame:
    """边际模拟器：参数取自先验，数据取自似然，彼此独立"""
    _check_geweke_template(template)
    rows = []
    for _ in range(n_draws):
        state = prior_state(template, hyper, rng, spatial_enabled)
        rows.append(_summaries(state, simulate_data(state, template, rng), spatial_enabled))
    return pd.DataFrame(rows, columns=_geweke_columns(spatial_enabled))


def geweke_successive_draws(template: Dataset, hyper: Hyperparameters, n_draws: int,
                            rng: np.random.Generator, spatial_enabled: bool = False) -> pd.DataFrame:
    """逐次条件模拟器：交替执行一次 Gibbs 扫描与数据重抽"""
    _check_geweke_template(template)
    state = prior_state(template, hyper, rng, spatial_enabled)
    state.theta_step.freeze()
    state.beta_step.freeze()
    data = simulate_data(state, template, rng)
    rows = []
    for iteration in range(1, n_draws + 1):
        gibbs_sweep(state, data, hyper, rng, spatial_enabled=spatial_enabled, iteration=iteration)
        data = simulate_data(state, template, rng)
        rows.append(_summaries(state, data, spatial_enabled))
    return pd.DataFrame(rows, columns=_geweke_columns(spatial_enabled))


def geweke_z_scores(prior_draws: pd.DataFrame, successive_draws: pd.DataFrame) -> pd.Series:
    """两个模拟器每个摘要均值之差的 z 分数（逐次模拟器用批均值标准误）"""
    scores = {}
    for name in prior_draws.columns:
        a = prior_draws[name].to_numpy()
        b = successive_draws[name].to_numpy()
        se_a = a.std(ddof=1) / math.sqrt(a.size)
        se_b = batch_means_se(b)
        denom = math.sqrt(se_a ** 2 + se_b ** 2)
        scores[name] = 0.0 if denom == 0 else (a.mean() - b.mean()) / denom
    return pd.Series(scores)
