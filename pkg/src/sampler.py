# -*- coding: utf-8 -*-
"""
MCMC 引擎模块

截断棍断裂 Dirichlet 过程混合模型的块 Gibbs 采样器，负责：
- 初始化链状态（从较多聚类开始）
- 分配变量 z、棍子 V/ψ、浓度 α 的更新
- 调度协变量、响应与空间模块的参数更新
- 标签交换移动与按占用数重排
- 联合对数密度与状态不变量检查
- 按调度保留样本，生成 SampleTrace
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import gammaln, xlogy

from . import config
from .covariate_model import (
    ClusterCovariateParams,
    covariate_log_likelihood_matrix,
    dirichlet_draw,
    sample_phi_all,
)
from .data_model import Dataset, Hyperparameters, ResponseKind
from .errors import ChainError, InputError, NumericalError, ProfileRegressionWarning
from .response_model import (
    AdaptiveStep,
    ClusterResponseParams,
    ResponseGlobals,
    fixed_effect_part,
    gaussian_log_likelihood,
    poisson_log_likelihood,
    sample_beta,
    sample_tauY,
    sample_theta_all,
    t_draw,
    t_logpdf,
)
from .spatial import SpatialField, quadratic_form, recenter, sample_icar, sample_tau, sweep_u

ProgressCallback = Callable[[int, 'MCMCState'], None]


# ============================================================================
# 链状态
# ============================================================================

@dataclass
class MCMCState:
    """一条链的当前状态

    聚类参数按标签存放在数组中：theta 形状 (C,)，phi[j] 形状 (C, K_j)，
    C 即当前截断层数 C_total。
    """

    z: np.ndarray
    V: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    phi: List[np.ndarray]
    globals: ResponseGlobals
    spatial: SpatialField
    alpha: float
    theta_step: AdaptiveStep = field(default_factory=AdaptiveStep)
    beta_step: AdaptiveStep = field(default_factory=AdaptiveStep)

    @property
    def C_total(self) -> int:
        return int(self.V.size)

    @property
    def C_active(self) -> int:
        """被至少一个面积占用的聚类数"""
        return int(np.unique(self.z).size)

    @property
    def clusters(self) -> List[Tuple[ClusterResponseParams, ClusterCovariateParams]]:
        return [
            (ClusterResponseParams(theta=float(self.theta[c])),
             ClusterCovariateParams(phi=tuple(p[c] for p in self.phi)))
            for c in range(self.C_total)
        ]

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.C_total)

    def copy(self) -> 'MCMCState':
        return MCMCState(
            z=self.z.copy(),
            V=self.V.copy(),
            psi=self.psi.copy(),
            theta=self.theta.copy(),
            phi=[p.copy() for p in self.phi],
            globals=self.globals.copy(),
            spatial=self.spatial.copy(),
            alpha=self.alpha,
            theta_step=AdaptiveStep(size=self.theta_step.size),
            beta_step=AdaptiveStep(size=self.beta_step.size),
        )


@dataclass
class Schedule:
    """链调度参数"""

    n_iter: int = config.DEFAULT_N_ITER
    burn_in: int = config.DEFAULT_BURN_IN
    thin: int = config.DEFAULT_THIN
    n_init_clusters: int = config.DEFAULT_N_INIT_CLUSTERS
    seed: int = config.DEFAULT_SEED
    u_thin: int = config.DEFAULT_U_THIN
    spatial_enabled: bool = True
    debug: bool = False

    def __post_init__(self) -> None:
        if self.n_iter < 1:
            raise InputError(f"n_iter 必须为正，当前为 {self.n_iter}")
        if not 0 <= self.burn_in < self.n_iter:
            raise InputError(f"burn_in 必须满足 0 ≤ burn_in < n_iter（{self.burn_in} / {self.n_iter}）")
        if self.thin < 1:
            raise InputError(f"thin 必须 ≥ 1，当前为 {self.thin}")
        if self.n_init_clusters < 2:
            raise InputError(f"n_init_clusters 必须 ≥ 2，当前为 {self.n_init_clusters}")
        if self.u_thin < 1:
            raise InputError(f"u_thin 必须 ≥ 1，当前为 {self.u_thin}")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def is_retained(self, iteration: int) -> bool:
        """1 起始的迭代序号是否保留"""
        return iteration > self.burn_in and (iteration - self.burn_in) % self.thin == 0


# ============================================================================
# 样本轨迹
# ============================================================================

@dataclass
class TraceRecord:
    """一次保留迭代的快照，聚类已按占用数降序重新编号"""

    iteration: int
    z: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    phi: Tuple[np.ndarray, ...]
    beta: np.ndarray
    alpha: float
    tau: float
    tauY: float
    n_occupied: int
    accept_theta: float = float('nan')
    accept_beta: float = float('nan')
    u: Optional[np.ndarray] = None


@dataclass
class SampleTrace:
    """保留样本序列

    u 快照只按 u_thin 间隔保存；后验均值 u_mean 在所有保留迭代上累计。
    """

    n: int
    response_kind: ResponseKind
    categories: Tuple[int, ...]
    records: List[TraceRecord] = field(default_factory=list)
    chain: int = 0
    spatial_enabled: bool = True
    u_sum: Optional[np.ndarray] = None
    u_count: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: TraceRecord, u: Optional[np.ndarray] = None) -> None:
        self.records.append(record)
        if u is not None:
            self.u_sum = u.copy() if self.u_sum is None else self.u_sum + u
            self.u_count += 1

    @property
    def allocations(self) -> np.ndarray:
        """(T, n) 分配矩阵"""
        if not self.records:
            return np.zeros((0, self.n), dtype=int)
        return np.vstack([r.z for r in self.records])

    @property
    def p(self) -> int:
        return int(self.records[0].beta.size) if self.records else 0

    @property
    def u_mean(self) -> np.ndarray:
        if self.u_count == 0:
            return np.zeros(self.n)
        return self.u_sum / self.u_count

    def scalar_frame(self) -> pd.DataFrame:
        """trace_scalars.csv 的列布局"""
        rows = []
        for r in self.records:
            row = {
                'iteration': r.iteration,
                'alpha': r.alpha,
                'tau': r.tau,
                'tauY': r.tauY,
                'n_occupied': r.n_occupied,
            }
            for k, b in enumerate(r.beta):
                row[f'beta_{k}'] = b
            row['accept_theta'] = r.accept_theta
            row['accept_beta'] = r.accept_beta
            rows.append(row)
        columns = (['iteration', 'alpha', 'tau', 'tauY', 'n_occupied']
                   + [f'beta_{k}' for k in range(self.p)]
                   + ['accept_theta', 'accept_beta'])
        return pd.DataFrame(rows, columns=columns)


# ============================================================================
# 棍断裂权重
# ============================================================================

def stick_weights(V: np.ndarray) -> Tuple[np.ndarray, float]:
    """ψ_c = V_c ∏_{l<c}(1−V_l)，同时返回剩余质量 ∏(1−V_l)"""
    V = np.asarray(V, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - V)])
    return V * remaining[:-1], float(remaining[-1])


def _clamp_sticks(V: np.ndarray) -> np.ndarray:
    eps = config.STICK_CLAMP_EPS
    return np.clip(V, eps, 1.0 - eps)


def extend_sticks(
    V: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
    tol: float = config.STICK_RESIDUAL_TOL,
    max_truncation: int = config.MAX_TRUNCATION,
) -> np.ndarray:
    """追加 Beta(1, α) 先验棍子，直到剩余质量低于 tol

    达到 max_truncation 仍未满足时发出警告并停止。
    """
    V = np.asarray(V, dtype=float)
    residual = float(np.prod(1.0 - V))
    pieces = [V]
    size = V.size
    while residual >= tol and size < max_truncation:
        block = _clamp_sticks(rng.beta(1.0, alpha, size=min(32, max_truncation - size)))
        cumulative = residual * np.cumprod(1.0 - block)
        hit = np.flatnonzero(cumulative < tol)
        take = int(hit[0]) + 1 if hit.size else block.size
        pieces.append(block[:take])
        residual = float(cumulative[take - 1])
        size += take
    if residual >= tol:
        warnings.warn(
            f"截断层数达到上限 {max_truncation}，剩余棍子质量 {residual:.2e}（α={alpha:.3g}）",
            ProfileRegressionWarning,
            stacklevel=2,
        )
    return np.concatenate(pieces)


def sample_sticks(z: np.ndarray, alpha: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """V_c ~ Beta(1 + n_c, α + Σ_{l>c} n_l)，并自适应扩展截断层数

    Returns:
        (V, ψ)
    """
    if alpha <= 0:
        raise InputError(f"α 必须为正，当前为 {alpha}")
    counts = np.bincount(np.asarray(z, dtype=int))
    greater = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]])
    V = _clamp_sticks(rng.beta(1.0 + counts, alpha + greater))
    V = extend_sticks(V, alpha, rng)
    psi, _ = stick_weights(V)
    return V, psi


def sample_alpha(V: np.ndarray, s_alpha: float, r_alpha: float, rng: np.random.Generator) -> float:
    """α ~ Gamma(s_α + C, r_α − Σ log(1−V_c))

    Raises:
        NumericalError: 存在 V_c ∉ (0, 1)
    """
    V = np.asarray(V, dtype=float)
    if V.size == 0:
        return float(rng.gamma(s_alpha, 1.0 / r_alpha))
    if np.any(V <= 0) or np.any(V >= 1):
        raise NumericalError("棍子变量必须严格位于 (0, 1) 内")
    shape = s_alpha + V.size
    rate = r_alpha - float(np.sum(np.log1p(-V)))
    return float(rng.gamma(shape, 1.0 / rate))


# ============================================================================
# 初始化
# ============================================================================

def _prior_clusters(n_clusters: int, hyper: Hyperparameters, rng: np.random.Generator):
    theta = np.asarray(t_draw(hyper.mu_theta, hyper.sigma_theta, hyper.t_df, rng, size=n_clusters), dtype=float)
    phi = [dirichlet_draw(np.broadcast_to(a_j, (n_clusters, a_j.size)), rng) for a_j in hyper.a]
    return theta, phi


def _prior_globals(dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator,
                   spatial_enabled: bool) -> Tuple[ResponseGlobals, SpatialField]:
    beta = np.asarray(t_draw(hyper.mu_beta, hyper.sigma_beta, hyper.t_df, rng, size=dataset.p), dtype=float)
    tauY = 1.0
    if dataset.response_kind is ResponseKind.GAUSSIAN:
        tauY = float(rng.gamma(hyper.s_tauY, 1.0 / hyper.r_tauY))
    tau = float(rng.gamma(hyper.a_tau, 1.0 / hyper.b_tau)) if spatial_enabled else 1.0
    return ResponseGlobals(beta=beta, tauY=tauY), SpatialField(u=np.zeros(dataset.n), tau=tau)


def init_state(
    dataset: Dataset,
    hyper: Hyperparameters,
    n_init_clusters: int,
    rng: np.random.Generator,
    spatial_enabled: bool = True,
) -> MCMCState:
    """构建初始状态

    z 在 n_init_clusters 个聚类中均匀随机分配；其余参数从先验抽取；u = 0。
    """
    if n_init_clusters < 2:
        raise InputError(f"n_init_clusters 必须 ≥ 2，当前为 {n_init_clusters}")
    if len(hyper.a) != dataset.J:
        raise InputError(f"超参数给出 {len(hyper.a)} 个 Dirichlet 向量，但数据有 {dataset.J} 个协变量")

    z = rng.integers(0, n_init_clusters, size=dataset.n)
    alpha = float(rng.gamma(hyper.s_alpha, 1.0 / hyper.r_alpha))
    V = extend_sticks(_clamp_sticks(rng.beta(1.0, alpha, size=n_init_clusters)), alpha, rng)
    psi, _ = stick_weights(V)
    theta, phi = _prior_clusters(V.size, hyper, rng)
    response_globals, spatial = _prior_globals(dataset, hyper, rng, spatial_enabled)

    return MCMCState(
        z=z, V=V, psi=psi, theta=theta, phi=phi,
        globals=response_globals, spatial=spatial, alpha=alpha,
        theta_step=AdaptiveStep(size=V.size),
        beta_step=AdaptiveStep(size=dataset.p),
    )


def prior_state(dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator,
                spatial_enabled: bool = False) -> MCMCState:
    """从联合先验抽取一个完整状态（z 按 ψ 抽取）

    spatial_enabled 为 False 时空间场为 0；否则 τ 取自先验，u 取自 ICAR 先验。
    """
    alpha = float(rng.gamma(hyper.s_alpha, 1.0 / hyper.r_alpha))
    V = extend_sticks(np.zeros(0), alpha, rng)
    psi, _ = stick_weights(V)
    cumulative = np.cumsum(psi)
    z = np.minimum(np.searchsorted(cumulative, rng.random(dataset.n) * cumulative[-1], side='right'), V.size - 1)
    theta, phi = _prior_clusters(V.size, hyper, rng)
    response_globals, spatial = _prior_globals(dataset, hyper, rng, spatial_enabled)
    if spatial_enabled:
        spatial.u = sample_icar(dataset.graph, spatial.tau, rng)
    return MCMCState(
        z=z, V=V, psi=psi, theta=theta, phi=phi,
        globals=response_globals, spatial=spatial, alpha=alpha,
        theta_step=AdaptiveStep(size=V.size),
        beta_step=AdaptiveStep(size=dataset.p),
    )


# ============================================================================
# 分配变量
# ============================================================================

def allocation_log_weights(state: MCMCState, dataset: Dataset) -> np.ndarray:
    """(n, C) 矩阵：log ψ_c + 协变量对数似然 + 响应对数似然"""
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        log_psi = np.log(state.psi)
        covariate = covariate_log_likelihood_matrix(dataset.x, state.phi)
        base = fixed_effect_part(dataset, state.globals.beta) + state.spatial.u
        lam = base[:, None] + state.theta[None, :]
        if dataset.response_kind is ResponseKind.POISSON:
            response = poisson_log_likelihood(dataset.y[:, None], dataset.offsets[:, None], lam)
        else:
            response = gaussian_log_likelihood(dataset.y[:, None], lam, state.globals.sigmaY2)
        return log_psi[None, :] + covariate + response


def allocation_probabilities(state: MCMCState, dataset: Dataset) -> np.ndarray:
    """每个面积的分配概率（行归一化）

    Raises:
        NumericalError: 某面积所有聚类的权重均为 -inf
    """
    log_w = allocation_log_weights(state, dataset)
    top = log_w.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(top))
    if bad.size:
        area = int(bad[0])
        raise NumericalError(f"面积 {area} 的分配权重全部为 -inf", area=area)
    probs = np.exp(log_w - top[:, None])
    probs[np.isnan(probs)] = 0.0
    return probs / probs.sum(axis=1, keepdims=True)


def sample_allocations(state: MCMCState, dataset: Dataset, rng: np.random.Generator) -> np.ndarray:
    """对每个面积独立抽取 z_i，在 log 空间减去行最大值后逆 CDF 抽样"""
    probs = allocation_probabilities(state, dataset)
    cumulative = np.cumsum(probs, axis=1)
    draws = rng.random(dataset.n) * cumulative[:, -1]
    z = (cumulative <= draws[:, None]).sum(axis=1)
    state.z = np.minimum(z, state.C_total - 1).astype(int)
    return state.z


# ============================================================================
# 标签移动
# ============================================================================

def label_moves(state: MCMCState, rng: np.random.Generator) -> MCMCState:
    """交换两个随机标签（连同参数、分配与预烧期内的 θ 步长）

    接受概率 min(1, (ψ_l'/ψ_l)^(n_l − n_l'))，ψ 本身不变。
    """
    C = state.C_total
    if C < 2:
        return state
    l, m = (int(v) for v in rng.choice(C, size=2, replace=False))
    counts = state.counts()
    diff = int(counts[l] - counts[m])
    log_u = math.log(1.0 - rng.random())
    if diff != 0:
        with np.errstate(divide='ignore', invalid='ignore'):
            log_ratio = diff * (np.log(state.psi[m]) - np.log(state.psi[l]))
        if np.isnan(log_ratio) or log_u >= min(0.0, float(log_ratio)):
            return state

    z = state.z.copy()
    z[state.z == l] = m
    z[state.z == m] = l
    state.z = z
    state.theta[[l, m]] = state.theta[[m, l]]
    for p in state.phi:
        p[[l, m]] = p[[m, l]]
    if state.theta_step.adapting:
        state.theta_step.swap(l, m)
    return state


def relabel_by_occupancy(state: MCMCState):
    """按占用数降序重排标签（只用于报告，不改动链状态）

    Returns:
        (z, θ, Φ, ψ) 的重排副本
    """
    order = np.argsort(-state.counts(), kind='stable')
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return (
        inverse[state.z],
        state.theta[order].copy(),
        tuple(p[order].copy() for p in state.phi),
        state.psi[order].copy(),
    )


# ============================================================================
# 联合密度与不变量
# ============================================================================

def log_likelihood(state: MCMCState, dataset: Dataset) -> float:
    """给定 z 与参数时协变量和响应的对数似然"""
    with np.errstate(divide='ignore'):
        covariate = sum(float(np.log(p[state.z, dataset.x[:, j]]).sum()) for j, p in enumerate(state.phi))
    lam = state.theta[state.z] + fixed_effect_part(dataset, state.globals.beta) + state.spatial.u
    if dataset.response_kind is ResponseKind.POISSON:
        response = float(poisson_log_likelihood(dataset.y, dataset.offsets, lam).sum())
    else:
        response = float(gaussian_log_likelihood(dataset.y, lam, state.globals.sigmaY2).sum())
    return covariate + response


def log_joint(state: MCMCState, dataset: Dataset, hyper: Hyperparameters,
              spatial_enabled: bool = True) -> float:
    """从状态重新计算完整的联合对数密度（截断层内）"""
    total = log_likelihood(state, dataset)
    with np.errstate(divide='ignore'):
        total += float(np.log(state.psi[state.z]).sum())
    total += float(stats.beta.logpdf(state.V, 1.0, state.alpha).sum())
    total += float(stats.gamma.logpdf(state.alpha, hyper.s_alpha, scale=1.0 / hyper.r_alpha))

    for a_j, p in zip(hyper.a, state.phi):
        norm = gammaln(a_j.sum()) - gammaln(a_j).sum()
        total += float(np.sum(norm + xlogy(a_j[None, :] - 1.0, p).sum(axis=1)))
    total += float(t_logpdf(state.theta, hyper.mu_theta, hyper.sigma_theta, hyper.t_df).sum())
    if dataset.p:
        total += float(t_logpdf(state.globals.beta, hyper.mu_beta, hyper.sigma_beta, hyper.t_df).sum())
    if dataset.response_kind is ResponseKind.GAUSSIAN:
        total += float(stats.gamma.logpdf(state.globals.tauY, hyper.s_tauY, scale=1.0 / hyper.r_tauY))

    if spatial_enabled:
        graph = dataset.graph
        tau = state.spatial.tau
        rank = graph.n_effective - graph.n_components
        total += 0.5 * rank * math.log(tau) - 0.5 * tau * quadratic_form(state.spatial.u, graph)
        total += float(stats.gamma.logpdf(tau, hyper.a_tau, scale=1.0 / hyper.b_tau))
    return total


def check_state(state: MCMCState, dataset: Optional[Dataset] = None, spatial_enabled: bool = True) -> None:
    """检查 MCMCState 不变量

    Raises:
        NumericalError: 任一不变量被破坏
    """
    if np.any(state.V <= 0) or np.any(state.V >= 1):
        raise NumericalError("棍子变量越出 (0, 1)")
    psi, residual = stick_weights(state.V)
    if not np.allclose(psi, state.psi, rtol=0.0, atol=1e-12):
        raise NumericalError("ψ 与棍断裂公式不一致")
    if residual >= config.STICK_RESIDUAL_TOL and state.C_total < config.MAX_TRUNCATION:
        raise NumericalError(f"截断后剩余质量 {residual:.2e} 超出容差")
    if state.z.min(initial=0) < 0 or state.z.max(initial=0) >= state.C_total:
        raise NumericalError("存在超出截断层数的分配")
    if state.theta.size != state.C_total or any(p.shape[0] != state.C_total for p in state.phi):
        raise NumericalError("聚类参数数量与截断层数不符")
    if not np.all(np.isfinite(state.theta)):
        raise NumericalError("θ 含非有限值")
    for j, p in enumerate(state.phi):
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > config.SIMPLEX_TOL):
            raise NumericalError(f"协变量 {j} 的 Φ 不在单纯形上")
    if not (state.alpha > 0 and state.globals.tauY > 0):
        raise NumericalError("α 与 τ_Y 必须为正")
    if spatial_enabled and dataset is not None:
        labels = dataset.graph.component_labels
        active = labels >= 0
        if np.any(state.spatial.u[~active] != 0.0):
            raise NumericalError("孤立面积的 u 必须为 0")
        if np.any(active):
            sums = np.bincount(labels[active], weights=state.spatial.u[active])
            means = sums / np.bincount(labels[active])
            if np.abs(means).max() > config.CENTER_TOL:
                raise NumericalError("u 未在各连通分量内中心化")


# ============================================================================
# 扫描
# ============================================================================

def _resize_clusters(state: MCMCState, n_clusters: int, hyper: Hyperparameters,
                     rng: np.random.Generator) -> None:
    """截断层数变化后截去或从先验补齐聚类参数"""
    current = state.theta.size
    if n_clusters < current:
        state.theta = state.theta[:n_clusters].copy()
        state.phi = [p[:n_clusters].copy() for p in state.phi]
    elif n_clusters > current:
        theta, phi = _prior_clusters(n_clusters - current, hyper, rng)
        state.theta = np.concatenate([state.theta, theta])
        state.phi = [np.vstack([old, new]) for old, new in zip(state.phi, phi)]
    state.theta_step.ensure_size(n_clusters)


def _update_allocations(state, dataset, hyper, rng):
    sample_allocations(state, dataset, rng)


def _update_sticks(state, dataset, hyper, rng):
    state.V, state.psi = sample_sticks(state.z, state.alpha, rng)
    _resize_clusters(state, state.V.size, hyper, rng)


def _update_alpha(state, dataset, hyper, rng):
    state.alpha = sample_alpha(state.V, hyper.s_alpha, hyper.r_alpha, rng)


def _update_phi(state, dataset, hyper, rng):
    state.phi = sample_phi_all(dataset.x, state.z, state.C_total, hyper.a, rng)


def _update_theta(state, dataset, hyper, rng):
    sample_theta_all(state, dataset, hyper, rng)


def _update_beta(state, dataset, hyper, rng):
    sample_beta(state, dataset, hyper, rng)


def _update_tauY(state, dataset, hyper, rng):
    sample_tauY(state, dataset, hyper, rng)


def _update_u(state, dataset, hyper, rng):
    sweep_u(state, dataset, rng)


def _update_recenter(state, dataset, hyper, rng):
    state.spatial.u, state.theta = recenter(state.spatial.u, state.theta, dataset.graph)


def _update_tau(state, dataset, hyper, rng):
    state.spatial.tau = sample_tau(state.spatial.u, dataset.graph, hyper.a_tau, hyper.b_tau, rng)


def _update_labels(state, dataset, hyper, rng):
    label_moves(state, rng)


def sweep_components(kind: ResponseKind, spatial_enabled: bool):
    """一次完整扫描的组件顺序"""
    components = [
        ('allocations', _update_allocations),
        ('sticks', _update_sticks),
        ('alpha', _update_alpha),
        ('phi', _update_phi),
        ('theta', _update_theta),
        ('beta', _update_beta),
    ]
    if kind is ResponseKind.GAUSSIAN:
        components.append(('tauY', _update_tauY))
    if spatial_enabled:
        components += [('u', _update_u), ('recenter', _update_recenter), ('tau', _update_tau)]
    components.append(('label_moves', _update_labels))
    return components


def gibbs_sweep(
    state: MCMCState,
    dataset: Dataset,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    spatial_enabled: bool = True,
    iteration: int = 0,
) -> MCMCState:
    """执行一次完整扫描

    Raises:
        ChainError: 任一组件数值失败，记录迭代序号与组件名
    """
    for name, update in sweep_components(dataset.response_kind, spatial_enabled):
        try:
            update(state, dataset, hyper, rng)
        except ChainError:
            raise
        except (NumericalError, FloatingPointError) as e:
            raise ChainError(str(e), iteration, name, area=getattr(e, 'area', None)) from e
    return state


def _snapshot(state: MCMCState, dataset: Dataset, iteration: int, keep_u: bool,
              spatial_enabled: bool) -> TraceRecord:
    z, theta, phi, psi = relabel_by_occupancy(state)
    return TraceRecord(
        iteration=iteration,
        z=z,
        psi=psi,
        theta=theta,
        phi=phi,
        beta=state.globals.beta.copy(),
        alpha=state.alpha,
        tau=state.spatial.tau if spatial_enabled else float('nan'),
        tauY=state.globals.tauY if dataset.response_kind is ResponseKind.GAUSSIAN else float('nan'),
        n_occupied=state.C_active,
        accept_theta=state.theta_step.acceptance_rate,
        accept_beta=state.beta_step.acceptance_rate,
        u=state.spatial.u.copy() if keep_u else None,
    )


def run_chain(
    dataset: Dataset,
    hyper: Hyperparameters,
    schedule: Schedule,
    rng: Optional[np.random.Generator] = None,
    progress: Optional[ProgressCallback] = None,
    chain: int = 0,
) -> SampleTrace:
    """运行一条链并返回保留样本

    Args:
        dataset: 数据集
        hyper: 超参数
        schedule: 调度参数
        rng: 随机数生成器；缺省时由 schedule.seed 构建
        progress: 每次迭代后的回调 progress(iteration, state)
        chain: 链序号，写入轨迹

    Returns:
        SampleTrace，长度为 (n_iter − burn_in) // thin

    Raises:
        ChainError: 链中止
    """
    rng = np.random.default_rng(schedule.seed) if rng is None else rng
    spatial_enabled = schedule.spatial_enabled
    state = init_state(dataset, hyper, schedule.n_init_clusters, rng, spatial_enabled)
    trace = SampleTrace(
        n=dataset.n,
        response_kind=dataset.response_kind,
        categories=dataset.categories,
        chain=chain,
        spatial_enabled=spatial_enabled,
    )
    if schedule.burn_in == 0:
        _finish_adaptation(state)

    retained = 0
    for iteration in range(1, schedule.n_iter + 1):
        gibbs_sweep(state, dataset, hyper, rng, spatial_enabled, iteration)
        if schedule.debug:
            try:
                check_state(state, dataset, spatial_enabled)
            except NumericalError as e:
                raise ChainError(str(e), iteration, 'check_state') from e

        if iteration == schedule.burn_in:
            _finish_adaptation(state)

        if schedule.is_retained(iteration):
            keep_u = spatial_enabled and retained % schedule.u_thin == 0
            trace.append(
                _snapshot(state, dataset, iteration, keep_u, spatial_enabled),
                u=state.spatial.u if spatial_enabled else None,
            )
            retained += 1

        if progress is not None:
            progress(iteration, state)
    return trace


def _finish_adaptation(state: MCMCState) -> None:
    """预烧期结束：冻结步长并清零接受计数"""
    for step in (state.theta_step, state.beta_step):
        step.freeze()
        step.reset_counts()
