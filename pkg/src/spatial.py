# -*- coding: utf-8 -*-
"""
空间 ICAR 模块

内在条件自回归随机场 u 及其精度 τ，提供：
- 二次型 uᵀPu（成对差分恒等式）
- 邻居均值 ū_i
- 高斯响应下 u_i 的共轭正态条件抽样
- Poisson 响应下 u_i 的自适应拒绝抽样
- ICAR 先验抽样与 τ 的 Gamma 条件抽样
- 中心化（均值转移到聚类截距）
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import config
from .data_model import Dataset, NeighborhoodGraph, ResponseKind
from .errors import InputError, NumericalError
from .response_model import fixed_effect_part
from .utils.ars import AdaptiveRejectionSampler


@dataclass
class SpatialField:
    """空间随机场 u 与精度 τ"""

    u: np.ndarray
    tau: float = 1.0

    def copy(self) -> 'SpatialField':
        return SpatialField(u=self.u.copy(), tau=self.tau)


def quadratic_form(u: np.ndarray, graph: NeighborhoodGraph) -> float:
    """uᵀPu = Σ_{边 (i,j)} (u_i − u_j)²"""
    u = np.asarray(u, dtype=float)
    if u.size != graph.n:
        raise InputError(f"u 长度 {u.size} 与面积数 {graph.n} 不符")
    if graph.edges.size == 0:
        return 0.0
    diff = u[graph.edges[:, 0]] - u[graph.edges[:, 1]]
    return float(diff @ diff)


def neighbor_mean(i: int, u: np.ndarray, graph: NeighborhoodGraph) -> float:
    """ū_i = (1/n_i) Σ_{j∈ρ_i} u_j

    Raises:
        InputError: 孤立节点没有邻居均值
    """
    neighbors = graph.adjacency[i]
    if not neighbors:
        raise InputError(f"面积 {i} 是孤立节点，ICAR 条件分布无定义")
    return float(sum(u[j] for j in neighbors) / len(neighbors))


# ============================================================================
# 高斯响应
# ============================================================================

def gaussian_u_conditional(
    resid_i: float,
    ubar_i: float,
    n_i: int,
    sigmaY2: float,
    tau: float,
) -> Tuple[float, float]:
    """u_i 的完全条件分布参数 (m_i, σ_i²)

    配方得到 m_i = ((Y_i−θ−Wβ)/σ_Y² + τ n_i ū_i)·σ_i²，
    σ_i² = 1/(1/σ_Y² + τ n_i)。

    Args:
        resid_i: Y_i − θ_{z_i} − W_iβ
        ubar_i: 邻居均值
        n_i: 邻居数
        sigmaY2: 响应方差
        tau: 空间精度
    """
    if sigmaY2 <= 0 or tau <= 0:
        raise NumericalError(f"σ_Y² 与 τ 必须为正（σ_Y²={sigmaY2}, τ={tau}）")
    precision = 1.0 / sigmaY2 + tau * n_i
    variance = 1.0 / precision
    mean = (resid_i / sigmaY2 + tau * n_i * ubar_i) * variance
    return mean, variance


def sample_u_gaussian(i: int, state, dataset: Dataset, rng: np.random.Generator) -> float:
    """对单个面积抽取 u_i ~ N(m_i, σ_i²) 并写回状态"""
    graph = dataset.graph
    n_i = int(graph.n_neighbors[i])
    if n_i == 0:
        state.spatial.u[i] = 0.0
        return 0.0
    u = state.spatial.u
    resid = dataset.y[i] - state.theta[state.z[i]] - (dataset.w[i] @ state.globals.beta if dataset.p else 0.0)
    mean, variance = gaussian_u_conditional(
        float(resid), neighbor_mean(i, u, graph), n_i, state.globals.sigmaY2, state.spatial.tau
    )
    value = mean + math.sqrt(variance) * rng.standard_normal()
    u[i] = value
    return float(value)


# ============================================================================
# Poisson 响应
# ============================================================================

class PoissonUConditional:
    """log p(v) = y·v − E·exp(a + v) − ½ τ n_i (v − ū_i)²

    a = θ_{z_i} + W_iβ。该函数严格对数凹。
    """

    def __init__(self, y: float, offset: float, a: float, tau: float, n_i: int, ubar: float):
        self.y = y
        self.log_scale = math.log(offset) + a
        self.precision = tau * n_i
        self.ubar = ubar

    def log_density(self, v: float) -> float:
        return self.y * v - math.exp(self.log_scale + v) - 0.5 * self.precision * (v - self.ubar) ** 2

    def derivative(self, v: float) -> float:
        return self.y - math.exp(self.log_scale + v) - self.precision * (v - self.ubar)

    def second_derivative(self, v: float) -> float:
        return -math.exp(self.log_scale + v) - self.precision

    def find_mode(self, area: int = -1) -> Tuple[float, float]:
        """安全牛顿法求众数，返回 (众数, 该处曲率的负值)

        Raises:
            NumericalError: 有限次扩展内无法括定众数
        """
        start = self.ubar
        g0 = self.derivative(start)
        if g0 == 0.0:
            return start, -self.second_derivative(start)

        direction = 1.0 if g0 > 0 else -1.0
        step = 1.0
        near, far = start, start + direction * step
        for _ in range(config.ARS_MAX_EXPANSIONS):
            if self.derivative(far) * direction <= 0:
                break
            near = far
            step *= 2.0
            far = start + direction * step
        else:
            raise NumericalError(f"面积 {area}: 无法括定 u_i 条件分布的众数", area=area)
        lo, hi = (near, far) if direction > 0 else (far, near)

        v = 0.5 * (lo + hi)
        for _ in range(config.ARS_MAX_NEWTON):
            g = self.derivative(v)
            if abs(g) < 1e-10 * (1.0 + abs(self.y)) or hi - lo < 1e-12:
                break
            if g > 0:
                lo = v
            else:
                hi = v
            candidate = v - g / self.second_derivative(v)
            v = candidate if lo < candidate < hi else 0.5 * (lo + hi)
        return v, -self.second_derivative(v)

    def sampler(self, area: int = -1) -> AdaptiveRejectionSampler:
        """构建覆盖众数的初始包络"""
        mode, curvature = self.find_mode(area)
        sd = 1.0 / math.sqrt(curvature)
        abscissae = [mode - 2.0 * sd, mode - 0.5 * sd, mode + 0.5 * sd, mode + 2.0 * sd]
        return AdaptiveRejectionSampler(self.log_density, self.derivative, abscissae, area=area)


def sample_u_poisson(i: int, state, dataset: Dataset, rng: np.random.Generator) -> float:
    """对单个面积用自适应拒绝采样精确抽取 u_i 并写回状态"""
    graph = dataset.graph
    n_i = int(graph.n_neighbors[i])
    if n_i == 0:
        state.spatial.u[i] = 0.0
        return 0.0
    a = state.theta[state.z[i]] + (dataset.w[i] @ state.globals.beta if dataset.p else 0.0)
    target = PoissonUConditional(
        y=float(dataset.y[i]),
        offset=float(dataset.offsets[i]),
        a=float(a),
        tau=state.spatial.tau,
        n_i=n_i,
        ubar=neighbor_mean(i, state.spatial.u, graph),
    )
    value = target.sampler(area=i).sample(rng)
    state.spatial.u[i] = value
    return float(value)


# ============================================================================
# 全场扫描、τ 与中心化
# ============================================================================

def sweep_u(state, dataset: Dataset, rng: np.random.Generator) -> np.ndarray:
    """按 i = 0…n−1 系统扫描所有面积的 u_i

    高斯响应走纯 Python 标量循环（每次条件依赖最新的邻居值）。
    """
    graph = dataset.graph
    if dataset.response_kind is ResponseKind.POISSON:
        for i in range(graph.n):
            sample_u_poisson(i, state, dataset, rng)
        return state.spatial.u

    sigmaY2 = state.globals.sigmaY2
    tau = state.spatial.tau
    resid = (dataset.y - state.theta[state.z] - fixed_effect_part(dataset, state.globals.beta)).tolist()
    noise = rng.standard_normal(graph.n).tolist()
    u = state.spatial.u.tolist()
    inv_sigma2 = 1.0 / sigmaY2
    for i, neighbors in enumerate(graph.adjacency):
        n_i = len(neighbors)
        if n_i == 0:
            u[i] = 0.0
            continue
        ubar = sum(u[j] for j in neighbors) / n_i
        precision = inv_sigma2 + tau * n_i
        mean = (resid[i] * inv_sigma2 + tau * n_i * ubar) / precision
        u[i] = mean + noise[i] / math.sqrt(precision)
    state.spatial.u = np.asarray(u)
    return state.spatial.u


def sample_icar(graph: NeighborhoodGraph, tau: float, rng: np.random.Generator) -> np.ndarray:
    """在 P 的非零特征空间上抽取 ICAR 先验样本并中心化"""
    eigenvalues, eigenvectors = np.linalg.eigh(graph.precision_matrix())
    keep = eigenvalues > 1e-9
    scales = 1.0 / np.sqrt(tau * eigenvalues[keep])
    u = eigenvectors[:, keep] @ (scales * rng.standard_normal(int(keep.sum())))
    active = ~graph.isolated
    if np.any(active):
        u[active] -= u[active].mean()
    u[~active] = 0.0
    return u


def tau_conditional(u: np.ndarray, graph: NeighborhoodGraph, a_tau: float, b_tau: float) -> Tuple[float, float]:
    """τ 条件分布的 (shape, rate)

    shape = a_τ + (n_eff − k)/2，n_eff 为非孤立面积数，k 为连通分量数；
    连通图上即 a_τ + (n−1)/2。
    """
    shape = a_tau + (graph.n_effective - graph.n_components) / 2.0
    rate = b_tau + 0.5 * quadratic_form(u, graph)
    return shape, rate


def sample_tau(u: np.ndarray, graph: NeighborhoodGraph, a_tau: float, b_tau: float,
               rng: np.random.Generator) -> float:
    """τ ~ Gamma(shape, rate)"""
    shape, rate = tau_conditional(u, graph, a_tau, b_tau)
    return float(rng.gamma(shape, 1.0 / rate))


def recenter(u: np.ndarray, theta: np.ndarray, graph: NeighborhoodGraph) -> Tuple[np.ndarray, np.ndarray]:
    """逐连通分量中心化 u，并把非孤立面积上的总体均值加到每个 θ_c 上

    连通图上各 λ_i 精确不变；多分量时各分量均值之差被约束消去。
    孤立面积的 u 固定为 0，不参与均值计算。

    Returns:
        (u', θ')
    """
    u = np.asarray(u, dtype=float).copy()
    theta = np.asarray(theta, dtype=float).copy()
    labels = graph.component_labels
    active = labels >= 0
    if not np.any(active):
        return u, theta
    shift = float(u[active].mean())
    means = np.bincount(labels[active], weights=u[active]) / np.bincount(labels[active])
    u[active] -= means[labels[active]]
    u[~active] = 0.0
    theta += shift
    return u, theta
