# -*- coding: utf-8 -*-
"""
响应模型模块

提供高斯与 Poisson 响应似然以及参数更新：
- 线性预测子 λ_i = θ_{z_i} + β·w_i + u_i
- θ_c 与 β_k：t 位置-尺度先验 + 自适应随机游走 Metropolis
- τ_Y = 1/σ_Y²：共轭 Gamma 更新（仅高斯响应）
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
from scipy.special import gammaln

from . import config
from .data_model import Dataset, Hyperparameters, ResponseKind
from .errors import InputError


@dataclass
class ResponseGlobals:
    """全局响应参数 Λ = (β, σ_Y²)，σ_Y² 由 τ_Y 派生"""

    beta: np.ndarray
    tauY: float = 1.0

    @property
    def sigmaY2(self) -> float:
        return 1.0 / self.tauY

    def copy(self) -> 'ResponseGlobals':
        return ResponseGlobals(beta=self.beta.copy(), tauY=self.tauY)


@dataclass
class ClusterResponseParams:
    """聚类截距 θ_c"""

    theta: float


# ============================================================================
# 似然
# ============================================================================

def linear_predictor(theta_c: float, beta, w_i, u_i: float = 0.0) -> float:
    """θ_c + β·w_i + u_i"""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    w_i = np.atleast_1d(np.asarray(w_i, dtype=float))
    if beta.size != w_i.size:
        raise InputError(f"固定效应维度不符: β 长度 {beta.size}，w 长度 {w_i.size}")
    return float(theta_c + beta @ w_i + u_i)


def gaussian_log_likelihood(y, lam, sigmaY2: float):
    """−½log(2πσ²) − (y−λ)²/(2σ²)，支持数组"""
    resid = np.asarray(y, dtype=float) - np.asarray(lam, dtype=float)
    return -0.5 * np.log(2.0 * np.pi * sigmaY2) - resid ** 2 / (2.0 * sigmaY2)


def poisson_log_likelihood(y, offset, lam):
    """y·(log E + λ) − E·e^λ − log(y!)，支持数组

    Raises:
        InputError: 出现负计数
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise InputError("Poisson 计数不能为负")
    offset = np.asarray(offset, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return y * (np.log(offset) + lam) - offset * np.exp(lam) - gammaln(y + 1.0)


def area_log_likelihood(dataset: Dataset, lam: np.ndarray, sigmaY2: float) -> np.ndarray:
    """对每个面积计算响应对数似然"""
    if dataset.response_kind is ResponseKind.POISSON:
        return poisson_log_likelihood(dataset.y, dataset.offsets, lam)
    return gaussian_log_likelihood(dataset.y, lam, sigmaY2)


def t_logpdf(value, mu: float, sigma: float, df: float):
    """t 位置-尺度分布的对数密度（向量化，避免逐次调用 scipy.stats）"""
    z = (np.asarray(value, dtype=float) - mu) / sigma
    const = (
        gammaln((df + 1.0) / 2.0) - gammaln(df / 2.0)
        - 0.5 * math.log(df * math.pi) - math.log(sigma)
    )
    return const - (df + 1.0) / 2.0 * np.log1p(z * z / df)


def t_draw(mu: float, sigma: float, df: float, rng: np.random.Generator, size=None):
    """从 t(μ, σ, df) 抽样"""
    return mu + sigma * rng.standard_t(df, size=size)


# ============================================================================
# 自适应 Metropolis
# ============================================================================

def metropolis_log_accept(log_current, log_proposed):
    """对称提议下的 log 接受概率 min(0, Δ)"""
    with np.errstate(invalid='ignore'):
        diff = np.asarray(log_proposed, dtype=float) - np.asarray(log_current, dtype=float)
    return np.where(np.isnan(diff), -np.inf, np.minimum(0.0, diff))


@dataclass
class AdaptiveStep:
    """逐参数的随机游走步长

    预烧期内按批统计接受率，向目标接受率调整 log 步长；
    预烧期结束后冻结，之后只累计接受次数。
    """

    size: int = 0
    target: float = config.TARGET_ACCEPTANCE
    batch: int = config.ADAPT_BATCH
    adapting: bool = True
    log_step: np.ndarray = field(default_factory=lambda: np.zeros(0))
    batch_accepts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    batch_trials: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_batches: int = 0
    total_accepts: float = 0.0
    total_trials: float = 0.0

    def __post_init__(self) -> None:
        self.ensure_size(self.size)

    def ensure_size(self, size: int) -> None:
        """按需扩展参数槽位"""
        current = self.log_step.size
        if size <= current:
            return
        extra = size - current
        self.log_step = np.concatenate([self.log_step, np.full(extra, math.log(config.INITIAL_STEP))])
        self.batch_accepts = np.concatenate([self.batch_accepts, np.zeros(extra)])
        self.batch_trials = np.concatenate([self.batch_trials, np.zeros(extra)])
        self.size = size

    def steps(self, n: Optional[int] = None) -> np.ndarray:
        n = self.size if n is None else n
        self.ensure_size(n)
        return np.exp(self.log_step[:n])

    def record(self, slots: np.ndarray, accepted: np.ndarray) -> None:
        """记录一批提议的接受情况，批满时调整步长"""
        slots = np.asarray(slots, dtype=int)
        accepted = np.asarray(accepted, dtype=float)
        self.total_accepts += float(accepted.sum())
        self.total_trials += float(accepted.size)
        if not self.adapting or slots.size == 0:
            return
        np.add.at(self.batch_accepts, slots, accepted)
        np.add.at(self.batch_trials, slots, 1.0)
        full = self.batch_trials >= self.batch
        if np.any(full):
            self.n_batches += 1
            delta = min(0.05, 1.0 / math.sqrt(self.n_batches))
            rate = self.batch_accepts[full] / self.batch_trials[full]
            self.log_step[full] += np.where(rate > self.target, delta, -delta)
            np.clip(self.log_step, config.MIN_LOG_STEP, config.MAX_LOG_STEP, out=self.log_step)
            self.batch_accepts[full] = 0.0
            self.batch_trials[full] = 0.0

    def swap(self, a: int, b: int) -> None:
        """交换两个槽位的步长与批统计，随标签交换一起调用"""
        self.ensure_size(max(a, b) + 1)
        for values in (self.log_step, self.batch_accepts, self.batch_trials):
            values[[a, b]] = values[[b, a]]

    def freeze(self) -> None:
        self.adapting = False

    @property
    def acceptance_rate(self) -> float:
        if self.total_trials == 0:
            return float('nan')
        return self.total_accepts / self.total_trials

    def reset_counts(self) -> None:
        self.total_accepts = 0.0
        self.total_trials = 0.0


# ============================================================================
# θ_c 更新
# ============================================================================

def theta_sufficient_stats(
    dataset: Dataset,
    z: np.ndarray,
    base: np.ndarray,
    n_clusters: int,
) -> Dict[str, np.ndarray]:
    """按聚类汇总 θ 条件分布需要的充分统计量

    Args:
        dataset: 数据集
        z: 分配向量
        base: 每个面积除 θ 以外的线性预测子 β·w_i + u_i
        n_clusters: 聚类数 C

    Returns:
        包含 count 以及高斯（s1, s2）或 Poisson（sy, se）统计量的字典
    """
    count = np.bincount(z, minlength=n_clusters).astype(float)
    if dataset.response_kind is ResponseKind.POISSON:
        return {
            'count': count,
            'sy': np.bincount(z, weights=dataset.y, minlength=n_clusters),
            'se': np.bincount(z, weights=dataset.offsets * np.exp(base), minlength=n_clusters),
        }
    resid = dataset.y - base
    return {
        'count': count,
        's1': np.bincount(z, weights=resid, minlength=n_clusters),
        's2': np.bincount(z, weights=resid * resid, minlength=n_clusters),
    }


def theta_log_kernel(theta, stats: Dict[str, np.ndarray], kind: ResponseKind, sigmaY2: float):
    """成员似然中依赖 θ 的部分（向量化到所有聚类）"""
    theta = np.asarray(theta, dtype=float)
    if kind is ResponseKind.POISSON:
        return theta * stats['sy'] - np.exp(theta) * stats['se']
    return -(stats['s2'] - 2.0 * theta * stats['s1'] + stats['count'] * theta * theta) / (2.0 * sigmaY2)


def sample_theta_all(state, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator) -> np.ndarray:
    """对所有聚类并行执行一次 θ_c 更新

    非空聚类做随机游走 Metropolis；空聚类从 t 先验重新抽样。
    """
    n_clusters = state.theta.size
    base = fixed_effect_part(dataset, state.globals.beta) + state.spatial.u
    stats = theta_sufficient_stats(dataset, state.z, base, n_clusters)
    kind = dataset.response_kind
    sigmaY2 = state.globals.sigmaY2

    theta = state.theta.copy()
    occupied = stats['count'] > 0
    slots = np.flatnonzero(occupied)

    steps = state.theta_step.steps(n_clusters)
    proposal = theta + steps * rng.standard_normal(n_clusters)
    log_current = (t_logpdf(theta, hyper.mu_theta, hyper.sigma_theta, hyper.t_df)
                   + theta_log_kernel(theta, stats, kind, sigmaY2))
    log_proposed = (t_logpdf(proposal, hyper.mu_theta, hyper.sigma_theta, hyper.t_df)
                    + theta_log_kernel(proposal, stats, kind, sigmaY2))
    log_u = np.log(rng.random(n_clusters))
    accepted = (log_u < metropolis_log_accept(log_current, log_proposed)) & occupied

    theta[accepted] = proposal[accepted]
    empty = ~occupied
    if np.any(empty):
        theta[empty] = t_draw(hyper.mu_theta, hyper.sigma_theta, hyper.t_df, rng, size=int(empty.sum()))
    state.theta_step.record(slots, accepted[slots])
    state.theta = theta
    return theta


def sample_theta(c: int, state, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator) -> float:
    """单个聚类 θ_c 的更新

    Returns:
        接受的新值或保留的旧值；空聚类返回先验抽样
    """
    members = state.z == c
    if not np.any(members):
        value = float(t_draw(hyper.mu_theta, hyper.sigma_theta, hyper.t_df, rng))
        state.theta[c] = value
        return value

    base = fixed_effect_part(dataset, state.globals.beta) + state.spatial.u
    sub = _member_view(dataset, members)
    stats = theta_sufficient_stats(sub, np.zeros(int(members.sum()), dtype=int), base[members], 1)
    current = state.theta[c]
    step = state.theta_step.steps(state.theta.size)[c]
    proposal = current + step * rng.standard_normal()

    def log_target(value: float) -> float:
        return float(
            t_logpdf(value, hyper.mu_theta, hyper.sigma_theta, hyper.t_df)
            + theta_log_kernel(value, stats, dataset.response_kind, state.globals.sigmaY2)[0]
        )

    accepted = math.log(rng.random()) < float(metropolis_log_accept(log_target(current), log_target(proposal)))
    state.theta_step.record(np.array([c]), np.array([accepted]))
    if accepted:
        state.theta[c] = proposal
    return float(state.theta[c])


def _member_view(dataset: Dataset, members: np.ndarray) -> Dataset:
    """仅含成员行的轻量视图（用于充分统计量）"""
    return replace(
        dataset,
        y=dataset.y[members],
        x=dataset.x[members],
        w=dataset.w[members],
        offsets=None if dataset.offsets is None else dataset.offsets[members],
    )


# ============================================================================
# β 与 τ_Y 更新
# ============================================================================

def fixed_effect_part(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """每个面积的 β·w_i"""
    if dataset.p == 0:
        return np.zeros(dataset.n)
    return dataset.w @ beta


def sample_beta(state, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator) -> np.ndarray:
    """逐分量随机游走 Metropolis 更新 β，条件似然覆盖全部面积"""
    beta = state.globals.beta.copy()
    if dataset.p == 0:
        return beta

    sigmaY2 = state.globals.sigmaY2
    other = state.theta[state.z] + state.spatial.u
    lam = other + dataset.w @ beta
    log_lik = float(area_log_likelihood(dataset, lam, sigmaY2).sum())
    steps = state.beta_step.steps(dataset.p)

    for k in range(dataset.p):
        proposal = beta[k] + steps[k] * rng.standard_normal()
        lam_new = lam + (proposal - beta[k]) * dataset.w[:, k]
        log_lik_new = float(area_log_likelihood(dataset, lam_new, sigmaY2).sum())
        log_ratio = metropolis_log_accept(
            t_logpdf(beta[k], hyper.mu_beta, hyper.sigma_beta, hyper.t_df) + log_lik,
            t_logpdf(proposal, hyper.mu_beta, hyper.sigma_beta, hyper.t_df) + log_lik_new,
        )
        accepted = math.log(rng.random()) < float(log_ratio)
        state.beta_step.record(np.array([k]), np.array([accepted]))
        if accepted:
            beta[k] = proposal
            lam = lam_new
            log_lik = log_lik_new

    state.globals.beta = beta
    return beta


def sample_tauY(state, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator) -> float:
    """τ_Y ~ Gamma(s + n/2, r + ½Σ(y−λ)²)，同时更新 σ_Y² = 1/τ_Y

    Raises:
        InputError: Poisson 响应下调用
    """
    if dataset.response_kind is not ResponseKind.GAUSSIAN:
        raise InputError("τ_Y 只在高斯响应下定义")
    if dataset.n == 0:
        tauY = float(rng.gamma(hyper.s_tauY, 1.0 / hyper.r_tauY))
    else:
        lam = state.theta[state.z] + fixed_effect_part(dataset, state.globals.beta) + state.spatial.u
        ss = float(np.sum((dataset.y - lam) ** 2))
        shape = hyper.s_tauY + dataset.n / 2.0
        rate = hyper.r_tauY + 0.5 * ss
        tauY = float(rng.gamma(shape, 1.0 / rate))
    state.globals.tauY = tauY
    return tauY


def tauY_conditional(residuals: np.ndarray, hyper: Hyperparameters):
    """τ_Y 条件分布的 (shape, rate)"""
    residuals = np.asarray(residuals, dtype=float)
    return hyper.s_tauY + residuals.size / 2.0, hyper.r_tauY + 0.5 * float(np.sum(residuals ** 2))

