# -*- coding: utf-8 -*-
"""
协变量模型模块

每个聚类的离散分类协变量似然及其共轭 Dirichlet 更新：
- 协变量在聚类内局部独立，f(x_i | c) = ∏_j φ_{c,j,x_ij}
- Φ_{c,j} ~ Dirichlet(a_j)，后验为 Dirichlet(a_j + 类别计数)
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import config
from .errors import InputError


@dataclass
class ClusterCovariateParams:
    """单个聚类的协变量参数 Φ_c = (Φ_{c,1}, …, Φ_{c,J})"""

    phi: Tuple[np.ndarray, ...]

    def is_valid(self, tol: float = config.SIMPLEX_TOL) -> bool:
        """每个 Φ_{c,j} 非负且和为 1"""
        return all(
            np.all(p >= 0) and abs(float(p.sum()) - 1.0) <= tol
            for p in self.phi
        )


def covariate_log_likelihood(x_i: Sequence[int], params: ClusterCovariateParams) -> float:
    """计算 Σ_j log φ_{c,j,x_ij}

    Args:
        x_i: 长度为 J 的分类编码
        params: 聚类的协变量参数

    Returns:
        对数似然；任一观测类别概率为 0 时返回 -inf
    """
    if len(x_i) != len(params.phi):
        raise InputError(f"协变量个数不符: {len(x_i)} vs {len(params.phi)}")
    total = 0.0
    for j, (code, p) in enumerate(zip(x_i, params.phi)):
        code = int(code)
        if not 0 <= code < p.size:
            raise InputError(f"协变量 {j} 的编码 {code} 超出范围 [0, {p.size})")
        if p[code] <= 0:
            return -np.inf
        total += np.log(p[code])
    return float(total)


def covariate_log_likelihood_matrix(x: np.ndarray, phi: Sequence[np.ndarray]) -> np.ndarray:
    """对所有面积与聚类同时计算协变量对数似然

    Args:
        x: n×J 编码矩阵
        phi: 长度为 J 的列表，第 j 项形状为 (C, K_j)

    Returns:
        (n, C) 矩阵
    """
    n = x.shape[0]
    n_clusters = phi[0].shape[0] if phi else 0
    out = np.zeros((n, n_clusters))
    with np.errstate(divide='ignore'):
        for j, phi_j in enumerate(phi):
            out += np.log(phi_j[:, x[:, j]]).T
    return out


def dirichlet_draw(concentration: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """通过独立 Gamma 抽样归一化得到 Dirichlet 样本

    使用 log 空间的 Gamma(α) = Gamma(α+1)·U^{1/α} 变换，浓度很小时也不会下溢。
    最后一个轴为单纯形维度。
    """
    concentration = np.asarray(concentration, dtype=float)
    log_g = (
        np.log(rng.standard_gamma(concentration + 1.0))
        + np.log(rng.random(concentration.shape)) / concentration
    )
    log_g -= log_g.max(axis=-1, keepdims=True)
    g = np.exp(log_g)
    return g / g.sum(axis=-1, keepdims=True)


def category_counts(codes: np.ndarray, labels: np.ndarray, n_clusters: int, n_categories: int) -> np.ndarray:
    """统计每个聚类中每个类别的个数，返回 (C, K) 矩阵"""
    flat = labels * n_categories + codes
    counts = np.bincount(flat, minlength=n_clusters * n_categories)
    return counts[: n_clusters * n_categories].reshape(n_clusters, n_categories)


def sample_phi(
    member_rows: np.ndarray,
    a: Sequence[np.ndarray],
    rng: np.random.Generator,
) -> ClusterCovariateParams:
    """从 Φ_c 的条件后验抽样

    Args:
        member_rows: 聚类成员的编码子矩阵 (m, J)，m 可为 0
        a: 每个协变量的 Dirichlet 浓度向量
        rng: 随机数生成器

    Returns:
        新的 ClusterCovariateParams；空聚类等价于从先验抽样
    """
    member_rows = np.asarray(member_rows, dtype=int).reshape(-1, len(a))
    phi = []
    for j, a_j in enumerate(a):
        a_j = np.asarray(a_j, dtype=float)
        if np.any(a_j <= 0):
            raise InputError(f"协变量 {j} 的 Dirichlet 浓度必须为正")
        counts = np.bincount(member_rows[:, j], minlength=a_j.size)[: a_j.size]
        phi.append(dirichlet_draw(a_j + counts, rng))
    return ClusterCovariateParams(phi=tuple(phi))


def sample_phi_all(
    x: np.ndarray,
    z: np.ndarray,
    n_clusters: int,
    a: Sequence[np.ndarray],
    rng: np.random.Generator,
) -> List[np.ndarray]:
    """一次性更新全部聚类的 Φ，返回按协变量分组的 (C, K_j) 数组列表"""
    phi = []
    for j, a_j in enumerate(a):
        counts = category_counts(x[:, j], z, n_clusters, a_j.size)
        phi.append(dirichlet_draw(a_j[None, :] + counts, rng))
    return phi
