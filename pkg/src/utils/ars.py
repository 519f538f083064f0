# -*- coding: utf-8 -*-
"""
自适应拒绝采样模块

针对一维对数凹密度的精确抽样，提供：
- 切线上包络（基于导数）
- 弦线下挤压检验
- 拒绝点自动加入包络（最多 ARS_MAX_POINTS 个横坐标）
"""

import bisect
import math
from typing import Callable, List, Sequence

import numpy as np

from ..config import ARS_MAX_POINTS, ARS_MAX_TRIALS
from ..errors import NumericalError

# 斜率绝对值低于该阈值的段按常数段处理
_FLAT_SLOPE = 1e-10


class AdaptiveRejectionSampler:
    """切线包络的自适应拒绝采样器

    要求横坐标覆盖众数：最左点导数为正，最右点导数为负。
    """

    def __init__(
        self,
        log_density: Callable[[float], float],
        derivative: Callable[[float], float],
        abscissae: Sequence[float],
        max_points: int = ARS_MAX_POINTS,
        area: int = -1,
    ):
        """初始化包络

        Args:
            log_density: 未归一化的对数密度 h(x)
            derivative: h'(x)
            abscissae: 初始横坐标（将被排序去重）
            max_points: 包络横坐标数上限
            area: 面积索引，仅用于报错
        """
        self.h = log_density
        self.dh = derivative
        self.max_points = max_points
        self.area = area

        xs = sorted(set(float(x) for x in abscissae))
        self.xs: List[float] = xs
        self.hs: List[float] = [self.h(x) for x in xs]
        self.gs: List[float] = [self.dh(x) for x in xs]

        if not self.gs or not (self.gs[0] > 0 and self.gs[-1] < 0):
            raise NumericalError(
                f"面积 {area}: 初始横坐标未覆盖众数（首尾导数 {self.gs[:1]} / {self.gs[-1:]}）",
                area=area,
            )
        self._build()

    def _build(self) -> None:
        """由当前切线计算交点、各段对数质量和累计概率"""
        xs, hs, gs = self.xs, self.hs, self.gs
        k = len(xs)
        zs = [-math.inf]
        for i in range(1, k):
            dg = gs[i - 1] - gs[i]
            if dg <= 1e-14:
                zs.append(0.5 * (xs[i - 1] + xs[i]))
            else:
                zs.append((hs[i] - hs[i - 1] - xs[i] * gs[i] + xs[i - 1] * gs[i - 1]) / dg)
        zs.append(math.inf)
        self.zs = zs

        log_mass = []
        for i in range(k):
            log_mass.append(self._segment_log_mass(i))
        top = max(log_mass)
        weights = [math.exp(m - top) for m in log_mass]
        total = sum(weights)
        cumulative = []
        running = 0.0
        for w in weights:
            running += w / total
            cumulative.append(running)
        cumulative[-1] = 1.0
        self.cumulative = cumulative

    def _segment_log_mass(self, i: int) -> float:
        """第 i 段上 exp(切线) 的积分（对数）"""
        lo, hi = self.zs[i], self.zs[i + 1]
        x, h, g = self.xs[i], self.hs[i], self.gs[i]
        length = hi - lo
        if g > _FLAT_SLOPE:
            return h + g * (hi - x) - math.log(g) + math.log(-math.expm1(-g * length))
        if g < -_FLAT_SLOPE:
            return h + g * (lo - x) - math.log(-g) + math.log(-math.expm1(g * length))
        return h + math.log(length)

    def _upper(self, i: int, x: float) -> float:
        return self.hs[i] + self.gs[i] * (x - self.xs[i])

    def _lower(self, x: float) -> float:
        """弦线挤压函数，横坐标范围外为 -inf"""
        xs = self.xs
        if x < xs[0] or x > xs[-1]:
            return -math.inf
        j = bisect.bisect_right(xs, x) - 1
        if j >= len(xs) - 1:
            return self.hs[-1]
        span = xs[j + 1] - xs[j]
        return ((xs[j + 1] - x) * self.hs[j] + (x - xs[j]) * self.hs[j + 1]) / span

    def _draw_from_envelope(self, rng: np.random.Generator):
        """从分段指数上包络抽样，返回 (x, 段索引)"""
        u_seg, u_pos = rng.random(2)
        i = bisect.bisect_left(self.cumulative, u_seg)
        i = min(i, len(self.xs) - 1)
        lo, hi = self.zs[i], self.zs[i + 1]
        g = self.gs[i]
        u_pos = 1.0 - u_pos  # (0, 1]
        if g > _FLAT_SLOPE:
            x = hi + math.log(u_pos + (1.0 - u_pos) * math.exp(-g * (hi - lo))) / g
        elif g < -_FLAT_SLOPE:
            x = lo + math.log(u_pos + (1.0 - u_pos) * math.exp(g * (hi - lo))) / g
        else:
            x = lo + u_pos * (hi - lo)
        return x, i

    def _insert(self, x: float, h: float, g: float) -> None:
        if len(self.xs) >= self.max_points or x in self.xs:
            return
        pos = bisect.bisect_left(self.xs, x)
        self.xs.insert(pos, x)
        self.hs.insert(pos, h)
        self.gs.insert(pos, g)
        self._build()

    def sample(self, rng: np.random.Generator) -> float:
        """抽取一个精确样本"""
        for _ in range(ARS_MAX_TRIALS):
            x, i = self._draw_from_envelope(rng)
            if not math.isfinite(x):
                continue
            upper = self._upper(i, x)
            log_w = math.log(1.0 - rng.random())
            # 挤压检验
            if log_w <= self._lower(x) - upper:
                return x
            h = self.h(x)
            if log_w <= h - upper:
                self._insert(x, h, self.dh(x))
                return x
            self._insert(x, h, self.dh(x))
        raise NumericalError(f"面积 {self.area}: 自适应拒绝采样超过最大尝试次数", area=self.area)

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """连续抽取 size 个样本（包络在抽样间持续改进）"""
        return np.array([self.sample(rng) for _ in range(size)])
