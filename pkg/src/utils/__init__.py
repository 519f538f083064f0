# -*- coding: utf-8 -*-
"""
工具模块

提供自适应拒绝采样、收敛诊断和轨迹持久化。
"""

from .ars import AdaptiveRejectionSampler
from .diagnostics import batch_means_se, effective_sample_size, split_rhat
from .trace_store import TraceStore

__all__ = [
    'AdaptiveRejectionSampler',
    'batch_means_se',
    'effective_sample_size',
    'split_rhat',
    'TraceStore',
]
