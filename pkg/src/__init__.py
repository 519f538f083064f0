# -*- coding: utf-8 -*-
"""
空间剖面回归

带 ICAR 空间随机效应的 Dirichlet 过程混合模型：联合聚类响应与分类协变量剖面，
并提供代表性划分后处理与伪剖面预测。
"""

__version__ = '0.1.0'

from .data_model import Dataset, Hyperparameters, NeighborhoodGraph, ResponseKind, validate_dataset
from .errors import ChainError, ConfigError, DataError, InputError, NumericalError
from .postprocess import PseudoProfile, pam, predict, similarity
from .sampler import Schedule, run_chain

__all__ = [
    'Dataset',
    'Hyperparameters',
    'NeighborhoodGraph',
    'ResponseKind',
    'validate_dataset',
    'ChainError',
    'ConfigError',
    'DataError',
    'InputError',
    'NumericalError',
    'PseudoProfile',
    'pam',
    'predict',
    'similarity',
    'Schedule',
    'run_chain',
]
