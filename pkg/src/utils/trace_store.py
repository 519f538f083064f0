# -*- coding: utf-8 -*-
"""
样本轨迹持久化模块

使用 JSONL 格式保存完整轨迹，提供：
- 每条链一条头记录 + 每次保留迭代一条样本记录
- 增量追加写入
- 按链重建 SampleTrace（供 predict 复用，无需重新拟合）
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterator, List, Union

import numpy as np

from ..data_model import ResponseKind
from ..errors import InputError


class TraceStore:
    """轨迹文件管理器

    记录类型：
    - header: 链序号、面积数、响应类型、类别数、u 后验均值累计量
    - sample: 一次保留迭代的全部参数
    """

    def __init__(self, storage_file: Union[str, Path]):
        """初始化轨迹文件

        Args:
            storage_file: JSONL 文件路径
        """
        self.storage_file = Path(storage_file)
        self._ensure_storage_dir()

    def _ensure_storage_dir(self) -> None:
        """确保存储目录存在"""
        self.storage_file.parent.mkdir(parents=True, exist_ok=True)

    def _append_record(self, handle, record: Dict[str, Any]) -> None:
        json.dump(record, handle, ensure_ascii=False)
        handle.write('\n')

    def clear(self) -> None:
        """删除已有的轨迹文件"""
        if self.storage_file.exists():
            self.storage_file.unlink()

    def save_trace(self, trace) -> int:
        """追加一条链的全部记录

        Returns:
            写入的样本记录数
        """
        header = {
            'type': 'header',
            'chain': trace.chain,
            'n': trace.n,
            'response_kind': trace.response_kind.value,
            'categories': list(trace.categories),
            'spatial_enabled': trace.spatial_enabled,
            'u_count': trace.u_count,
            'u_sum': None if trace.u_sum is None else trace.u_sum.tolist(),
        }
        with open(self.storage_file, 'a', encoding='utf-8') as f:
            self._append_record(f, header)
            for record in trace.records:
                self._append_record(f, {
                    'type': 'sample',
                    'chain': trace.chain,
                    'iteration': record.iteration,
                    'z': record.z.tolist(),
                    'psi': record.psi.tolist(),
                    'theta': record.theta.tolist(),
                    'phi': [p.tolist() for p in record.phi],
                    'beta': record.beta.tolist(),
                    'alpha': record.alpha,
                    'tau': record.tau,
                    'tauY': record.tauY,
                    'n_occupied': record.n_occupied,
                    'accept_theta': record.accept_theta,
                    'accept_beta': record.accept_beta,
                    'u': None if record.u is None else record.u.tolist(),
                })
        return len(trace.records)

    def iter_records(self) -> Iterator[Dict[str, Any]]:
        """逐行读取记录

        Raises:
            InputError: 文件不存在或某行不是合法 JSON
        """
        if not self.storage_file.exists():
            raise InputError(f"轨迹文件不存在: {self.storage_file}")
        with open(self.storage_file, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    raise InputError(f"{self.storage_file} 第 {line_number} 行无法解析: {e}")

    def load_traces(self) -> List:
        """按链重建 SampleTrace 列表（按链序号排序）"""
        from ..sampler import SampleTrace, TraceRecord

        traces: Dict[int, SampleTrace] = {}
        for record in self.iter_records():
            chain = int(record.get('chain', 0))
            if record.get('type') == 'header':
                u_sum = record.get('u_sum')
                traces[chain] = SampleTrace(
                    n=int(record['n']),
                    response_kind=ResponseKind.parse(record['response_kind']),
                    categories=tuple(record['categories']),
                    chain=chain,
                    spatial_enabled=bool(record['spatial_enabled']),
                    u_sum=None if u_sum is None else np.asarray(u_sum, dtype=float),
                    u_count=int(record['u_count']),
                )
            elif record.get('type') == 'sample':
                if chain not in traces:
                    raise InputError(f"轨迹文件中链 {chain} 的样本出现在头记录之前")
                traces[chain].records.append(TraceRecord(
                    iteration=int(record['iteration']),
                    z=np.asarray(record['z'], dtype=int),
                    psi=np.asarray(record['psi'], dtype=float),
                    theta=np.asarray(record['theta'], dtype=float),
                    phi=tuple(np.asarray(p, dtype=float) for p in record['phi']),
                    beta=np.asarray(record['beta'], dtype=float),
                    alpha=float(record['alpha']),
                    tau=float(record['tau']),
                    tauY=float(record['tauY']),
                    n_occupied=int(record['n_occupied']),
                    accept_theta=float(record['accept_theta']),
                    accept_beta=float(record['accept_beta']),
                    u=None if record.get('u') is None else np.asarray(record['u'], dtype=float),
                ))
        if not traces:
            raise InputError(f"轨迹文件 {self.storage_file} 中没有任何链")
        return [traces[c] for c in sorted(traces)]
