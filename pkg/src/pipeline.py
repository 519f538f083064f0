# -*- coding: utf-8 -*-
"""
批处理流水线模块

把各模块串成命令行可执行的流程：
- fit: 读取输入、并发运行多条链、后处理、写出全部结果
- predict: 复用 trace.jsonl 重新计算伪剖面预测
- summarize: 由 allocations 重新计算代表性划分
- simulate: 生成合成数据
- 错误记录 error.json
"""

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import config
from .data_model import Dataset, Hyperparameters, ResponseKind, load_dataset, write_adjacency
from .errors import InputError, ProfileRegressionError
from .postprocess import (
    Partition,
    PseudoProfile,
    SimilarityMatrix,
    cluster_summaries,
    order_partition,
    pam,
    predict,
    similarity,
)
from .run_config import RunConfig, SynthConfig
from .sampler import SampleTrace, run_chain
from .synth import generate
from .ui import ChainProgress, colored_print
from .utils.diagnostics import effective_sample_size, split_rhat
from .utils.trace_store import TraceStore

FLOAT_FORMAT = '%.17g'


@dataclass
class FitResults:
    """一次 fit 的全部结果"""

    traces: List[SampleTrace]
    similarity: SimilarityMatrix
    partition: Partition
    summary: pd.DataFrame
    predictions: pd.DataFrame
    diagnostics: pd.DataFrame
    files: Dict[str, Path] = field(default_factory=dict)


# ============================================================================
# 链执行
# ============================================================================

def chain_generators(seed: int, n_chains: int) -> Tuple[List[np.random.Generator], np.random.Generator]:
    """由主种子派生每条链的生成器和一个预测用生成器"""
    children = np.random.SeedSequence(seed).spawn(n_chains + 1)
    return [np.random.default_rng(c) for c in children[:n_chains]], np.random.default_rng(children[-1])


def run_chains(
    dataset: Dataset,
    hyper: Hyperparameters,
    run_config: RunConfig,
    generators: Sequence[np.random.Generator],
    progress: Optional[ChainProgress] = None,
) -> List[SampleTrace]:
    """每条链一个线程，按链序号收集结果

    Raises:
        任一链抛出的第一个异常（按链序号）
    """
    n_chains = len(generators)
    traces: List[Optional[SampleTrace]] = [None] * n_chains
    failures: List[Optional[BaseException]] = [None] * n_chains

    def worker(chain: int) -> None:
        try:
            traces[chain] = run_chain(
                dataset, hyper, run_config.schedule(),
                rng=generators[chain],
                progress=progress.for_chain(chain) if progress is not None else None,
                chain=chain,
            )
        except BaseException as e:
            failures[chain] = e

    if n_chains == 1:
        worker(0)
    else:
        threads = [threading.Thread(target=worker, args=(c,), name=f"chain-{c}") for c in range(n_chains)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

    for failure in failures:
        if failure is not None:
            raise failure
    return traces


# ============================================================================
# 后处理与诊断
# ============================================================================

def diagnostics_frame(traces: Sequence[SampleTrace], predictions: pd.DataFrame) -> pd.DataFrame:
    """各链的 split R-hat 与批均值有效样本量"""
    frames = [t.scalar_frame() for t in traces]
    quantities = ['alpha', 'n_occupied']
    if traces[0].spatial_enabled:
        quantities.append('tau')
    if traces[0].response_kind is ResponseKind.GAUSSIAN:
        quantities.append('tauY')

    series: Dict[str, List[np.ndarray]] = {
        q: [f[q].to_numpy(dtype=float) for f in frames] for q in quantities
    }
    if not predictions.empty:
        for profile_id, group in predictions.groupby('profile_id', sort=False):
            ordered = group.sort_values(['chain', 'iteration'], kind='stable')
            series[f"predictive:{profile_id}"] = [
                g['draw'].to_numpy(dtype=float) for _, g in ordered.groupby('chain', sort=True)
            ]

    rows = []
    for name, chains in series.items():
        length = min(len(c) for c in chains)
        stacked = np.vstack([c[:length] for c in chains])
        rows.append({
            'quantity': name,
            'n_chains': stacked.shape[0],
            'n_samples': length,
            'mean': float(stacked.mean()) if length else float('nan'),
            'rhat': split_rhat(stacked),
            'ess': float(np.nansum([effective_sample_size(c) for c in stacked])),
        })
    return pd.DataFrame(rows, columns=['quantity', 'n_chains', 'n_samples', 'mean', 'rhat', 'ess'])


def posterior_u_mean(traces: Sequence[SampleTrace]) -> np.ndarray:
    """跨链合并的 u 后验均值"""
    total = sum(t.u_count for t in traces)
    if total == 0:
        return np.zeros(traces[0].n)
    return sum(t.u_sum for t in traces if t.u_count) / total


def postprocess_traces(
    dataset: Dataset,
    hyper: Hyperparameters,
    traces: List[SampleTrace],
    profiles: Sequence[PseudoProfile],
    rng: np.random.Generator,
) -> FitResults:
    S = similarity(traces)
    partition = order_partition(pam(S), dataset.y)
    summary = cluster_summaries(partition, traces, dataset)
    predictions = predict(profiles, traces, hyper, rng) if profiles else pd.DataFrame(
        columns=['profile_id', 'chain', 'iteration', 'cluster', 'mean', 'draw'])
    return FitResults(
        traces=traces,
        similarity=S,
        partition=partition,
        summary=summary,
        predictions=predictions,
        diagnostics=diagnostics_frame(traces, predictions),
    )


# ============================================================================
# 文件输出
# ============================================================================

def _chain_file(name: str, chain: int, n_chains: int) -> str:
    if n_chains == 1:
        return name
    stem, suffix = name.rsplit('.', 1)
    return f"{stem}_chain{chain}.{suffix}"


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise InputError(f"无法写入 {path}: {e}")
    return path


def ensure_output_dir(output_dir: Union[str, Path]) -> Path:
    """创建输出目录

    Raises:
        InputError: 目录不可创建或不可写
    """
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"无法创建输出目录 {output_dir}: {e}")
    if not output_dir.is_dir():
        raise InputError(f"输出路径不是目录: {output_dir}")
    return output_dir


def allocations_frame(trace: SampleTrace) -> pd.DataFrame:
    frame = pd.DataFrame(trace.allocations, columns=[f"z_{i}" for i in range(trace.n)])
    frame.insert(0, 'iteration', [r.iteration for r in trace.records])
    return frame


def read_allocations(path: Union[str, Path]) -> np.ndarray:
    """读取 allocations.csv，返回 (T, n) 分配矩阵"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"分配文件不存在: {path}")
    frame = pd.read_csv(path)
    columns = [c for c in frame.columns if str(c).startswith('z_')]
    if not columns:
        raise InputError(f"{path} 中没有 z_ 列")
    return frame[columns].to_numpy(dtype=int)


def write_similarity(S: SimilarityMatrix, path: Path) -> Path:
    """n 不超过稠密上限时写完整矩阵，否则写带标记表头的上三角三元组"""
    n = S.n
    if n <= config.DENSE_SIMILARITY_LIMIT:
        frame = pd.DataFrame(S.S, columns=[str(i) for i in range(n)])
        return _write_csv(frame, path)
    rows, cols = np.triu_indices(n)
    frame = pd.DataFrame({'i': rows, 'j': cols, 'similarity': S.S[rows, cols]})
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# format=upper_triangle n={n}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise InputError(f"无法写入 {path}: {e}")
    return path


def read_similarity(path: Union[str, Path]) -> np.ndarray:
    """读取 similarity.csv（稠密或上三角格式）"""
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        first = f.readline()
    if first.startswith('# format=upper_triangle'):
        n = int(first.split('n=')[1])
        frame = pd.read_csv(path, skiprows=1)
        S = np.zeros((n, n))
        i = frame['i'].to_numpy(dtype=int)
        j = frame['j'].to_numpy(dtype=int)
        S[i, j] = frame['similarity'].to_numpy(dtype=float)
        S[j, i] = S[i, j]
        return S
    return pd.read_csv(path).to_numpy(dtype=float)


def partition_frame(partition: Partition, y: Optional[np.ndarray] = None) -> pd.DataFrame:
    frame = pd.DataFrame({'area': np.arange(partition.labels.size), 'cluster': partition.labels})
    if y is not None:
        frame['response'] = y
    return frame


def export_outputs(results: FitResults, dataset: Dataset, run_config: RunConfig) -> Dict[str, Path]:
    """写出全部结果文件

    Returns:
        {文件名: 路径}

    Raises:
        InputError: 输出目录不可写
    """
    output_dir = ensure_output_dir(run_config.output_dir)
    files: Dict[str, Path] = {}
    n_chains = len(results.traces)

    for trace in results.traces:
        for name, frame in ((config.TRACE_SCALARS_FILE, trace.scalar_frame()),
                            (config.ALLOCATIONS_FILE, allocations_frame(trace))):
            filename = _chain_file(name, trace.chain, n_chains)
            files[filename] = _write_csv(frame, output_dir / filename)

    files[config.SIMILARITY_FILE] = write_similarity(results.similarity, output_dir / config.SIMILARITY_FILE)
    files[config.PARTITION_FILE] = _write_csv(
        partition_frame(results.partition, dataset.y), output_dir / config.PARTITION_FILE)
    files[config.CLUSTER_SUMMARY_FILE] = _write_csv(results.summary, output_dir / config.CLUSTER_SUMMARY_FILE)
    files[config.SPATIAL_U_FILE] = _write_csv(
        pd.DataFrame({'area': np.arange(dataset.n), 'u_mean': posterior_u_mean(results.traces)}),
        output_dir / config.SPATIAL_U_FILE)
    files[config.PREDICTIONS_FILE] = _write_csv(results.predictions, output_dir / config.PREDICTIONS_FILE)
    files[config.DIAGNOSTICS_FILE] = _write_csv(results.diagnostics, output_dir / config.DIAGNOSTICS_FILE)

    store = TraceStore(output_dir / config.TRACE_STORE_FILE)
    store.clear()
    for trace in results.traces:
        store.save_trace(trace)
    files[config.TRACE_STORE_FILE] = store.storage_file
    return files


# ============================================================================
# 命令
# ============================================================================

def load_inputs(run_config: RunConfig) -> Tuple[Dataset, Hyperparameters]:
    dataset = load_dataset(run_config.data_path, run_config.adjacency_path,
                           run_config.response_kind, run_config.categories)
    hyper = run_config.build_hyperparameters(dataset.categories)
    for profile in run_config.profiles:
        profile.validate(dataset.categories, dataset.p)
    return dataset, hyper


def run(run_config: RunConfig, verbose: bool = True) -> FitResults:
    """fit 命令：运行所有链并写出结果

    Args:
        run_config: 运行配置
        verbose: 是否打印进度

    Returns:
        FitResults（files 字段记录写出的文件）
    """
    dataset, hyper = load_inputs(run_config)
    ensure_output_dir(run_config.output_dir)
    if verbose:
        colored_print(
            f"{config.SYMBOLS['start']} {dataset.n} 个面积, {dataset.J} 个协变量, "
            f"{run_config.n_chains} 条链 × {run_config.n_iter} 次迭代", 'system_info')

    generators, prediction_rng = chain_generators(run_config.seed, run_config.n_chains)
    progress = ChainProgress(run_config.progress_every, run_config.n_iter) if verbose else None
    traces = run_chains(dataset, hyper, run_config, generators, progress)

    results = postprocess_traces(dataset, hyper, traces, run_config.profiles, prediction_rng)
    results.files = export_outputs(results, dataset, run_config)
    if verbose:
        colored_print(
            f"{config.SYMBOLS['success']} 代表性划分 k={results.partition.k}，结果已写入 {run_config.output_dir}",
            'system_success')
    return results


def predict_command(run_config: RunConfig) -> pd.DataFrame:
    """predict 命令：读取已保存的轨迹，重写 predictions.csv

    Raises:
        InputError: 轨迹不存在或伪剖面不合法
    """
    if not run_config.profiles:
        raise InputError("运行文件的 [profiles] 节中没有任何伪剖面")
    traces = TraceStore(run_config.trace_path).load_traces()
    hyper = run_config.build_hyperparameters(traces[0].categories)
    _, prediction_rng = chain_generators(run_config.seed, len(traces))
    predictions = predict(run_config.profiles, traces, hyper, prediction_rng)
    _write_csv(predictions, ensure_output_dir(run_config.output_dir) / config.PREDICTIONS_FILE)
    return predictions


def summarize(output_dir: Union[str, Path]) -> pd.DataFrame:
    """summarize 命令：由 allocations*.csv 重算相似度与代表性划分

    Returns:
        聚类大小表（cluster, size, response_mean）
    """
    output_dir = Path(output_dir)
    if not output_dir.is_dir():
        raise InputError(f"输出目录不存在: {output_dir}")
    paths = sorted(output_dir.glob('allocations*.csv'))
    if not paths:
        raise InputError(f"{output_dir} 中没有 allocations*.csv")
    allocations = np.vstack([read_allocations(p) for p in paths])
    partition = pam(similarity(allocations))

    response = None
    previous = output_dir / config.PARTITION_FILE
    if previous.exists():
        frame = pd.read_csv(previous)
        if 'response' in frame.columns and len(frame) == partition.labels.size:
            response = frame['response'].to_numpy(dtype=float)
    if response is not None:
        partition = order_partition(partition, response)
    _write_csv(partition_frame(partition, response), previous)

    sizes = pd.DataFrame({'cluster': np.arange(partition.k), 'size': partition.sizes()})
    if response is not None:
        sizes['response_mean'] = [float(response[partition.labels == c].mean()) for c in range(partition.k)]
    return sizes


def simulate_command(synth_config: SynthConfig) -> Dict[str, Path]:
    """simulate 命令：写出 data.csv、adjacency.txt、truth.csv"""
    result = generate(synth_config.spec)
    output_dir = ensure_output_dir(synth_config.output_dir)
    files = {
        'data.csv': _write_csv(result.dataset.to_frame(), output_dir / 'data.csv'),
        'truth.csv': _write_csv(result.truth_frame(), output_dir / 'truth.csv'),
    }
    adjacency = output_dir / 'adjacency.txt'
    try:
        write_adjacency(result.dataset.graph, adjacency)
    except OSError as e:
        raise InputError(f"无法写入 {adjacency}: {e}")
    files['adjacency.txt'] = adjacency
    return files


def error_record(error: BaseException) -> Dict[str, Any]:
    if isinstance(error, ProfileRegressionError):
        return error.to_record()
    return {
        'status': 'failed',
        'kind': 'internal',
        'message': f"{type(error).__name__}: {error}",
        'exit_code': 2 if isinstance(error, (ArithmeticError, FloatingPointError)) else 1,
    }


def write_error_record(error: BaseException, output_dir: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """把错误记录写入输出目录的 error.json（目录不可用时跳过）"""
    record = error_record(error)
    if output_dir is not None:
        try:
            path = Path(output_dir)
            path.mkdir(parents=True, exist_ok=True)
            with open(path / config.ERROR_RECORD_FILE, 'w', encoding='utf-8') as f:
                json.dump(record, f, ensure_ascii=False, indent=2)
        except OSError:
            pass
    return record
