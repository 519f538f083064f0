# -*- coding: utf-8 -*-
"""
运行配置模块

负责解析 `key = value` 格式的运行文件，提供：
- 分节（[paths] [schedule] [model] [hyperparameters] [profiles] [synth]）
- 按声明的模式逐键校验类型，错误带 1 起始的行号
- 相对路径按运行文件所在目录解析
- 伪剖面（pseudo-profile）定义
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from . import config
from .data_model import Hyperparameters, ResponseKind
from .errors import ConfigError, InputError
from .postprocess import PseudoProfile
from .sampler import Schedule
from .synth import GRAPH_KINDS, SynthSpec


# ============================================================================
# 值解析
# ============================================================================

def _parse_int(value: str) -> int:
    return int(value)


def _parse_float(value: str) -> float:
    result = float(value)
    if not np.isfinite(result):
        raise ValueError(f"{value!r} 不是有限数")
    return result


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ('true', 'yes', 'on', '1'):
        return True
    if lowered in ('false', 'no', 'off', '0'):
        return False
    raise ValueError(f"{value!r} 不是布尔值（true/false）")


def _parse_kind(value: str) -> ResponseKind:
    try:
        return ResponseKind.parse(value)
    except InputError as e:
        raise ValueError(str(e))


def _parse_float_list(value: str) -> Tuple[float, ...]:
    items = [v.strip() for v in value.split(',')]
    if not items or any(not v for v in items):
        raise ValueError(f"{value!r} 不是逗号分隔的数值列表")
    return tuple(_parse_float(v) for v in items)


def _parse_int_list(value: str) -> Tuple[int, ...]:
    items = [v.strip() for v in value.split(',')]
    if not items or any(not v for v in items):
        raise ValueError(f"{value!r} 不是逗号分隔的整数列表")
    return tuple(int(v) for v in items)


def _parse_codes(value: str) -> Tuple[Optional[int], ...]:
    """伪剖面编码：整数或缺失标记（NA/MISSING）"""
    codes = []
    for token in value.split(','):
        token = token.strip()
        if token.upper() in config.MISSING_TOKENS:
            codes.append(None)
        else:
            codes.append(int(token))
    return tuple(codes)


Parser = Callable[[str], Any]

SCHEMA: Dict[str, Dict[str, Parser]] = {
    'paths': {
        'data': str,
        'adjacency': str,
        'output': str,
    },
    'schedule': {
        'n_iter': _parse_int,
        'burn_in': _parse_int,
        'thin': _parse_int,
        'n_init_clusters': _parse_int,
        'seed': _parse_int,
        'n_chains': _parse_int,
        'u_thin': _parse_int,
        'progress_every': _parse_int,
        'debug': _parse_bool,
    },
    'model': {
        'response_kind': _parse_kind,
        'spatial_enabled': _parse_bool,
    },
    'hyperparameters': {
        's_alpha': _parse_float,
        'r_alpha': _parse_float,
        'mu_theta': _parse_float,
        'sigma_theta': _parse_float,
        'mu_beta': _parse_float,
        'sigma_beta': _parse_float,
        't_df': _parse_int,
        's_tauY': _parse_float,
        'r_tauY': _parse_float,
        'a_tau': _parse_float,
        'b_tau': _parse_float,
        'a_j': _parse_float_list,
        'categories': _parse_int_list,
    },
    'synth': {
        'n_areas': _parse_int,
        'graph_kind': str,
        'k_true': _parse_int,
        'separation': _parse_float,
        'tau_true': _parse_float,
        'response_kind': _parse_kind,
        'seed': _parse_int,
        'n_covariates': _parse_int,
        'n_categories': _parse_int,
        'noise_sd': _parse_float,
        'grid_rows': _parse_int,
        'grid_cols': _parse_int,
        'beta': _parse_float_list,
        'spatial': _parse_bool,
    },
}

POSITIVE_KEYS = ('s_alpha', 'r_alpha', 'sigma_theta', 'sigma_beta', 't_df',
                 's_tauY', 'r_tauY', 'a_tau', 'b_tau')

_COVARIATE_A_KEY = re.compile(r'^a_(\d+)$')
_PROFILE_KEY = re.compile(r'^([A-Za-z0-9_\-]+)(?:\.(w|offset|E))?$')


@dataclass
class Entry:
    value: Any
    line: int


Sections = Dict[str, Dict[str, Entry]]


def _strip_comment(line: str) -> str:
    # 行尾注释必须以空白 + # 开头
    match = re.search(r'\s#', line)
    if match:
        line = line[:match.start()]
    return line.strip()


def read_sections(path: Union[str, Path], allowed: Tuple[str, ...]) -> Sections:
    """读取运行文件并按模式解析每个键

    Args:
        path: 运行文件路径
        allowed: 该命令接受的节名

    Returns:
        {节名: {键: Entry}}

    Raises:
        ConfigError: 文件缺失、语法错误、未知节或键、类型错误、重复键
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.readlines()

    sections: Sections = {}
    current: Optional[str] = None
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        # 跳过空行和注释
        if not line or line.startswith('#'):
            continue
        line = _strip_comment(line)

        if line.startswith('[') and line.endswith(']'):
            current = line[1:-1].strip()
            if current not in allowed:
                raise ConfigError(f"未知的节 [{current}]（可用: {', '.join(allowed)}）", line_number)
            sections.setdefault(current, {})
            continue

        if '=' not in line:
            raise ConfigError(f"无法解析的行，应为 key = value: {line!r}", line_number)
        if current is None:
            raise ConfigError(f"键值对必须位于某个节内: {line!r}", line_number)

        key, value = line.split('=', 1)
        key = key.strip()
        value = value.strip()
        if key in sections[current]:
            raise ConfigError(f"重复的键 {key}（首次出现在第 {sections[current][key].line} 行）",
                              line_number)
        sections[current][key] = Entry(_convert(current, key, value, line_number), line_number)
    return sections


def _convert(section: str, key: str, value: str, line_number: int) -> Any:
    if section == 'profiles':
        match = _PROFILE_KEY.match(key)
        if not match:
            raise ConfigError(f"非法的伪剖面键 {key!r}", line_number)
        attribute = match.group(2)
        parser: Parser
        if attribute is None:
            parser = _parse_codes
        elif attribute == 'w':
            parser = _parse_float_list
        else:
            parser = _parse_float
    else:
        schema = SCHEMA[section]
        if key in schema:
            parser = schema[key]
        elif section == 'hyperparameters' and _COVARIATE_A_KEY.match(key):
            parser = _parse_float_list
        else:
            raise ConfigError(f"[{section}] 中未知的键 {key}", line_number)

    if value == '':
        raise ConfigError(f"键 {key} 的值为空", line_number)
    try:
        return parser(value)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"键 {key} 的值 {value!r} 类型错误: {e}", line_number)


# ============================================================================
# 运行配置
# ============================================================================

@dataclass
class RunConfig:
    """fit / predict 命令的完整配置"""

    data_path: Path
    adjacency_path: Path
    output_dir: Path
    response_kind: ResponseKind = ResponseKind.GAUSSIAN
    spatial_enabled: bool = True
    n_iter: int = config.DEFAULT_N_ITER
    burn_in: int = config.DEFAULT_BURN_IN
    thin: int = config.DEFAULT_THIN
    n_init_clusters: int = config.DEFAULT_N_INIT_CLUSTERS
    seed: int = config.DEFAULT_SEED
    n_chains: int = config.DEFAULT_N_CHAINS
    u_thin: int = config.DEFAULT_U_THIN
    progress_every: int = config.DEFAULT_PROGRESS_EVERY
    debug: bool = False
    hyper_overrides: Dict[str, float] = field(default_factory=dict)
    dirichlet_all: Optional[Tuple[float, ...]] = None
    dirichlet_by_covariate: Dict[int, Tuple[float, ...]] = field(default_factory=dict)
    categories: Optional[Tuple[int, ...]] = None
    profiles: List[PseudoProfile] = field(default_factory=list)
    source: Optional[Path] = None

    @property
    def trace_path(self) -> Path:
        return self.output_dir / config.TRACE_STORE_FILE

    def schedule(self, seed: Optional[int] = None) -> Schedule:
        """按配置构建单链调度（seed 可被派生种子覆盖）"""
        return Schedule(
            n_iter=self.n_iter,
            burn_in=self.burn_in,
            thin=self.thin,
            n_init_clusters=self.n_init_clusters,
            seed=self.seed if seed is None else seed,
            u_thin=self.u_thin,
            spatial_enabled=self.spatial_enabled,
            debug=self.debug,
        )

    def build_hyperparameters(self, categories) -> Hyperparameters:
        """用数据的类别数补全 Dirichlet 向量并应用覆盖值

        Raises:
            InputError: Dirichlet 向量长度与类别数不符
        """
        categories = tuple(int(k) for k in categories)
        a = []
        for j, k in enumerate(categories):
            vector = self.dirichlet_by_covariate.get(j, self.dirichlet_all)
            if vector is None:
                a.append(np.full(k, config.DEFAULT_DIRICHLET_A))
            elif len(vector) != k:
                raise InputError(f"协变量 {j} 的 Dirichlet 向量长度 {len(vector)} 与类别数 {k} 不符")
            else:
                a.append(np.asarray(vector, dtype=float))
        for j in self.dirichlet_by_covariate:
            if j >= len(categories):
                raise InputError(f"a_{j} 指向不存在的协变量（共 {len(categories)} 个）")
        return Hyperparameters(a=tuple(a), **self.hyper_overrides)


def _resolve(base: Path, value: str) -> Path:
    path = Path(value).expanduser()
    return path if path.is_absolute() else (base / path)


def _required(sections: Sections, section: str, key: str) -> Entry:
    entry = sections.get(section, {}).get(key)
    if entry is None:
        raise ConfigError(f"缺少必需的键 [{section}] {key}")
    return entry


def _parse_profiles(entries: Dict[str, Entry]) -> List[PseudoProfile]:
    bases: Dict[str, PseudoProfile] = {}
    for key, entry in entries.items():
        name, attribute = _PROFILE_KEY.match(key).groups()
        if attribute is None:
            bases[name] = PseudoProfile(name=name, codes=entry.value)

    for key, entry in entries.items():
        name, attribute = _PROFILE_KEY.match(key).groups()
        if attribute is None:
            continue
        if name not in bases:
            raise ConfigError(f"伪剖面 {name} 的属性 {attribute} 出现在未定义的剖面上", entry.line)
        profile = bases[name]
        if attribute == 'w':
            profile.fixed_effects = np.asarray(entry.value, dtype=float)
        elif attribute == 'offset':
            profile.spatial_offset = entry.value
        elif not entry.value > 0:
            raise ConfigError(f"伪剖面 {name} 的 E 必须为正", entry.line)
        else:
            profile.expected = entry.value
    return list(bases.values())


def parse_config(path: Union[str, Path]) -> RunConfig:
    """解析 fit / predict 使用的运行文件

    Args:
        path: 运行文件路径

    Returns:
        RunConfig，未给出的超参数取默认值

    Raises:
        ConfigError: 语法、类型或不变式错误（带行号）
    """
    path = Path(path)
    sections = read_sections(path, ('paths', 'schedule', 'model', 'hyperparameters', 'profiles'))
    base = path.parent

    paths = sections.get('paths', {})
    output = paths.get('output')
    run = RunConfig(
        data_path=_resolve(base, _required(sections, 'paths', 'data').value),
        adjacency_path=_resolve(base, _required(sections, 'paths', 'adjacency').value),
        output_dir=_resolve(base, output.value if output else 'output'),
        source=path,
    )

    schedule = sections.get('schedule', {})
    for key, entry in schedule.items():
        setattr(run, key, entry.value)
    model = sections.get('model', {})
    for key, entry in model.items():
        setattr(run, key, entry.value)

    def line_of(section: str, key: str) -> Optional[int]:
        entry = sections.get(section, {}).get(key)
        return entry.line if entry else None

    if not 0 <= run.burn_in < run.n_iter:
        raise ConfigError(f"burn_in 必须满足 0 ≤ burn_in < n_iter（{run.burn_in} / {run.n_iter}）",
                          line_of('schedule', 'burn_in') or line_of('schedule', 'n_iter'))
    if run.thin < 1:
        raise ConfigError(f"thin 必须 ≥ 1，当前为 {run.thin}", line_of('schedule', 'thin'))
    if (run.n_iter - run.burn_in) // run.thin < 1:
        raise ConfigError("预烧期之后没有保留任何迭代", line_of('schedule', 'thin'))
    if run.n_chains < 1:
        raise ConfigError(f"n_chains 必须 ≥ 1，当前为 {run.n_chains}", line_of('schedule', 'n_chains'))
    if run.n_init_clusters < 2:
        raise ConfigError(f"n_init_clusters 必须 ≥ 2，当前为 {run.n_init_clusters}",
                          line_of('schedule', 'n_init_clusters'))
    if run.u_thin < 1:
        raise ConfigError(f"u_thin 必须 ≥ 1，当前为 {run.u_thin}", line_of('schedule', 'u_thin'))
    if run.progress_every < 0:
        raise ConfigError("progress_every 不能为负", line_of('schedule', 'progress_every'))

    for key, entry in sections.get('hyperparameters', {}).items():
        if key in POSITIVE_KEYS and not entry.value > 0:
            raise ConfigError(f"超参数 {key} 必须为正数，当前为 {entry.value}", entry.line)
        if key == 'categories':
            if any(k < 2 for k in entry.value):
                raise ConfigError("每个协变量至少需要 2 个类别", entry.line)
            run.categories = entry.value
        elif key == 'a_j' or _COVARIATE_A_KEY.match(key):
            if any(v <= 0 for v in entry.value):
                raise ConfigError(f"{key} 必须逐元素为正", entry.line)
            if key == 'a_j':
                run.dirichlet_all = entry.value
            else:
                run.dirichlet_by_covariate[int(_COVARIATE_A_KEY.match(key).group(1))] = entry.value
        else:
            run.hyper_overrides[key] = entry.value

    run.profiles = _parse_profiles(sections.get('profiles', {}))
    return run


# ============================================================================
# 合成数据配置
# ============================================================================

@dataclass
class SynthConfig:
    """simulate 命令的配置"""

    spec: SynthSpec
    output_dir: Path
    source: Optional[Path] = None


def parse_synth_config(path: Union[str, Path]) -> SynthConfig:
    """解析 simulate 使用的 [synth] 运行文件

    Raises:
        ConfigError: 语法、类型或取值错误
    """
    path = Path(path)
    sections = read_sections(path, ('paths', 'synth'))
    for key, entry in sections.get('paths', {}).items():
        if key != 'output':
            raise ConfigError(f"simulate 只接受 [paths] output，收到 {key}", entry.line)

    synth = {key: entry.value for key, entry in sections.get('synth', {}).items()}
    kind = sections.get('synth', {}).get('graph_kind')
    if kind is not None and kind.value not in GRAPH_KINDS:
        raise ConfigError(f"未知的图类型 {kind.value}（可选 {', '.join(GRAPH_KINDS)}）", kind.line)

    rows = synth.pop('grid_rows', None)
    cols = synth.pop('grid_cols', None)
    if (rows is None) != (cols is None):
        raise ConfigError("grid_rows 与 grid_cols 必须同时给出")
    if rows is not None:
        synth['grid_shape'] = (rows, cols)
    if 'beta' in synth:
        synth['beta'] = tuple(synth['beta'])

    try:
        spec = SynthSpec(**synth)
    except InputError as e:
        raise ConfigError(str(e))

    output = sections.get('paths', {}).get('output')
    return SynthConfig(
        spec=spec,
        output_dir=_resolve(path.parent, output.value if output else 'synthetic'),
        source=path,
    )
