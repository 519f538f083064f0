# -*- coding: utf-8 -*-
"""
UI 模块

提供终端输出相关功能，包括：
- 彩色文本输出
- 启动横幅和使用说明
- 链进度报告
- 简单表格打印
"""

import sys
import threading
from typing import Optional, Sequence

import pandas as pd

from .config import COLORS, ENABLE_COLORS, SYMBOLS


def setup_encoding() -> bool:
    """把标准输出切换为 UTF-8（颜文字在部分终端下需要）"""
    try:
        if hasattr(sys.stdout, 'reconfigure'):
            sys.stdout.reconfigure(encoding='utf-8', errors='replace')
            sys.stderr.reconfigure(encoding='utf-8', errors='replace')
        return True
    except (OSError, ValueError):
        return False


def colored_print(
    text: str,
    color_key: str = 'reset',
    end: str = '\n',
    flush: bool = False,
    file=None,
) -> None:
    """带颜色的安全打印函数

    Args:
        text: 要打印的文本
        color_key: 颜色键名
        end: 行尾字符
        flush: 是否立即刷新输出
        file: 输出流，默认 stdout
    """
    stream = sys.stdout if file is None else file
    if ENABLE_COLORS and color_key in COLORS and getattr(stream, 'isatty', lambda: False)():
        colored_text = f"{COLORS[color_key]}{text}{COLORS['reset']}"
    else:
        colored_text = text

    try:
        print(colored_text, end=end, flush=flush, file=stream)
    except UnicodeEncodeError:
        ascii_text = ''.join(char if ord(char) < 128 else '?' for char in colored_text)
        print(ascii_text, end=end, flush=flush, file=stream)


def print_separator(width: int = 70) -> None:
    colored_print(SYMBOLS['separator'] * width, 'separator_line')


def print_banner(command: str) -> None:
    """打印命令启动横幅"""
    print_separator()
    colored_print(f"    {SYMBOLS['star']} 空间剖面回归 · {command} {SYMBOLS['star']}", 'bright_white')
    print_separator()


def print_usage() -> None:
    """打印使用说明"""
    colored_print(f"{SYMBOLS['info']} 用法: python main.py <命令> <参数>", 'system_info')
    colored_print(f"{SYMBOLS['info']} 可用命令：", 'system_info')
    colored_print("   - fit <运行文件>          --运行 MCMC 并写出全部结果", 'system_info')
    colored_print("   - simulate <合成配置>     --生成合成数据（data.csv / adjacency.txt / truth.csv）", 'system_info')
    colored_print("   - predict <运行文件>      --复用已保存的轨迹重新计算伪剖面预测", 'system_info')
    colored_print("   - summarize <输出目录>    --由 allocations 重新计算代表性划分", 'system_info')
    colored_print("   - help                    --显示本说明", 'system_info')
    colored_print(f"{SYMBOLS['info']} 退出码: 0 成功, 1 输入错误, 2 数值失败", 'system_info')
    print_separator()


class ChainProgress:
    """链进度报告器

    作为 run_chain 的回调使用；多条链在不同线程中共享同一个实例时，
    输出由锁串行化。
    """

    def __init__(self, every: int, n_iter: int, stream=None):
        """
        Args:
            every: 每隔多少次迭代打印一次（0 表示关闭）
            n_iter: 总迭代次数
            stream: 输出流，默认 stdout
        """
        self.every = every
        self.n_iter = n_iter
        self.stream = stream
        self._lock = threading.Lock()

    def for_chain(self, chain: int):
        """返回绑定到某条链的回调 progress(iteration, state)"""
        def callback(iteration: int, state) -> None:
            self.report(chain, iteration, state)
        return callback

    def report(self, chain: int, iteration: int, state) -> None:
        if self.every <= 0:
            return
        if iteration % self.every != 0 and iteration != self.n_iter:
            return
        occupied = int((state.counts() > 0).sum())
        line = (
            f"{SYMBOLS['chain']} 链 {chain} 迭代 {iteration}/{self.n_iter}  "
            f"聚类 {occupied}  α={state.alpha:.3f}  "
            f"接受率 θ={state.theta_step.acceptance_rate:.2f}"
        )
        if state.beta_step.size:
            line += f" β={state.beta_step.acceptance_rate:.2f}"
        with self._lock:
            colored_print(line, 'system_info', flush=True, file=self.stream)


def print_table(frame: pd.DataFrame, title: Optional[str] = None,
                columns: Optional[Sequence[str]] = None) -> None:
    """按列宽对齐打印 DataFrame"""
    if title:
        colored_print(f"{SYMBOLS['docs']} {title}", 'system_success')
    if columns is not None:
        frame = frame.loc[:, list(columns)]
    for line in frame.to_string(index=False).splitlines():
        colored_print(f"  {line}", 'table_text')
