# -*- coding: utf-8 -*-
"""
空间剖面回归命令行入口

批处理命令：
- fit <运行文件>          运行 MCMC，写出轨迹、相似度矩阵、代表性划分、聚类摘要、空间项与预测
- simulate <合成配置>     生成合成数据集
- predict <运行文件>      复用 trace.jsonl 重新计算伪剖面预测
- summarize <输出目录>    由 allocations 重新计算代表性划分

退出码：0 成功，1 输入错误，2 数值失败。

使用方法：
    python main.py fit run.cfg
"""

import json
import sys
import warnings
from pathlib import Path
from typing import List, Optional

from src.command_handler import parse_command
from src.config import SYMBOLS
from src.errors import ConfigError, ProfileRegressionWarning
from src.pipeline import predict_command, run, simulate_command, summarize, write_error_record
from src.run_config import parse_config, parse_synth_config
from src.ui import colored_print, print_banner, print_table, print_usage, setup_encoding


def _show_warning(message, category, filename, lineno, file=None, line=None) -> None:
    colored_print(f"{SYMBOLS['warning']} {message}", 'system_warning', file=sys.stderr)


def _output_dir_for(command: str, target: Optional[Path]) -> Optional[Path]:
    """尽量确定写 error.json 的目录；配置本身无法解析时返回 None"""
    if target is None:
        return None
    if command == 'summarize':
        return target if target.is_dir() else None
    try:
        if command == 'simulate':
            return parse_synth_config(target).output_dir
        return parse_config(target).output_dir
    except ConfigError:
        return None


def execute(command: str, target: Path) -> int:
    """执行单个命令，异常交给调用方处理"""
    if command == 'fit':
        print_banner('fit')
        run(parse_config(target))
    elif command == 'simulate':
        print_banner('simulate')
        files = simulate_command(parse_synth_config(target))
        for name, path in files.items():
            colored_print(f"{SYMBOLS['folder']} {name} {SYMBOLS['arrow_right']} {path}", 'system_success')
    elif command == 'predict':
        print_banner('predict')
        predictions = predict_command(parse_config(target))
        table = predictions.groupby('profile_id', sort=False)['draw'].describe()
        print_table(table.reset_index(), title="伪剖面预测分布")
    elif command == 'summarize':
        print_banner('summarize')
        print_table(summarize(target), title="代表性划分的聚类大小")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """主函数 - 程序入口

    Returns:
        退出码
    """
    setup_encoding()
    warnings.showwarning = _show_warning
    warnings.simplefilter('default', ProfileRegressionWarning)

    cmd_result = parse_command(sys.argv[1:] if argv is None else argv)

    if cmd_result['type'] == 'help':
        print_usage()
        return 0
    if cmd_result['type'] == 'error':
        colored_print(cmd_result['response'], 'system_warning', file=sys.stderr)
        print_usage()
        return 1

    command, target = cmd_result['type'], cmd_result['target']
    try:
        status = execute(command, target)
        colored_print(f"{SYMBOLS['end']} 完成", 'system_success')
        return status
    except KeyboardInterrupt:
        colored_print(f"\n{SYMBOLS['warning']} 程序被用户中断", 'system_warning', file=sys.stderr)
        return 1
    except Exception as e:
        record = write_error_record(e, _output_dir_for(command, target))
        colored_print(f"{SYMBOLS['error']} {record['message']}", 'system_error', file=sys.stderr)
        print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        return int(record['exit_code'])


if __name__ == "__main__":
    sys.exit(main())
