# -*- coding: utf-8 -*-
"""
命令处理模块

负责把命令行参数解析为命令结果，包括：
- fit / simulate / predict / summarize / help
- 参数个数检查
- 命令别名
"""

from pathlib import Path
from typing import Any, Optional, Sequence

from .config import SYMBOLS


class CommandResult:
    """命令解析结果封装类"""

    def __init__(
        self,
        cmd_type: str,
        target: Optional[Path] = None,
        response: Optional[str] = None,
        **kwargs
    ):
        self.type = cmd_type
        self.target = target
        self.response = response
        self.extra = kwargs

    def __getitem__(self, key: str) -> Any:
        """支持字典式访问"""
        if key in ('type', 'target', 'response'):
            return getattr(self, key)
        return self.extra.get(key)

    def __setitem__(self, key: str, value) -> None:
        """支持字典式赋值"""
        if key in ('type', 'target', 'response'):
            setattr(self, key, value)
        else:
            self.extra[key] = value

    def get(self, key: str, default=None):
        value = self[key]
        return default if value is None else value


class CommandHandler:
    """命令处理器

    统一把 argv 路由到具体的命令解析函数。
    """

    @staticmethod
    def parse(argv: Sequence[str]) -> CommandResult:
        """解析命令行参数

        Args:
            argv: 不含程序名的参数列表

        Returns:
            CommandResult: 解析结果；无法识别时类型为 'error'
        """
        if not argv:
            return CommandResult('help')

        command = argv[0].lower()
        args = list(argv[1:])

        # 路由到具体的命令处理器
        handler_map = {
            'fit': CommandHandler._handle_fit,
            'run': CommandHandler._handle_fit,
            'simulate': CommandHandler._handle_simulate,
            'sim': CommandHandler._handle_simulate,
            'predict': CommandHandler._handle_predict,
            'summarize': CommandHandler._handle_summarize,
            'summary': CommandHandler._handle_summarize,
            'help': CommandHandler._handle_help,
            '-h': CommandHandler._handle_help,
            '--help': CommandHandler._handle_help,
        }

        handler = handler_map.get(command)
        if handler:
            return handler(args)

        return CommandResult(
            'error',
            response=f"{SYMBOLS['warning']} 未知命令: {argv[0]}（使用 help 查看可用命令）"
        )

    @staticmethod
    def _single_path(command: str, args: Sequence[str], what: str) -> CommandResult:
        if len(args) != 1 or not args[0].strip():
            return CommandResult(
                'error',
                response=f"{SYMBOLS['warning']} 命令格式错误！正确格式：{command} <{what}>"
            )
        return CommandResult(command, target=Path(args[0]))

    @staticmethod
    def _handle_fit(args: Sequence[str]) -> CommandResult:
        """处理拟合命令"""
        return CommandHandler._single_path('fit', args, '运行文件')

    @staticmethod
    def _handle_simulate(args: Sequence[str]) -> CommandResult:
        """处理合成数据命令"""
        return CommandHandler._single_path('simulate', args, '合成配置')

    @staticmethod
    def _handle_predict(args: Sequence[str]) -> CommandResult:
        """处理预测命令"""
        return CommandHandler._single_path('predict', args, '运行文件')

    @staticmethod
    def _handle_summarize(args: Sequence[str]) -> CommandResult:
        """处理汇总命令"""
        return CommandHandler._single_path('summarize', args, '输出目录')

    @staticmethod
    def _handle_help(args: Sequence[str]) -> CommandResult:
        return CommandResult('help')


def parse_command(argv: Sequence[str]) -> CommandResult:
    """解析命令行参数（便捷接口）"""
    return CommandHandler.parse(argv)
