# -*- coding: utf-8 -*-
"""
异常定义模块

所有异常都携带命令行退出码：
- 输入类错误（配置、数据、维度）退出码 1
- 数值类错误（链失败、包络失败）退出码 2
"""

from typing import Any, Dict, Optional


class ProfileRegressionError(Exception):
    """本项目所有异常的基类"""

    exit_code: int = 1
    kind: str = 'error'

    def to_record(self) -> Dict[str, Any]:
        """转换为机器可读的错误记录"""
        return {
            'status': 'failed',
            'kind': self.kind,
            'message': str(self),
            'exit_code': self.exit_code,
        }


class ProfileRegressionWarning(UserWarning):
    """库级警告（孤立节点、退化相异度矩阵等）"""


class InputError(ProfileRegressionError, ValueError):
    """输入错误：维度不符、编码越界、文件缺失等"""

    exit_code = 1
    kind = 'input'


class DataError(InputError):
    """数据集校验失败"""

    kind = 'data'


class ConfigError(InputError):
    """配置文件错误，带行号"""

    kind = 'config'

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"第 {line_number} 行: {message}"
        super().__init__(message)

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record['line'] = self.line_number
        return record


class NumericalError(ProfileRegressionError, ArithmeticError):
    """数值错误：全 -inf 的分配权重、无法括定众数等"""

    exit_code = 2
    kind = 'numerical'

    def __init__(self, message: str, area: Optional[int] = None):
        self.area = area
        super().__init__(message)


class ChainError(NumericalError):
    """链中止，记录迭代序号和失败的组件"""

    kind = 'chain'

    def __init__(self, message: str, iteration: int, component: str,
                 area: Optional[int] = None):
        self.iteration = iteration
        self.component = component
        super().__init__(
            f"第 {iteration} 次迭代在 {component} 失败: {message}", area=area
        )

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record.update({
            'iteration': self.iteration,
            'component': self.component,
            'area': self.area,
        })
        return record
