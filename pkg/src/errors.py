"""
异常定义

所有库代码抛出的异常都继承 KgcError，CLI 根据 exit_code 转换为进程退出码：
0 成功，1 用法/配置错误，2 数据完整性错误，3 数值错误。
"""
from typing import Optional


class KgcError(Exception):
    """工具包异常基类"""
    exit_code = 1


class ConfigError(KgcError):
    """配置或清单文件错误（包括文件缺失）"""
    exit_code = 1


class UsageError(KgcError):
    """命令行用法错误"""
    exit_code = 1


class IngestIntegrityError(KgcError):
    """数据完整性错误：越界引用、划分重叠等"""
    exit_code = 2


class ParseError(IngestIntegrityError):
    """文件解析错误，携带文件路径和行号"""

    def __init__(self, path: str, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class SchemaError(IngestIntegrityError):
    """关系模式不兼容"""


class PreconditionError(IngestIntegrityError):
    """操作前置条件不满足"""


class CheckpointError(KgcError):
    """检查点缺失、损坏或与词表不匹配"""
    exit_code = 2


class InvariantViolation(KgcError):
    """内部不变量被破坏，运行中止"""
    exit_code = 2


class NumericError(KgcError):
    """数值溢出或非有限梯度"""
    exit_code = 3

    def __init__(self, message: str, details: Optional[dict] = None):
        self.details = details or {}
        if self.details:
            extra = ", ".join(f"{k}={v}" for k, v in self.details.items())
            message = f"{message} ({extra})"
        super().__init__(message)
