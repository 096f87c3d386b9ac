#!/usr/bin/env python3
"""
错误定义
所有模块抛出的异常都继承自 PbilError，
invariant 字段给出被违反的约束（ASCII 短标签），CLI 据此输出单行诊断。
"""


class PbilError(Exception):
    """PBIL 工具链错误"""
    def __init__(self, invariant, msg):
        self.invariant = invariant
        self.msg = msg
        super().__init__(f"[{invariant}] {msg}")


class ConfigError(PbilError):
    """参数/配置错误"""


class FitnessError(PbilError):
    """比特串/适应度错误"""


class TheoryError(PbilError):
    """理论计算参数越界"""


class ExperimentError(PbilError):
    """实验数据/拟合/IO错误"""


class PropertyViolation(PbilError):
    """性质检验发现反例"""
    def __init__(self, invariant, msg, counterexample=None):
        self.counterexample = counterexample
        super().__init__(invariant, msg)
