#!/usr/bin/env python3
"""
适应度模块
功能：
1. LeadingOnes（前导1个数）
2. BinVal（二进制值，任意精度）
3. 不会溢出的 BinVal 比较（按最高位起字典序）
4. 层级划分：两个问题的层级都等于前导1个数

使用方法:
    python3 fitness.py
"""

from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from typing import Optional, Tuple

import numpy as np

from errors import ConfigError, FitnessError
from marginal_model import Bitstring


class Problem(Enum):
    LEADING_ONES = "leadingones"
    BINVAL = "binval"

    @classmethod
    def parse(cls, name) -> 'Problem':
        """按名称解析问题（大小写不敏感）"""
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ConfigError('problem in {leadingones, binval}', f"未知问题: {name!r}") from None


@total_ordering
@dataclass(frozen=True)
class FitnessKey:
    """
    可比较的适应度

    LeadingOnes 按 los_value 比较，BinVal 按 lex_bits 字典序比较，
    display_value 只用于展示。
    """
    kind: Problem
    los_value: int = 0
    lex_bits: Tuple[int, ...] = ()
    display_value: Optional[int] = None

    def _check(self, other):
        if not isinstance(other, FitnessKey):
            return NotImplemented
        if other.kind is not self.kind:
            raise FitnessError('same problem', f"不能比较 {self.kind.value} 与 {other.kind.value}")
        if self.kind is Problem.BINVAL and len(self.lex_bits) != len(other.lex_bits):
            raise FitnessError('len(x) = len(y)', "比特串长度不一致")
        return None

    def __eq__(self, other):
        result = self._check(other)
        if result is NotImplemented:
            return result
        if self.kind is Problem.LEADING_ONES:
            return self.los_value == other.los_value
        return self.lex_bits == other.lex_bits

    def __lt__(self, other):
        result = self._check(other)
        if result is NotImplemented:
            return result
        if self.kind is Problem.LEADING_ONES:
            return self.los_value < other.los_value
        return self.lex_bits < other.lex_bits

    def __hash__(self):
        return hash((self.kind, self.los_value if self.kind is Problem.LEADING_ONES else self.lex_bits))


def _as_bitstring(x) -> Bitstring:
    if isinstance(x, Bitstring):
        return x
    if isinstance(x, str):
        return Bitstring.from_string(x)
    return Bitstring.from_bits(x)


def _as_array(x) -> np.ndarray:
    return _as_bitstring(x).to_array()


# ============ 单个体 ============
def leading_ones(x) -> int:
    """从第一位开始连续1的最大长度"""
    bits = _as_array(x)
    zeros = np.flatnonzero(bits == 0)
    return int(zeros[0]) if zeros.size else int(bits.size)


def binval_exact(x) -> int:
    """BinVal(x) = Σ 2^(n-i)·x_i，Python 整数无溢出"""
    bitstring = _as_bitstring(x)
    return int.from_bytes(bitstring.packed, 'big') >> bitstring.padding


def binval_compare(x, y) -> int:
    """
    比较 BinVal(x) 与 BinVal(y)

    Returns:
        1 (大于) / 0 (相等) / -1 (小于)
    """
    a, b = _as_bitstring(x), _as_bitstring(y)
    if a.n != b.n:
        raise FitnessError('len(x) = len(y)', f"比特串长度不一致: {a.n} vs {b.n}")
    # 打包后的填充位都是0，字节串字典序即数值序
    return (a.packed > b.packed) - (a.packed < b.packed)


def level_of(x, problem) -> int:
    """
    个体所在层级 A_j

    LeadingOnes: j = LeadingOnes(x)
    BinVal: Σ_{i<=j} 2^(n-i) <= BinVal(x) < Σ_{i<=j+1} 2^(n-i) 的唯一 j，
            即第一个0的位置
    """
    Problem.parse(problem)
    return leading_ones(x)


def fitness_key(x, problem) -> FitnessKey:
    """构造可排序的适应度"""
    problem = Problem.parse(problem)
    bits = _as_array(x)
    if problem is Problem.LEADING_ONES:
        value = leading_ones(bits)
        return FitnessKey(problem, los_value=value, display_value=value)
    return FitnessKey(problem, lex_bits=tuple(bits.tolist()), display_value=binval_exact(bits))


# ============ 种群（向量化） ============
def population_levels(population: np.ndarray) -> np.ndarray:
    """(λ, n) 矩阵每一行的层级（前导1个数）"""
    population = np.asarray(population)
    n = population.shape[1]
    first_zero = np.argmin(population, axis=1)
    return np.where(population.all(axis=1), n, first_zero)


def rank_population(population: np.ndarray, problem) -> np.ndarray:
    """
    按适应度降序排序，返回下标；同分按采样顺序（稳定排序）
    """
    problem = Problem.parse(problem)
    population = np.asarray(population, dtype=np.uint8)
    order = np.arange(population.shape[0])

    if problem is Problem.LEADING_ONES:
        return np.argsort(-population_levels(population), kind='stable')

    # BinVal：打包后逐字节比较，最高位字节为主键
    packed = np.packbits(population, axis=1)
    keys = [order] + [255 - packed[:, k] for k in reversed(range(packed.shape[1]))]
    return np.lexsort(keys)


# ============ 使用示例 ============
if __name__ == '__main__':
    for text in ['1111', '0101', '1101', '1010']:
        print(f"{text}: LeadingOnes={leading_ones(text)}, BinVal={binval_exact(text)}, "
              f"level={level_of(text, Problem.BINVAL)}")

    print(f"1000 vs 0111: {binval_compare('1000', '0111')}")
