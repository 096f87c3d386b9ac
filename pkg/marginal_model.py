#!/usr/bin/env python3
"""
概率模型模块（单变量边缘分布）
功能：
1. 边缘概率向量 p = (p_1, ..., p_n)，边界 [1/n, 1-1/n]
2. 按乘积分布采样个体（每一位消耗一个均匀随机数）
3. 平滑更新：先凸组合，再截断到边界
4. 可复现的 64 位随机流

使用方法:
    python3 marginal_model.py
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, FitnessError

logger = logging.getLogger(__name__)

# 配置
INITIAL_MARGINAL = 0.5     # 初始边缘概率
MIN_DIMENSION = 2          # n=1 时边界 1/n 与 1-1/n 交叉
SEED_MAX = 2 ** 64 - 1


# ============ 随机流 ============
def make_rng(seed):
    """由 64 位种子创建随机流（PCG64，跨平台可复现）"""
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= SEED_MAX:
        raise ConfigError('seed is a 64-bit integer', f"种子必须是 0..2^64-1 的整数: {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def borders(n) -> Tuple[float, float]:
    """边界 (1/n, 1-1/n)"""
    return 1.0 / n, 1.0 - 1.0 / n


def derive_mu(gamma0, lam) -> int:
    """由选择压力 γ0 推出父代规模 μ = max(1, round(γ0·λ))"""
    return max(1, int(math.floor(gamma0 * lam + 0.5)))


def as_integer(value, name) -> int:
    """JSON 数值转整数，带小数部分的值直接拒绝"""
    if isinstance(value, float) and not value.is_integer():
        raise ConfigError(f'{name} is an integer', f"{name}={value} 不是整数")
    return int(value)


# ============ 比特串 ============
@dataclass(frozen=True)
class Bitstring:
    """
    个体（比特串）

    内部按大端打包成字节，接口只暴露按位置访问的 0/1。
    """
    packed: bytes
    n: int

    @classmethod
    def from_bits(cls, bits) -> 'Bitstring':
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise FitnessError('bitstring is 1-d', f"比特串必须是一维序列, 实际形状 {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise FitnessError('bits in {0,1}', f"比特串只能包含0/1: {arr.tolist()}")
        arr = arr.astype(np.uint8)
        return cls(np.packbits(arr).tobytes(), int(arr.size))

    @classmethod
    def from_string(cls, text: str) -> 'Bitstring':
        """'1010' -> Bitstring"""
        if set(text) - {'0', '1'}:
            raise FitnessError('bits in {0,1}', f"比特串只能包含0/1: {text!r}")
        return cls.from_bits([int(c) for c in text])

    def to_array(self) -> np.ndarray:
        """返回长度 n 的 uint8 数组"""
        return np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8), count=self.n)

    @property
    def padding(self) -> int:
        return 8 * len(self.packed) - self.n

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return int(self.to_array()[i])

    def __iter__(self):
        return iter(self.to_array().tolist())

    def __str__(self):
        return ''.join(str(b) for b in self.to_array())


# ============ 概率模型 ============
@dataclass(frozen=True, eq=False)
class MarginalVector:
    """边缘概率向量（只读）"""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def within_borders(self) -> bool:
        low, high = borders(self.n)
        return bool(np.all(self.probs >= low) and np.all(self.probs <= high))

    def to_list(self):
        return self.probs.tolist()

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, MarginalVector):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"MarginalVector(n={self.n}, probs={np.array2string(self.probs, precision=4)})"


def init_model(n, initial: Optional[Sequence[float]] = None) -> MarginalVector:
    """
    初始化模型，所有边缘概率为 1/2

    Args:
        n: 问题维度（n >= 2）
        initial: 可选的初始向量（长度 n，取值 [0,1]）
    """
    if not isinstance(n, (int, np.integer)) or n < MIN_DIMENSION:
        raise ConfigError('n >= 2', f"维度 n={n} 无效，边界 1/n 与 1-1/n 会交叉")
    if initial is None:
        return MarginalVector(np.full(n, INITIAL_MARGINAL))

    probs = np.asarray(initial, dtype=float)
    if probs.shape != (n,):
        raise ConfigError('len(initial) = n', f"初始向量长度 {probs.size} 与 n={n} 不一致")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ConfigError('initial in [0,1]', "初始向量必须在 [0,1] 内")
    return MarginalVector(probs)


def sample_individual(model: MarginalVector, rng) -> Bitstring:
    """按乘积分布采样一个个体，恰好消耗 n 个均匀随机数"""
    return Bitstring.from_bits(rng.random(model.n) < model.probs)


def sample_population(model: MarginalVector, lam, rng) -> np.ndarray:
    """
    采样 λ 个个体，返回 (λ, n) 的 uint8 矩阵

    随机数按行消耗，与连续调用 λ 次 sample_individual 完全一致。
    """
    return (rng.random((lam, model.n)) < model.probs).astype(np.uint8)


def _as_matrix(selected, n) -> np.ndarray:
    if isinstance(selected, np.ndarray):
        matrix = selected
    else:
        rows = [x.to_array() if isinstance(x, Bitstring) else np.asarray(x) for x in selected]
        if not rows:
            raise ConfigError('mu >= 1', "被选个体集合为空")
        if any(len(r) != n for r in rows):
            raise FitnessError('len(x) = n', f"被选个体长度必须为 n={n}")
        matrix = np.vstack(rows)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ConfigError('mu >= 1', "被选个体集合为空")
    if matrix.shape[1] != n:
        raise FitnessError('len(x) = n', f"被选个体长度 {matrix.shape[1]} 与 n={n} 不一致")
    return matrix


def update_model(model: MarginalVector, selected, eta) -> MarginalVector:
    """
    平滑更新

    p'_i = clamp((1-η)·p_i + (η/μ)·Σ_j x_i^(j), 1/n, 1-1/n)

    Args:
        model: 当前模型
        selected: μ 个被选个体（Bitstring 序列或 (μ, n) 矩阵）
        eta: 平滑参数 (0, 1]
    """
    if not 0 < eta <= 1:
        raise ConfigError('0 < eta <= 1', f"平滑参数 η={eta} 越界")
    matrix = _as_matrix(selected, model.n)
    frequencies = matrix.mean(axis=0)
    low, high = borders(model.n)
    return MarginalVector(np.clip((1 - eta) * model.probs + eta * frequencies, low, high))


# ============ 运行配置 ============
@dataclass(frozen=True)
class PbilConfig:
    """
    单次运行的参数

    max_generations 为 None 时使用 pbil.default_budget(n, λ)。
    snapshot_every=k>0 时每 k 代保存一次模型快照。
    """
    n: int
    lam: int
    mu: int
    eta: float = 1.0
    seed: int = 0
    max_generations: Optional[int] = None
    snapshot_every: int = 0
    record_trace: bool = False
    initial_probs: Optional[Tuple[float, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < MIN_DIMENSION:
            raise ConfigError('n >= 2', f"维度 n={self.n} 无效")
        if not isinstance(self.lam, (int, np.integer)) or self.lam < 1:
            raise ConfigError('lambda >= 1', f"子代规模 λ={self.lam} 无效")
        if not isinstance(self.mu, (int, np.integer)) or not 1 <= self.mu <= self.lam:
            raise ConfigError('1 <= mu <= lambda', f"父代规模 μ={self.mu} 必须在 [1, λ={self.lam}] 内")
        if not 0 < self.eta <= 1:
            raise ConfigError('0 < eta <= 1', f"平滑参数 η={self.eta} 越界")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= SEED_MAX:
            raise ConfigError('seed is a 64-bit integer', f"种子无效: {self.seed!r}")
        if self.max_generations is not None and self.max_generations < 1:
            raise ConfigError('max_generations >= 1', f"预算 {self.max_generations} 无效")
        if self.snapshot_every < 0:
            raise ConfigError('snapshot_every >= 0', f"快照间隔 {self.snapshot_every} 无效")
        if self.initial_probs is not None:
            object.__setattr__(self, 'initial_probs', tuple(float(p) for p in self.initial_probs))
            if len(self.initial_probs) != self.n:
                raise ConfigError('len(initial) = n', "初始向量长度与 n 不一致")

    @property
    def gamma0(self) -> float:
        """选择压力 γ0 = μ/λ"""
        return self.mu / self.lam

    def to_dict(self):
        data = {
            'n': self.n,
            'lambda': self.lam,
            'mu': self.mu,
            'gamma0': self.gamma0,
            'eta': self.eta,
            'seed': self.seed,
            'max_generations': self.max_generations,
            'snapshot_every': self.snapshot_every,
            'record_trace': self.record_trace,
        }
        if self.initial_probs is not None:
            data['initial_probs'] = list(self.initial_probs)
        return data

    @classmethod
    def from_dict(cls, data) -> 'PbilConfig':
        """
        从 JSON 配置构造

        键 'lambda' 对应属性 lam；缺少 'mu' 时由 'gamma0' 推出。
        """
        data = {k: v for k, v in data.items() if v is not None}
        missing = [key for key in ('n', 'lambda') if key not in data]
        if missing:
            raise ConfigError('required: ' + ', '.join(missing), f"缺少参数: {', '.join(missing)}")
        if 'mu' not in data and 'gamma0' not in data:
            raise ConfigError('required: mu or gamma0', "必须提供 mu 或 gamma0")
        try:
            lam = as_integer(data['lambda'], 'lambda')
            mu = data.get('mu')
            if mu is None:
                gamma0 = float(data['gamma0'])
                if not 0 < gamma0 <= 1:
                    raise ConfigError('0 < gamma0 <= 1', f"选择压力 γ0={gamma0} 越界")
                mu = derive_mu(gamma0, lam)
            max_generations = data.get('max_generations')
            return cls(
                n=as_integer(data['n'], 'n'),
                lam=lam,
                mu=as_integer(mu, 'mu'),
                eta=float(data.get('eta', 1.0)),
                seed=as_integer(data.get('seed', 0), 'seed'),
                max_generations=as_integer(max_generations, 'max_generations') if max_generations is not None else None,
                snapshot_every=as_integer(data.get('snapshot_every', 0), 'snapshot_every'),
                record_trace=bool(data.get('record_trace', False)),
                initial_probs=data.get('initial_probs'),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError('numeric fields', f"参数类型错误: {e}") from e


# ============ 使用示例 ============
if __name__ == '__main__':
    rng = make_rng(7)
    model = init_model(10)
    print(f"初始模型: {model}")

    population = sample_population(model, 4, rng)
    print(f"采样种群:\n{population}")

    model = update_model(model, population[:2], eta=0.1)
    print(f"更新后: {model}")
