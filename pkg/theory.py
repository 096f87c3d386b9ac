#!/usr/bin/env python3
"""
理论计算模块
功能：
1. 层级定理的期望时间上界与 (G3) 最小种群规模
2. LeadingOnes / BinVal 上界（z_j = γ0/((1+ε)n)）
3. DKW 尾部上界及其蒙特卡洛估计
4. ξ、选择压力约束 γ0 <= η^(⌈ξ⌉+1)/((1+δ)e)
5. 优超（majorization）判定、平滑映射、Poisson 二项分布
6. 算术-几何平均检验

所有函数都是纯函数。

使用方法:
    python3 theory.py
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from errors import TheoryError

logger = logging.getLogger(__name__)

# 数值容差
SUM_TOLERANCE = 1e-9         # 优超判定：总和相等
PREFIX_SLACK = 1e-12         # 优超判定：前缀和比较
CEIL_GUARD = 1e-12           # ⌈ξ⌉ 之前减去的保护量
AM_GM_RTOL = 1e-12           # AM >= GM 比较的相对容差
GAMMA0_SCAN_LOWER = 1e-9     # max_feasible_gamma0 的扫描下限
GAMMA0_SCAN_POINTS = 4000
BISECTION_STEPS = 200


@dataclass(frozen=True)
class TheoryParams:
    """
    层级定理参数

    delta ∈ (0,1], epsilon > 0, gamma0 ∈ (0,1), eta ∈ (0,1], m >= 2,
    upgrade_probs = (z_1, ..., z_{m-1})，每个 z_j ∈ (0,1]
    """
    delta: float
    epsilon: float
    gamma0: float
    eta: float = 1.0
    m: int = 2
    upgrade_probs: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, 'upgrade_probs', tuple(float(z) for z in self.upgrade_probs))
        if not 0 < self.delta <= 1:
            raise TheoryError('0 < delta <= 1', f"δ={self.delta} 越界")
        if not self.epsilon > 0:
            raise TheoryError('epsilon > 0', f"ε={self.epsilon} 越界")
        if not 0 < self.gamma0 < 1:
            raise TheoryError('0 < gamma0 < 1', f"γ0={self.gamma0} 越界")
        if not 0 < self.eta <= 1:
            raise TheoryError('0 < eta <= 1', f"η={self.eta} 越界")
        if self.m < 2:
            raise TheoryError('m >= 2', f"层级数 m={self.m} 至少为2")
        if len(self.upgrade_probs) != self.m - 1:
            raise TheoryError('len(z) = m - 1', f"需要 {self.m - 1} 个 z_j，实际 {len(self.upgrade_probs)}")
        if any(not 0 < z <= 1 for z in self.upgrade_probs):
            raise TheoryError('z_j in (0,1]', f"z_j 必须在 (0,1] 内: min={min(self.upgrade_probs)}")

    @property
    def z_star(self) -> float:
        return min(self.upgrade_probs)

    @classmethod
    def for_los(cls, n, gamma0, epsilon, delta, eta=1.0) -> 'TheoryParams':
        """LeadingOnes/BinVal 的典型划分：m = n+1，z_j = γ0/((1+ε)n)"""
        z = los_upgrade_probability(n, gamma0, epsilon)
        return cls(delta=delta, epsilon=epsilon, gamma0=gamma0, eta=eta, m=n + 1, upgrade_probs=(z,) * n)

    def to_dict(self):
        return {
            'delta': self.delta,
            'epsilon': self.epsilon,
            'gamma0': self.gamma0,
            'eta': self.eta,
            'm': self.m,
            'z_star': self.z_star,
        }


# ============ 层级定理 ============
def level_based_bound(params: TheoryParams, lam) -> float:
    """
    期望优化时间上界

    E[T] <= (8/δ²)·Σ_{j=1}^{m-1} [λ·ln(6δλ/(4+z_j·δλ)) + 1/z_j]
    """
    if lam < 1:
        raise TheoryError('lambda >= 1', f"λ={lam} 无效")
    z = np.asarray(params.upgrade_probs, dtype=float)
    if np.any(z <= 0):
        raise TheoryError('z_j in (0,1]', "z_j 必须为正")
    delta = params.delta
    terms = lam * np.log(6 * delta * lam / (4 + z * delta * lam)) + 1 / z
    return 8 / delta ** 2 * math.fsum(terms)


def g3_min_population(params: TheoryParams) -> float:
    """(G3) 要求的最小种群: λ >= (4/(γ0δ²))·ln(128m/(z*·δ²))"""
    z_star = params.z_star
    if z_star <= 0:
        raise TheoryError('z_star > 0', "z* 必须为正")
    delta = params.delta
    return 4 / (params.gamma0 * delta ** 2) * math.log(128 * params.m / (z_star * delta ** 2))


def los_upgrade_probability(n, gamma0, epsilon) -> float:
    """z* = γ0/((1+ε)n)"""
    if n < 1:
        raise TheoryError('n >= 1', f"n={n} 无效")
    return gamma0 / ((1 + epsilon) * n)


def los_bound(n, lam, params: TheoryParams) -> float:
    """LeadingOnes / BinVal 上界：m = n+1，全部 z_j = γ0/((1+ε)n)"""
    z = los_upgrade_probability(n, params.gamma0, params.epsilon)
    return level_based_bound(replace(params, m=n + 1, upgrade_probs=(z,) * n), lam)


def los_bound_simplified(n, lam, params: TheoryParams) -> float:
    """
    化简后的上界
    (8/δ²)·n·λ·ln(3δλ/2) + 8(1+ε)n²/(δ²γ0)
    """
    delta = params.delta
    return (8 / delta ** 2 * n * lam * math.log(3 * delta * lam / 2)
            + 8 * (1 + params.epsilon) * n ** 2 / (delta ** 2 * params.gamma0))


# ============ DKW ============
def dkw_bound(lam, epsilon) -> float:
    """Pr(sup|F̂_λ - F| > ε) <= 2·exp(-2λε²)"""
    if lam < 1:
        raise TheoryError('lambda >= 1', f"λ={lam} 无效")
    if epsilon < 0:
        raise TheoryError('epsilon >= 0', f"ε={epsilon} 无效")
    return 2 * math.exp(-2 * lam * epsilon ** 2)


def dkw_exceedance_frequency(lam, epsilon, p, replications, rng) -> float:
    """
    伯努利(p) 经验分布函数偏差超过 ε 的频率

    伯努利分布的 sup|F̂ - F| 恰为 |p̂ - p|。
    """
    p_hat = rng.binomial(lam, p, size=replications) / lam
    return float(np.mean(np.abs(p_hat - p) > epsilon))


# ============ 选择压力约束 ============
def xi(p0) -> float:
    """ξ = ln(p0)/(p0-1)，p0 ∈ (0,1)"""
    if not 0 < p0 < 1:
        raise TheoryError('0 < p0 < 1', f"p0={p0} 越界")
    return math.log(p0) / (p0 - 1)


def g_asymptote(j, p0):
    """g(j) = j·(p0^(1/j) - 1)/(1 - p0)，j→∞ 时趋于 -ξ"""
    if not 0 < p0 < 1:
        raise TheoryError('0 < p0 < 1', f"p0={p0} 越界")
    j = np.asarray(j, dtype=float)
    return j * np.expm1(np.log(p0) / j) / (1 - p0)


def m_lower_bound(j, p0, n) -> int:
    """
    诊断用：⌊j·(p0^(1/j) - p0)/(1 - 1/n - p0)⌋，应满足 >= j - ⌈ξ⌉
    """
    return math.floor(j * (p0 ** (1 / j) - p0) / (1 - 1 / n - p0))


def guarded_ceil(x) -> int:
    return math.ceil(x - CEIL_GUARD)


@dataclass(frozen=True)
class ConstraintReport:
    """选择压力约束检查结果"""
    gamma0: float
    eta: float
    delta: float
    epsilon: float
    p0: float
    xi: float
    ceil_xi: int
    rhs: float
    satisfied: bool

    def to_dict(self):
        return {
            'inputs': {'gamma0': self.gamma0, 'eta': self.eta, 'delta': self.delta, 'epsilon': self.epsilon},
            'p0': self.p0,
            'xi': self.xi,
            'ceil_xi': self.ceil_xi,
            'rhs': self.rhs,
            'satisfied': self.satisfied,
        }


def _check_pressure_inputs(gamma0, eta, delta, epsilon):
    if not 0 < gamma0 < 1:
        raise TheoryError('0 < gamma0 < 1', f"γ0={gamma0} 越界")
    if not 0 < eta <= 1:
        raise TheoryError('0 < eta <= 1', f"η={eta} 越界")
    if not 0 < delta <= 1:
        raise TheoryError('0 < delta <= 1', f"δ={delta} 越界")
    if not epsilon > 0:
        raise TheoryError('epsilon > 0', f"ε={epsilon} 越界")


def check_selective_pressure(gamma0, eta, delta, epsilon) -> ConstraintReport:
    """
    检查 γ0 <= η^(⌈ξ⌉+1)/((1+δ)e)，其中 p0 = γ0/(1+ε)，ξ = ln(p0)/(p0-1)

    按给定 γ0 直接求值，不求解不动点。
    """
    _check_pressure_inputs(gamma0, eta, delta, epsilon)
    p0 = gamma0 / (1 + epsilon)
    value = xi(p0)
    ceil_value = guarded_ceil(value)
    rhs = eta ** (ceil_value + 1) / ((1 + delta) * math.e)
    return ConstraintReport(gamma0, eta, delta, epsilon, p0, value, ceil_value, rhs, gamma0 <= rhs)


def max_feasible_gamma0(eta, delta, epsilon) -> Optional[float]:
    """
    满足选择压力约束的最大 γ0

    可行集不一定是区间：先在对数网格上找最大的可行点，再在它与下一个网格点之间二分。

    Returns:
        最大可行 γ0；若 [1e-9, 1) 内没有可行点则返回 None
    """
    _check_pressure_inputs(0.5, eta, delta, epsilon)

    def feasible(g):
        return check_selective_pressure(g, eta, delta, epsilon).satisfied

    grid = np.logspace(math.log10(GAMMA0_SCAN_LOWER), 0, GAMMA0_SCAN_POINTS)
    grid[-1] = 1 - 1e-12
    flags = [feasible(g) for g in grid]
    if not any(flags):
        logger.info(f"η={eta}, δ={delta}, ε={epsilon}: 没有可行的 γ0")
        return None

    k = max(i for i, ok in enumerate(flags) if ok)
    if k == len(grid) - 1:
        return float(grid[-1])

    lo, hi = float(grid[k]), float(grid[k + 1])
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


# ============ 优超 ============
def majorises(p, q) -> bool:
    """
    p 是否优超 q（p ≻ q）

    降序排列后 p 的每个前缀和 >= q 的前缀和，且总和相等。
    """
    p = np.sort(np.asarray(p, dtype=float))[::-1]
    q = np.sort(np.asarray(q, dtype=float))[::-1]
    if p.shape != q.shape:
        raise TheoryError('len(p) = len(q)', f"向量长度不一致: {p.size} vs {q.size}")
    if abs(math.fsum(p) - math.fsum(q)) > SUM_TOLERANCE:
        return False
    return bool(np.all(np.cumsum(p) >= np.cumsum(q) - PREFIX_SLACK))


def apply_smoothing(p, eta) -> np.ndarray:
    """z_i = (1-η)·p_i + η"""
    if not 0 < eta <= 1:
        raise TheoryError('0 < eta <= 1', f"η={eta} 越界")
    return (1 - eta) * np.asarray(p, dtype=float) + eta


def majorizing_vector(p_prefix, p0, n) -> Tuple[np.ndarray, int]:
    """
    构造与 p_prefix 同和、优超它的比较向量

    前 m 个取 1-1/n，之后一个取中间值，其余取 p0，
    m = ⌊(Σp_i - j·p0)/(1 - 1/n - p0)⌋。要求每个 p_i ∈ [p0, 1-1/n]。

    Returns:
        (z, m)
    """
    p = np.asarray(p_prefix, dtype=float)
    j = p.size
    top = 1 - 1 / n
    if not 0 < p0 < top:
        raise TheoryError('0 < p0 < 1 - 1/n', f"p0={p0} 越界")
    if np.any(p < p0 - PREFIX_SLACK) or np.any(p > top + PREFIX_SLACK):
        raise TheoryError('p_i in [p0, 1-1/n]', "前缀边缘概率必须在 [p0, 1-1/n] 内")

    total = math.fsum(p)
    m = min(j, max(0, math.floor((total - j * p0) / (top - p0))))
    z = np.full(j, p0)
    z[:m] = top
    if m < j:
        z[m] = total - m * top - (j - m - 1) * p0
    return z, m


# ============ Poisson 二项分布 ============
def poisson_binomial_pmf(p) -> np.ndarray:
    """
    S = Σ X_i 的精确分布（动态规划，O(n²)）

    Returns:
        长度 n+1 的概率向量
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise TheoryError('p_i in [0,1]', "成功概率必须在 [0,1] 内")

    pmf = np.ones(1)
    for pi in p:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1 - pi)
        nxt[1:] += pmf * pi
        pmf = nxt

    # 补偿求和后归一化
    return pmf / math.fsum(pmf)


# ============ 算术-几何平均 ============
def am_gm_check(x) -> Tuple[float, float]:
    """
    Returns:
        (算术平均, 几何平均)，几何平均直接取自 scipy.stats.gmean；
        全部相等时二者相等。调用方按 AM_GM_RTOL 比较大小。
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise TheoryError('len(x) >= 1', "向量不能为空")
    if np.any(x < 0):
        raise TheoryError('x_i >= 0', "算术-几何平均要求非负")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    am = math.fsum(x) / x.size
    gm = 0.0 if np.any(x == 0) else float(stats.gmean(x))
    return am, gm


# ============ 使用示例 ============
if __name__ == '__main__':
    params = TheoryParams(delta=1.0, epsilon=0.1, gamma0=0.5, m=2, upgrade_probs=(0.5,))
    print(f"层级定理上界 (λ=8): {level_based_bound(params, 8):.2f}")
    print(f"(G3) 最小种群: {g3_min_population(params):.2f}")

    report = check_selective_pressure(0.25, 1.0, 0.1, 0.1)
    print(f"选择压力: ξ={report.xi:.4f}, ⌈ξ⌉={report.ceil_xi}, rhs={report.rhs:.4f}, "
          f"{'✅ 满足' if report.satisfied else '❌ 不满足'}")

    print(f"DKW (λ=100, ε=0.1): {dkw_bound(100, 0.1):.5f}")
    print(f"PMF (0.5, 0.5): {poisson_binomial_pmf([0.5, 0.5])}")
