#!/usr/bin/env python3
"""
性质检验脚本
逐项运行随机化检验，帮助确认理论模块的各个结论在数值上成立：
1. Boland 上界（被优超的向量全成功概率更大）+ PMF 与穷举一致
2. 平滑映射保持优超关系
3. DKW 上界覆盖经验偏差频率
4. 算术-几何平均不等式
5. g(j) 的水平渐近线 -ξ，以及 m >= j - ⌈ξ⌉ 诊断

使用方法:
    python3 verify.py            # 默认迭代次数
    python3 verify.py 100        # 指定迭代次数
"""

import itertools
import logging
import math
import sys
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import PropertyViolation
from marginal_model import make_rng
from theory import (
    AM_GM_RTOL,
    am_gm_check,
    apply_smoothing,
    dkw_bound,
    dkw_exceedance_frequency,
    g_asymptote,
    guarded_ceil,
    m_lower_bound,
    majorises,
    majorizing_vector,
    poisson_binomial_pmf,
    xi,
)

logger = logging.getLogger(__name__)

# 配置
DEFAULT_ITERATIONS = 10000
DEFAULT_SEED = 20180715
GRID_STEPS = 20                       # 0.05 网格
GRID_DIMENSIONS = (2, 3, 4, 5, 6)
GRID_BLOCK = 256                      # 网格比较的分块行数
RANDOM_DIMENSIONS = (20, 50)
ENUMERATION_MAX_N = 12
PMF_TOLERANCE = 1e-10
PRODUCT_RTOL = 1e-9
DKW_CASES = [(100, 0.05), (100, 0.1), (1000, 0.05), (1000, 0.1)]
DKW_P = 0.5
ASYMPTOTE_P0 = (0.05, 0.1, 0.25, 0.5, 0.9)
ASYMPTOTE_J_MAX = 10 ** 6


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    checked: int
    detail: str = ''
    counterexample: Optional[list] = None


# ============ 随机样本 ============
def random_majorized_pair(rng, n, transforms=None):
    """
    生成 (p_small, p_big)，p_small ≺ p_big，总和相等

    对 p_big 连续做 T 变换（两个分量按凸组合互相靠拢），结果被原向量优超。
    """
    p_big = rng.random(n)
    p_small = p_big.copy()
    for _ in range(transforms or n):
        i = int(rng.integers(n))
        j = (i + int(rng.integers(1, n))) % n
        t = rng.random()
        a, b = p_small[i], p_small[j]
        p_small[i] = t * a + (1 - t) * b
        p_small[j] = t * b + (1 - t) * a
    return p_small, p_big


def enumerate_pmf(p) -> np.ndarray:
    """穷举 2^n 种结果得到 PMF（n <= 12）"""
    p = np.asarray(p, dtype=float)
    n = p.size
    outcomes = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    weights = np.prod(np.where(outcomes == 1, p, 1 - p), axis=1)
    return np.bincount(outcomes.sum(axis=1), weights=weights, minlength=n + 1)


def _product_ge(a, b) -> bool:
    return a >= b * (1 - PRODUCT_RTOL) - 1e-300


# ============ 各项检验 ============
def _check_grid_group(units) -> int:
    """同一总和的网格向量两两比较（每次 GRID_BLOCK 行）"""
    prefix = np.cumsum(units, axis=1)
    products = np.prod(units / GRID_STEPS, axis=1)
    pairs = 0
    for start in range(0, len(units), GRID_BLOCK):
        block = slice(start, start + GRID_BLOCK)
        # big[a] 优超 small[b]：a 的每个前缀和 >= b 的前缀和
        major = np.all(prefix[block, None, :] >= prefix[None, :, :], axis=2)
        bad = major & (products[None, :] < products[block, None] * (1 - PRODUCT_RTOL))
        if bad.any():
            a, b = np.argwhere(bad)[0]
            raise PropertyViolation('boland bound', "网格上发现反例",
                                    [list(units[b] / GRID_STEPS), list(units[start + a] / GRID_STEPS)])
        pairs += int(major.sum())
    return pairs


def check_boland(iterations, rng, pmf=poisson_binomial_pmf) -> int:
    """p1 ≺ p2 ⇒ Pr(S(p1)=n) >= Pr(S(p2)=n)；并核对 PMF 与穷举"""
    checked = 0

    # PMF 与穷举
    for n in range(1, ENUMERATION_MAX_N + 1):
        for _ in range(3):
            p = rng.random(n)
            got, expected = pmf(p), enumerate_pmf(p)
            if got.shape != expected.shape or np.max(np.abs(got - expected)) > PMF_TOLERANCE:
                raise PropertyViolation('pmf = enumeration', f"n={n} 时 PMF 与穷举不一致", p.tolist())
            checked += 1

    # 0.05 网格穷举（排序后的向量，整数单位保证总和精确相等）
    for n in GRID_DIMENSIONS:
        groups = defaultdict(list)
        for vec in itertools.combinations_with_replacement(range(GRID_STEPS, -1, -1), n):
            groups[sum(vec)].append(vec)
        for vectors in groups.values():
            checked += _check_grid_group(np.array(vectors))

    # 随机 T 变换对
    for n in RANDOM_DIMENSIONS:
        for _ in range(iterations):
            p_small, p_big = random_majorized_pair(rng, n)
            if not majorises(p_big, p_small):
                raise PropertyViolation('T-transform majorization', "T 变换结果未被优超", p_small.tolist())
            if not _product_ge(np.prod(p_small), np.prod(p_big)):
                raise PropertyViolation('boland bound', "全成功概率违反 Boland 上界",
                                        [p_small.tolist(), p_big.tolist()])
            if not _product_ge(pmf(p_small)[-1], pmf(p_big)[-1]):
                raise PropertyViolation('boland bound (pmf)', "PMF[n] 违反 Boland 上界",
                                        [p_small.tolist(), p_big.tolist()])
            checked += 1
    return checked


def check_smoothing(iterations, rng) -> int:
    """p2 ≻ p1 ⇒ z(p2) ≻ z(p1)，η ∈ {0.1, 0.5, 1}"""
    checked = 0
    for _ in range(iterations):
        n = int(rng.integers(2, 21))
        p_small, p_big = random_majorized_pair(rng, n)
        for eta in (0.1, 0.5, 1.0):
            if not majorises(apply_smoothing(p_big, eta), apply_smoothing(p_small, eta)):
                raise PropertyViolation('smoothing preserves majorization', f"η={eta} 时优超关系被破坏",
                                        [p_small.tolist(), p_big.tolist()])
            checked += 1
    return checked


def check_dkw(iterations, rng) -> int:
    """经验频率 <= 2e^(-2λε²) + 3σ"""
    replications = max(100, 10 * iterations)
    for lam, epsilon in DKW_CASES:
        bound = dkw_bound(lam, epsilon)
        frequency = dkw_exceedance_frequency(lam, epsilon, DKW_P, replications, rng)
        capped = min(bound, 1.0)
        margin = 3 * math.sqrt(capped * (1 - capped) / replications)
        if frequency > bound + margin:
            raise PropertyViolation('dkw domination', f"λ={lam}, ε={epsilon}: 频率 {frequency} > 上界 {bound}",
                                    [lam, epsilon, frequency])
    return len(DKW_CASES) * replications


def check_am_gm(iterations, rng) -> int:
    """AM >= GM，全相等时取等号"""
    for k in range(iterations):
        size = int(rng.integers(1, 21))
        x = rng.random(size) * 10
        if k % 10 == 0:
            x[rng.integers(size)] = 0.0
        am, gm = am_gm_check(x)
        if am < gm * (1 - AM_GM_RTOL):
            raise PropertyViolation('am >= gm', "算术平均小于几何平均", x.tolist())
    for value in (0.0, 0.3, 2.0, 7.5):
        am, gm = am_gm_check([value] * 5)
        if am != gm:
            raise PropertyViolation('am = gm iff equal', "全相等向量的两种平均不相等", [value] * 5)
    return iterations + 4


def check_asymptote(iterations, rng) -> int:
    """g(j) + ξ >= 0 且 g(10^6) ≈ -ξ；m >= j - ⌈ξ⌉；构造的比较向量优超前缀"""
    checked = 0
    j = np.unique(np.round(np.logspace(0, math.log10(ASYMPTOTE_J_MAX), 400)))
    for p0 in ASYMPTOTE_P0:
        value = xi(p0)
        g = g_asymptote(j, p0)
        if np.any(g + value < -1e-9):
            k = int(np.argmin(g + value))
            raise PropertyViolation('g(j) >= -xi', f"p0={p0}, j={j[k]:.0f}: g+ξ={g[k] + value}", [p0, float(j[k])])
        if abs(float(g_asymptote(ASYMPTOTE_J_MAX, p0)) + value) > 1e-3:
            raise PropertyViolation('g -> -xi', f"p0={p0}: g(10^6) 未逼近 -ξ", [p0])
        checked += j.size

        for n in (10, 100, 1000):
            if p0 >= 1 - 1 / n:
                continue
            ceil_xi = guarded_ceil(value)
            for jj in range(1, n + 1):
                if m_lower_bound(jj, p0, n) < jj - ceil_xi:
                    raise PropertyViolation('m >= j - ceil(xi)', f"p0={p0}, n={n}, j={jj}", [p0, n, jj])
                checked += 1

    samples = max(1, iterations // 100)
    for _ in range(samples):
        n = int(rng.integers(4, 200))
        p0 = float(rng.uniform(0.01, 0.5))
        size = int(rng.integers(1, n + 1))
        prefix = rng.uniform(p0, 1 - 1 / n, size=size)
        z, _ = majorizing_vector(prefix, p0, n)
        if not majorises(z, prefix):
            raise PropertyViolation('comparison vector majorizes prefix', f"n={n}, p0={p0}", prefix.tolist())
        if not _product_ge(np.prod(prefix), np.prod(z)):
            raise PropertyViolation('boland bound', "比较向量的全成功概率更大", prefix.tolist())
        checked += 1
    return checked


SUITES = [
    ('boland', check_boland),
    ('smoothing', check_smoothing),
    ('dkw', check_dkw),
    ('am_gm', check_am_gm),
    ('asymptote', check_asymptote),
]


def run_all(iterations=DEFAULT_ITERATIONS, seed=DEFAULT_SEED, pmf=None):
    """
    依次运行全部检验，遇到第一个失败即停止

    Args:
        iterations: 随机检验次数
        seed: 随机种子
        pmf: PMF 实现，默认 poisson_binomial_pmf（测试时可注入错误实现）

    Returns:
        [SuiteResult, ...]
    """
    rng = make_rng(seed)
    pmf = pmf or poisson_binomial_pmf
    results = []
    for name, suite in SUITES:
        try:
            if suite is check_boland:
                checked = suite(iterations, rng, pmf)
            else:
                checked = suite(iterations, rng)
        except PropertyViolation as e:
            logger.error(f"❌ {name}: {e}")
            results.append(SuiteResult(name, False, 0, str(e), e.counterexample))
            break
        logger.info(f"✅ {name}: {checked}项通过")
        results.append(SuiteResult(name, True, checked))
    return results


# ============ 主程序 ============
if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    count = int(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_ITERATIONS
    outcome = run_all(count)
    sys.exit(0 if all(r.passed for r in outcome) and len(outcome) == len(SUITES) else 1)
