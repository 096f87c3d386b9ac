#!/usr/bin/env python3
"""
PBIL（带边界）主循环
功能：
1. 每代采样 λ 个子代
2. 按适应度降序排序，截断选择 μ 个最优
3. 平滑更新模型（η=1 即 UMDA）
4. 采到最优解（层级 n）或预算耗尽时停止

使用方法:
    python3 pbil.py
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from errors import ConfigError
from fitness import Problem, fitness_key, population_levels, rank_population
from marginal_model import (
    Bitstring,
    MarginalVector,
    PbilConfig,
    init_model,
    make_rng,
    sample_population,
    update_model,
)

logger = logging.getLogger(__name__)

# 默认预算 = ⌈50·(n ln λ + n²/λ)⌉ 代
DEFAULT_BUDGET_FACTOR = 50


def default_budget(n, lam) -> int:
    """默认最大代数"""
    return max(1, math.ceil(DEFAULT_BUDGET_FACTOR * (n * math.log(lam) + n * n / lam)))


@dataclass(frozen=True)
class SelectionOutcome:
    """截断选择结果：按名次排列的 μ 个下标"""
    selected_indices: tuple

    def __len__(self):
        return len(self.selected_indices)

    def __iter__(self):
        return iter(self.selected_indices)


@dataclass(frozen=True, eq=False)
class GenerationInfo:
    """一代的完整信息（供诊断使用）"""
    t: int
    model: MarginalVector        # 本代采样所用模型
    population: np.ndarray       # (λ, n)
    levels: np.ndarray           # 每个个体的层级
    selection: SelectionOutcome
    optimum_found: bool

    @property
    def selected_level(self) -> int:
        """第 μ 名的层级：至少 μ 个个体位于 A_{>=j}"""
        return int(self.levels[self.selection.selected_indices[-1]])


@dataclass
class RunResult:
    """
    一次运行的结果

    evaluations = λ × generations（包含找到最优解的那一代）
    """
    problem: str
    success: bool
    generations: int
    evaluations: int
    best_level: int
    best_value: str
    best_fitness_trace: Optional[List[int]] = None
    marginal_snapshots: Optional[List[dict]] = None
    config: dict = field(default_factory=dict)

    def to_dict(self):
        data = {
            'problem': self.problem,
            'success': self.success,
            'generations': self.generations,
            'evaluations': self.evaluations,
            'best_level': self.best_level,
            'best_value': self.best_value,
            'config': self.config,
        }
        if self.best_fitness_trace is not None:
            data['best_fitness_trace'] = self.best_fitness_trace
        if self.marginal_snapshots is not None:
            data['marginal_snapshots'] = self.marginal_snapshots
        return data


def _as_population(population) -> np.ndarray:
    if isinstance(population, np.ndarray):
        return population
    rows = [x.to_array() if isinstance(x, Bitstring) else np.asarray(x, dtype=np.uint8) for x in population]
    if not rows:
        raise ConfigError('lambda >= 1', "种群为空")
    return np.vstack(rows)


def truncation_select(population, mu, problem) -> SelectionOutcome:
    """
    截断选择

    Args:
        population: λ 个个体（Bitstring 序列或 (λ, n) 矩阵）
        mu: 选择数量
        problem: 问题

    Returns:
        SelectionOutcome，同分时采样顺序靠前者优先
    """
    matrix = _as_population(population)
    lam = matrix.shape[0]
    if mu < 1:
        raise ConfigError('1 <= mu', f"μ={mu} 无效")
    if mu > lam:
        raise ConfigError('mu <= lambda', f"μ={mu} 大于种群规模 λ={lam}")
    order = rank_population(matrix, problem)
    return SelectionOutcome(tuple(int(i) for i in order[:mu]))


class Pbil:
    """
    PBIL 引擎

    用法:
    1. Pbil(config, problem).run() 得到 RunResult
    2. 或遍历 generations() 逐代检查模型与种群
    """

    def __init__(self, config: PbilConfig, problem):
        self.config = config
        self.problem = Problem.parse(problem)
        self.budget = config.max_generations or default_budget(config.n, config.lam)

    def generations(self):
        """逐代生成 GenerationInfo，找到最优解的那一代之后停止（不再更新模型）"""
        config = self.config
        rng = make_rng(config.seed)
        model = init_model(config.n, config.initial_probs)

        for t in range(1, self.budget + 1):
            population = sample_population(model, config.lam, rng)
            levels = population_levels(population)
            selection = truncation_select(population, config.mu, self.problem)
            found = bool((levels == config.n).any())

            yield GenerationInfo(t, model, population, levels, selection, found)

            if found:
                return
            model = update_model(model, population[list(selection.selected_indices)], config.eta)

    def run(self) -> RunResult:
        """运行直到成功或预算耗尽"""
        config = self.config
        trace = [] if config.record_trace else None
        snapshots = [] if config.snapshot_every else None
        last = None

        for info in self.generations():
            last = info
            if trace is not None:
                trace.append(int(info.levels.max()))
            if snapshots is not None and (info.t - 1) % config.snapshot_every == 0:
                snapshots.append({'generation': info.t, 'probs': info.model.to_list()})

        best = last.population[last.selection.selected_indices[0]]
        key = fitness_key(best, self.problem)
        result = RunResult(
            problem=self.problem.value,
            success=last.optimum_found,
            generations=last.t,
            evaluations=config.lam * last.t,
            best_level=int(last.levels.max()),
            best_value=str(key.display_value),
            best_fitness_trace=trace,
            marginal_snapshots=snapshots,
            config={**config.to_dict(), 'max_generations': self.budget},
        )

        if result.success:
            logger.debug(f"找到最优解: {self.problem.value} n={config.n} 第{result.generations}代, T={result.evaluations}")
        else:
            logger.debug(f"预算耗尽: {self.problem.value} n={config.n} {self.budget}代, 最高层级 {result.best_level}")
        return result


def run_pbil(config: PbilConfig, problem) -> RunResult:
    """运行 PBIL"""
    return Pbil(config, problem).run()


def run_umda(config: PbilConfig, problem) -> RunResult:
    """运行 UMDA（即 η=1 的 PBIL）"""
    return run_pbil(replace(config, eta=1.0), problem)


# ============ 使用示例 ============
if __name__ == '__main__':
    config = PbilConfig(n=20, lam=50, mu=12, eta=1.0, seed=7)
    for problem in Problem:
        result = run_pbil(config, problem)
        status = "✅" if result.success else "❌"
        print(f"{status} {problem.value}: {result.generations}代, T={result.evaluations}")
