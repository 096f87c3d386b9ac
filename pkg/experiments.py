#!/usr/bin/env python3
"""
实验模块
功能：
1. 按种子批量运行（参数网格扫描，可多进程）
2. 汇总统计（中位数/均值/四分位数/成功率，预算截断标记）
3. 拟合 T ≈ a·n² + b·nλ·ln λ（非负最小二乘）
4. 检验边缘概率下界引理（失败频率）
5. CSV 导出/读取

CSV 列（顺序固定）:
    problem,n,lambda,mu,eta,seed,generations,evaluations,success,censored

使用方法:
    python3 experiments.py
"""

import csv
import itertools
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from errors import ConfigError, ExperimentError
from fitness import Problem
from marginal_model import SEED_MAX, PbilConfig, as_integer, derive_mu
from pbil import Pbil, default_budget, run_pbil

logger = logging.getLogger(__name__)

# 配置
CSV_COLUMNS = ['problem', 'n', 'lambda', 'mu', 'eta', 'seed',
               'generations', 'evaluations', 'success', 'censored']
DEFAULT_WORKERS = 1
MIN_FIT_POINTS = 3

_NUMBER = r'([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)'
_LN_RULE = re.compile(rf'^\s*(?:{_NUMBER}\s*\*\s*)?ln\(\s*n\s*\)\s*$')
_POWER_RULE = re.compile(rf'^\s*(?:{_NUMBER}\s*\*\s*)?n\s*(?:\^\s*{_NUMBER})?\s*$')
_BUDGET_RULE = re.compile(rf'^\s*(?:{_NUMBER}\s*\*\s*)?default\s*$')


# ============ 规则 ============
def lambda_for(rule, n, index=0) -> int:
    """
    由 λ 规则计算子代规模

    支持: "c*ln(n)" -> ⌈c·ln n⌉, "c*n^k" -> ⌈c·n^k⌉, 整数, 或与 n_values 对齐的列表
    """
    if isinstance(rule, (list, tuple)):
        if index >= len(rule):
            raise ConfigError('len(lambda_rule) = len(n_values)', "λ 列表长度与 n_values 不一致")
        return int(rule[index])
    if isinstance(rule, (int, np.integer)):
        return int(rule)

    text = str(rule)
    match = _LN_RULE.match(text)
    if match:
        c = float(match.group(1) or 1)
        return max(1, math.ceil(c * math.log(n)))
    match = _POWER_RULE.match(text)
    if match:
        c = float(match.group(1) or 1)
        k = float(match.group(2) or 1)
        return max(1, math.ceil(c * n ** k))
    if text.strip().isdigit():
        return int(text)
    raise ConfigError('lambda_rule in {c*ln(n), c*n^k, list}', f"无法解析 λ 规则: {rule!r}")


def budget_for(rule, n, lam) -> int:
    """预算规则: "default", "k*default" 或整数"""
    if rule is None:
        return default_budget(n, lam)
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    text = str(rule)
    match = _BUDGET_RULE.match(text)
    if match:
        k = float(match.group(1) or 1)
        return max(1, math.ceil(k * default_budget(n, lam)))
    if text.strip().isdigit():
        return int(text)
    raise ConfigError('budget_rule in {default, k*default, int}', f"无法解析预算规则: {rule!r}")


def derive_seed(base_seed, n, trial) -> int:
    """由 (base_seed, n, trial) 混合出 64 位种子；增加 n 不影响已有格子"""
    state = np.random.SeedSequence([int(base_seed), int(n), int(trial)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


# ============ 数据类型 ============
@dataclass(frozen=True)
class SweepSpec:
    """参数扫描规格（JSON 字段名与属性名一致）"""
    problem: Problem
    n_values: Tuple[int, ...]
    lambda_rule: Union[str, Tuple[int, ...]]
    gamma0: float
    eta: float = 1.0
    trials: int = 1
    base_seed: int = 0
    budget_rule: Union[str, int] = 'default'

    def __post_init__(self):
        object.__setattr__(self, 'problem', Problem.parse(self.problem))
        object.__setattr__(self, 'n_values', tuple(as_integer(n, 'n') for n in self.n_values))
        if isinstance(self.lambda_rule, list):
            object.__setattr__(self, 'lambda_rule', tuple(int(v) for v in self.lambda_rule))
        if self.trials < 1:
            raise ConfigError('trials >= 1', f"trials={self.trials} 无效")
        if not self.n_values:
            raise ConfigError('n_values non-empty', "n_values 不能为空")
        if not 0 < self.gamma0 <= 1:
            raise ConfigError('0 < gamma0 <= 1', f"γ0={self.gamma0} 越界")
        if not 0 < self.eta <= 1:
            raise ConfigError('0 < eta <= 1', f"η={self.eta} 越界")
        if not isinstance(self.base_seed, (int, np.integer)) or not 0 <= self.base_seed <= SEED_MAX:
            raise ConfigError('seed is a 64-bit integer', f"base_seed 必须是 0..2^64-1 的整数: {self.base_seed!r}")

    def cells(self):
        """每个 n 的 (n, λ, μ, 预算)"""
        for index, n in enumerate(self.n_values):
            lam = lambda_for(self.lambda_rule, n, index)
            yield n, lam, derive_mu(self.gamma0, lam), budget_for(self.budget_rule, n, lam)

    def to_dict(self):
        rule = list(self.lambda_rule) if isinstance(self.lambda_rule, tuple) else self.lambda_rule
        return {
            'problem': self.problem.value,
            'n_values': list(self.n_values),
            'lambda_rule': rule,
            'gamma0': self.gamma0,
            'eta': self.eta,
            'trials': self.trials,
            'base_seed': self.base_seed,
            'budget_rule': self.budget_rule,
        }

    @classmethod
    def from_dict(cls, data) -> 'SweepSpec':
        data = {k: v for k, v in data.items() if v is not None}
        missing = [key for key in ('problem', 'n_values', 'lambda_rule', 'gamma0') if key not in data]
        if missing:
            raise ConfigError('required: ' + ', '.join(missing), f"缺少参数: {', '.join(missing)}")
        try:
            return cls(
                problem=data['problem'],
                n_values=tuple(data['n_values']),
                lambda_rule=data['lambda_rule'],
                gamma0=float(data['gamma0']),
                eta=float(data.get('eta', 1.0)),
                trials=as_integer(data.get('trials', 1), 'trials'),
                base_seed=as_integer(data.get('base_seed', 0), 'base_seed'),
                budget_rule=data.get('budget_rule', 'default'),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError('numeric fields', f"参数类型错误: {e}") from e


@dataclass(frozen=True)
class TrialRecord:
    """单次试验记录"""
    problem: str
    n: int
    lam: int
    mu: int
    eta: float
    seed: int
    generations: int
    evaluations: int
    success: bool
    censored: bool

    def to_row(self):
        return {
            'problem': self.problem,
            'n': self.n,
            'lambda': self.lam,
            'mu': self.mu,
            'eta': repr(float(self.eta)),
            'seed': self.seed,
            'generations': self.generations,
            'evaluations': self.evaluations,
            'success': 'true' if self.success else 'false',
            'censored': 'true' if self.censored else 'false',
        }


@dataclass(frozen=True)
class CellSummary:
    """一个参数格子的汇总"""
    problem: str
    n: int
    lam: int
    mu: int
    eta: float
    trials: int
    successes: int
    median: float
    mean: float
    q25: float
    q75: float
    censored: bool

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    def to_dict(self):
        return {
            'problem': self.problem, 'n': self.n, 'lambda': self.lam, 'mu': self.mu, 'eta': self.eta,
            'trials': self.trials, 'success_rate': self.success_rate,
            'median': self.median, 'mean': self.mean, 'q25': self.q25, 'q75': self.q75,
            'censored': self.censored,
        }


@dataclass(frozen=True)
class ScalingFit:
    """T ≈ a·n² + b·nλ·ln λ"""
    a: float
    b: float
    residual: float
    n_values: Tuple[int, ...]

    @property
    def coefficients(self):
        return self.a, self.b

    def predict(self, n, lam):
        n = np.asarray(n, dtype=float)
        lam = np.asarray(lam, dtype=float)
        return self.a * n ** 2 + self.b * n * lam * np.log(lam)

    def to_dict(self):
        return {'a': self.a, 'b': self.b, 'residual': self.residual, 'n_values': list(self.n_values)}


@dataclass(frozen=True)
class MarginalFailureReport:
    """
    边缘概率下界检验

    rate: 检查的 (代, 位置 i <= j) 对中 p_i < γ0/(1+ε) 的比例
    product_rate: 检查的代中 Π_{i<=j} p_i < γ0/(1+ε) 的比例
    """
    threshold: float
    generations: int
    inspected: int
    failures: int
    product_inspected: int
    product_failures: int
    implied_c: float
    lemma_bound: float

    @property
    def rate(self) -> float:
        return self.failures / self.inspected if self.inspected else 0.0

    @property
    def product_rate(self) -> float:
        return self.product_failures / self.product_inspected if self.product_inspected else 0.0

    def to_dict(self):
        return {
            'threshold': self.threshold, 'generations': self.generations,
            'inspected': self.inspected, 'failures': self.failures, 'rate': self.rate,
            'product_inspected': self.product_inspected, 'product_failures': self.product_failures,
            'product_rate': self.product_rate,
            'implied_c': self.implied_c, 'lemma_bound': self.lemma_bound,
        }


# ============ 扫描 ============
def _run_trial(task) -> TrialRecord:
    problem, config, runner = task
    result = runner(config, problem)
    return TrialRecord(
        problem=problem.value,
        n=config.n,
        lam=config.lam,
        mu=config.mu,
        eta=float(result.config['eta']),
        seed=config.seed,
        generations=result.generations,
        evaluations=result.evaluations,
        success=result.success,
        censored=not result.success,
    )


def _tasks(spec: SweepSpec, runner):
    for n, lam, mu, budget in spec.cells():
        if not 1 <= mu <= lam:
            logger.warning(f"⚠️ 跳过 n={n}: μ={mu} 不在 [1, λ={lam}] 内")
            continue
        for trial in range(spec.trials):
            config = PbilConfig(n=n, lam=lam, mu=mu, eta=spec.eta,
                                seed=derive_seed(spec.base_seed, n, trial), max_generations=budget)
            yield spec.problem, config, runner


def run_sweep(spec: SweepSpec, workers=DEFAULT_WORKERS, runner=run_pbil) -> List[TrialRecord]:
    """
    执行参数扫描

    Args:
        spec: 扫描规格
        workers: 并发进程数
        runner: run_pbil 或 run_umda

    Returns:
        按 (n, trial) 排序的记录，与调度无关
    """
    tasks = list(_tasks(spec, runner))
    logger.info(f"🚀 开始扫描: {spec.problem.value}, {len(tasks)}次试验, {workers}个进程")

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        records = [_run_trial(task) for task in tasks]

    failed = sum(1 for r in records if not r.success)
    if failed:
        logger.warning(f"⚠️ {failed}/{len(records)} 次试验预算耗尽")
    return records


# ============ 汇总 ============
def _cell_key(record: TrialRecord):
    return record.problem, record.n, record.lam, record.mu, record.eta


def summarize(records: Sequence[TrialRecord]) -> List[CellSummary]:
    """
    按格子汇总

    失败试验以 预算·λ 计入（截断），并设置 censored 标记。
    """
    summaries = []
    ordered = sorted(records, key=_cell_key)
    for key, group in itertools.groupby(ordered, key=_cell_key):
        group = list(group)
        evaluations = np.array([r.evaluations for r in group], dtype=float)
        q25, median, q75 = np.percentile(evaluations, [25, 50, 75])
        problem, n, lam, mu, eta = key
        summaries.append(CellSummary(
            problem=problem, n=n, lam=lam, mu=mu, eta=eta,
            trials=len(group),
            successes=sum(1 for r in group if r.success),
            median=float(median),
            mean=float(evaluations.mean()),
            q25=float(q25),
            q75=float(q75),
            censored=any(r.censored for r in group),
        ))
    return summaries


# ============ 拟合 ============
def fit_scaling(summaries: Sequence[CellSummary]) -> ScalingFit:
    """
    非负最小二乘拟合中位数 T ≈ a·n² + b·nλ·ln λ（按相对误差加权）

    Raises:
        ExperimentError: 不同 n 少于3个或设计矩阵秩不足
    """
    n_values = sorted({s.n for s in summaries})
    if len(n_values) < MIN_FIT_POINTS:
        raise ExperimentError('>= 3 distinct n', f"至少需要3个不同的 n, 实际 {n_values}")

    n = np.array([s.n for s in summaries], dtype=float)
    lam = np.array([s.lam for s in summaries], dtype=float)
    y = np.array([s.median for s in summaries], dtype=float)
    if np.any(y <= 0):
        raise ExperimentError('median > 0', "中位数必须为正")

    design = np.column_stack([n ** 2, n * lam * np.log(lam)])
    weighted = design / y[:, None]
    if np.linalg.matrix_rank(weighted) < 2:
        raise ExperimentError('full-rank design', f"设计矩阵秩不足 (n={n_values}, λ={sorted(set(lam.tolist()))})")

    coef, _ = optimize.nnls(weighted, np.ones_like(y))
    relative = (design @ coef - y) / y
    residual = float(np.sqrt(np.mean(relative ** 2)))
    logger.info(f"📊 拟合: a={coef[0]:.4g}, b={coef[1]:.4g}, 相对残差={residual:.4f}")
    return ScalingFit(float(coef[0]), float(coef[1]), residual, tuple(n_values))


# ============ 引理检验 ============
def implied_c(lam, gamma0, epsilon, n) -> float:
    """由 λ = c·((1+1/ε)/γ0)²·ln n 反推 c"""
    return lam / (((1 + 1 / epsilon) / gamma0) ** 2 * math.log(n))


def marginal_failure_rate(config: PbilConfig, problem, epsilon, generations_window) -> MarginalFailureReport:
    """
    检验边缘概率下界引理

    每代取 j 为第 μ 名个体的层级（至少 μ=γ0λ 个个体在 A_{>=j}），
    统计采样模型中 i <= j 的 p_i < γ0/(1+ε) 的次数，以及 Π_{i<=j} p_i < γ0/(1+ε) 的次数。

    Args:
        config: 运行参数（需要 λ >= c((1+1/ε)/γ0)² ln n，只报告不强制）
        problem: 问题
        epsilon: ε > 0（可为 math.inf）
        generations_window: 最多检查的代数
    """
    if not epsilon > 0:
        raise ConfigError('epsilon > 0', f"ε={epsilon} 无效")
    gamma0 = config.gamma0
    threshold = gamma0 / (1 + epsilon)
    c = implied_c(config.lam, gamma0, epsilon, config.n)

    inspected = failures = product_inspected = product_failures = generations = 0
    engine = Pbil(config, problem)
    for info in itertools.islice(engine.generations(), generations_window):
        generations += 1
        j = info.selected_level
        if j == 0:
            continue
        prefix = info.model.probs[:j]
        inspected += j
        failures += int(np.count_nonzero(prefix < threshold))
        product_inspected += 1
        product_failures += int(np.prod(prefix) < threshold)

    report = MarginalFailureReport(
        threshold=threshold,
        generations=generations,
        inspected=inspected,
        failures=failures,
        product_inspected=product_inspected,
        product_failures=product_failures,
        implied_c=c,
        lemma_bound=2 * config.n ** (-2 * c),
    )
    logger.info(f"边缘概率检验: 阈值={threshold:.4g}, 失败率={report.rate:.4g}, 隐含c={c:.4g}")
    return report


# ============ CSV ============
def export_csv(records: Sequence[TrialRecord], path):
    """写出 CSV（UTF-8，带表头，每条记录一行）"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for record in records:
                writer.writerow(record.to_row())
    except OSError as e:
        raise ExperimentError('writable path', f"{path}: {e}") from e
    logger.info(f"✅ 已导出: {path} ({len(records)}条)")


def _parse_bool(text) -> bool:
    value = text.strip().lower()
    if value in ('true', '1'):
        return True
    if value in ('false', '0'):
        return False
    raise ValueError(f"不是布尔值: {text!r}")


def read_csv(path) -> List[TrialRecord]:
    """
    读取 CSV

    Raises:
        ExperimentError: 文件不可读、表头不符或某行格式错误（带行号）
    """
    path = Path(path)
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ExperimentError('readable path', f"{path}: {e}") from e

    if not rows or rows[0] != CSV_COLUMNS:
        raise ExperimentError('csv header', f"{path}:1: 表头必须是 {','.join(CSV_COLUMNS)}")

    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ExperimentError('csv row', f"{path}:{line_no}: 需要 {len(CSV_COLUMNS)} 列, 实际 {len(row)}")
        values = dict(zip(CSV_COLUMNS, row))
        try:
            records.append(TrialRecord(
                problem=Problem.parse(values['problem']).value,
                n=int(values['n']),
                lam=int(values['lambda']),
                mu=int(values['mu']),
                eta=float(values['eta']),
                seed=int(values['seed']),
                generations=int(values['generations']),
                evaluations=int(values['evaluations']),
                success=_parse_bool(values['success']),
                censored=_parse_bool(values['censored']),
            ))
        except (ValueError, ConfigError) as e:
            raise ExperimentError('csv row', f"{path}:{line_no}: {e}") from e
    return records


# ============ 使用示例 ============
if __name__ == '__main__':
    spec = SweepSpec(problem=Problem.LEADING_ONES, n_values=(16, 32, 64), lambda_rule='6*ln(n)',
                     gamma0=0.25, eta=1.0, trials=5, base_seed=1)
    records = run_sweep(spec)
    for summary in summarize(records):
        print(f"n={summary.n}: 中位数 T={summary.median:.0f}, 成功率 {summary.success_rate:.0%}")
    fit = fit_scaling(summarize(records))
    print(f"拟合: a={fit.a:.3f}, b={fit.b:.3f}, 残差={fit.residual:.3f}")
