#!/usr/bin/env python3
"""
PBIL（带边界）命令行工具
功能：单次运行、参数扫描、理论上界、选择压力检查、性质检验、绘图

使用方式：
    python3 pbil_cli.py run --problem leadingones --n 32 --lambda 64 --gamma0 0.25 --eta 1 --seed 7
    python3 pbil_cli.py sweep --config configs/los_scaling.json --workers 4
    python3 pbil_cli.py bound --n 10 --lambda 50 --gamma0 0.25 --epsilon 0.1 --delta 0.5
    python3 pbil_cli.py check --gamma0 0.25 --eta 1 --delta 0.1 --epsilon 0.1
    python3 pbil_cli.py verify --iterations 1000
    python3 pbil_cli.py plot --csv results.csv --svg scaling.svg

退出码: 0 成功 / 1 参数错误 / 2 预算耗尽
配置文件为 JSON，命令行参数覆盖文件中的值。
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from charts import plot_csv
from errors import ConfigError, PbilError
from experiments import SweepSpec, export_csv, fit_scaling, lambda_for, run_sweep, summarize
from fitness import Problem
from marginal_model import PbilConfig
from pbil import run_pbil, run_umda
from theory import (
    TheoryParams,
    check_selective_pressure,
    g3_min_population,
    los_bound,
    los_bound_simplified,
    max_feasible_gamma0,
)
import verify

# 配置
LOG_FILE = 'pbil.log'
LOG_LEVEL = os.environ.get('PBIL_LOG_LEVEL', 'INFO')

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BUDGET = 2

DEFAULT_CONFIG = {
    'csv': 'results.csv',
    'svg': 'scaling.svg',
    'workers': 1,
    'budget_rule': 'default',
}

logger = logging.getLogger('pbil_cli')


# ============ 工具函数 ============
def print_header(text):
    print(f"\n{text}")
    print("=" * 50)


def print_json(data):
    print(json.dumps(data, indent=2, ensure_ascii=False))


def setup_logging(level=LOG_LEVEL, log_file=LOG_FILE):
    """日志写到 stderr（以及日志文件），stdout 只输出结果"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


def load_config(path):
    """加载 JSON 配置文件"""
    if not path:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError('config file readable', f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError('config file is JSON', f"{path}:{e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError('config file is an object', f"{path}: 顶层必须是 JSON 对象")
    return data


@dataclass
class CliInvocation:
    """一次命令行调用：子命令 + 参数 + 配置文件"""
    subcommand: str
    flags: dict = field(default_factory=dict)
    config_path: Optional[str] = None

    def effective(self, keys):
        """合并后的参数：默认值 < 配置文件 < 命令行"""
        file_values = load_config(self.config_path)
        flags = {k: v for k, v in self.flags.items() if v is not None}
        merged = {**DEFAULT_CONFIG, **file_values, **flags}
        return {k: merged.get(k) for k in keys}


def _require(values, keys):
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise ConfigError('required: ' + ', '.join(missing), f"缺少参数: {', '.join('--' + k.replace('_', '-') for k in missing)}")


# ============ 子命令 ============
def cmd_run(invocation: CliInvocation) -> int:
    """单次运行，stdout 输出 RunResult JSON"""
    values = invocation.effective(['problem', 'n', 'lambda', 'mu', 'gamma0', 'eta', 'seed',
                                   'max_generations', 'snapshot_every', 'record_trace', 'umda'])
    _require(values, ['problem', 'n', 'lambda', 'eta', 'seed'])
    if values['mu'] is None and values['gamma0'] is None:
        raise ConfigError('required: mu or gamma0', "必须提供 --mu 或 --gamma0")

    problem = Problem.parse(values['problem'])
    config = PbilConfig.from_dict(values)
    runner = run_umda if values['umda'] else run_pbil
    result = runner(config, problem)

    print_json(result.to_dict())
    if result.success:
        logger.info(f"✅ 找到最优解: 第{result.generations}代, T={result.evaluations}")
        return EXIT_OK
    logger.warning(f"⚠️ 预算耗尽: {result.generations}代, 最高层级 {result.best_level}/{config.n}")
    return EXIT_BUDGET


def cmd_sweep(invocation: CliInvocation) -> int:
    """参数扫描，写出 CSV 和配置回显"""
    values = invocation.effective(['problem', 'n_values', 'lambda_rule', 'gamma0', 'eta', 'trials',
                                   'base_seed', 'budget_rule', 'workers', 'csv', 'umda'])
    spec = SweepSpec.from_dict(values)
    runner = run_umda if values['umda'] else run_pbil
    records = run_sweep(spec, workers=int(values['workers']), runner=runner)

    csv_path = Path(values['csv'])
    export_csv(records, csv_path)
    echo = {**spec.to_dict(), 'workers': int(values['workers']), 'umda': bool(values['umda'])}
    with open(str(csv_path) + '.config.json', 'w', encoding='utf-8') as f:
        json.dump(echo, f, indent=2, ensure_ascii=False)

    summaries = summarize(records)
    print_header(f"📊 扫描结果: {spec.problem.value}, η={spec.eta}, γ0={spec.gamma0}")
    for s in summaries:
        flag = " (含截断)" if s.censored else ""
        print(f"   n={s.n:<6} λ={s.lam:<5} μ={s.mu:<4} 中位数 T={s.median:<12.0f} "
              f"均值={s.mean:<12.1f} 成功率={s.success_rate:.0%}{flag}")

    if len({s.n for s in summaries}) >= 3:
        fit = fit_scaling(summaries)
        print(f"\n   拟合: T ≈ {fit.a:.4g}·n² + {fit.b:.4g}·nλ·ln λ (相对残差 {fit.residual:.4f})")
    print(f"\n✅ 已保存: {csv_path}")

    return EXIT_OK if all(r.success for r in records) else EXIT_BUDGET


def cmd_bound(invocation: CliInvocation) -> int:
    """LeadingOnes/BinVal 上界与 (G3) 检查"""
    values = invocation.effective(['n', 'lambda', 'gamma0', 'epsilon', 'delta', 'eta',
                                   'n_values', 'lambda_rule', 'format'])
    _require(values, ['gamma0', 'epsilon', 'delta'])
    if values['n'] is not None:
        _require(values, ['lambda'])
        cells = [(int(values['n']), int(values['lambda']))]
    elif values['n_values'] is not None and values['lambda_rule'] is not None:
        cells = [(int(n), lambda_for(values['lambda_rule'], int(n), i)) for i, n in enumerate(values['n_values'])]
    else:
        raise ConfigError('required: n, lambda', "缺少参数: --n, --lambda")

    rows = []
    for n, lam in cells:
        params = TheoryParams.for_los(n, float(values['gamma0']), float(values['epsilon']),
                                      float(values['delta']), float(values['eta'] or 1.0))
        floor = g3_min_population(params)
        rows.append({
            'n': n,
            'lambda': lam,
            'z_star': params.z_star,
            'los_bound': los_bound(n, lam, params),
            'los_bound_simplified': los_bound_simplified(n, lam, params),
            'g3_min_population': floor,
            'meets_g3': lam >= floor,
        })

    if values['format'] == 'json':
        inputs = {k: values[k] for k in ('gamma0', 'epsilon', 'delta', 'eta')}
        print_json({'inputs': inputs, 'bounds': rows})
    else:
        print_header("📐 期望优化时间上界 (LeadingOnes / BinVal)")
        for row in rows:
            print(f"   n = {row['n']}")
            print(f"   lambda = {row['lambda']}")
            print(f"   z_star = {row['z_star']:.6g}")
            print(f"   los_bound = {row['los_bound']:.6g}")
            print(f"   los_bound_simplified = {row['los_bound_simplified']:.6g}")
            print(f"   g3_min_population = {row['g3_min_population']:.6g}")
            print(f"   meets_g3 = {row['meets_g3']}")
            if not row['meets_g3']:
                print(f"   ⚠️ λ={row['lambda']} 低于 (G3) 下限 {row['g3_min_population']:.1f}")
            print()

    for row in rows:
        if not row['meets_g3']:
            logger.warning(f"⚠️ n={row['n']}: λ={row['lambda']} 低于 (G3) 下限 {row['g3_min_population']:.1f}")
    return EXIT_OK


def cmd_check(invocation: CliInvocation) -> int:
    """选择压力约束检查"""
    values = invocation.effective(['gamma0', 'eta', 'delta', 'epsilon', 'max_gamma0', 'format'])
    _require(values, ['gamma0', 'eta', 'delta', 'epsilon'])
    report = check_selective_pressure(float(values['gamma0']), float(values['eta']),
                                      float(values['delta']), float(values['epsilon']))
    data = report.to_dict()
    if values['max_gamma0']:
        data['max_feasible_gamma0'] = max_feasible_gamma0(report.eta, report.delta, report.epsilon)

    if values['format'] == 'json':
        print_json(data)
    else:
        print_header("🎯 选择压力约束 γ0 <= η^(⌈ξ⌉+1)/((1+δ)e)")
        for key in ('p0', 'xi', 'ceil_xi', 'rhs', 'satisfied'):
            print(f"   {key} = {data[key]}")
        if 'max_feasible_gamma0' in data:
            print(f"   max_feasible_gamma0 = {data['max_feasible_gamma0']}")
        print(f"\n{'✅ 满足' if report.satisfied else '❌ 不满足'}")
    return EXIT_OK


def cmd_verify(invocation: CliInvocation) -> int:
    """运行全部性质检验"""
    values = invocation.effective(['iterations', 'seed'])
    iterations = int(values['iterations'] or verify.DEFAULT_ITERATIONS)
    seed = int(values['seed'] if values['seed'] is not None else verify.DEFAULT_SEED)

    print_header(f"🔬 性质检验 (iterations={iterations}, seed={seed})")
    results = verify.run_all(iterations, seed)
    for r in results:
        if r.passed:
            print(f"   ✅ {r.name}: {r.checked}项通过")
        else:
            print(f"   ❌ {r.name}: {r.detail}")
            print(f"   反例: {json.dumps(r.counterexample)}")

    if len(results) == len(verify.SUITES) and all(r.passed for r in results):
        return EXIT_OK
    return EXIT_INVALID


def cmd_plot(invocation: CliInvocation) -> int:
    """由扫描 CSV 生成 SVG"""
    values = invocation.effective(['csv', 'svg'])
    fits = plot_csv(values['csv'], values['svg'])
    for problem, fit in fits.items():
        if fit is not None:
            print(f"   {problem}: a={fit.a:.4g}, b={fit.b:.4g}, 残差={fit.residual:.4f}")
    print(f"✅ 图表已保存: {values['svg']}")
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'sweep': cmd_sweep,
    'bound': cmd_bound,
    'check': cmd_check,
    'verify': cmd_verify,
    'plot': cmd_plot,
}


# ============ 参数解析 ============
class CliParser(argparse.ArgumentParser):
    """参数错误统一走退出码 1"""
    def error(self, message):
        raise ConfigError('argv', message)


def _int_list(text):
    return [int(v) for v in text.split(',') if v.strip()]


def _lambda_rule(text):
    parts = [p.strip() for p in text.split(',')]
    if len(parts) > 1 and all(p.isdigit() for p in parts):
        return [int(p) for p in parts]
    return text


def build_parser():
    common = CliParser(add_help=False)
    common.add_argument('--config', help='JSON 配置文件')
    common.add_argument('--log-level', default=None, help='日志级别')
    common.add_argument('--no-log-file', action='store_true', help=f'不写 {LOG_FILE}')

    parser = CliParser(description='PBIL（带边界）实验工具')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', parents=[common], help='单次运行')
    run.add_argument('--problem')
    run.add_argument('--n', type=int)
    run.add_argument('--lambda', dest='lambda', type=int)
    run.add_argument('--mu', type=int)
    run.add_argument('--gamma0', type=float)
    run.add_argument('--eta', type=float)
    run.add_argument('--seed', type=int)
    run.add_argument('--max-generations', type=int)
    run.add_argument('--snapshot-every', type=int)
    run.add_argument('--record-trace', action='store_true', default=None)
    run.add_argument('--umda', action='store_true', default=None, help='η 固定为 1')

    sweep = sub.add_parser('sweep', parents=[common], help='参数扫描')
    sweep.add_argument('--problem')
    sweep.add_argument('--n-values', type=_int_list, help='例如 64,128,256')
    sweep.add_argument('--lambda-rule', type=_lambda_rule, help='c*ln(n) / c*n^k / 逗号分隔列表')
    sweep.add_argument('--gamma0', type=float)
    sweep.add_argument('--eta', type=float)
    sweep.add_argument('--trials', type=int)
    sweep.add_argument('--base-seed', type=int)
    sweep.add_argument('--budget-rule')
    sweep.add_argument('--workers', type=int, help='并发试验数上限')
    sweep.add_argument('--csv', help='输出 CSV')
    sweep.add_argument('--umda', action='store_true', default=None, help='通过 UMDA 入口运行')

    bound = sub.add_parser('bound', parents=[common], help='理论上界')
    bound.add_argument('--n', type=int)
    bound.add_argument('--lambda', dest='lambda', type=int)
    bound.add_argument('--gamma0', type=float)
    bound.add_argument('--epsilon', type=float)
    bound.add_argument('--delta', type=float)
    bound.add_argument('--eta', type=float)
    bound.add_argument('--format', choices=['text', 'json'])

    check = sub.add_parser('check', parents=[common], help='选择压力约束')
    check.add_argument('--gamma0', type=float)
    check.add_argument('--eta', type=float)
    check.add_argument('--delta', type=float)
    check.add_argument('--epsilon', type=float)
    check.add_argument('--max-gamma0', action='store_true', default=None, help='同时求最大可行 γ0')
    check.add_argument('--format', choices=['text', 'json'])

    verify_cmd = sub.add_parser('verify', parents=[common], help='性质检验')
    verify_cmd.add_argument('--iterations', type=int)
    verify_cmd.add_argument('--seed', type=int)

    plot = sub.add_parser('plot', parents=[common], help='绘图')
    plot.add_argument('--csv', help='扫描 CSV')
    plot.add_argument('--svg', help='输出 SVG')

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        flags = vars(args).copy()
        command = flags.pop('command')
        config_path = flags.pop('config')
        log_level = flags.pop('log_level') or LOG_LEVEL
        no_log_file = flags.pop('no_log_file')
        setup_logging(log_level, None if no_log_file else LOG_FILE)

        invocation = CliInvocation(command, flags, config_path)
        return COMMANDS[command](invocation)
    except PbilError as e:
        print(f"❌ {e}".replace('\n', ' '), file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
