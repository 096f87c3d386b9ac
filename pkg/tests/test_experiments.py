"""实验：规则解析、扫描、汇总、拟合、边缘概率检验、CSV"""

import math

import numpy as np
import pytest

from errors import ConfigError, ExperimentError
from experiments import (
    CSV_COLUMNS,
    CellSummary,
    SweepSpec,
    TrialRecord,
    budget_for,
    derive_seed,
    export_csv,
    fit_scaling,
    implied_c,
    lambda_for,
    marginal_failure_rate,
    read_csv,
    run_sweep,
    summarize,
)
from fitness import Problem
from marginal_model import PbilConfig
from pbil import default_budget, run_umda


def _record(n=8, lam=10, evaluations=100, success=True, seed=0, problem='leadingones'):
    return TrialRecord(problem=problem, n=n, lam=lam, mu=2, eta=1.0, seed=seed,
                       generations=evaluations // lam, evaluations=evaluations,
                       success=success, censored=not success)


def _summary(n, lam, median):
    return CellSummary(problem='leadingones', n=n, lam=lam, mu=max(1, lam // 4), eta=1.0, trials=1,
                       successes=1, median=median, mean=median, q25=median, q75=median, censored=False)


# ============ 规则 ============
def test_lambda_rules():
    assert lambda_for('6*ln(n)', 64) == math.ceil(6 * math.log(64))
    assert lambda_for('ln(n)', 100) == math.ceil(math.log(100))
    assert lambda_for('2*n^0.5', 100) == 20
    assert lambda_for('n', 17) == 17
    assert lambda_for(40, 8) == 40
    assert lambda_for('40', 8) == 40
    assert lambda_for([10, 20, 30], 99, 1) == 20
    with pytest.raises(ConfigError):
        lambda_for([10], 8, 1)
    with pytest.raises(ConfigError, match='lambda_rule'):
        lambda_for('exp(n)', 8)


def test_budget_rules():
    assert budget_for('default', 20, 50) == default_budget(20, 50)
    assert budget_for(None, 20, 50) == default_budget(20, 50)
    assert budget_for('10*default', 20, 50) == math.ceil(10 * default_budget(20, 50))
    assert budget_for(500, 20, 50) == 500
    with pytest.raises(ConfigError, match='budget_rule'):
        budget_for('forever', 20, 50)


def test_derive_seed_is_stable_per_cell():
    assert derive_seed(1, 64, 0) == derive_seed(1, 64, 0)
    seeds = {derive_seed(1, n, t) for n in (64, 128) for t in range(10)}
    assert len(seeds) == 20
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_sweep_spec_validation():
    with pytest.raises(ConfigError, match='trials'):
        SweepSpec(Problem.LEADING_ONES, (8,), '6*ln(n)', 0.25, trials=0)
    with pytest.raises(ConfigError, match='required: gamma0'):
        SweepSpec.from_dict({'problem': 'binval', 'n_values': [8], 'lambda_rule': 10})
    spec = SweepSpec.from_dict({'problem': 'binval', 'n_values': [8, 16], 'lambda_rule': [10, 12],
                                'gamma0': 0.25, 'eta': None, 'trials': 2})
    assert spec.eta == 1.0
    assert SweepSpec.from_dict(spec.to_dict()) == spec
    assert [cell[:3] for cell in spec.cells()] == [(8, 10, 3), (16, 12, 3)]


@pytest.mark.parametrize('base_seed', [-1, 2 ** 64, 1.5])
def test_sweep_spec_rejects_bad_base_seed(base_seed):
    with pytest.raises(ConfigError, match='seed is a 64-bit integer'):
        SweepSpec(Problem.LEADING_ONES, (8,), '6*ln(n)', 0.25, base_seed=base_seed)
    with pytest.raises(ConfigError, match='integer'):
        SweepSpec.from_dict({'problem': 'binval', 'n_values': [8], 'lambda_rule': 10,
                             'gamma0': 0.25, 'base_seed': base_seed})


def test_sweep_spec_rejects_fractional_n():
    with pytest.raises(ConfigError, match='n is an integer'):
        SweepSpec.from_dict({'problem': 'binval', 'n_values': [8, 16.5], 'lambda_rule': 10, 'gamma0': 0.25})


# ============ 扫描 ============
def _small_spec(**kwargs):
    base = dict(problem=Problem.LEADING_ONES, n_values=(8, 16), lambda_rule='6*ln(n)',
                gamma0=0.25, eta=1.0, trials=5, base_seed=3)
    base.update(kwargs)
    return SweepSpec(**base)


def test_sweep_counts_and_determinism():
    records = run_sweep(_small_spec())
    assert len(records) == 10
    assert [r.n for r in records] == [8] * 5 + [16] * 5
    assert run_sweep(_small_spec()) == records
    for r in records:
        assert r.evaluations == r.lam * r.generations
        assert r.censored == (not r.success)


def test_sweep_single_trial_replay():
    spec = _small_spec(trials=1)
    assert run_sweep(spec) == run_sweep(spec)


def test_sweep_parallel_matches_serial():
    spec = _small_spec(problem=Problem.BINVAL)
    assert run_sweep(spec, workers=2) == run_sweep(spec, workers=1)


def test_sweep_adding_n_keeps_existing_cells():
    base = run_sweep(_small_spec(n_values=(8,)))
    extended = run_sweep(_small_spec(n_values=(8, 16)))
    assert extended[:5] == base


def test_sweep_umda_entry_point_identical():
    spec = _small_spec(eta=1.0)
    assert run_sweep(spec, runner=run_umda) == run_sweep(spec)


def test_sweep_extreme_gamma0_cells_are_feasible():
    spec = _small_spec(n_values=(8,), lambda_rule=[2], gamma0=1.0, trials=2)
    assert len(run_sweep(spec)) == 2
    spec = _small_spec(n_values=(8, 16), lambda_rule=[4, 4], gamma0=0.1, trials=1)
    assert len(run_sweep(spec)) == 2


def test_sweep_budget_hits_are_censored():
    spec = _small_spec(n_values=(40,), lambda_rule=[2], gamma0=0.5, budget_rule=2, trials=3)
    records = run_sweep(spec)
    assert all(r.censored and not r.success for r in records)
    assert all(r.evaluations == 2 * 2 for r in records)
    summary = summarize(records)[0]
    assert summary.censored
    assert summary.success_rate == 0.0


# ============ 汇总 ============
def test_summarize_single_record():
    summary = summarize([_record(evaluations=120)])[0]
    assert summary.median == 120
    assert summary.trials == 1
    assert not summary.censored


def test_summarize_symmetric_data():
    records = [_record(evaluations=v, seed=i) for i, v in enumerate([100, 200, 300, 400, 500])]
    summary = summarize(records)[0]
    assert summary.mean == summary.median == 300
    assert (summary.q25, summary.q75) == (200, 400)


def test_summarize_flags_censoring():
    records = [_record(evaluations=100), _record(evaluations=900, success=False, seed=1)]
    summary = summarize(records)[0]
    assert summary.censored
    assert summary.success_rate == 0.5


# ============ 拟合 ============
def test_fit_pure_quadratic():
    summaries = [_summary(n, 10, 2.0 * n * n) for n in (16, 32, 64, 128)]
    fit = fit_scaling(summaries)
    assert fit.a == pytest.approx(2.0, rel=1e-6)
    assert fit.b == pytest.approx(0.0, abs=1e-6)
    assert fit.residual < 1e-9


def test_fit_pure_population_term():
    cells = [(16, 10), (32, 40), (64, 20), (128, 80)]
    summaries = [_summary(n, lam, 3.0 * n * lam * math.log(lam)) for n, lam in cells]
    fit = fit_scaling(summaries)
    assert fit.b == pytest.approx(3.0, rel=1e-6)
    assert fit.a == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(fit.predict([16], [10]), [3.0 * 16 * 10 * math.log(10)], rtol=1e-6)


def test_fit_rejects_too_few_points():
    with pytest.raises(ExperimentError, match='>= 3 distinct n'):
        fit_scaling([_summary(16, 10, 100.0), _summary(32, 10, 400.0)])


def test_fit_rejects_rank_deficient_design():
    # λ ∝ n 且 ln λ 为常数不可能；用 λ=1 使第二列全为 0
    summaries = [_summary(n, 1, float(n * n)) for n in (8, 16, 32)]
    with pytest.raises(ExperimentError, match='full-rank'):
        fit_scaling(summaries)


# ============ 边缘概率检验 ============
def test_marginal_failure_rate_border_floor():
    config = PbilConfig(n=10, lam=20, mu=1, seed=5, max_generations=200)
    report = marginal_failure_rate(config, Problem.LEADING_ONES, epsilon=1.0, generations_window=200)
    assert report.threshold <= 1 / 10
    assert report.rate == 0.0
    assert report.generations > 0


def test_marginal_failure_rate_infinite_epsilon():
    config = PbilConfig(n=12, lam=30, mu=10, seed=6, max_generations=100)
    report = marginal_failure_rate(config, Problem.BINVAL, epsilon=math.inf, generations_window=100)
    assert report.threshold == 0.0
    assert report.failures == 0 and report.product_failures == 0


def test_marginal_failure_rate_large_population():
    n, gamma0, epsilon = 16, 0.25, 1.0
    lam = 2000
    config = PbilConfig(n=n, lam=lam, mu=int(gamma0 * lam), seed=7)
    report = marginal_failure_rate(config, Problem.LEADING_ONES, epsilon, generations_window=500)
    assert report.implied_c == pytest.approx(implied_c(lam, gamma0, epsilon, n))
    assert report.inspected > 0
    margin = 3 * math.sqrt(max(report.lemma_bound, 1e-12) / report.inspected)
    assert report.rate <= report.lemma_bound + margin


def test_marginal_failure_rate_rejects_bad_epsilon():
    with pytest.raises(ConfigError):
        marginal_failure_rate(PbilConfig(n=4, lam=4, mu=1), Problem.LEADING_ONES, 0.0, 10)


# ============ CSV ============
def test_export_empty_is_header_only(tmp_path):
    path = tmp_path / 'empty.csv'
    export_csv([], path)
    assert path.read_text(encoding='utf-8').splitlines() == [','.join(CSV_COLUMNS)]
    assert read_csv(path) == []


def test_export_round_trip(tmp_path):
    records = [_record(n=8 + i, evaluations=10 * (i + 1), success=i % 3 != 0, seed=2 ** 63 + i) for i in range(10)]
    path = tmp_path / 'nested' / 'results.csv'
    export_csv(records, path)
    assert len(path.read_text(encoding='utf-8').splitlines()) == 11
    assert read_csv(path) == records


def test_read_csv_reports_line_number(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text(','.join(CSV_COLUMNS) + '\nleadingones,8,10,2,1.0,0,1,10,true,false\nleadingones,8,x\n',
                    encoding='utf-8')
    with pytest.raises(ExperimentError, match=':3:'):
        read_csv(path)


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('a,b\n', encoding='utf-8')
    with pytest.raises(ExperimentError, match='csv header'):
        read_csv(path)


def test_read_csv_missing_file(tmp_path):
    with pytest.raises(ExperimentError, match='readable path'):
        read_csv(tmp_path / 'missing.csv')


# ============ 扩展性实验（耗时） ============
def _los_spec(problem=Problem.LEADING_ONES, n_values=(64, 128, 256), trials=30, lambda_rule='6*ln(n)'):
    return SweepSpec(problem=problem, n_values=n_values, lambda_rule=lambda_rule,
                     gamma0=0.25, eta=1.0, trials=trials, base_seed=2018)


@pytest.mark.slow
def test_los_scaling():
    records = run_sweep(_los_spec(), workers=4)
    assert all(r.success for r in records)
    summaries = summarize(records)
    assert fit_scaling(summaries).residual < 0.25


@pytest.mark.slow
def test_los_doubling_with_fixed_lambda():
    lam = math.ceil(6 * math.log(256))
    summaries = summarize(run_sweep(_los_spec(lambda_rule=lam), workers=4))
    medians = [s.median for s in summaries]
    for small, big in zip(medians, medians[1:]):
        assert 3 <= big / small <= 6


@pytest.mark.slow
def test_pbil_eta_half_succeeds():
    gamma0 = 0.03
    lam = max(math.ceil(6 * math.log(64)), math.ceil(2 / gamma0))
    spec = SweepSpec(problem=Problem.LEADING_ONES, n_values=(32, 64), lambda_rule=lam, gamma0=gamma0,
                     eta=0.5, trials=20, base_seed=2018, budget_rule='10*default')
    records = run_sweep(spec, workers=4)
    assert len(records) == 40
    assert all(r.success for r in records)


@pytest.mark.slow
def test_binval_bounded_like_leadingones():
    n_values = (32, 64, 128)
    los = summarize(run_sweep(_los_spec(n_values=n_values), workers=4))
    binval = summarize(run_sweep(_los_spec(problem=Problem.BINVAL, n_values=n_values), workers=4))
    for a, b in zip(los, binval):
        assert a.n == b.n
        # 单侧：BinVal 中位数不超过 LeadingOnes 的 3 倍
        assert b.median <= 3 * a.median
