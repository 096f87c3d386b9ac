"""理论计算：上界、(G3)、DKW、ξ、选择压力、优超、PMF、AM-GM"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import theory
from errors import TheoryError
from marginal_model import make_rng
from theory import (
    AM_GM_RTOL,
    TheoryParams,
    am_gm_check,
    apply_smoothing,
    check_selective_pressure,
    dkw_bound,
    dkw_exceedance_frequency,
    g3_min_population,
    g_asymptote,
    guarded_ceil,
    level_based_bound,
    los_bound,
    los_bound_simplified,
    majorises,
    majorizing_vector,
    max_feasible_gamma0,
    poisson_binomial_pmf,
    xi,
)
from verify import random_majorized_pair


def _params(**kwargs):
    base = dict(delta=1.0, epsilon=0.1, gamma0=0.5, m=2, upgrade_probs=(0.5,))
    base.update(kwargs)
    return TheoryParams(**base)


# ============ 层级定理 ============
def test_level_based_bound_example():
    expected = 8 * (8 * math.log(6) + 2)
    assert level_based_bound(_params(), 8) == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(130.67, abs=0.01)


def test_level_based_bound_large_lambda_term():
    lam = 10 ** 7
    bound = level_based_bound(_params(upgrade_probs=(1.0,)), lam)
    assert bound / 8 == pytest.approx(lam * math.log(6) + 1, rel=1e-5)


def test_level_based_bound_rejects_bad_lambda():
    with pytest.raises(TheoryError, match='lambda'):
        level_based_bound(_params(), 0)


@settings(max_examples=200, deadline=None)
@given(
    z=st.lists(st.floats(1e-4, 0.5), min_size=1, max_size=6),
    delta=st.floats(0.05, 0.5),
    factor=st.floats(1.0, 20.0),
)
def test_level_based_bound_monotone(z, delta, factor):
    params = TheoryParams(delta=delta, epsilon=0.1, gamma0=0.5, m=len(z) + 1, upgrade_probs=tuple(z))
    lam = math.ceil(factor * g3_min_population(params))
    doubled = TheoryParams(delta=delta, epsilon=0.1, gamma0=0.5, m=len(z) + 1,
                           upgrade_probs=tuple(2 * v for v in z))
    assert level_based_bound(doubled, lam) <= level_based_bound(params, lam) * (1 + 1e-12)
    bigger_delta = TheoryParams(delta=2 * delta, epsilon=0.1, gamma0=0.5, m=len(z) + 1, upgrade_probs=tuple(z))
    assert level_based_bound(bigger_delta, lam) <= level_based_bound(params, lam) * (1 + 1e-12)


def test_g3_min_population_example():
    assert g3_min_population(_params()) == pytest.approx(8 * math.log(512), rel=1e-6)
    assert 8 * math.log(512) == pytest.approx(49.90, abs=0.01)


def test_g3_min_population_scaling():
    base = _params(delta=0.5)
    more_levels = _params(delta=0.5, m=4, upgrade_probs=(0.5,) * 3)
    half_delta = _params(delta=0.25)
    assert g3_min_population(more_levels) > g3_min_population(base)
    assert g3_min_population(half_delta) >= 4 * g3_min_population(base)


@pytest.mark.parametrize('kwargs, tag', [
    ({'delta': 0.0}, 'delta'),
    ({'delta': 1.5}, 'delta'),
    ({'epsilon': 0.0}, 'epsilon'),
    ({'gamma0': 1.0}, 'gamma0'),
    ({'m': 1, 'upgrade_probs': ()}, 'm >= 2'),
    ({'upgrade_probs': (0.0,)}, 'z_j'),
    ({'m': 3}, 'len'),
])
def test_theory_params_validation(kwargs, tag):
    with pytest.raises(TheoryError, match=tag):
        _params(**kwargs)


# ============ LeadingOnes / BinVal ============
def test_los_bound_composition():
    params = TheoryParams.for_los(10, 0.25, 0.1, 0.5)
    z = 0.25 / (1.1 * 10)
    assert params.z_star == pytest.approx(z)
    lam, delta = 50, 0.5
    expected = 8 / delta ** 2 * 10 * (lam * math.log(6 * delta * lam / (4 + z * delta * lam)) + 1 / z)
    assert los_bound(10, lam, params) == pytest.approx(expected, rel=1e-12)


def test_los_bound_quadratic_in_n():
    params = TheoryParams.for_los(100, 0.25, 0.1, 0.5)
    ratio = los_bound(200, 10, params) / los_bound(100, 10, params)
    assert 3.5 <= ratio <= 4.5


def test_los_bound_over_n_lambda_log_lambda_bounded():
    params = TheoryParams.for_los(10, 0.25, 0.1, 0.5)
    ratios = [los_bound(10, lam, params) / (10 * lam * math.log(lam)) for lam in (10 ** 4, 10 ** 5, 10 ** 6)]
    assert max(ratios) < 100
    assert ratios[-1] <= ratios[0]


def test_los_bound_simplified_dominates():
    params = TheoryParams.for_los(50, 0.25, 0.1, 0.5)
    for lam in (20, 100, 1000):
        assert los_bound_simplified(50, lam, params) >= los_bound(50, lam, params) * 0.999


# ============ DKW ============
def test_dkw_bound_examples():
    assert dkw_bound(100, 0.1) == pytest.approx(2 * math.exp(-2), rel=1e-9)
    assert dkw_bound(100, 0.1) == pytest.approx(0.27067, abs=1e-5)
    assert dkw_bound(7, 0.0) == 2.0
    assert dkw_bound(1000, 0.05) == pytest.approx(0.01348, abs=1e-5)
    with pytest.raises(TheoryError):
        dkw_bound(0, 0.1)


@pytest.mark.parametrize('lam', [100, 1000])
@pytest.mark.parametrize('epsilon', [0.05, 0.1])
def test_dkw_dominates_empirical_frequency(lam, epsilon):
    replications = 100_000
    frequency = dkw_exceedance_frequency(lam, epsilon, 0.5, replications, make_rng(lam))
    bound = min(dkw_bound(lam, epsilon), 1.0)
    assert frequency <= dkw_bound(lam, epsilon) + 3 * math.sqrt(bound * (1 - bound) / replications)


# ============ ξ 与选择压力 ============
def test_xi_examples():
    assert xi(0.5) == pytest.approx(2 * math.log(2), rel=1e-9)
    assert xi(1 - 1e-9) == pytest.approx(1.0, abs=1e-6)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(TheoryError):
            xi(bad)


@pytest.mark.parametrize('p0', [0.05, 0.1, 0.25, 0.5, 0.9])
def test_g_asymptote(p0):
    j = np.unique(np.round(np.logspace(0, 6, 300)))
    assert np.all(g_asymptote(j, p0) + xi(p0) >= -1e-9)
    assert abs(float(g_asymptote(10 ** 6, p0)) + xi(p0)) <= 1e-3


@settings(max_examples=200, deadline=None)
@given(p0=st.floats(1e-6, 1 - 1e-6))
def test_xi_above_one(p0):
    assert xi(p0) > 1


def test_guarded_ceil():
    assert guarded_ceil(2.0) == 2
    assert guarded_ceil(2.0 + 1e-14) == 2
    assert guarded_ceil(2.1) == 3


def test_selective_pressure_eta_one():
    report = check_selective_pressure(0.25, 1.0, 0.1, 0.1)
    assert report.p0 == pytest.approx(0.2273, abs=1e-4)
    assert report.xi == pytest.approx(1.917, abs=1e-3)
    assert report.ceil_xi == 2
    assert report.rhs == pytest.approx(1 / (1.1 * math.e), rel=1e-9)
    assert report.rhs == pytest.approx(0.3344, abs=1e-4)
    assert report.satisfied


def test_selective_pressure_eta_half():
    report = check_selective_pressure(0.25, 0.5, 0.1, 0.1)
    assert report.rhs == pytest.approx(0.5 ** 3 / (1.1 * math.e), rel=1e-9)
    assert report.rhs == pytest.approx(0.0418, abs=1e-4)
    assert not report.satisfied


def test_selective_pressure_small_gamma0_eta_half():
    report = check_selective_pressure(0.03, 0.5, 0.1, 0.1)
    assert report.ceil_xi == 4
    assert report.rhs == pytest.approx(0.5 ** 5 / (1.1 * math.e), rel=1e-9)
    assert not report.satisfied
    assert check_selective_pressure(0.2, 0.9, 0.1, 0.1).satisfied


@pytest.mark.parametrize('eta', [1.0, 0.9, 0.5])
def test_selective_pressure_small_gamma0_eventually_satisfied(eta):
    flags = [check_selective_pressure(g, eta, 0.1, 0.1).satisfied for g in np.logspace(-1, -8, 60)]
    assert flags[-1]


def test_max_feasible_gamma0():
    value = max_feasible_gamma0(0.5, 0.1, 0.1)
    assert value == pytest.approx(0.5 ** 8 / (1.1 * math.e), rel=1e-6)
    assert check_selective_pressure(value, 0.5, 0.1, 0.1).satisfied
    assert not check_selective_pressure(value * 1.001, 0.5, 0.1, 0.1).satisfied
    assert max_feasible_gamma0(1.0, 0.1, 0.1) == pytest.approx(1 / (1.1 * math.e), rel=1e-6)


def test_constraint_report_to_dict():
    data = check_selective_pressure(0.25, 1.0, 0.1, 0.1).to_dict()
    assert data['inputs'] == {'gamma0': 0.25, 'eta': 1.0, 'delta': 0.1, 'epsilon': 0.1}
    assert data['ceil_xi'] == 2 and data['satisfied'] is True


@pytest.mark.parametrize('delta', [0.0, -0.1, 1.5, 5.0])
def test_selective_pressure_rejects_delta_outside_unit_interval(delta):
    with pytest.raises(TheoryError, match='0 < delta <= 1'):
        check_selective_pressure(0.25, 1.0, delta, 0.1)
    with pytest.raises(TheoryError, match='0 < delta <= 1'):
        max_feasible_gamma0(1.0, delta, 0.1)
    assert check_selective_pressure(0.25, 1.0, 1.0, 0.1).delta == 1.0


# ============ 优超 ============
def test_majorises_examples():
    assert majorises([0.9, 0.1], [0.6, 0.4])
    assert not majorises([0.6, 0.4], [0.9, 0.1])
    p = [0.3, 0.2, 0.7]
    assert majorises(p, p)
    assert not majorises([0.5, 0.5], [0.6, 0.3])
    with pytest.raises(TheoryError, match='len'):
        majorises([0.5], [0.2, 0.3])


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 15), seed=st.integers(0, 2 ** 32))
def test_majorises_transitive(n, seed):
    rng = make_rng(seed)
    middle, top = random_majorized_pair(rng, n)
    bottom = middle.copy()
    for _ in range(n):
        i, j = rng.choice(n, size=2, replace=False)
        t = rng.random()
        bottom[i], bottom[j] = t * bottom[i] + (1 - t) * bottom[j], t * bottom[j] + (1 - t) * bottom[i]
    assert majorises(top, middle)
    assert majorises(middle, bottom)
    assert majorises(top, bottom)


def test_apply_smoothing():
    np.testing.assert_allclose(apply_smoothing([0.5, 0.5], 1.0), [1.0, 1.0])
    np.testing.assert_allclose(apply_smoothing([0.2, 0.8], 0.5), [0.6, 0.9])
    with pytest.raises(TheoryError):
        apply_smoothing([0.5], 0.0)


@settings(max_examples=300, deadline=None)
@given(n=st.integers(2, 20), seed=st.integers(0, 2 ** 32), eta=st.sampled_from([0.1, 0.5, 1.0]))
def test_smoothing_preserves_majorization(n, seed, eta):
    small, big = random_majorized_pair(make_rng(seed), n)
    assert majorises(apply_smoothing(big, eta), apply_smoothing(small, eta))


def test_majorizing_vector():
    prefix = np.array([0.8, 0.5, 0.4, 0.3])
    z, m = majorizing_vector(prefix, 0.2, 10)
    assert m == math.floor((prefix.sum() - 4 * 0.2) / (0.9 - 0.2))
    assert z.sum() == pytest.approx(prefix.sum())
    assert majorises(z, prefix)
    assert np.prod(z) <= np.prod(prefix)
    with pytest.raises(TheoryError):
        majorizing_vector([0.95], 0.2, 10)


# ============ Poisson 二项分布 ============
def test_pmf_examples():
    np.testing.assert_allclose(poisson_binomial_pmf([0.5, 0.5]), [0.25, 0.5, 0.25])
    np.testing.assert_allclose(poisson_binomial_pmf([1.0, 1.0]), [0.0, 0.0, 1.0])
    with pytest.raises(TheoryError):
        poisson_binomial_pmf([0.5, 1.2])


@settings(max_examples=200, deadline=None)
@given(p=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=60))
def test_pmf_properties(p):
    pmf = poisson_binomial_pmf(p)
    assert pmf.shape == (len(p) + 1,)
    assert np.all(pmf >= 0)
    assert abs(math.fsum(pmf) - 1) <= 1e-12
    assert abs(pmf[-1] - np.prod(p)) <= 1e-12
    assert abs(float(np.dot(np.arange(len(p) + 1), pmf)) - sum(p)) <= 1e-9


def test_boland_bound_random_pairs(rng):
    for _ in range(2000):
        n = int(rng.integers(2, 30))
        small, big = random_majorized_pair(rng, n)
        assert poisson_binomial_pmf(small)[-1] >= poisson_binomial_pmf(big)[-1] * (1 - 1e-9)


# ============ 算术-几何平均 ============
def test_am_gm_examples():
    assert am_gm_check([2, 2, 2]) == (2.0, 2.0)
    am, gm = am_gm_check([1, 4])
    assert am == pytest.approx(2.5)
    assert gm == pytest.approx(2.0)
    assert am_gm_check([0.0, 3.0]) == (1.5, 0.0)
    with pytest.raises(TheoryError):
        am_gm_check([])
    with pytest.raises(TheoryError):
        am_gm_check([1, -1])


@settings(max_examples=500, deadline=None)
@given(x=st.lists(st.floats(0.0, 1e6), min_size=1, max_size=30))
def test_am_at_least_gm(x):
    am, gm = am_gm_check(x)
    assert am >= gm * (1 - AM_GM_RTOL)
    assert am_gm_check([x[0]] * len(x)) == (x[0], x[0])


def test_am_gm_returns_unclamped_geometric_mean(monkeypatch):
    monkeypatch.setattr(theory.stats, 'gmean', lambda x: 2 * float(np.mean(x)))
    am, gm = am_gm_check([1, 4])
    assert am == pytest.approx(2.5)
    assert gm == pytest.approx(5.0)
