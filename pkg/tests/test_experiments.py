import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from diamlimit.diameter import RateSpec
from diamlimit.experiments import (Ecdf, default_rate, default_t_grid, ks_distance,
                                   limit_measure_box, prelimit_measure_box,
                                   run_bounds_check, run_convergence, run_limit,
                                   run_scaling_map_check, simulate_statistics, tail_slope)
from diamlimit.geometry import Ellipsoid, PSuperellipsoid
from diamlimit.limitlaw import LambdaBeta, UniformDensity, limit_config_for
from diamlimit.sampling import DistributionSpec, pearson2_constant

from oracles import ks_two_sample

ELLIPSE = Ellipsoid((1.0, 0.5))
UNIFORM = DistributionSpec("uniform")

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40)


# --- ECDF and KS ------------------------------------------------------------

def test_ecdf_basics():
    e = Ecdf([3.0, 1.0, 2.0, 2.0])
    assert e.count == 4
    assert e.sorted_values.tolist() == [1.0, 2.0, 2.0, 3.0]
    assert e(0.0) == 0.0 and e(2.0) == 0.75 and e(10.0) == 1.0
    with pytest.raises(ValueError):
        Ecdf([])


def test_ks_examples():
    assert ks_distance(Ecdf([1.0, 2.0]), Ecdf([1.0, 2.0])) == 0.0
    assert ks_distance(Ecdf([0.0]), Ecdf([1.0])) == 1.0
    assert ks_distance(Ecdf([0.0, 1.0]), Ecdf([0.5])) == 0.5


@pytest.mark.filterwarnings("ignore::RuntimeWarning")   # scipy's p-value, not the statistic
@settings(max_examples=200)
@given(samples, samples)
def test_ks_matches_scipy(a, b):
    assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


@settings(max_examples=200)
@given(samples, samples, samples)
def test_ks_metric(a, b, c):
    ab, ba = ks_distance(a, b), ks_distance(b, a)
    assert ab == ba and 0.0 <= ab <= 1.0
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, c) <= ab + ks_distance(b, c) + 1e-12


@settings(max_examples=100)
@given(samples, st.lists(st.floats(-200, 200, allow_nan=False), min_size=2, max_size=20))
def test_ecdf_is_cdf(vals, ts):
    e = Ecdf(vals)
    ts = sorted(ts)
    out = e(np.array(ts))
    assert np.all(np.diff(out) >= 0) and np.all((out >= 0) & (out <= 1))
    assert e(-1e9) == 0.0 and e(1e9) == 1.0


# --- convergence and limit -------------------------------------------------

def test_single_replication():
    e = run_convergence(ELLIPSE, UNIFORM, RateSpec("main", 2), 100, 1, seed=3)
    assert e.count == 1


def test_convergence_deterministic_across_threads():
    args = (ELLIPSE, UNIFORM, RateSpec("main", 2), 300, 64)
    a = simulate_statistics(*args, seed=5, threads=1).values
    b = simulate_statistics(*args, seed=5, threads=4).values
    assert a.tobytes() == b.tobytes()


def test_simulation_k_columns_descend_distances():
    res = simulate_statistics(ELLIPSE, UNIFORM, RateSpec("main", 2), 200, 20, k=3, seed=1)
    # larger distances give smaller scaled statistics
    assert np.all(np.diff(res.values, axis=1) >= 0)


def test_limit_k3_ordering():
    cfg = limit_config_for(ELLIPSE, UNIFORM)
    res = run_limit(cfg, 10.0, 2000, k=3, seed=2)
    f1, f2, f3 = res.ecdfs()
    grid = np.linspace(0, 3, 61)
    assert np.all(f1(grid) >= f2(grid)) and np.all(f2(grid) >= f3(grid))


def test_dkw_band_halving():
    cfg = limit_config_for(ELLIPSE, UNIFORM)
    a = run_limit(cfg, 10.0, 500, seed=1).ecdf()
    b = run_limit(cfg, 10.0, 1000, seed=1).ecdf()
    assert a.dkw_halfwidth() / b.dkw_halfwidth() == pytest.approx(math.sqrt(2))


def test_limit_retries_reported():
    cfg = limit_config_for(ELLIPSE, UNIFORM)
    res = run_limit(cfg, 0.3, 50, seed=0)
    assert res.retries > 0


def test_default_rate():
    assert default_rate(ELLIPSE, UNIFORM).kind == "main"
    assert default_rate(ELLIPSE, DistributionSpec("pearson2", beta=1.0)).kind == "pearson"
    assert default_rate(PSuperellipsoid(3.0, (1, 0.5)), UNIFORM).p == 3.0
    r = default_rate(Ellipsoid((1, 1, 0.5)), UNIFORM)
    assert r.kind == "multimajor" and r.e == 2


# --- bounds check -----------------------------------------------------------

def test_bounds_default_grid():
    grid = default_t_grid(3, 2, 0.0)
    assert len(grid) == 9 and np.all(np.diff(grid) > 0)


def test_bounds_rows_reference_G():
    rep = run_bounds_check(3, 2, 0.0, (1, 1, 0.5), 2000, 200, t_grid=[0.0, 0.5, 1.0], seed=1)
    rows = rep.bounds_check
    assert rows[0]["lower"] == 0.0 and rows[0]["upper"] == 0.0 and rows[0]["empirical"] == 0.0
    for row in rows:
        assert row["lower"] <= row["upper"]
    assert rep.constants["g_exponent"] == 3.5


def test_bounds_band_collapses():
    rep = run_bounds_check(3, 2, 0.0, (1, 1, 1e-9), 500, 20, t_grid=[0.7], seed=0)
    row = rep.bounds_check[0]
    assert row["upper"] == pytest.approx(row["lower"], rel=1e-12)


def test_bounds_input_errors():
    with pytest.raises(ValueError):
        run_bounds_check(3, 2, 0.0, (1, 0.9, 0.5), 100, 10)
    with pytest.raises(ValueError):
        run_bounds_check(3, 2, 0.0, (1, 1), 100, 10)


def test_tail_slope_small():
    out = tail_slope(3, 2, 0.0, (1, 1, 0.5), 10 ** 6, seed=3)
    assert out["slope"] == pytest.approx(1.5, abs=0.15)


# --- scaling map ------------------------------------------------------------

def test_limit_measure_quadrature_closed_form():
    # |z2| <= sqrt(z1/2) on [0, 2]: area 8/3
    val = limit_measure_box([(0, 2), (-1, 1)], (1, 0.5), UniformDensity(2 / math.pi))
    assert val == pytest.approx((2 / math.pi) * 8 / 3, rel=1e-9)
    lam = LambdaBeta(1.0, 1.0, (1, 0.5))
    # integral of (2 z1 - 4 z2^2) over the same region: int_0^2 (4/3) sqrt(2) z^{3/2} dz
    expected = (4 / 3) * math.sqrt(2) * (2 / 5) * 2 ** 2.5
    val = limit_measure_box([(0, 2), (-1, 1)], (1, 0.5), lam)
    assert val == pytest.approx(expected, rel=1e-8)


def test_limit_measure_disjoint_box():
    assert limit_measure_box([(-2, -1), (-1, 1)], (1, 0.5), UniformDensity(1.0)) == 0.0
    rep = run_scaling_map_check(ELLIPSE, UNIFORM, 1e5, 10 ** 5, box=[(-2, -1), (-1, 1)])
    assert rep.estimates[0]["hits"] == 0 and rep.estimates[0]["limit"] == 0.0


def test_prelimit_tends_to_limit():
    c = pearson2_constant((1, 0.5), 2.0)
    lim = limit_measure_box([(0, 2), (-1, 1)], (1, 0.5), LambdaBeta(c, 2.0, (1, 0.5)))
    vals = [prelimit_measure_box([(0, 2), (-1, 1)], (1, 0.5), 2.0, n, c)
            for n in (1e5, 1e7, 1e9)]
    gaps = [lim - v for v in vals]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_scaling_map_matches_prelimit():
    dist = DistributionSpec("pearson2", beta=2.0)
    rep = run_scaling_map_check(ELLIPSE, dist, 1e5, 4 * 10 ** 6, seed=1, prelimit=True)
    row = rep.estimates[0]
    assert abs(row["estimate"] - row["prelimit"]) <= 3 * row["se"]


def test_scaling_map_doubling_n_stable():
    a = run_scaling_map_check(ELLIPSE, UNIFORM, 1e5, 10 ** 7, seed=2).estimates[0]
    b = run_scaling_map_check(ELLIPSE, UNIFORM, 2e5, 10 ** 7, seed=3).estimates[0]
    assert abs(a["estimate"] - b["estimate"]) <= 3 * math.hypot(a["se"], b["se"])


def test_reports_deterministic():
    a = run_bounds_check(3, 2, 0.0, (1, 1, 0.5), 500, 30, seed=4).to_dict()
    b = run_bounds_check(3, 2, 0.0, (1, 1, 0.5), 500, 30, seed=4, threads=3).to_dict()
    a.pop("runtime_seconds"), b.pop("runtime_seconds")
    assert a == b
