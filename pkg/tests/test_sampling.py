import math

import numpy as np
import pytest
from scipy import stats

from diamlimit import rng as rngmod
from diamlimit.geometry import Ellipsoid, PSuperellipsoid
from diamlimit.sampling import (BetaOutOfRange, DistributionSpec, density_at_poles,
                                draw_cloud, pearson2_constant, pearson2_density,
                                poissonized_count, sample, sample_pearson2,
                                sample_uniform_ellipsoid, sample_uniform_psuperellipsoid)

from oracles import (ks_two_sample, rejection_ellipsoid, rejection_pearson,
                     sphere_projection_pearson)

N = 10 ** 5


def radius2(points, axes):
    return np.sum((points / np.asarray(axes)) ** 2, axis=1)


def test_distribution_spec_parse():
    assert DistributionSpec.parse("uniform") == DistributionSpec("uniform")
    assert DistributionSpec.parse("pearson:2") == DistributionSpec("pearson2", beta=2.0)
    assert DistributionSpec.parse("uniform-p:4") == DistributionSpec("uniform_p", p=4.0)
    for bad in ("pearson", "normal", "uniform:3"):
        with pytest.raises(ValueError):
            DistributionSpec.parse(bad)
    with pytest.raises(BetaOutOfRange):
        DistributionSpec.parse("pearson:-1")
    spec = DistributionSpec.parse("pearson:-0.5")
    assert DistributionSpec.parse(spec.label()) == spec


def test_empty_cloud(rng):
    assert len(sample_uniform_ellipsoid((1, 0.5), 0, rng)) == 0
    assert sample_pearson2((1, 0.5), 2.0, 0, rng).points.shape == (0, 2)


def test_uniform_symmetry(rng):
    pts = sample_uniform_ellipsoid((1, 0.5), N, rng).points
    frac = np.mean(pts[:, 0] > 0)
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / N)


def test_uniform_vs_rejection(rng):
    pts = sample_uniform_ellipsoid((1, 0.5), N, rng).points
    ref = rejection_ellipsoid((1, 0.5), N, rng)
    assert ks_two_sample(pts[:, 0], ref[:, 0]) <= 0.01
    assert ks_two_sample(pts[:, 1], ref[:, 1]) <= 0.01


def test_pearson_beta0_is_uniform(rng):
    axes = (1.0, 0.7, 0.4)
    a = sample_pearson2(axes, 0.0, N, rngmod.stream(1, 0)).points
    b = sample_uniform_ellipsoid(axes, N, rngmod.stream(1, 0)).points
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    c = sample_uniform_ellipsoid(axes, N, rng).points
    assert ks_two_sample(radius2(a, axes), radius2(c, axes)) <= 0.01


def test_pearson_beta2_radius(rng):
    pts = sample_pearson2((1, 0.5), 2.0, N, rng).points
    r2 = radius2(pts, (1, 0.5))
    # Beta(1, 3): mean 1/4, variance 3/80
    assert abs(r2.mean() - 0.25) <= 3 * math.sqrt(3 / 80 / N)
    assert stats.kstest(r2, stats.beta(1, 3).cdf).statistic <= 0.01
    ref = rejection_pearson((1, 0.5), 2.0, N, rng)
    assert ks_two_sample(r2, radius2(ref, (1, 0.5))) <= 0.02


def test_pearson_negative_beta(rng):
    axes = (1.0, 0.8, 0.5)
    pts = sample_pearson2(axes, -0.5, N, rng).points
    assert np.all(np.isfinite(pts))
    assert np.all(radius2(pts, axes) < 1)
    ref = sphere_projection_pearson(axes, -0.5, N, rng)
    for j in range(3):
        assert ks_two_sample(pts[:, j], ref[:, j]) <= 0.02
    assert ks_two_sample(radius2(pts, axes), radius2(ref, axes)) <= 0.02


def test_pearson_extreme_beta_no_nan(rng):
    pts = sample_pearson2((1, 0.5), -0.999, 10 ** 4, rng).points
    assert np.all(np.isfinite(pts)) and np.all(radius2(pts, (1, 0.5)) < 1)


def test_pearson_beta_out_of_range(rng):
    with pytest.raises(BetaOutOfRange):
        sample_pearson2((1, 0.5), -1.0, 5, rng)


def test_pearson_constant_normalises(rng):
    axes, beta = (1.0, 0.6, 0.3), 1.5
    # integrate the density over the bounding box by Monte Carlo
    z = rng.uniform(-1, 1, (10 ** 6, 3)) * axes
    box = 8 * np.prod(axes)
    total = box * pearson2_density(z, axes, beta).mean()
    assert total == pytest.approx(1.0, rel=0.01)
    assert pearson2_constant((1, 0.5), 0.0) == pytest.approx(1 / (math.pi * 0.5))


def test_psuper_p2_matches_uniform():
    a = sample_uniform_psuperellipsoid((1, 0.5), 2.0, N, rngmod.stream(3, 1)).points
    b = sample_uniform_ellipsoid((1, 0.5), N, rngmod.stream(3, 1)).points
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_psuper_p2_matches_uniform_independent(rng):
    a = sample_uniform_psuperellipsoid((1, 0.5), 2.0, N, rng).points
    b = sample_uniform_ellipsoid((1, 0.5), N, rng).points
    for j in range(2):
        assert ks_two_sample(a[:, j], b[:, j]) <= 0.01


def test_psuper_p1_square(rng):
    pts = sample_uniform_psuperellipsoid((1, 1), 1.0, N, rng).points
    assert np.all(np.abs(pts).sum(axis=1) <= 1 + 1e-12)
    frac = np.mean((pts[:, 0] > 0) & (pts[:, 1] > 0))
    assert abs(frac - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / N)


@pytest.mark.parametrize("p", [1.0, 1.5, 4.0])
def test_psuper_vs_rejection(p, rng):
    pts = sample_uniform_psuperellipsoid((1, 0.5), p, N, rng).points
    ref = rejection_ellipsoid((1, 0.5), N, rng, p=p)
    for j in range(2):
        assert ks_two_sample(pts[:, j], ref[:, j]) <= 0.01


@pytest.mark.parametrize("body,dist", [
    (Ellipsoid((1, 0.5, 0.2)), DistributionSpec("uniform")),
    (Ellipsoid((1, 0.5)), DistributionSpec("pearson2", beta=-0.7)),
    (Ellipsoid((2, 1)), DistributionSpec("pearson2", beta=3.0)),
    (PSuperellipsoid(1.0, (1, 0.5)), DistributionSpec("uniform")),
    (PSuperellipsoid(4.0, (1, 0.5, 0.5)), DistributionSpec("uniform")),
])
def test_membership(body, dist, rng):
    pts = sample(body, dist, 20000, rng).points
    assert np.all(body.contains(pts))


def test_poissonized_count_moments(rng):
    draws = np.array([poissonized_count(1000, rng) for _ in range(10 ** 5)])
    assert 996.8 <= draws.mean() <= 1003.2
    assert 0.97 <= draws.var(ddof=1) / draws.mean() <= 1.03
    assert poissonized_count(1, rng) >= 0
    with pytest.raises(ValueError):
        poissonized_count(0, rng)


def test_draw_cloud_modes():
    body, dist = Ellipsoid((1, 0.5)), DistributionSpec("uniform")
    pts_rng, cnt_rng = rngmod.replication_streams(5, 0, 0, 2)
    fixed = draw_cloud(body, dist, 500, "fixed", pts_rng, cnt_rng)
    pts_rng, cnt_rng = rngmod.replication_streams(5, 0, 0, 2)
    pois = draw_cloud(body, dist, 500, "poissonized", pts_rng, cnt_rng)
    assert len(fixed) == 500 and pois.mode == "poissonized"
    assert abs(len(pois) - 500) < 5 * math.sqrt(500)
    with pytest.raises(ValueError):
        draw_cloud(body, dist, 500, "other", pts_rng, cnt_rng)


def test_determinism():
    a = sample_pearson2((1, 0.5, 0.3), 0.5, 1000, rngmod.stream(11, 2, 3)).points
    b = sample_pearson2((1, 0.5, 0.3), 0.5, 1000, rngmod.stream(11, 2, 3)).points
    assert a.tobytes() == b.tobytes()
    c = sample_pearson2((1, 0.5, 0.3), 0.5, 1000, rngmod.stream(11, 2, 4)).points
    assert a.tobytes() != c.tobytes()


def test_density_at_poles():
    assert density_at_poles(Ellipsoid((1, 0.5)), DistributionSpec("uniform")) == \
        pytest.approx(2 / math.pi)
    with pytest.raises(ValueError):
        density_at_poles(Ellipsoid((1, 0.5)), DistributionSpec("pearson2", beta=1.0))
