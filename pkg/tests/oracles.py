"""Independent reference implementations used only by the tests.

Everything here is deliberately naive: box rejection, sphere projection and
plain double loops.  None of it shares code with the package samplers.
"""

import itertools
import math

import numpy as np


def rejection_ellipsoid(half_axes, count, rng, p=2.0, weight=None, wmax=1.0):
    """Uniform (or ``weight``-tilted) points in ``sum |x_i/a_i|^p <= 1``."""
    axes = np.asarray(half_axes, float)
    d = axes.size
    out = []
    have = 0
    while have < count:
        m = max(4 * (count - have), 1000)
        x = (2 * rng.random((m, d)) - 1) * axes
        q = np.sum(np.abs(x / axes) ** p, axis=1)
        keep = q <= 1
        if weight is not None:
            keep &= rng.random(m) * wmax <= weight(q)
        out.append(x[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:count]


def rejection_pearson(half_axes, beta, count, rng):
    """Box rejection with acceptance ``(1 - q)^beta``; needs ``beta >= 0``."""
    assert beta >= 0
    return rejection_ellipsoid(half_axes, count, rng,
                               weight=lambda q: np.clip(1 - q, 0, None) ** beta)


def sphere_projection_pearson(half_axes, beta, count, rng):
    """Project the uniform law on S^{m-1} (m = d + 2 + 2 beta) onto d coordinates.

    The projection has density proportional to ``(1 - |x|^2)^beta``; this
    covers negative beta where box rejection has no bounded envelope.
    """
    axes = np.asarray(half_axes, float)
    d = axes.size
    m = d + 2 + 2 * beta
    assert abs(m - round(m)) < 1e-12, "2*beta must be an integer"
    g = rng.standard_normal((count, int(round(m))))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :d] * axes


def rejection_paraboloid(kappa, U, b, count, rng, beta=0.0, half_axes=None):
    """Points of ``{1/2 w^T diag(kappa) w <= z1 <= b}`` rotated by U.

    With ``beta`` and ``half_axes`` the acceptance is weighted by
    ``(2 z1/a1 - sum (z_k/a_k)^2)^beta`` (requires beta >= 0).
    """
    kappa = np.asarray(kappa, float)
    m = kappa.size
    half = np.sqrt(2 * b / kappa)
    out = []
    have = 0
    if beta:
        axes = np.asarray(half_axes, float)
        wmax = (2 * b / axes[0]) ** beta
    while have < count:
        n = 4 * (count - have) + 1000
        z1 = b * rng.random(n)
        w = (2 * rng.random((n, m)) - 1) * half
        keep = 0.5 * np.sum(kappa * w * w, axis=1) <= z1
        pts = np.column_stack([z1, w @ np.asarray(U).T])
        if beta:
            budget = 2 * z1 / axes[0] - np.sum((pts[:, 1:] / axes[1:]) ** 2, axis=1)
            keep &= rng.random(n) * wmax <= np.clip(budget, 0, None) ** beta
        out.append(pts[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:count]


def mc_paraboloid_mass(kappa, b, trials, rng, p_const=1.0, beta=0.0, half_axes=None,
                       chunk=10 ** 6):
    """Rejection Monte Carlo estimate of the (weighted) truncated paraboloid mass."""
    kappa = np.asarray(kappa, float)
    m = kappa.size
    half = np.sqrt(2 * b / kappa)
    box = b * float(np.prod(2 * half))
    total = 0.0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        z1 = b * rng.random(n)
        w = (2 * rng.random((n, m)) - 1) * half
        if beta or half_axes is not None:
            axes = np.asarray(half_axes, float)
            budget = 2 * z1 / axes[0] - np.sum((w / axes[1:]) ** 2, axis=1)
            inside = budget >= 0
            total += float(np.sum(np.where(inside, np.abs(budget) ** beta, 0.0)))
        else:
            total += float(np.count_nonzero(0.5 * np.sum(kappa * w * w, axis=1) <= z1))
        done += n
    return p_const * box * total / trials


def brute_diameter(points, p=2.0):
    """Double loop over all pairs with ``np.linalg.norm``-free arithmetic."""
    pts = np.asarray(points, float)
    best = 0.0
    for i, j in itertools.combinations(range(len(pts)), 2):
        diff = np.abs(pts[i] - pts[j])
        best = max(best, float(np.sum(diff ** p) ** (1 / p)))
    return best


def brute_top_k(points, k, p=2.0):
    pts = np.asarray(points, float)
    vals = [float(np.sum(np.abs(pts[i] - pts[j]) ** p) ** (1 / p))
            for i, j in itertools.combinations(range(len(pts)), 2)]
    return sorted(vals, reverse=True)[:k]


def ks_two_sample(x, y):
    """Two-sample KS by scanning the pooled sorted sample."""
    x = np.sort(np.asarray(x, float))
    y = np.sort(np.asarray(y, float))
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / x.size
    fy = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def unit_ball_volume(m):
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)
