"""Convergence studies: simulated statistics against approximated limit laws."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import rng as rngmod
from .diameter import RateSpec, diameter_pruned, k_largest, scaled_statistic
from .geometry import Ellipsoid, PSuperellipsoid, unique_major_axis
from .limitlaw import (LambdaBeta, LimitConfig, UniformDensity, bounds_distribution,
                       draw_limit)
from .sampling import (DistributionSpec, draw_cloud, pearson2_constant, sample,
                       sample_pearson2)

KS_TOLERANCE = 0.05   # calibrated; the source reports visual agreement only


# --------------------------------------------------------------------------
# Empirical distribution functions
# --------------------------------------------------------------------------

class Ecdf:
    """Right-continuous empirical distribution function of a scalar sample."""

    def __init__(self, values):
        vals = np.sort(np.asarray(values, dtype=float).ravel())
        if vals.size == 0:
            raise ValueError("an ECDF needs at least one value")
        if np.isnan(vals).any():
            raise ValueError("NaN in sample")
        self.sorted_values = vals

    @property
    def count(self) -> int:
        return self.sorted_values.size

    def __call__(self, t):
        return np.searchsorted(self.sorted_values, t, side="right") / self.count

    def dkw_halfwidth(self, alpha: float = 0.05) -> float:
        return math.sqrt(math.log(2.0 / alpha) / (2.0 * self.count))

    def __repr__(self):
        return f"Ecdf(count={self.count})"


def ks_distance(e1, e2) -> float:
    """Exact sup-distance between two empirical step functions."""
    if not isinstance(e1, Ecdf):
        e1 = Ecdf(e1)
    if not isinstance(e2, Ecdf):
        e2 = Ecdf(e2)
    jumps = np.concatenate([e1.sorted_values, e2.sorted_values])
    return float(np.max(np.abs(e1(jumps) - e2(jumps))))


# --------------------------------------------------------------------------
# Parallel replication driver
# --------------------------------------------------------------------------

def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("DIAMLIMIT_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def _run_reps(task, reps: int, threads: Optional[int]) -> list:
    """Run ``task(rep)`` for every replication; output order is by rep index."""
    threads = resolve_threads(threads)
    if threads == 1 or reps < 2:
        return [task(r) for r in range(reps)]
    chunk = max(1, reps // (4 * threads))
    blocks = [range(s, min(reps, s + chunk)) for s in range(0, reps, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda blk: [task(r) for r in blk], blocks)
    return [item for part in parts for item in part]


# --------------------------------------------------------------------------
# Simulation of the finite-n statistic
# --------------------------------------------------------------------------

def default_rate(body, dist: DistributionSpec, norm_p: float = 2.0) -> RateSpec:
    d = len(body.half_axes)
    if dist.kind == "uniform_p" or isinstance(body, PSuperellipsoid) or norm_p != 2.0:
        p = dist.p if dist.kind == "uniform_p" else getattr(body, "p", norm_p)
        return RateSpec("pnorm", d, p=p)
    if not unique_major_axis(body.half_axes):
        axes = np.asarray(body.half_axes)
        e = int(np.sum(axes == axes[0]))
        beta = dist.beta if dist.kind == "pearson2" else 0.0
        return RateSpec("multimajor", d, beta=beta, e=e)
    if dist.kind == "pearson2":
        return RateSpec("pearson", d, beta=dist.beta)
    return RateSpec("main", d)


@dataclass
class SimulationResult:
    values: np.ndarray           # (reps, k) scaled statistics
    counts: np.ndarray           # realised sample sizes
    runtime_seconds: float
    config: dict = field(default_factory=dict)

    def ecdf(self, index: int = 0) -> Ecdf:
        return Ecdf(self.values[:, index])

    def count_stats(self) -> dict:
        c = self.counts
        return {"mean": float(c.mean()), "min": int(c.min()), "max": int(c.max()),
                "var": float(c.var(ddof=1)) if c.size > 1 else 0.0}


def simulate_statistics(body, dist: DistributionSpec, rate: RateSpec, n: int, reps: int,
                        mode: str = "poissonized", seed: int = 0, k: int = 1,
                        norm_p: float = 2.0, threads: Optional[int] = None) -> SimulationResult:
    """``reps`` independent scaled (k largest) diameters."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    a = body.half_axes[0]
    start = time.perf_counter()

    def one(rep):
        point_rng, count_rng = rngmod.replication_streams(seed, rngmod.SIMULATE, rep, 2)
        cloud = draw_cloud(body, dist, n, mode, point_rng, count_rng, seed=seed)
        if k == 1:
            diam = (diameter_pruned(cloud, norm_p),)
        else:
            diam = k_largest(cloud, k, norm_p).values
        return len(cloud), scaled_statistic(np.asarray(diam), n, rate, a)

    out = _run_reps(one, reps, threads)
    counts = np.array([c for c, _ in out], dtype=int)
    values = np.vstack([v for _, v in out])
    config = {"body": body_dict(body), "dist": dist.label(), "rate": rate.to_dict(),
              "n": int(n), "reps": int(reps), "mode": mode, "seed": int(seed), "k": int(k),
              "norm_p": float(norm_p)}
    return SimulationResult(values, counts, time.perf_counter() - start, config)


def run_convergence(body, dist: DistributionSpec, rate: RateSpec, n: int, reps: int,
                    mode: str = "poissonized", seed: int = 0, norm_p: float = 2.0,
                    threads: Optional[int] = None) -> Ecdf:
    return simulate_statistics(body, dist, rate, n, reps, mode, seed, 1, norm_p,
                               threads).ecdf()


# --------------------------------------------------------------------------
# Limit approximation
# --------------------------------------------------------------------------

@dataclass
class LimitResult:
    values: np.ndarray          # (reps, k), each row ascending
    retries: int
    runtime_seconds: float
    config: dict = field(default_factory=dict)

    def ecdf(self, index: int = 0) -> Ecdf:
        return Ecdf(self.values[:, index])

    def ecdfs(self) -> list:
        return [self.ecdf(i) for i in range(self.values.shape[1])]


def run_limit(config: LimitConfig, b: Optional[float], reps: int, k: int = 1, seed: int = 0,
              threads: Optional[int] = None) -> LimitResult:
    """``reps`` independent draws of ``(t_1..t_k)`` from the truncated limit."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if b is not None:
        config = config.with_b(b)
    start = time.perf_counter()

    def one(rep):
        return draw_limit(config, rngmod.replication_streams(seed, rngmod.LIMIT, rep, 2), k)

    out = _run_reps(one, reps, threads)
    values = np.array([t for t, _ in out], dtype=float).reshape(reps, k)
    retries = int(sum(r for _, r in out))
    cfg = config.to_dict()
    cfg.update({"reps": int(reps), "k": int(k), "seed": int(seed)})
    return LimitResult(values, retries, time.perf_counter() - start, cfg)


# --------------------------------------------------------------------------
# Several major axes: bounds check
# --------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: dict
    ks: Optional[float] = None
    ecdf_sim: Optional[Ecdf] = None
    ecdf_limit: Optional[Ecdf] = None
    bounds_check: Optional[list] = None
    constants: Optional[dict] = None
    estimates: Optional[list] = None
    runtime_seconds: float = 0.0
    seeds: Optional[dict] = None

    @property
    def passed(self) -> bool:
        if self.bounds_check is not None:
            return all(row["inside"] for row in self.bounds_check)
        if self.estimates is not None:
            return all(row["inside"] for row in self.estimates)
        return self.ks is not None and self.ks <= KS_TOLERANCE

    def to_dict(self) -> dict:
        out = {"config": self.config, "runtime_seconds": self.runtime_seconds,
               "seeds": self.seeds, "passed": self.passed}
        if self.ks is not None:
            out["ks"] = self.ks
        if self.bounds_check is not None:
            out["bounds_check"] = self.bounds_check
        if self.constants is not None:
            out["constants"] = self.constants
        if self.estimates is not None:
            out["estimates"] = self.estimates
        return out


def default_t_grid(d: int, e: int, beta: float) -> np.ndarray:
    """Quantiles 0.1, ..., 0.9 of the lower bounding law G."""
    return bounds_distribution(d, e, beta).quantile(np.arange(1, 10) / 10.0)


def run_bounds_check(d: int, e: int, beta: float, half_axes: Sequence[float], n: int,
                     reps: int, t_grid: Optional[Sequence[float]] = None, seed: int = 0,
                     threads: Optional[int] = None) -> ExperimentReport:
    """Empirical CDF of ``b_n (2 - M_n)`` against ``[G(t), G(t / (1 - a_{e+1}^2))]``.

    Fixed-n Pearson Type II samples; the band at each t is widened by three
    binomial standard errors.
    """
    dist = bounds_distribution(d, e, beta)
    axes = np.asarray(half_axes, dtype=float)
    if axes.size != d:
        raise ValueError(f"need {d} half-axes, got {axes.size}")
    if not (np.all(axes[:e] == 1.0) and axes[e] < 1.0 and np.all(np.diff(axes[e:]) <= 0)):
        raise ValueError("half-axes must be 1 (e times) followed by a descending tail < 1")
    t_grid = default_t_grid(d, e, beta) if t_grid is None else np.asarray(t_grid, float)
    bn = dist.bn(n)
    start = time.perf_counter()

    def one(rep):
        gen = rngmod.stream(seed, rngmod.BOUNDS, rep)
        cloud = sample_pearson2(axes, beta, int(n), gen)
        return bn * (2.0 - diameter_pruned(cloud))

    stats = np.array(_run_reps(one, reps, threads))
    ecdf = Ecdf(stats)
    c = 1.0 - axes[e] ** 2
    rows = []
    for t in t_grid:
        lower = float(dist.G(t))
        upper = float(dist.G(t / c))
        lo_band = lower - 3.0 * math.sqrt(lower * (1 - lower) / reps)
        hi_band = upper + 3.0 * math.sqrt(upper * (1 - upper) / reps)
        emp = float(ecdf(t))
        rows.append({"t": float(t), "empirical": emp, "lower": lower, "upper": upper,
                     "lower_band": lo_band, "upper_band": hi_band,
                     "inside": bool(lo_band <= emp <= hi_band)})
    config = {"d": d, "e": e, "beta": beta, "half_axes": axes.tolist(), "n": int(n),
              "reps": int(reps), "seed": int(seed), "t_grid": [float(t) for t in t_grid]}
    return ExperimentReport(config=config, ecdf_sim=ecdf, bounds_check=rows,
                            constants=dist.to_dict() | {"bn": bn},
                            runtime_seconds=time.perf_counter() - start,
                            seeds={"master": int(seed)})


def tail_slope(d: int, e: int, beta: float, half_axes, samples: int, seed: int = 0,
               s_range=(1e-3, 1e-1), points: int = 12, chunk: int = 10 ** 6) -> dict:
    """Log-log regression of ``P(1 - |Z̄| <= s)`` on ``s`` for the projected sample."""
    grid = np.geomspace(s_range[0], s_range[1], points)
    hits = np.zeros(points, dtype=np.int64)
    done = 0
    block = 0
    while done < samples:
        m = min(chunk, samples - done)
        gen = rngmod.stream(seed, rngmod.TAIL, block)
        pts = sample_pearson2(half_axes, beta, m, gen).points
        gap = 1.0 - np.linalg.norm(pts[:, :e], axis=1)
        hits += np.searchsorted(np.sort(gap), grid, side="right")
        done += m
        block += 1
    prob = hits / samples
    ok = prob > 0
    slope, intercept = np.polyfit(np.log(grid[ok]), np.log(prob[ok]), 1)
    return {"slope": float(slope), "intercept": float(intercept),
            "s": grid.tolist(), "prob": prob.tolist(), "samples": int(samples),
            "alpha": bounds_distribution(d, e, beta).alpha}


# --------------------------------------------------------------------------
# Scaling-map check of the pole-cap intensity limit
# --------------------------------------------------------------------------

def limit_measure_box(box, half_axes, intensity) -> float:
    """Limit intensity of an axis-aligned box by nested quadrature.

    ``box`` is a sequence of ``(lo, hi)`` per coordinate; the paraboloid is
    ``sum_{k>=2} (z_k/a_k)^2 <= 2 z_1 / a_1``.
    """
    axes = np.asarray(half_axes, dtype=float)
    d = axes.size
    if isinstance(intensity, LambdaBeta):
        scale, beta = intensity.alpha, intensity.beta
    else:
        scale, beta = intensity.p_const, 0.0
    box = [(float(lo), float(hi)) for lo, hi in box]

    def budget(args):
        # args = (z_d, ..., z_2, z_1) in nquad order; budget left for the innermost
        z1 = args[-1]
        rest = args[:-1]
        left = 2.0 * z1 / axes[0]
        for j, zj in enumerate(reversed(rest)):
            left -= (zj / axes[j + 1]) ** 2
        return left

    def integrand(*args):
        left = budget(args)
        if left <= 0:
            return 0.0
        return left ** beta if beta != 0 else 1.0

    def make_range(k):
        # variable z_k (k >= 2) is integrated inside z_1..z_{k-1}
        def rng_(*outer):
            # outer holds (z_{k-1}, ..., z_1)
            left = 2.0 * outer[-1] / axes[0]
            for j, zj in enumerate(reversed(outer[:-1])):
                left -= (zj / axes[j + 1]) ** 2
            w = axes[k - 1] * math.sqrt(max(left, 0.0))
            lo, hi = box[k - 1]
            lo, hi = max(lo, -w), min(hi, w)
            return (lo, hi) if lo < hi else (0.0, 0.0)
        return rng_

    z1_lo, z1_hi = max(box[0][0], 0.0), box[0][1]
    if z1_hi <= z1_lo:
        return 0.0
    ranges = [make_range(k) for k in range(d, 1, -1)] + [(z1_lo, z1_hi)]
    val, _ = integrate.nquad(integrand, ranges, opts={"epsabs": 1e-11, "epsrel": 1e-9,
                                                      "limit": 200})
    return scale * val


def prelimit_measure_box(box, half_axes, beta: float, n: float, const: float) -> float:
    """``n P(T_n(V) in B)`` for the exact (pre-limit) law, by nested quadrature.

    ``V`` is the sample point shifted so the left pole sits at the origin;
    the density is ``const * (1 - z' Sigma^{-1} z)^beta`` on the ellipsoid.
    """
    axes = np.asarray(half_axes, dtype=float)
    d = axes.size
    nu = 1.0 / (d + 1 + 2 * beta)
    scale = [n ** (2 * nu)] + [n ** nu] * (d - 1)
    box = [(float(lo) / s, float(hi) / s) for (lo, hi), s in zip(box, scale)]

    def left_after(outer):
        # outer = (v_{k-1}, ..., v_2, v_1)
        left = 1.0 - ((outer[-1] - axes[0]) / axes[0]) ** 2
        for j, vj in enumerate(reversed(outer[:-1])):
            left -= (vj / axes[j + 1]) ** 2
        return left

    def integrand(*args):
        left = left_after(args)
        if left <= 0:
            return 0.0
        return left ** beta if beta != 0 else 1.0

    def make_range(k):
        def rng_(*outer):
            w = axes[k - 1] * math.sqrt(max(left_after(outer), 0.0))
            lo, hi = max(box[k - 1][0], -w), min(box[k - 1][1], w)
            return (lo, hi) if lo < hi else (0.0, 0.0)
        return rng_

    lo1, hi1 = max(box[0][0], 0.0), min(box[0][1], 2 * axes[0])
    if hi1 <= lo1:
        return 0.0
    ranges = [make_range(k) for k in range(d, 1, -1)] + [(lo1, hi1)]
    val, _ = integrate.nquad(integrand, ranges, opts={"epsabs": 1e-16, "epsrel": 1e-10,
                                                      "limit": 200})
    return n * const * val


def run_scaling_map_check(body, dist: DistributionSpec, n: float, reps: int, seed: int = 0,
                          box=None, chunk: int = 10 ** 6,
                          prelimit: bool = False) -> ExperimentReport:
    """Compare ``n P(T_n(V) in B)`` with the limit intensity of ``B``.

    ``V`` is a sample point shifted to the left-pole frame; ``reps`` is the
    number of sampled points.  The band is three binomial standard errors.
    With ``prelimit`` the exact finite-n value is reported as well, which
    separates Monte Carlo error from the O(n^{-2 nu}) approximation bias.
    """
    if not isinstance(body, Ellipsoid):
        raise ValueError("the scaling-map check needs an ellipsoid body")
    axes = np.asarray(body.half_axes)
    d = axes.size
    beta = dist.beta if dist.kind == "pearson2" else 0.0
    nu = 1.0 / (d + 1 + 2 * beta)
    if box is None:
        box = [(0.0, 2.0)] + [(-1.0, 1.0)] * (d - 1)
    box = np.asarray(box, dtype=float)
    scale = np.array([n ** (2 * nu)] + [n ** nu] * (d - 1))
    lo, hi = box[:, 0] / scale, box[:, 1] / scale
    if dist.kind == "pearson2":
        intensity = LambdaBeta(pearson2_constant(axes, beta), beta, tuple(axes))
    else:
        intensity = UniformDensity(1.0 / body.volume())
    start = time.perf_counter()
    hits = 0
    done = 0
    block = 0
    while done < reps:
        m = min(chunk, reps - done)
        gen = rngmod.stream(seed, rngmod.SCALING, block)
        pts = sample(body, dist, m, gen).points
        v = pts.copy()
        v[:, 0] += axes[0]
        hits += int(np.count_nonzero(np.all((v >= lo) & (v <= hi), axis=1)))
        done += m
        block += 1
    q = hits / reps
    estimate = n * q
    se = n * math.sqrt(max(q * (1 - q), 1.0 / reps) / reps)
    target = limit_measure_box(box, axes, intensity)
    row = {"estimate": estimate, "limit": target, "se": se, "hits": hits,
           "inside": bool(abs(estimate - target) <= 3 * se)}
    if prelimit:
        const = (pearson2_constant(axes, beta) if dist.kind == "pearson2"
                 else 1.0 / body.volume())
        row["prelimit"] = prelimit_measure_box(box, axes, beta, n, const)
    config = {"body": body_dict(body), "dist": dist.label(), "n": n, "reps": int(reps),
              "seed": int(seed), "box": box.tolist(), "nu": nu}
    return ExperimentReport(config=config, estimates=[row],
                            runtime_seconds=time.perf_counter() - start,
                            seeds={"master": int(seed)})


def body_dict(body) -> dict:
    if isinstance(body, Ellipsoid):
        return {"kind": "ellipsoid", "half_axes": list(body.half_axes)}
    if isinstance(body, PSuperellipsoid):
        return {"kind": "psuperellipsoid", "p": body.p, "half_axes": list(body.half_axes)}
    return {"kind": "polecaps", "a": body.a, "h_left": body.h_left.tolist(),
            "h_right": body.h_right.tolist()}
