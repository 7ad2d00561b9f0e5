"""Poisson processes on truncated paraboloids and the limiting functionals.

The limit of the scaled ``2a - diameter`` is the minimum of
``x_1 + y_1 - |x~ - y~|^2 / (4a)`` over two independent Poisson processes
living on osculating paraboloids at the poles.  Simulation truncates the
paraboloids at height ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import betaincinv, gammaln

from .geometry import (DimensionMismatch, Ellipsoid, GeometryError, PoleCapGeometry,
                       PSuperellipsoid, _axes, eigendecompose_polecap, ellipsoid_hessian,
                       polecaps_of)
from .sampling import DistributionSpec, generalized_gaussian, pearson2_constant, pnorm_directions

DEFAULT_B = 10.0
MAX_RETRIES = 1000


class EmptyProcess(RuntimeError):
    pass


def _log_unit_ball(m: int) -> float:
    return 0.5 * m * math.log(math.pi) - gammaln(0.5 * m + 1)


# --------------------------------------------------------------------------
# Regions and intensities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedParaboloid:
    """``P(H) ∩ {z_1 <= b}`` or the p-variant ``P^p ∩ {z_1 <= b}``."""

    b: float
    geom: Optional[PoleCapGeometry] = None
    p: Optional[float] = None
    half_axes: Optional[tuple] = None

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("truncation height b must be positive")
        if (self.geom is None) == (self.p is None):
            raise ValueError("give either a pole-cap geometry or a p-norm variant")
        if self.p is not None:
            if not self.p >= 1:
                raise ValueError("p must be >= 1")
            object.__setattr__(self, "half_axes", tuple(float(a) for a in _axes(self.half_axes)))

    @classmethod
    def from_ellipsoid(cls, half_axes, b: float = DEFAULT_B) -> "TruncatedParaboloid":
        axes = _axes(half_axes)
        geom = eigendecompose_polecap(axes[0], ellipsoid_hessian(axes))
        return cls(b, geom=geom, half_axes=tuple(axes))

    @classmethod
    def pnorm(cls, p: float, half_axes, b: float = DEFAULT_B) -> "TruncatedParaboloid":
        return cls(b, p=float(p), half_axes=tuple(half_axes))

    @property
    def dim(self) -> int:
        return self.geom.dim if self.geom is not None else len(self.half_axes)

    def contains(self, z) -> np.ndarray:
        from .geometry import in_limit_set, in_limit_set_p
        pts = np.atleast_2d(z)
        if self.geom is not None:
            inside = in_limit_set(pts, self.geom)
        else:
            inside = in_limit_set_p(pts, self.p, self.half_axes)
        return inside & (pts[:, 0] <= self.b)

    def to_dict(self) -> dict:
        if self.geom is not None:
            return {"kind": "quadratic", "b": self.b, "a": self.geom.a,
                    "kappa": self.geom.kappa.tolist()}
        return {"kind": "pnorm", "b": self.b, "p": self.p, "half_axes": list(self.half_axes)}


@dataclass(frozen=True)
class UniformDensity:
    p_const: float

    def __post_init__(self):
        if not self.p_const > 0:
            raise ValueError("uniform intensity must be positive")

    def to_dict(self):
        return {"kind": "uniform", "p_const": self.p_const}


@dataclass(frozen=True)
class LambdaBeta:
    """``alpha * (2 z_1/a_1 - sum (z_k/a_k)^2)^beta`` on the ellipsoid paraboloid."""

    alpha: float
    beta: float
    half_axes: tuple

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta > -1:
            raise ValueError("beta must be > -1")
        object.__setattr__(self, "half_axes", tuple(float(a) for a in _axes(self.half_axes)))

    def to_dict(self):
        return {"kind": "lambda", "alpha": self.alpha, "beta": self.beta,
                "half_axes": list(self.half_axes)}


def _check_pairing(region: TruncatedParaboloid, intensity) -> None:
    if isinstance(intensity, LambdaBeta):
        if region.geom is None:
            raise GeometryError("Lambda_beta intensity needs the ellipsoid paraboloid, not P^p")
        axes = np.asarray(intensity.half_axes)
        if axes.size != region.dim:
            raise DimensionMismatch("intensity half-axes do not match the region dimension")
        expected = np.sort(axes[0] / axes[1:] ** 2)
        if not np.allclose(region.geom.kappa, expected, rtol=1e-9):
            raise GeometryError("Lambda_beta half-axes do not match the region curvature")
    elif not isinstance(intensity, UniformDensity):
        raise TypeError(f"unsupported intensity {intensity!r}")


def paraboloid_mass(region: TruncatedParaboloid, intensity) -> float:
    """Total intensity of the truncated region (closed form)."""
    _check_pairing(region, intensity)
    b, m = region.b, region.dim - 1
    if isinstance(intensity, UniformDensity):
        if region.geom is not None:
            # cross-section at height z1: ellipsoid with semi-axes sqrt(2 z1 / kappa_j)
            h = 0.5 * m + 1.0
            log_mass = (_log_unit_ball(m) + 0.5 * m * math.log(2.0)
                        - 0.5 * float(np.sum(np.log(region.geom.kappa)))
                        + h * math.log(b) - math.log(h))
        else:
            p, axes = region.p, np.asarray(region.half_axes)
            h = m / p + 1.0
            log_ball = m * (math.log(2.0) + gammaln(1.0 + 1.0 / p)) - gammaln(1.0 + m / p)
            log_mass = (log_ball + float(np.sum(np.log(axes[1:])))
                        + (m / p) * math.log(p / axes[0]) + h * math.log(b) - math.log(h))
        return intensity.p_const * math.exp(log_mass)
    beta, axes = intensity.beta, np.asarray(intensity.half_axes)
    h = beta + 0.5 * m + 1.0
    log_ball = (0.5 * m * math.log(math.pi) + gammaln(beta + 1.0)
                - gammaln(beta + 1.0 + 0.5 * m))
    log_mass = (float(np.sum(np.log(axes[1:]))) + (beta + 0.5 * m) * math.log(2.0 / axes[0])
                + h * math.log(b) - math.log(h) + log_ball)
    return intensity.alpha * math.exp(log_mass)


def _height_exponent(region: TruncatedParaboloid, intensity) -> float:
    """``h`` with ``mass(z_1 <= z) = mass(z_1 <= 1) * z^h``."""
    m = region.dim - 1
    if isinstance(intensity, LambdaBeta):
        return intensity.beta + 0.5 * m + 1.0
    if region.geom is not None:
        return 0.5 * m + 1.0
    return m / region.p + 1.0


def sample_prm(region: TruncatedParaboloid, intensity, rng, chunk: int = 32) -> np.ndarray:
    """One realisation of the Poisson process, as an ``(N, d)`` array.

    Points are generated as arrivals ordered by height: unit-rate arrival
    times ``G`` map to ``z_1 = (G / C)^(1/h)`` with ``C`` the mass below
    height 1.  Randomness is consumed in fixed chunks (exponential gaps,
    direction block, radial uniforms), so with the same generator state the
    process truncated at ``b`` is exactly the restriction of the process
    truncated at any ``b' > b``.
    """
    _check_pairing(region, intensity)
    d, m = region.dim, region.dim - 1
    h = _height_exponent(region, intensity)
    unit = paraboloid_mass(_with_b(region, 1.0), intensity)
    mass = unit * region.b ** h
    out = []
    total = 0.0
    while True:
        arrivals = total + np.cumsum(rng.standard_exponential(chunk))
        if region.p is None:
            dirs = _directions(rng, chunk, m)
        else:
            dirs = pnorm_directions(generalized_gaussian((chunk, m), region.p, rng), region.p)
        u_rad = rng.random(chunk)
        keep = int(np.searchsorted(arrivals, mass, side="right"))
        if keep:
            z1 = (arrivals[:keep] / unit) ** (1.0 / h)
            out.append(_place(region, intensity, z1, dirs[:keep], u_rad[:keep]))
        if keep < chunk:
            break
        total = arrivals[-1]
    return np.concatenate(out) if out else np.empty((0, d))


def _place(region, intensity, z1, dirs, u_rad) -> np.ndarray:
    """Points at heights ``z1`` in the cross-sections, from directions and radii."""
    m = dirs.shape[1]
    pts = np.empty((z1.size, m + 1))
    pts[:, 0] = z1
    if isinstance(intensity, LambdaBeta):
        beta, axes = intensity.beta, np.asarray(intensity.half_axes)
        # squared radius fraction ~ Beta(m/2, beta+1), via its complement
        frac = 1.0 - betaincinv(beta + 1.0, 0.5 * m, 1.0 - u_rad)
        scale = np.sqrt(2.0 * z1 / axes[0] * frac)
        pts[:, 1:] = dirs * scale[:, None] * axes[1:]
    elif region.geom is not None:
        w = dirs * (u_rad ** (1.0 / m))[:, None] * np.sqrt(2.0 * z1[:, None] / region.geom.kappa)
        pts[:, 1:] = w @ region.geom.U.T
    else:
        p, axes = region.p, np.asarray(region.half_axes)
        radius = (p * z1 / axes[0]) ** (1.0 / p) * u_rad ** (1.0 / m)
        pts[:, 1:] = dirs * radius[:, None] * axes[1:]
    return pts


def _with_b(region: TruncatedParaboloid, b: float) -> TruncatedParaboloid:
    return TruncatedParaboloid(b, geom=region.geom, p=region.p, half_axes=region.half_axes)


def _directions(rng, count: int, m: int) -> np.ndarray:
    g = rng.standard_normal((count, m))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# --------------------------------------------------------------------------
# Functionals
# --------------------------------------------------------------------------

def functional_G(x, y, a: float):
    """``x_1 + y_1 - |x~ - y~|^2 / (4a)``; broadcasts over leading axes."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    diff = x[..., 1:] - y[..., 1:]
    return x[..., 0] + y[..., 0] - np.sum(diff * diff, axis=-1) / (4.0 * a)


def functional_G_p(x, y, a1: float, p: float):
    """``x_1 + y_1 - |x~ - y~|_p^p / (p (2 a_1)^{p-1})``."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    diff = np.abs(x[..., 1:] - y[..., 1:])
    return x[..., 0] + y[..., 0] - np.sum(diff ** p, axis=-1) / (p * (2.0 * a1) ** (p - 1))


@dataclass
class LimitSample:
    t_values: tuple
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        t = tuple(float(v) for v in self.t_values)
        if any(a > b for a, b in zip(t, t[1:])):
            raise ValueError("t-values must be ascending")
        self.t_values = t


def limit_min_k(left_points, right_points, functional: Callable, k: int = 1) -> LimitSample:
    """The k smallest functional values over the cross product, ascending."""
    X = np.atleast_2d(np.asarray(left_points, float))
    Y = np.atleast_2d(np.asarray(right_points, float))
    if X.shape[0] == 0 or Y.shape[0] == 0 or X.size == 0 or Y.size == 0:
        raise EmptyProcess("a pole process has no points; increase b")
    if k < 1:
        raise ValueError("k must be >= 1")
    vals = np.asarray(functional(X[:, None, :], Y[None, :, :])).ravel()
    if vals.size < k:
        raise EmptyProcess(f"only {vals.size} pairs available for k = {k}")
    if vals.size > k:
        vals = vals[np.argpartition(vals, k - 1)[:k]]
    return LimitSample(tuple(np.sort(vals)))


def one_sided_limit(left_points, a1: float) -> float:
    """``min x_1 - |x~|^2 / (4 a_1)`` for the pole whose density vanishes slower."""
    X = np.atleast_2d(np.asarray(left_points, float))
    if X.shape[0] == 0 or X.size == 0:
        raise EmptyProcess("the process has no points; increase b")
    return float(np.min(X[:, 0] - np.sum(X[:, 1:] ** 2, axis=1) / (4.0 * a1)))


# --------------------------------------------------------------------------
# Limit configurations
# --------------------------------------------------------------------------

@dataclass
class LimitConfig:
    """Everything needed to draw one limit variable (or its k smallest values).

    ``one_sided`` selects the unequal-exponent Pearson case where only the
    left process (the larger beta) matters.
    """

    left_region: TruncatedParaboloid
    left_intensity: object
    right_region: TruncatedParaboloid
    right_intensity: object
    a: float
    p: float = 2.0
    one_sided: bool = False

    def __post_init__(self):
        _check_pairing(self.left_region, self.left_intensity)
        if not self.one_sided:
            _check_pairing(self.right_region, self.right_intensity)

    @property
    def functional(self) -> Callable:
        if self.p == 2.0 and self.left_region.p is None:
            return partial(functional_G, a=self.a)
        return partial(functional_G_p, a1=self.a, p=self.p)

    def masses(self) -> dict:
        out = {"left": paraboloid_mass(self.left_region, self.left_intensity)}
        if not self.one_sided:
            out["right"] = paraboloid_mass(self.right_region, self.right_intensity)
        return out

    def with_b(self, b: float) -> "LimitConfig":
        return LimitConfig(_with_b(self.left_region, b), self.left_intensity,
                           _with_b(self.right_region, b), self.right_intensity,
                           self.a, self.p, self.one_sided)

    def to_dict(self) -> dict:
        return {"a": self.a, "p": self.p, "one_sided": self.one_sided,
                "left": {"region": self.left_region.to_dict(),
                         "intensity": self.left_intensity.to_dict()},
                "right": {"region": self.right_region.to_dict(),
                          "intensity": self.right_intensity.to_dict()},
                "masses": self.masses()}


def draw_limit(config: LimitConfig, rng, k: int = 1) -> tuple:
    """One draw of ``(t_1..t_k)``; empty realisations are redrawn.

    ``rng`` is one generator or a ``(left, right)`` pair; separate streams
    keep the two poles coupled across truncation heights.  Returns
    ``(t_values, retries)``.
    """
    if config.one_sided and k != 1:
        raise ValueError("the one-sided limit is only defined for k = 1")
    left_rng, right_rng = (rng, rng) if isinstance(rng, np.random.Generator) else rng
    retries = 0
    while True:
        left = sample_prm(config.left_region, config.left_intensity, left_rng)
        if config.one_sided:
            if left.shape[0] > 0:
                return (one_sided_limit(left, config.a),), retries
        else:
            right = sample_prm(config.right_region, config.right_intensity, right_rng)
            if left.shape[0] * right.shape[0] >= k:
                return limit_min_k(left, right, config.functional, k).t_values, retries
        retries += 1
        if retries >= MAX_RETRIES:
            raise EmptyProcess(f"{retries} consecutive empty realisations; increase b")


def multi_axes_limit(configs: Sequence[LimitConfig], rng) -> float:
    """Minimum of independent single-axis limit variables, one per pole pair."""
    if len(configs) < 1:
        raise ValueError("need at least one pole-pair configuration")
    return min(draw_limit(cfg, rng, 1)[0][0] for cfg in configs)


def limit_config_for(body, dist: DistributionSpec, b: float = DEFAULT_B,
                     intensities: Optional[tuple] = None) -> LimitConfig:
    """Limit configuration implied by a body and a sampling law.

    Default intensities: ``1/m_d(E)`` for uniform laws (ellipsoid or
    superellipsoid), the Pearson constant ``c_1`` times ``Lambda_beta`` for
    Pearson Type II.  ``intensities`` overrides with ``(left, right)``.
    """
    if isinstance(body, PSuperellipsoid) or dist.kind == "uniform_p":
        p = body.p if isinstance(body, PSuperellipsoid) else dist.p
        region = TruncatedParaboloid.pnorm(p, body.half_axes, b)
        if intensities is None:
            dens = 1.0 / PSuperellipsoid(p, body.half_axes).volume()
            intensities = (UniformDensity(dens), UniformDensity(dens))
        return LimitConfig(region, intensities[0], region, intensities[1],
                           body.half_axes[0], p=p)
    if isinstance(body, Ellipsoid):
        region = TruncatedParaboloid.from_ellipsoid(body.half_axes, b)
        if intensities is None:
            if dist.kind == "pearson2":
                lam = LambdaBeta(pearson2_constant(body.half_axes, dist.beta), dist.beta,
                                 body.half_axes)
                intensities = (lam, lam)
            else:
                dens = 1.0 / body.volume()
                intensities = (UniformDensity(dens), UniformDensity(dens))
        return _config_from_intensities(region, region, intensities, body.a)
    # raw pole caps
    left, right = polecaps_of(body, strict=True)
    if intensities is None:
        raise ValueError("pole-cap bodies need explicit intensities")
    if any(isinstance(i, LambdaBeta) for i in intensities):
        raise GeometryError("Lambda_beta intensity needs an ellipsoid body")
    return LimitConfig(TruncatedParaboloid(b, geom=left), intensities[0],
                       TruncatedParaboloid(b, geom=right), intensities[1], body.a)


def _config_from_intensities(lregion, rregion, intensities, a) -> LimitConfig:
    left, right = intensities
    if (isinstance(left, LambdaBeta) and isinstance(right, LambdaBeta)
            and left.beta != right.beta):
        # the pole with the larger exponent dominates; the other collapses to 0
        slow = left if left.beta > right.beta else right
        return LimitConfig(lregion, slow, rregion, slow, a, one_sided=True)
    return LimitConfig(lregion, left, rregion, right, a)


# --------------------------------------------------------------------------
# Several equal major half-axes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundsDistribution:
    d: int
    e: int
    beta: float
    a: float
    alpha: float
    sigma: float
    bn_prefactor: float
    bn_exponent: float
    g_exponent: float

    def G(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return -np.expm1(-t ** self.g_exponent)

    def bn(self, n: float) -> float:
        return self.bn_prefactor * float(n) ** self.bn_exponent

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return (-np.log1p(-q)) ** (1.0 / self.g_exponent)

    def to_dict(self) -> dict:
        return {"d": self.d, "e": self.e, "beta": self.beta, "a": self.a, "alpha": self.alpha,
                "sigma": self.sigma, "bn_prefactor": self.bn_prefactor,
                "bn_exponent": self.bn_exponent, "g_exponent": self.g_exponent}


def bounds_distribution(d: int, e: int, beta: float) -> BoundsDistribution:
    """Constants of the projected-tail asymptotics and the bounding law G.

    ``P(1 - |Z̄| <= s) ~ a s^alpha`` for the projection onto the e major axes;
    ``G(t) = 1 - exp(-t^{(2d-e+4beta+3)/2})`` and
    ``b_n = (sigma/2)^{2/(2d-e+4beta+3)} n^{4/(2d-e+4beta+3)}``.
    """
    if d < 3:
        raise DimensionMismatch("need d >= 3")
    if not 2 <= e <= d - 1:
        raise DimensionMismatch(f"e must lie in [2, d-1] = [2, {d - 1}], got {e}")
    if not beta > -1:
        raise ValueError("beta must be > -1")
    alpha = 0.5 * (d - e) + beta + 1.0
    log_omega_e = _log_unit_ball(e)
    log_a = (gammaln(0.5 * d + beta + 1) - gammaln(0.5 * (d - e) + beta + 2)
             - 0.5 * e * math.log(math.pi) + math.log(e) + log_omega_e
             + (0.5 * (d - e) + beta) * math.log(2.0))
    log_sigma = ((e - 2) * math.log(2.0) + gammaln(0.5 * e) + 2 * log_a
                 + 2 * gammaln(alpha + 1) - 0.5 * math.log(math.pi)
                 - gammaln(0.5 * (e + 1) + 2 * alpha))
    gamma_ = 2 * d - e + 4 * beta + 3
    sigma = math.exp(log_sigma)
    return BoundsDistribution(
        d=d, e=e, beta=float(beta), a=math.exp(log_a), alpha=alpha, sigma=sigma,
        bn_prefactor=(sigma / 2.0) ** (2.0 / gamma_), bn_exponent=4.0 / gamma_,
        g_exponent=gamma_ / 2.0)
