"""Direct samplers for the uniform, Pearson Type II and p-superellipsoid laws.

All samplers draw, in this order, a ``(count, d)`` block of direction
variates and then a ``count`` vector of uniforms for the radius.  Keeping
that order fixed means the uniform-ellipsoid, Pearson (beta = 0) and
p = 2 superellipsoid samplers consume a stream identically and produce
the same points from the same generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import betaincinv, gammaln

from .geometry import Ellipsoid, GeometryError, PSuperellipsoid, _axes

# keeps re-scaled points strictly inside E despite rounding; moves no point by more
# than 1e-12
_ONE_MINUS = 1.0 - 1e-12


class BetaOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    kind: str                    # "uniform" | "pearson2" | "uniform_p"
    beta: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("uniform", "pearson2", "uniform_p"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.kind == "pearson2" and not self.beta > -1:
            raise BetaOutOfRange(f"Pearson Type II needs beta > -1, got {self.beta}")
        if self.kind == "uniform_p" and not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse ``uniform``, ``pearson:<beta>`` or ``uniform-p:<p>``."""
        name, _, arg = text.partition(":")
        if name == "uniform" and not arg:
            return cls("uniform")
        if name == "pearson" and arg:
            return cls("pearson2", beta=float(arg))
        if name == "uniform-p" and arg:
            return cls("uniform_p", p=float(arg))
        raise ValueError(f"cannot parse distribution {text!r}")

    def label(self) -> str:
        if self.kind == "pearson2":
            return f"pearson:{self.beta!r}"
        if self.kind == "uniform_p":
            return f"uniform-p:{self.p!r}"
        return "uniform"


@dataclass
class PointCloud:
    points: np.ndarray
    n_requested: int
    mode: str = "fixed"
    seed: Optional[int] = None
    body: object = None
    dist: Optional[DistributionSpec] = None

    def __len__(self):
        return self.points.shape[0]


def _unit_directions(gauss: np.ndarray) -> np.ndarray:
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def sample_uniform_ellipsoid(half_axes, count: int, rng) -> PointCloud:
    axes = _axes(half_axes)
    d = axes.size
    g = rng.standard_normal((count, d))
    u = rng.random(count)
    pts = _unit_directions(g) * (u ** (1.0 / d))[:, None] * axes
    return PointCloud(pts, count, body=Ellipsoid(tuple(axes)), dist=DistributionSpec("uniform"))


def pearson2_constant(half_axes, beta: float) -> float:
    """Normalising constant ``Gamma(d/2+beta+1) / (Gamma(beta+1) pi^{d/2} prod a_i)``."""
    axes = _axes(half_axes)
    d = axes.size
    return math.exp(gammaln(0.5 * d + beta + 1) - gammaln(beta + 1)
                    - 0.5 * d * math.log(math.pi) - float(np.sum(np.log(axes))))


def pearson2_density(points, half_axes, beta: float) -> np.ndarray:
    axes = _axes(half_axes)
    q = np.sum((np.atleast_2d(points) / axes) ** 2, axis=1)
    out = np.zeros_like(q)
    inside = q < 1
    out[inside] = pearson2_constant(axes, beta) * (1 - q[inside]) ** beta
    return out


def sample_pearson2(half_axes, beta: float, count: int, rng) -> PointCloud:
    """Pearson Type II on the ellipsoid interior.

    The squared normalised radius is Beta(d/2, beta+1); it is drawn by
    inverting the complementary Beta(beta+1, d/2) law so that points near
    the boundary keep full relative precision when beta < 0.
    """
    if not beta > -1:
        raise BetaOutOfRange(f"Pearson Type II needs beta > -1, got {beta}")
    axes = _axes(half_axes)
    d = axes.size
    g = rng.standard_normal((count, d))
    u = rng.random(count)
    gap = betaincinv(beta + 1.0, 0.5 * d, 1.0 - u)
    r2 = np.minimum(1.0 - gap, _ONE_MINUS)
    pts = _unit_directions(g) * np.sqrt(r2)[:, None] * axes
    return PointCloud(pts, count, body=Ellipsoid(tuple(axes)),
                      dist=DistributionSpec("pearson2", beta=beta))


def generalized_gaussian(shape, p: float, rng) -> np.ndarray:
    """Variates with density proportional to ``exp(-|t|^p)`` (up to scale at p=2)."""
    if p == 2.0:
        # exp(-t^2) is a scaled normal; scale is irrelevant after normalisation
        return rng.standard_normal(shape)
    mag = rng.gamma(1.0 / p, size=shape) ** (1.0 / p)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * mag


def pnorm_directions(gauss: np.ndarray, p: float) -> np.ndarray:
    norm = np.sum(np.abs(gauss) ** p, axis=1) ** (1.0 / p)
    return gauss / norm[:, None]


def sample_uniform_psuperellipsoid(half_axes, p: float, count: int, rng) -> PointCloud:
    if not p >= 1:
        raise GeometryError(f"p must be >= 1, got {p}")
    axes = _axes(half_axes)
    d = axes.size
    g = generalized_gaussian((count, d), p, rng)
    u = rng.random(count)
    pts = pnorm_directions(g, p) * (u ** (1.0 / d))[:, None] * axes
    return PointCloud(pts, count, body=PSuperellipsoid(p, tuple(axes)),
                      dist=DistributionSpec("uniform_p", p=p))


def poissonized_count(n: float, rng) -> int:
    if not n > 0:
        raise ValueError("Poisson intensity n must be positive")
    return int(rng.poisson(n))


def sample(body, dist: DistributionSpec, count: int, rng) -> PointCloud:
    """Dispatch on the distribution; the body supplies the half-axes."""
    if dist.kind == "uniform":
        if isinstance(body, PSuperellipsoid):
            return sample_uniform_psuperellipsoid(body.half_axes, body.p, count, rng)
        return sample_uniform_ellipsoid(body.half_axes, count, rng)
    if dist.kind == "pearson2":
        if not isinstance(body, Ellipsoid):
            raise GeometryError("Pearson Type II is defined on ellipsoids only")
        return sample_pearson2(body.half_axes, dist.beta, count, rng)
    if dist.kind == "uniform_p":
        return sample_uniform_psuperellipsoid(body.half_axes, dist.p, count, rng)
    raise ValueError(dist.kind)


def draw_cloud(body, dist: DistributionSpec, n: int, mode: str, point_rng, count_rng,
               seed: Optional[int] = None) -> PointCloud:
    """One sample of size ``n`` (fixed) or Poisson(n) (poissonized).

    The count comes from its own stream, so both modes share the points
    stream and the first ``min(N, n)`` points coincide.
    """
    if mode == "fixed":
        count = int(n)
    elif mode == "poissonized":
        count = poissonized_count(n, count_rng)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    cloud = sample(body, dist, count, point_rng)
    cloud.n_requested = int(n)
    cloud.mode = mode
    cloud.seed = seed
    cloud.body = body
    return cloud


def density_at_poles(body, dist: DistributionSpec) -> float:
    """Density value at the poles for the bounded-density families."""
    if dist.kind == "pearson2":
        raise ValueError("Pearson Type II density is not finite and positive at the "
                         "poles unless beta = 0; use its Lambda_beta constant")
    if isinstance(body, PSuperellipsoid) or dist.kind == "uniform_p":
        p = body.p if isinstance(body, PSuperellipsoid) else dist.p
        return 1.0 / PSuperellipsoid(p, body.half_axes).volume()
    return 1.0 / Ellipsoid(body.half_axes).volume()
