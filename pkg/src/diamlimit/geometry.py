"""Bodies, pole-cap curvature and the unique-diameter conditions.

A body with a unique diameter of length ``2a`` along the first axis is
described near its two poles by the Hessians ``H_l`` and ``H_r`` of the
boundary graph functions.  This module eigendecomposes that data and
decides whether the curvature block matrix ``A(eta)`` is positive
semi-definite for some ``eta < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

PSD_TOL = 1e-8
ETA_WIDTH = 1e-6
SYMMETRY_TOL = 1e-10


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class NonUniqueAxis(GeometryError):
    pass


class NotPositiveDefinite(GeometryError):
    pass


class Lemma1Violated(GeometryError):
    """A principal curvature does not exceed ``1/(2a)``."""


class DimensionMismatch(GeometryError):
    pass


def _axes(half_axes) -> np.ndarray:
    axes = np.asarray(half_axes, dtype=float).ravel()
    if axes.size < 2:
        raise DimensionMismatch("dimension d must be at least 2")
    if np.any(axes <= 0) or not np.all(np.isfinite(axes)):
        raise GeometryError("half-axes must be positive and finite")
    return axes


# --------------------------------------------------------------------------
# Bodies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Ellipsoid:
    half_axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "half_axes", tuple(float(a) for a in _axes(self.half_axes)))

    @property
    def dim(self) -> int:
        return len(self.half_axes)

    @property
    def a(self) -> float:
        return self.half_axes[0]

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.sum((pts / np.asarray(self.half_axes)) ** 2, axis=1) <= 1.0

    def volume(self) -> float:
        d = self.dim
        return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1)
                        + float(np.sum(np.log(self.half_axes))))


@dataclass(frozen=True)
class PSuperellipsoid:
    p: float
    half_axes: tuple

    def __post_init__(self):
        if not self.p >= 1:
            raise GeometryError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "half_axes", tuple(float(a) for a in _axes(self.half_axes)))

    @property
    def dim(self) -> int:
        return len(self.half_axes)

    @property
    def a(self) -> float:
        return self.half_axes[0]

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.sum(np.abs(pts / np.asarray(self.half_axes)) ** self.p, axis=1) <= 1.0

    def volume(self) -> float:
        """Lebesgue volume ``(2 Gamma(1+1/p))^d prod(a_i) / Gamma(1+d/p)``."""
        d, p = self.dim, self.p
        log_v = (d * (math.log(2.0) + gammaln(1.0 + 1.0 / p)) - gammaln(1.0 + d / p)
                 + float(np.sum(np.log(self.half_axes))))
        return math.exp(log_v)


@dataclass(frozen=True)
class PoleCaps:
    """Raw pole-cap data: half-diameter and the two boundary Hessians."""

    a: float
    h_left: np.ndarray
    h_right: np.ndarray

    def __post_init__(self):
        if not self.a > 0:
            raise GeometryError("half-diameter a must be positive")
        hl = _symmetric(self.h_left, "h_left")
        hr = _symmetric(self.h_right, "h_right")
        if hl.shape != hr.shape:
            raise DimensionMismatch("h_left and h_right must have the same shape")
        object.__setattr__(self, "h_left", hl)
        object.__setattr__(self, "h_right", hr)

    @property
    def dim(self) -> int:
        return self.h_left.shape[0] + 1


def _symmetric(h, name: str = "H") -> np.ndarray:
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix")
    if np.max(np.abs(h - h.T), initial=0.0) > SYMMETRY_TOL:
        raise GeometryError(f"{name} is not symmetric")
    return 0.5 * (h + h.T)


def unique_major_axis(half_axes) -> bool:
    axes = _axes(half_axes)
    return bool(axes[0] > axes[1] and np.all(np.diff(axes[1:]) <= 0))


def ellipsoid_hessian(half_axes) -> np.ndarray:
    """Hessian of both pole caps of an ellipsoid, ``diag(a_1 / a_j^2)``."""
    axes = _axes(half_axes)
    if not axes[0] > axes[1]:
        raise NonUniqueAxis(
            f"half-axes {[float(v) for v in axes]} have no unique major axis (need a1 > a2)")
    if np.any(np.diff(axes[1:]) > 0):
        raise GeometryError("half-axes must be sorted: a1 > a2 >= ... >= ad")
    return np.diag(axes[0] / axes[1:] ** 2)


# --------------------------------------------------------------------------
# Pole caps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PoleCapGeometry:
    a: float
    kappa: np.ndarray   # ascending principal curvatures kappa_2..kappa_d
    U: np.ndarray       # columns are the matching unit eigenvectors
    lemma1_ok: bool

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.kappa)

    @property
    def H(self) -> np.ndarray:
        return self.U @ np.diag(self.kappa) @ self.U.T

    @property
    def dim(self) -> int:
        return self.kappa.size + 1


def eigendecompose_polecap(a: float, H, strict: bool = True) -> PoleCapGeometry:
    """Orthogonal eigendecomposition of a pole-cap Hessian.

    With ``strict`` (the default for limit-law work) a non positive definite
    ``H`` or a curvature ``kappa_2 <= 1/(2a)`` raises; otherwise the flag
    ``lemma1_ok`` records the outcome.
    """
    if not a > 0:
        raise GeometryError("half-diameter a must be positive")
    H = _symmetric(H)
    kappa, U = np.linalg.eigh(H)
    # canonical sign: largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    lemma1_ok = bool(kappa[0] > 1.0 / (2.0 * a))
    if strict:
        if kappa[0] <= 0:
            raise NotPositiveDefinite(f"H has eigenvalue {kappa[0]:.6g} <= 0")
        if not lemma1_ok:
            raise Lemma1Violated(
                f"kappa_2 = {kappa[0]:.6g} is not larger than 1/(2a) = {0.5 / a:.6g}")
    return PoleCapGeometry(float(a), kappa, U, lemma1_ok)


def polecaps_of(body, strict: bool = True) -> tuple:
    """Left and right pole-cap geometry of an ellipsoid or raw pole caps."""
    if isinstance(body, Ellipsoid):
        H = ellipsoid_hessian(body.half_axes)
        g = eigendecompose_polecap(body.a, H, strict=strict)
        return g, g
    if isinstance(body, PSuperellipsoid):
        if body.p != 2.0:
            raise GeometryError(
                "Euclidean pole-cap curvature is only defined here for p = 2")
        return polecaps_of(Ellipsoid(body.half_axes), strict=strict)
    if isinstance(body, PoleCaps):
        return (eigendecompose_polecap(body.a, body.h_left, strict=strict),
                eigendecompose_polecap(body.a, body.h_right, strict=strict))
    raise TypeError(f"unsupported body {body!r}")


def build_A(eta: float, left: PoleCapGeometry, right: PoleCapGeometry) -> np.ndarray:
    if not math.isclose(left.a, right.a, rel_tol=1e-12):
        raise GeometryError("both poles must share the same half-diameter a")
    m = left.kappa.size
    if right.kappa.size != m:
        raise DimensionMismatch("pole caps have different dimensions")
    a = left.a
    eye = np.eye(m)
    cross = left.U.T @ right.U
    A = np.empty((2 * m, 2 * m))
    A[:m, :m] = 2 * a * eta * np.diag(left.kappa) - eye
    A[m:, m:] = 2 * a * eta * np.diag(right.kappa) - eye
    A[:m, m:] = cross
    A[m:, :m] = cross.T
    return A


def min_eigenvalue(eta: float, left: PoleCapGeometry, right: PoleCapGeometry) -> float:
    return float(np.linalg.eigvalsh(build_A(eta, left, right))[0])


@dataclass
class ConditionReport:
    lemma1_ok: dict
    sufficient_ok: bool
    eta_star: Optional[float]
    verdict: str
    lambda_min_at_1: float
    witness: Optional[list] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "lemma1_ok": dict(self.lemma1_ok),
            "sufficient_ok": self.sufficient_ok,
            "eta_star": self.eta_star,
            "lambda_min_at_1": self.lambda_min_at_1,
            "witness": self.witness,
            "notes": list(self.notes),
        }


def check_sufficient(left: PoleCapGeometry, right: PoleCapGeometry) -> bool:
    """Strict curvature criterion ``1/kappa_2^l + 1/kappa_2^r < 2a``."""
    kl, kr = left.kappa[0], right.kappa[0]
    if kl <= 0 or kr <= 0:
        return False
    return bool(1.0 / kl + 1.0 / kr < 2.0 * left.a)


def check_condition3(left: PoleCapGeometry, right: PoleCapGeometry,
                     tol: float = PSD_TOL, width: float = ETA_WIDTH) -> ConditionReport:
    if not tol > 0:
        raise ValueError("tol must be positive")
    lemma1 = {"left": left.lemma1_ok, "right": right.lemma1_ok}
    sufficient = check_sufficient(left, right)
    A1 = build_A(1.0, left, right)
    w, v = np.linalg.eigh(A1)
    lam1 = float(w[0])
    if lam1 < -tol or not (left.lemma1_ok and right.lemma1_ok):
        notes = []
        if not (left.lemma1_ok and right.lemma1_ok):
            notes.append("a principal curvature is <= 1/(2a); no unique diameter")
        if lam1 < -tol:
            notes.append("A(1) is not positive semi-definite")
        return ConditionReport(lemma1, sufficient, None, "FAIL", lam1,
                               witness=v[:, 0].tolist(), notes=notes)

    # lambda_min(A(eta)) is nondecreasing in eta; A(0) always has eigenvalue -2
    lo, hi = 0.0, 1.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if min_eigenvalue(mid, left, right) >= -tol:
            hi = mid
        else:
            lo = mid
    if hi < 1.0 - tol:
        return ConditionReport(lemma1, sufficient, hi, "PASS", lam1)
    return ConditionReport(
        lemma1, sufficient, hi, "INDETERMINATE", lam1,
        notes=["A(1) is positive semi-definite but A(eta) is not for any eta < 1; "
               "uniqueness of the diameter is not decided by pole curvature"])


def check_body(body, tol: float = PSD_TOL) -> ConditionReport:
    left, right = polecaps_of(body, strict=False)
    return check_condition3(left, right, tol=tol)


# --------------------------------------------------------------------------
# Limit sets and the equator bound
# --------------------------------------------------------------------------

def in_limit_set(z, geom) -> np.ndarray:
    """Membership in the osculating paraboloid ``{1/2 z~' H z~ <= z_1}``.

    ``geom`` is a PoleCapGeometry or a Hessian matrix.  Accepts one point or
    an array of points; returns a bool or a bool array accordingly.
    """
    H = geom.H if isinstance(geom, PoleCapGeometry) else np.atleast_2d(np.asarray(geom, float))
    z = np.asarray(z, dtype=float)
    pts = np.atleast_2d(z)
    zt = pts[:, 1:]
    out = 0.5 * np.einsum("ij,jk,ik->i", zt, H, zt) <= pts[:, 0]
    return bool(out[0]) if z.ndim == 1 else out


def in_limit_set_p(z, p: float, half_axes) -> np.ndarray:
    """Membership in ``{sum_{k>=2} (|z_k|/a_k)^p <= p z_1 / a_1}``."""
    axes = _axes(half_axes)
    z = np.asarray(z, dtype=float)
    pts = np.atleast_2d(z)
    lhs = np.sum(np.abs(pts[:, 1:] / axes[1:]) ** p, axis=1)
    out = lhs <= p * pts[:, 0] / axes[0]
    return bool(out[0]) if z.ndim == 1 else out


def g_bound(x_bar, y_bar, a_next: float) -> float:
    """Upper bound on ``|x - y|`` from the projections onto the major subspace.

    ``sqrt((|x̄| + |ȳ|)^2 + 2 a_next^2 (2 - |x̄|^2 - |ȳ|^2))`` where ``a_next``
    is the largest non-major half-axis.  Vectorised over leading axes.
    """
    nx = np.linalg.norm(np.asarray(x_bar, float), axis=-1)
    ny = np.linalg.norm(np.asarray(y_bar, float), axis=-1)
    return np.sqrt((nx + ny) ** 2 + 2.0 * a_next ** 2 * (2.0 - nx ** 2 - ny ** 2))


def parse_body(kind: str, axes: Sequence[float] = None, p: float = None,
               a: float = None, h_left=None, h_right=None):
    if kind == "ellipsoid":
        return Ellipsoid(tuple(axes))
    if kind == "psuperellipsoid":
        return PSuperellipsoid(p, tuple(axes))
    if kind == "polecaps":
        return PoleCaps(a, np.asarray(h_left, float), np.asarray(h_right, float))
    raise GeometryError(f"unknown body kind {kind!r}")
