"""Maximum interpoint distance, the k largest distances and scaled statistics.

``diameter_brute`` is the reference O(n^2) scan.  ``diameter_pruned``
returns the identical value: it first finds a lower bound ``L`` from a few
extreme points, then discards every point ``x`` with
``|x - c| + R_c < L`` for a handful of centres ``c`` (``R_c`` is the
largest distance from ``c``), and scans only the survivors.  By the
triangle inequality no pair at distance ``>= L`` is lost, for any p-norm.
Both paths evaluate distances with the same coordinate-wise kernel, so the
results agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BLOCK = 512
_BRUTE_BELOW = 48


class NotEnoughPairs(ValueError):
    pass


def _as_points(cloud) -> np.ndarray:
    pts = getattr(cloud, "points", cloud)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 1)
    return pts


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    return p


def pair_distances(X: np.ndarray, Y: np.ndarray, p: float = 2.0) -> np.ndarray:
    """Matrix of p-norm distances between rows of X and rows of Y."""
    d = X.shape[1]
    acc = np.zeros((X.shape[0], Y.shape[0]))
    for j in range(d):
        diff = np.abs(X[:, j, None] - Y[None, :, j])
        if p == 2.0:
            acc += diff * diff
        elif p == 1.0:
            acc += diff
        else:
            acc += diff ** p
    if p == 2.0:
        return np.sqrt(acc)
    if p == 1.0:
        return acc
    return acc ** (1.0 / p)


def _max_pairwise(pts: np.ndarray, p: float) -> float:
    n = pts.shape[0]
    best = 0.0
    for start in range(0, n, _BLOCK):
        block = pair_distances(pts[start:start + _BLOCK], pts[start:], p)
        best = max(best, float(block.max()))
    return best


def diameter_brute(cloud, p: float = 2.0) -> float:
    """Exact maximum over all pairs; 0 for fewer than two points."""
    p = _check_p(p)
    pts = _as_points(cloud)
    if pts.shape[0] < 2:
        return 0.0
    return _max_pairwise(pts, p)


def _seed_indices(pts: np.ndarray, p: float, extra: int = 0) -> np.ndarray:
    """Coordinate extremes plus a short farthest-point walk."""
    idx = list(np.argmin(pts, axis=0)) + list(np.argmax(pts, axis=0))
    cur = int(idx[0])
    for _ in range(3):
        cur = int(np.argmax(pair_distances(pts[cur:cur + 1], pts, p)[0]))
        idx.append(cur)
    if extra:
        centre = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
        r = pair_distances(centre[None, :], pts, p)[0]
        take = min(extra, pts.shape[0])
        idx.extend(np.argpartition(-r, take - 1)[:take].tolist())
    return np.unique(np.asarray(idx, dtype=int))


def _survivors(pts: np.ndarray, p: float, lower: float) -> np.ndarray:
    """Indices that can still belong to a pair at distance >= lower."""
    keep = np.ones(pts.shape[0], dtype=bool)
    centres = (0.5 * (pts.min(axis=0) + pts.max(axis=0)), pts.mean(axis=0))
    for c in centres:
        r = pair_distances(c[None, :], pts, p)[0]
        # relative slack covers rounding in the triangle-inequality bound
        slack = 1e-9 * (float(r.max()) + lower)
        keep &= r + float(r.max()) >= lower - slack
    return np.flatnonzero(keep)


def diameter_pruned(cloud, p: float = 2.0) -> float:
    p = _check_p(p)
    pts = _as_points(cloud)
    n = pts.shape[0]
    if n < 2:
        return 0.0
    if n <= _BRUTE_BELOW:
        return _max_pairwise(pts, p)
    seeds = pts[_seed_indices(pts, p)]
    lower = _max_pairwise(seeds, p)
    cand = pts[_survivors(pts, p, lower)]
    return _max_pairwise(cand, p)


def diameter(cloud, p: float = 2.0) -> float:
    return diameter_pruned(cloud, p)


# --------------------------------------------------------------------------
# k largest distances
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TopKDistances:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(a < b for a, b in zip(vals, vals[1:])) or (vals and vals[-1] < 0):
            raise ValueError("values must be nonincreasing and nonnegative")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _upper_values(pts: np.ndarray, p: float) -> np.ndarray:
    n = pts.shape[0]
    chunks = []
    for start in range(0, n, _BLOCK):
        block = pair_distances(pts[start:start + _BLOCK], pts[start:], p)
        rows, cols = np.triu_indices(block.shape[0], 1, m=block.shape[1])
        chunks.append(block[rows, cols])
    return np.concatenate(chunks) if chunks else np.empty(0)


def _top_k(values: np.ndarray, k: int) -> np.ndarray:
    if values.size > k:
        values = values[np.argpartition(-values, k - 1)[:k]]
    return np.sort(values)[::-1]


def k_largest(cloud, k: int, p: float = 2.0, pruned: bool = True) -> TopKDistances:
    """The k largest distances over unordered pairs i < j, descending.

    Equal distances from different pairs are separate entries.
    """
    p = _check_p(p)
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = _as_points(cloud)
    n = pts.shape[0]
    if n * (n - 1) // 2 < k:
        raise NotEnoughPairs(f"{n} points give {n * (n - 1) // 2} pairs < k = {k}")
    if not pruned or n <= _BRUTE_BELOW:
        return TopKDistances(tuple(_top_k(_upper_values(pts, p), k)))
    # enough seed points for at least k seed pairs
    extra = int(math.ceil(math.sqrt(2 * k))) + 1
    seeds = pts[_seed_indices(pts, p, extra=extra)]
    seed_vals = _upper_values(seeds, p)
    if seed_vals.size < k:
        return TopKDistances(tuple(_top_k(_upper_values(pts, p), k)))
    lower = float(_top_k(seed_vals, k)[-1])
    cand = pts[_survivors(pts, p, lower)]
    return TopKDistances(tuple(_top_k(_upper_values(cand, p), k)))


# --------------------------------------------------------------------------
# Scaled statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RateSpec:
    """Normalising sequence of ``2a - diameter``.

    kind is one of ``main`` (n^{2/(d+1)}), ``pearson`` (n^{2/(d+1+2 beta)}),
    ``pnorm`` (n^{p/(d+p-1)}) or ``multimajor`` (b_n with e major axes).
    """

    kind: str
    d: int
    beta: float = 0.0
    p: float = 2.0
    e: int = 1

    def __post_init__(self):
        if self.kind not in ("main", "pearson", "pnorm", "multimajor"):
            raise ValueError(f"unknown rate {self.kind!r}")
        if self.d < 2:
            raise ValueError("d must be >= 2")

    @property
    def exponent(self) -> float:
        d = self.d
        if self.kind == "main":
            return 2.0 / (d + 1)
        if self.kind == "pearson":
            return 2.0 / (d + 1 + 2 * self.beta)
        if self.kind == "pnorm":
            return self.p / (d + self.p - 1)
        return 4.0 / (2 * d - self.e + 4 * self.beta + 3)

    @property
    def prefactor(self) -> float:
        if self.kind != "multimajor":
            return 1.0
        from .limitlaw import bounds_distribution
        return bounds_distribution(self.d, self.e, self.beta).bn_prefactor

    def factor(self, n: float) -> float:
        return self.prefactor * float(n) ** self.exponent

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "beta": self.beta, "p": self.p, "e": self.e}


def scaled_statistic(diam_value, n: float, rate: RateSpec, a: float = 1.0):
    """``factor(n) * (2a - diam_value)``; ``n`` is the requested intensity."""
    return rate.factor(n) * (2.0 * a - np.asarray(diam_value, dtype=float))
