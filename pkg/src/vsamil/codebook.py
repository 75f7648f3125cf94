"""Codebook learning: Lloyd k-means over encoded instances, quantization,
and cluster-count diagnostics (inertia curve, silhouette)."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import ConfigError, NumericalError

N_RESTARTS = 5
MAX_ITERS = 300
TOL = 1e-6


@dataclass
class Codebook:
    centroids: np.ndarray  # (k, d)
    inertia: float
    seed: int

    @property
    def k(self):
        return self.centroids.shape[0]

    def to_json(self):
        return {"k": self.k, "seed": self.seed, "inertia": self.inertia,
                "centroids": self.centroids.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(np.ascontiguousarray(doc["centroids"], dtype=np.float64),
                   float(doc["inertia"]), int(doc["seed"]))


def _plus_plus_init(points, k, rng):
    """k-means++ seeding: spread initial centroids by squared distance."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i:] = points[rng.integers(n, size=k - i)]
            break
        centroids[i] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _assign_filling_empties(points, centroids, k):
    """Assignment pass that re-seeds any empty centroid to the farthest point."""
    labels, sqdists = kernels.assign_nearest(points, centroids)
    counts = np.bincount(labels, minlength=k)
    while np.any(counts == 0):
        if sqdists.max() <= 0.0:
            raise NumericalError(
                f"cannot fill {k} clusters: fewer than {k} distinct points")
        empty = int(np.argmin(counts))
        far = int(np.argmax(sqdists))
        centroids[empty] = points[far]
        labels, sqdists = kernels.assign_nearest(points, centroids)
        counts = np.bincount(labels, minlength=k)
    return labels, sqdists


def _lloyd(points, k, rng):
    centroids = _plus_plus_init(points, k, rng)
    prev_inertia = np.inf
    for _ in range(MAX_ITERS):
        labels, sqdists = _assign_filling_empties(points, centroids, k)
        inertia = float(sqdists.sum())
        if inertia > prev_inertia * (1.0 + 1e-12) + 1e-12:
            raise NumericalError(f"inertia increased during Lloyd iteration: "
                                 f"{prev_inertia} -> {inertia}")
        new_centroids, _ = kernels.centroid_update(points, labels, k)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < TOL:
            break
        prev_inertia = inertia
    labels, sqdists = _assign_filling_empties(points, centroids, k)
    return centroids, labels, float(sqdists.sum())


def kmeans_fit(points, k, seed, restarts=N_RESTARTS):
    """Best of ``restarts`` seeded Lloyd runs with k-means++ starts."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if k < 1:
        raise ConfigError(f"cluster count must be >= 1, got {k}")
    if points.shape[0] < k:
        raise ConfigError(f"{points.shape[0]} points cannot form {k} clusters")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC10]))
    best = None
    for _ in range(restarts):
        centroids, _, inertia = _lloyd(points, k, rng)
        if best is None or inertia < best[1]:
            best = (centroids, inertia)
    return Codebook(np.ascontiguousarray(best[0]), best[1], int(seed))


def quantize(codebook, vectors):
    """Replace each vector with its nearest centroid; ties take the lowest index.

    Returns (centroid_rows, indices); accepts one vector or a matrix.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    mat = np.ascontiguousarray(np.atleast_2d(arr))
    if mat.shape[1] != codebook.centroids.shape[1]:
        raise ConfigError(f"vector dim {mat.shape[1]} != codebook dim "
                          f"{codebook.centroids.shape[1]}")
    labels, _ = kernels.assign_nearest(mat, codebook.centroids)
    rows = codebook.centroids[labels]
    if single:
        return rows[0], int(labels[0])
    return rows, labels


def cluster_diagnostics(points, k_range, seed):
    """Inertia and mean silhouette per candidate cluster count.

    Feeds elbow / silhouette model-selection curves.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    rows = []
    for k in k_range:
        if not 2 <= k <= n - 1:
            raise ConfigError(f"silhouette needs 2 <= k <= n-1, got k={k}, n={n}")
        book = kmeans_fit(points, k, seed)
        labels, _ = kernels.assign_nearest(points, book.centroids)
        rows.append({"k": int(k), "inertia": book.inertia,
                     "silhouette": float(np.mean(silhouette_values(points, labels, k)))})
    return rows


def silhouette_values(points, labels, k):
    """Per-point silhouette in [-1, 1]; singleton clusters score 0."""
    own, other = kernels.silhouette_mean_dists(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(labels, dtype=np.int64), int(k))
    counts = np.bincount(labels, minlength=k)
    denom = np.maximum(own, other)
    values = np.where(denom > 0, (other - own) / np.where(denom > 0, denom, 1.0), 0.0)
    values[counts[labels] == 1] = 0.0
    return values
