"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a pure-numpy implementation (``py_*``) and a
numba ``@njit`` version compiled from the same scalar loops. The public
names bind to the numba build unless the ``VSAMIL_NO_NUMBA`` environment
variable is set (or numba is unavailable), in which case the numpy path
is used. ``benchmarks/bench_kernels.py`` times both.

All kernels are single-threaded and avoid fastmath so that a given
backend is bit-reproducible run to run.
"""

import os

import numpy as np

_FLAG = os.environ.get("VSAMIL_NO_NUMBA", "").strip().lower()
_WANT_NUMBA = _FLAG not in ("1", "true", "yes")

try:
    if _WANT_NUMBA:
        from numba import njit
    else:
        njit = None
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

NUMBA_ENABLED = njit is not None


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def py_assign_nearest(points, centroids):
    """Nearest centroid per point: (labels, squared distances).

    Ties resolve to the lowest centroid index.
    """
    # chunk to keep the (n, k) distance block small
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sqdists = np.empty(n, dtype=np.float64)
    step = max(1, 2_000_000 // max(1, centroids.shape[0] * centroids.shape[1]))
    for start in range(0, n, step):
        block = points[start:start + step]
        diff = block[:, None, :] - centroids[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        idx = np.argmin(d2, axis=1)
        labels[start:start + step] = idx
        sqdists[start:start + step] = d2[np.arange(len(block)), idx]
    return labels, sqdists


def py_centroid_update(points, labels, k):
    """Mean of the points owned by each centroid: (centroids, counts)."""
    d = points.shape[1]
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    np.add.at(sums, labels, points)
    centroids = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], 0.0)
    return centroids, counts


def py_adamw_update(param, grad, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """One decoupled-weight-decay Adam step, in place on flat float64 arrays."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param *= 1.0 - lr * weight_decay
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def py_bag_concept_responses(instances, offsets, concepts):
    """Per-bag, per-concept best instance response.

    ``instances`` is the (M, d) stack of all bags' rows, ``offsets`` the
    (B+1,) row boundaries. Returns (winner_val (B, K), winner_idx (B, K))
    where winner_idx is relative to the bag start and ties take the first
    index. Bag scores are ``winner_val.min(axis=1)`` plus the bias, left
    to the caller.

    Responses are computed row by row so a given instance scores
    identically whatever batch it sits in; a whole-matrix matmul would let
    BLAS tiling wobble the last ulp with batch size and break the exact
    never-decreases guarantee the audits rely on.
    """
    n_bags = offsets.shape[0] - 1
    k = concepts.shape[0]
    winner_val = np.empty((n_bags, k), dtype=np.float64)
    winner_idx = np.empty((n_bags, k), dtype=np.int64)
    concepts_t = np.ascontiguousarray(concepts.T)
    responses = np.empty((instances.shape[0], k))
    for row in range(instances.shape[0]):
        responses[row] = instances[row] @ concepts_t
    for b in range(n_bags):
        block = responses[offsets[b]:offsets[b + 1]]
        winner_idx[b] = np.argmax(block, axis=0)
        winner_val[b] = block[winner_idx[b], np.arange(k)]
    return winner_val, winner_idx


def py_silhouette_mean_dists(points, labels, k):
    """Per-point (own-cluster mean distance, nearest-other mean distance)."""
    n = points.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((n, k), dtype=np.float64)
    step = max(1, 50_000_000 // max(1, 8 * n))
    for start in range(0, n, step):
        block = points[start:start + step]
        d2 = (
            np.sum(block * block, axis=1)[:, None]
            - 2.0 * block @ points.T
            + np.sum(points * points, axis=1)[None, :]
        )
        np.maximum(d2, 0.0, out=d2)
        dists = np.sqrt(d2)
        for j in range(k):
            sums[start:start + step, j] = dists[:, labels == j].sum(axis=1)
    own = np.zeros(n)
    other = np.zeros(n)
    for i in range(n):
        li = labels[i]
        own[i] = sums[i, li] / (counts[li] - 1) if counts[li] > 1 else 0.0
        best = np.inf
        for j in range(k):
            if j != li and counts[j] > 0:
                best = min(best, sums[i, j] / counts[j])
        other[i] = best
    return own, other


# ---------------------------------------------------------------------------
# numba builds
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _nb_assign_nearest(points, centroids):
        n, d = points.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        sqdists = np.empty(n, dtype=np.float64)
        for i in range(n):
            best = np.inf
            besti = 0
            for c in range(k):
                acc = 0.0
                for j in range(d):
                    diff = points[i, j] - centroids[c, j]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    besti = c
            labels[i] = besti
            sqdists[i] = best
        return labels, sqdists

    @njit(cache=True)
    def _nb_centroid_update(points, labels, k):
        n, d = points.shape
        sums = np.zeros((k, d), dtype=np.float64)
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            li = labels[i]
            counts[li] += 1
            for j in range(d):
                sums[li, j] += points[i, j]
        for c in range(k):
            if counts[c] > 0:
                for j in range(d):
                    sums[c, j] /= counts[c]
        return sums, counts

    @njit(cache=True)
    def _nb_adamw_update(param, grad, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
        decay = 1.0 - lr * weight_decay
        for i in range(param.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
            param[i] = decay * param[i] - lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)

    @njit(cache=True)
    def _nb_bag_concept_responses(instances, offsets, concepts):
        # per-row scalar accumulation: results are batch-size invariant,
        # which the exact monotonicity guarantee needs (see numpy twin)
        n_bags = offsets.shape[0] - 1
        k, d = concepts.shape
        winner_val = np.empty((n_bags, k), dtype=np.float64)
        winner_idx = np.empty((n_bags, k), dtype=np.int64)
        for b in range(n_bags):
            start = offsets[b]
            end = offsets[b + 1]
            for c in range(k):
                best = -np.inf
                besti = 0
                for row in range(start, end):
                    acc = 0.0
                    for j in range(d):
                        acc += instances[row, j] * concepts[c, j]
                    if acc > best:
                        best = acc
                        besti = row - start
                winner_val[b, c] = best
                winner_idx[b, c] = besti
        return winner_val, winner_idx

    @njit(cache=True)
    def _nb_silhouette_mean_dists(points, labels, k):
        n, d = points.shape
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            counts[labels[i]] += 1
        sums = np.zeros((n, k), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for t in range(d):
                    diff = points[i, t] - points[j, t]
                    acc += diff * diff
                dist = np.sqrt(acc)
                sums[i, labels[j]] += dist
                sums[j, labels[i]] += dist
        own = np.zeros(n, dtype=np.float64)
        other = np.zeros(n, dtype=np.float64)
        for i in range(n):
            li = labels[i]
            own[i] = sums[i, li] / (counts[li] - 1) if counts[li] > 1 else 0.0
            best = np.inf
            for j in range(k):
                if j != li and counts[j] > 0:
                    cand = sums[i, j] / counts[j]
                    if cand < best:
                        best = cand
            other[i] = best
        return own, other

    assign_nearest = _nb_assign_nearest
    centroid_update = _nb_centroid_update
    adamw_update = _nb_adamw_update
    bag_concept_responses = _nb_bag_concept_responses
    silhouette_mean_dists = _nb_silhouette_mean_dists
else:
    assign_nearest = py_assign_nearest
    centroid_update = py_centroid_update
    adamw_update = py_adamw_update
    bag_concept_responses = py_bag_concept_responses
    silhouette_mean_dists = py_silhouette_mean_dists


KERNEL_PAIRS = {
    "assign_nearest": (py_assign_nearest, assign_nearest),
    "centroid_update": (py_centroid_update, centroid_update),
    "adamw_update": (py_adamw_update, adamw_update),
    "bag_concept_responses": (py_bag_concept_responses, bag_concept_responses),
    "silhouette_mean_dists": (py_silhouette_mean_dists, silhouette_mean_dists),
}
