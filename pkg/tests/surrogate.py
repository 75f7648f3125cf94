"""Shape-matched synthetic stand-ins for the classic bag benchmarks.

The real MUSK/Elephant corpora cannot be redistributed here, so these
generators mirror their shapes (bag counts, class balance, feature
dimension, bag-size profile) over a latent-cluster instance model with a
reserved witness cluster: a bag is positive iff it holds at least one
witness instance. Features get per-dimension random offsets and scales so
the normalizer has real work to do; one feature is constant to exercise
the variance floor.
"""

import numpy as np

from vsamil.data import Bag, MilDataset


def generate_surrogate(name, n_pos, n_neg, feature_dim, size_range, seed,
                       n_clusters=6, proto_scale=0.6, noise=1.0):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5a9]))
    protos = rng.normal(0.0, proto_scale, (n_clusters, feature_dim))
    offsets = rng.normal(0.0, 5.0, feature_dim)
    scales = rng.uniform(0.5, 20.0, feature_dim)

    def finish(x):
        x = x * scales + offsets
        x[:, -1] = 42.0  # constant column: the normalizer must floor it
        return x

    lo, hi = size_range
    bags = []
    for i in range(n_pos + n_neg):
        positive = i < n_pos
        size = int(rng.integers(lo, hi + 1))
        picks = rng.integers(1, n_clusters, size)  # cluster 0 is the witness
        rows = protos[picks] + rng.normal(0.0, noise, (size, feature_dim))
        if positive:
            n_wit = 1 + int(rng.integers(0, 2))
            wit = protos[0] + rng.normal(0.0, noise, (n_wit, feature_dim))
            rows = np.vstack([wit, rows[: max(1, size - n_wit)]])
        bags.append(Bag(f"bag-{i:04d}", 1 if positive else -1, finish(rows)))
    return MilDataset(name, feature_dim, bags)


def musk1_like(seed=7):
    """92 bags (47 positive), 166 features, small bags."""
    return generate_surrogate("musk1-like", 47, 45, 166, (2, 9), seed)


def musk2_like(seed=7):
    """102 bags (39 positive), 166 features, larger bags."""
    return generate_surrogate("musk2-like", 39, 63, 166, (6, 22), seed)


def elephant_like(seed=7):
    """200 bags (100 positive), 230 features, mid-size bags."""
    return generate_surrogate("elephant-like", 100, 100, 230, (4, 10), seed)
