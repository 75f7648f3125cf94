"""Hadamard-style linear hypervector algebra.

Hypervectors are plain float64 arrays. Sampling draws each entry from a
two-component normal mixture N(+mu, 1/d) / N(-mu, 1/d) with equal sign
probability, which gives E[v] = 0, E[|v|] = mu and an L2 norm
concentrating at sqrt(mu^2 * d). Binding and unbinding are elementwise
multiplication and division; bundling is elementwise summation; the
membership score of a concept against a bundle is their dot product.

All functions are pure and safe for concurrent use.
"""

import numpy as np

DEFAULT_MU = 0.5

UNBIND_ZERO_GUARD = 1e-12


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def mind_sample(d, mu=DEFAULT_MU, seed=None):
    """Sample one hypervector of dimension ``d`` from the sign-mixture normal."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    rng = _rng(seed)
    signs = np.where(rng.random(d) < 0.5, mu, -mu)
    return signs + rng.normal(0.0, 1.0 / np.sqrt(d), size=d)


def mind_sample_matrix(n, d, mu=DEFAULT_MU, seed=None):
    """Stack ``n`` independent hypervectors into an (n, d) matrix."""
    rng = _rng(seed)
    return np.stack([mind_sample(d, mu, rng) for _ in range(n)])


def _check_dims(a, b, opname):
    if a.shape != b.shape:
        raise ValueError(f"{opname}: dimension mismatch {a.shape} vs {b.shape}")


def bind(a, b):
    """Associate two hypervectors (elementwise product)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_dims(a, b, "bind")
    return a * b


def unbind(c, b):
    """Recover the partner bound with ``b`` (elementwise quotient).

    Rejects near-zero divisor entries, naming the first offending index.
    """
    c = np.asarray(c, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_dims(c, b, "unbind")
    bad = np.abs(b) <= UNBIND_ZERO_GUARD
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"unbind: divisor entry {idx} is within {UNBIND_ZERO_GUARD} of zero")
    return c / b


def bundle(vectors):
    """Superpose hypervectors by elementwise summation."""
    if len(vectors) == 0:
        raise ValueError("bundle: empty input")
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("bundle: vectors must share one dimension")
    return mat.sum(axis=0)


def membership_score(concept, bundled):
    """Dot-product evidence that ``concept`` participates in ``bundled``.

    For matched sampling parameters the score concentrates near mu^2 * d
    when the concept is one of the bundle's constituents and near zero
    when it is not.
    """
    concept = np.asarray(concept, dtype=np.float64)
    bundled = np.asarray(bundled, dtype=np.float64)
    _check_dims(concept, bundled, "membership_score")
    return float(concept @ bundled)
