import os
import subprocess
import sys

import numpy as np
import pytest

from vsamil import kernels


rng = np.random.default_rng(0)


class TestBackendEquivalence:
    """The numba build and the numpy fallback must agree on every kernel."""

    def test_assign_nearest(self):
        pts = rng.normal(size=(200, 16))
        cents = rng.normal(size=(7, 16))
        la, da = kernels.py_assign_nearest(pts, cents)
        lb, db = kernels.assign_nearest(pts, cents)
        assert np.array_equal(la, lb)
        assert np.allclose(da, db, rtol=1e-10, atol=1e-12)

    def test_centroid_update(self):
        pts = rng.normal(size=(150, 8))
        labels = rng.integers(0, 5, size=150)
        ca, na = kernels.py_centroid_update(pts, labels, 5)
        nb_c, nb_n = kernels.centroid_update(pts, labels, 5)
        assert np.array_equal(na, nb_n)
        assert np.allclose(ca, nb_c, rtol=1e-12, atol=1e-12)

    def test_adamw_update(self):
        args = dict(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01,
                    bc1=0.1, bc2=0.001)
        p1, g = rng.normal(size=64), rng.normal(size=64)
        m1, v1 = rng.normal(size=64), np.abs(rng.normal(size=64))
        p2, m2, v2 = p1.copy(), m1.copy(), v1.copy()
        kernels.py_adamw_update(p1, g, m1, v1, **args)
        kernels.adamw_update(p2, g, m2, v2, **args)
        assert np.allclose(p1, p2, rtol=1e-12, atol=1e-15)
        assert np.allclose(m1, m2, rtol=1e-12, atol=1e-15)
        assert np.allclose(v1, v2, rtol=1e-12, atol=1e-15)

    def test_bag_concept_responses(self):
        instances = rng.normal(size=(60, 12))
        offsets = np.array([0, 5, 17, 30, 42, 60], dtype=np.int64)
        concepts = rng.normal(size=(4, 12))
        va, ia = kernels.py_bag_concept_responses(instances, offsets, concepts)
        vb, ib = kernels.bag_concept_responses(instances, offsets, concepts)
        assert np.array_equal(ia, ib)
        assert np.allclose(va, vb, rtol=1e-10, atol=1e-12)

    def test_silhouette_mean_dists(self):
        pts = rng.normal(size=(80, 6))
        labels = rng.integers(0, 3, size=80).astype(np.int64)
        oa, ob = kernels.py_silhouette_mean_dists(pts, labels, 3)
        na, nb = kernels.silhouette_mean_dists(pts, labels, 3)
        assert np.allclose(oa, na, rtol=1e-9, atol=1e-11)
        assert np.allclose(ob, nb, rtol=1e-9, atol=1e-11)


class TestBackendSelection:
    def test_default_backend_is_numba_here(self):
        assert kernels.backend_name() == "numba"
        assert kernels.NUMBA_ENABLED

    def test_env_flag_selects_numpy_fallback(self):
        env = dict(os.environ, VSAMIL_NO_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c",
             "from vsamil import kernels; print(kernels.backend_name());"
             "assert kernels.assign_nearest is kernels.py_assign_nearest"],
            env=env, capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "numpy"

    def test_kernel_pairs_table_is_complete(self):
        assert set(kernels.KERNEL_PAIRS) == {
            "assign_nearest", "centroid_update", "adamw_update",
            "bag_concept_responses", "silhouette_mean_dists"}


class TestKernelSemantics:
    def test_assign_nearest_tie_prefers_lowest_index(self):
        pts = np.array([[1.0, 0.0]])
        cents = np.array([[0.0, 0.0], [2.0, 0.0]])
        for impl in (kernels.py_assign_nearest, kernels.assign_nearest):
            labels, _ = impl(pts, cents)
            assert labels[0] == 0

    def test_bag_responses_tie_prefers_first_instance(self):
        instances = np.array([[2.0], [2.0], [1.0]])
        offsets = np.array([0, 3], dtype=np.int64)
        concepts = np.array([[1.0]])
        for impl in (kernels.py_bag_concept_responses, kernels.bag_concept_responses):
            _, idx = impl(instances, offsets, concepts)
            assert idx[0, 0] == 0

    def test_centroid_update_empty_cluster_is_zero(self):
        pts = np.array([[1.0, 1.0], [3.0, 3.0]])
        labels = np.array([0, 0], dtype=np.int64)
        for impl in (kernels.py_centroid_update, kernels.centroid_update):
            cents, counts = impl(pts, labels, 2)
            assert np.array_equal(cents[1], [0.0, 0.0])
            assert counts[1] == 0
