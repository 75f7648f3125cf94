import numpy as np
import pytest

from vsamil import autodiff as ad


def finite_difference(build_loss, params, h=1e-5):
    """Central-difference gradients of a rebuildable scalar loss."""
    grads = []
    for p in params:
        num = np.zeros_like(p.value)
        it = np.nditer(p.value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            keep = p.value[idx]
            p.value[idx] = keep + h
            up = float(build_loss().value)
            p.value[idx] = keep - h
            down = float(build_loss().value)
            p.value[idx] = keep
            num[idx] = (up - down) / (2.0 * h)
            it.iternext()
        grads.append(num)
    return grads


class TestForwardOps:
    def test_matmul(self):
        out = ad.matmul(ad.Node([[1.0, 2.0], [3.0, 4.0]]), ad.Node([[1.0], [1.0]]))
        assert np.array_equal(out.value, [[3.0], [7.0]])

    def test_matmul_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(ad.Node(np.ones((2, 3))), ad.Node(np.ones((2, 3))))

    def test_elementwise_shape_mismatch(self):
        with pytest.raises(ValueError, match=r"\(3,\) vs \(4,\)"):
            ad.add(ad.Node(np.ones(3)), ad.Node(np.ones(4)))

    def test_relu(self):
        out = ad.relu(ad.Node([-1.0, 0.0, 2.0]))
        assert np.array_equal(out.value, [0.0, 0.0, 2.0])

    def test_sigmoid_matches_closed_form(self):
        x = np.linspace(-20, 20, 41)
        out = ad.sigmoid(ad.Node(x))
        assert np.allclose(out.value, 1.0 / (1.0 + np.exp(-x)))

    def test_scalar_broadcast(self):
        out = ad.mul(ad.Node([1.0, 2.0, 3.0]), 2.0)
        assert np.array_equal(out.value, [2.0, 4.0, 6.0])

    def test_row_broadcast_bias(self):
        out = ad.add(ad.Node(np.zeros((3, 2))), ad.Node([1.0, 2.0]))
        assert np.array_equal(out.value, [[1.0, 2.0]] * 3)

    def test_finite_outputs_on_finite_inputs(self):
        rng = np.random.default_rng(3)
        x = ad.Node(rng.normal(size=(4, 5)) * 100)
        for op in (ad.relu, ad.tanh, ad.sigmoid, ad.square, ad.absval):
            assert np.all(np.isfinite(op(x).value))
        assert np.isfinite(ad.l2norm(x).value)


class TestBackward:
    def test_gradient_of_sum_square(self):
        x = ad.param([1.0, 2.0, 3.0])
        loss = ad.sum_reduce(ad.square(x))
        assert np.array_equal(ad.backward(loss, [x])[x], [2.0, 4.0, 6.0])

    def test_bce_at_zero_logit(self):
        z = ad.param(np.zeros(()))
        loss = ad.bce_with_logits(z, 1.0)
        assert float(loss.value) == pytest.approx(np.log(2.0), abs=1e-12)
        assert ad.backward(loss, [z])[z] == pytest.approx(-0.5, abs=1e-12)

    def test_bce_rejects_target_outside_unit_interval(self):
        with pytest.raises(ValueError, match="target"):
            ad.bce_with_logits(ad.param(np.zeros(())), 1.5)

    def test_min_reduce_subgradient(self):
        x = ad.param([3.0, 1.0, 2.0])
        g = ad.backward(ad.min_reduce(x), [x])[x]
        assert np.array_equal(g, [0.0, 1.0, 0.0])

    def test_extremum_grad_is_one_hot_with_unit_mass(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x = ad.param(rng.normal(size=7))
            for op in (ad.max_reduce, ad.min_reduce):
                g = ad.backward(op(x), [x])[x]
                assert np.sum(np.abs(g)) == 1.0
                assert np.count_nonzero(g) == 1

    def test_extremum_tie_takes_first_index(self):
        x = ad.param([2.0, 5.0, 5.0, 1.0, 1.0])
        g_max = ad.backward(ad.max_reduce(x), [x])[x]
        g_min = ad.backward(ad.min_reduce(x), [x])[x]
        assert np.array_equal(g_max, [0, 1, 0, 0, 0])
        assert np.array_equal(g_min, [0, 0, 0, 1, 0])

    def test_axis_extremum_routes_per_column(self):
        x = ad.param([[1.0, 4.0], [3.0, 2.0]])
        loss = ad.sum_reduce(ad.max_reduce(x, axis=0))
        g = ad.backward(loss, [x])[x]
        assert np.array_equal(g, [[0.0, 1.0], [1.0, 0.0]])

    def test_non_scalar_loss_rejected(self):
        x = ad.param([1.0, 2.0])
        with pytest.raises(ValueError, match="scalar"):
            ad.backward(ad.square(x), [x])

    def test_unreachable_parameter_gets_zero(self):
        x = ad.param([1.0])
        orphan = ad.param(np.ones((2, 2)))
        grads = ad.backward(ad.sum_reduce(x), [x, orphan])
        assert np.array_equal(grads[orphan], np.zeros((2, 2)))

    def test_backward_twice_is_identical(self):
        rng = np.random.default_rng(5)
        w = ad.param(rng.normal(size=(4, 3)))
        loss = ad.mean(ad.tanh(ad.matmul(ad.Node(rng.normal(size=(6, 4))), w)))
        first = ad.backward(loss, [w])[w]
        second = ad.backward(loss, [w])[w]
        assert np.array_equal(first, second)


class TestFiniteDifferenceOracle:
    def test_random_mlp_gradients(self):
        """Three affine+nonlinearity stages; all parameter gradients match
        central differences to better than 1e-4 relative error."""
        rng = np.random.default_rng(42)
        x = ad.Node(rng.normal(size=(8, 5)))
        params = [
            ad.param(rng.normal(size=(5, 6))), ad.param(rng.normal(size=6)),
            ad.param(rng.normal(size=(6, 4))), ad.param(rng.normal(size=4)),
            ad.param(rng.normal(size=(4, 1))), ad.param(rng.normal(size=1)),
        ]

        def build():
            h = ad.tanh(ad.add(ad.matmul(x, params[0]), params[1]))
            h = ad.sigmoid(ad.add(ad.matmul(h, params[2]), params[3]))
            out = ad.add(ad.matmul(h, params[4]), params[5])
            return ad.mean(ad.bce_with_logits(out, 0.3))

        analytic = ad.backward(build(), params)
        numeric = finite_difference(build, params)
        for p, num in zip(params, numeric):
            scale = max(np.abs(num).max(), 1e-10)
            assert np.abs(analytic[p] - num).max() / scale < 1e-4

    def test_reduction_ops_gradients(self):
        rng = np.random.default_rng(9)
        w = ad.param(rng.normal(size=(5, 4)))
        x = ad.Node(rng.normal(size=(6, 5)))

        def build():
            h = ad.matmul(x, w)
            parts = [
                ad.mean(ad.absval(h)),
                ad.l2norm(h),
                ad.mean(ad.square(ad.l2norm(h, axis=1))),
                ad.max_reduce(h),
                ad.min_reduce(h),
                ad.mean(ad.sub(1.0, ad.mean(h, axis=1))),
            ]
            return ad.mean(ad.stack1d(parts))

        analytic = ad.backward(build(), [w])[w]
        numeric = finite_difference(build, [w])[0]
        scale = max(np.abs(numeric).max(), 1e-10)
        assert np.abs(analytic - numeric).max() / scale < 1e-4
