import numpy as np
import pytest

from vsamil import autodiff as ad
from vsamil.optim import AdamW


def one_step(param_value, grad_value, lr=0.1, weight_decay=0.0):
    p = ad.param(np.asarray(param_value, dtype=np.float64))
    opt = AdamW([p], lr=lr, weight_decay=weight_decay)
    opt.step({p: np.asarray(grad_value, dtype=np.float64)})
    return p.value


def test_zero_grad_zero_decay_is_fixed_point():
    out = one_step([1.0, -2.0, 0.5], [0.0, 0.0, 0.0])
    assert np.array_equal(out, [1.0, -2.0, 0.5])


def test_first_step_moves_by_lr_times_sign():
    # bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
    # lr * g / (|g| + eps) ~= lr * sign(g)
    out = one_step([1.0], [1.0], lr=0.1)
    assert out[0] == pytest.approx(0.9, abs=1e-8)


def test_decoupled_decay_with_zero_grad():
    out = one_step([1.0], [0.0], lr=0.1, weight_decay=0.1)
    assert out[0] == pytest.approx(0.99, abs=1e-15)


def test_two_steps_match_reference_formula():
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    p = ad.param(np.array([0.7]))
    opt = AdamW([p], lr=lr, betas=(b1, b2), eps=eps, weight_decay=0.0)
    theta, m, v = 0.7, 0.0, 0.0
    for t, g in enumerate([0.3, -0.2], start=1):
        opt.step({p: np.array([g])})
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert p.value[0] == pytest.approx(theta, abs=1e-14)


def test_rejects_nonpositive_lr():
    with pytest.raises(ValueError):
        AdamW([ad.param([1.0])], lr=0.0)


def test_rejects_mismatched_grad_shape():
    p = ad.param(np.ones((2, 2)))
    opt = AdamW([p], lr=0.1)
    with pytest.raises(ValueError):
        opt.step({p: np.ones(3)})


def test_state_advances():
    p = ad.param([1.0])
    opt = AdamW([p], lr=0.1)
    opt.step({p: np.array([0.5])})
    state = opt.state()
    assert state["step"] == 1
    assert state["m"][0][0] == pytest.approx(0.05)
    assert state["v"][0][0] == pytest.approx(0.001 * 0.25)
