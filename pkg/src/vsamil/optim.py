"""Decoupled-weight-decay Adam over autodiff parameter nodes."""

import numpy as np

from . import kernels


class AdamW:
    """Standard AdamW: moment tracking plus decay applied directly to weights.

    ``params`` are autodiff nodes updated in place; gradients come from
    ``autodiff.backward`` as a node-keyed mapping.
    """

    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self._m = [np.zeros(p.value.size) for p in self.params]
        self._v = [np.zeros(p.value.size) for p in self.params]

    def step(self, grads):
        """Advance every parameter by one update; ``grads`` maps node -> array."""
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            g = grads[p]
            if g.shape != p.value.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter {p.value.shape}")
            flat = p.value.reshape(-1)
            kernels.adamw_update(flat, np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                                 m, v, self.lr, self.beta1, self.beta2,
                                 self.eps, self.weight_decay, bc1, bc2)

    def state(self):
        """Optimizer state snapshot (first/second moments and step count)."""
        return {"m": [m.copy() for m in self._m],
                "v": [v.copy() for v in self._v],
                "step": self.step_count}
