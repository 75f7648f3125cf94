"""Residually gated autoencoder producing hypervector-compatible codes.

The encoder is an input affine map into the latent space followed by
gated residual blocks (output = input + alpha * F(input), alpha starts at
exactly 0, F is a stack of affine+tanh layers); the decoder mirrors it.
Training minimizes, per instance,

    ||x - decode(encode(x))||_2                  reconstruction
  + (mean_j z_j)^2                               zero-mean pull
  + (1/2 - mean_j |z_j|)^2                       absolute-mean pull to mu=1/2
  + (||z||_2 - sqrt(d/4))^2                      norm pull to sqrt(mu^2 d)

averaged over the batch. The three distribution penalties push codes
toward the sampling statistics the hypervector algebra assumes. The
zero-mean term is squared by default; ``property1="literal"`` keeps the
raw (sign-carrying) mean as a penalty term instead.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .exceptions import ConfigError, NumericalError
from .optim import AdamW

MU = 0.5


@dataclass
class AutoencoderConfig:
    latent_dim: int = 128
    blocks: int = 1
    layers: int = 3
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = 16
    weight_decay: float = 0.01
    property1: str = "squared"  # or "literal"
    seed: int = 0

    def __post_init__(self):
        if min(self.latent_dim, self.blocks, self.layers,
               self.epochs, self.batch_size) < 1:
            raise ConfigError(f"autoencoder counts must be >= 1: {self}")
        if self.property1 not in ("squared", "literal"):
            raise ConfigError(f"property1 must be 'squared' or 'literal', got {self.property1!r}")


def _scaled_affine(x, w, b):
    """Affine map with a fixed 1/sqrt(fan_in) output scaling.

    Keeps learnable weights at O(1) magnitude whatever the width, so the
    aggressive step size the trainer uses cannot blow the activations past
    the latent distribution targets.
    """
    fan_in = w.value.shape[0]
    return ad.add(ad.mul(ad.matmul(x, w), 1.0 / np.sqrt(fan_in)), b)


class _ResidualStack:
    """One gated block: ``layers`` affine+tanh maps scaled by a scalar gate."""

    def __init__(self, width, layers, rng):
        self.weights = []
        self.biases = []
        for _ in range(layers):
            self.weights.append(ad.param(rng.normal(0.0, 1.0, size=(width, width))))
            self.biases.append(ad.param(np.zeros(width)))
        self.alpha = ad.param(np.zeros(()))

    def forward(self, h):
        f = h
        for w, b in zip(self.weights, self.biases):
            f = ad.tanh(_scaled_affine(f, w, b))
        return ad.add(h, ad.mul(f, self.alpha))

    def parameters(self):
        return self.weights + self.biases + [self.alpha]


class Autoencoder:
    def __init__(self, input_dim, config):
        self.input_dim = int(input_dim)
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.latent_dim
        self.w_in = ad.param(rng.normal(0.0, 1.0, size=(input_dim, d)))
        self.b_in = ad.param(np.zeros(d))
        self.enc_blocks = [_ResidualStack(d, config.layers, rng) for _ in range(config.blocks)]
        self.dec_blocks = [_ResidualStack(d, config.layers, rng) for _ in range(config.blocks)]
        self.w_out = ad.param(rng.normal(0.0, 1.0, size=(d, input_dim)))
        self.b_out = ad.param(np.zeros(input_dim))

    @property
    def latent_dim(self):
        return self.config.latent_dim

    def parameters(self):
        params = [self.w_in, self.b_in]
        for blk in self.enc_blocks:
            params.extend(blk.parameters())
        for blk in self.dec_blocks:
            params.extend(blk.parameters())
        params.extend([self.w_out, self.b_out])
        return params

    def encode_graph(self, x):
        h = _scaled_affine(x, self.w_in, self.b_in)
        for blk in self.enc_blocks:
            h = blk.forward(h)
        return h

    def decode_graph(self, z):
        h = z
        for blk in self.dec_blocks:
            h = blk.forward(h)
        return _scaled_affine(h, self.w_out, self.b_out)

    def encode(self, x):
        """Map (m, p) inputs to (m, d) latent codes on the frozen model."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.encode_graph(ad.Node(x)).value

    def decode(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return self.decode_graph(ad.Node(z)).value

    def hlb_loss(self, batch):
        """Scalar loss node over an (m, p) batch, plus per-term batch means."""
        x = ad.Node(np.atleast_2d(np.asarray(batch, dtype=np.float64)))
        z = self.encode_graph(x)
        recon = self.decode_graph(z)
        d = self.config.latent_dim

        rec = ad.l2norm(ad.sub(x, recon), axis=1)
        row_mean = ad.mean(z, axis=1)
        p1 = ad.square(row_mean) if self.config.property1 == "squared" else row_mean
        p2 = ad.square(ad.sub(MU, ad.mean(ad.absval(z), axis=1)))
        p3 = ad.square(ad.sub(ad.l2norm(z, axis=1), np.sqrt(d * MU * MU)))

        loss = ad.mean(ad.add(ad.add(rec, p1), ad.add(p2, p3)))
        parts = {"reconstruction": float(rec.value.mean()),
                 "prop1": float(p1.value.mean()),
                 "prop2": float(p2.value.mean()),
                 "prop3": float(p3.value.mean())}
        return loss, parts


def train_autoencoder(instances, input_dim, config):
    """Fit an autoencoder on an (M, p) instance matrix.

    Deterministic given ``config.seed``. Returns (model, curve) where the
    curve holds per-epoch means of the loss and each term.
    """
    instances = np.ascontiguousarray(instances, dtype=np.float64)
    if instances.ndim != 2 or instances.shape[0] == 0:
        raise ConfigError("train_autoencoder: need a non-empty (M, p) matrix")
    model = Autoencoder(input_dim, config)
    params = model.parameters()
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5e11]))

    n = instances.shape[0]
    curve = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        totals = {"loss": 0.0, "reconstruction": 0.0, "prop1": 0.0, "prop2": 0.0, "prop3": 0.0}
        for start in range(0, n, config.batch_size):
            batch = instances[perm[start:start + config.batch_size]]
            loss, parts = model.hlb_loss(batch)
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite autoencoder loss at epoch {epoch}, step {start // config.batch_size}")
            grads = ad.backward(loss, params)
            opt.step(grads)
            weight = batch.shape[0]
            totals["loss"] += value * weight
            for key, val in parts.items():
                totals[key] += val * weight
        curve.append({"epoch": epoch, **{k: v / n for k, v in totals.items()}})
    return model, curve


def penalty_report(model, instances):
    """Mean of each loss term over a full instance matrix (no training)."""
    _, parts = model.hlb_loss(instances)
    return parts


def distribution_report(model, instances):
    """Latent-code statistics: (value, std) for mean, |mean| and L2 norm."""
    z = model.encode(instances)
    norms = np.sqrt((z * z).sum(axis=1))
    return {
        "mean": (float(z.mean()), float(z.std())),
        "abs_mean": (float(np.abs(z).mean()), float(np.abs(z).std())),
        "l2_norm": (float(norms.mean()), float(norms.std())),
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def autoencoder_to_json(model):
    cfg = model.config
    doc = {
        "input_dim": model.input_dim,
        "latent_dim": cfg.latent_dim,
        "blocks": cfg.blocks,
        "layers": cfg.layers,
        "property1": cfg.property1,
        "seed": cfg.seed,
        "lr": cfg.lr,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "weight_decay": cfg.weight_decay,
        "tensors": [p.value.tolist() for p in model.parameters()],
    }
    return doc


def autoencoder_from_json(doc):
    config = AutoencoderConfig(
        latent_dim=doc["latent_dim"], blocks=doc["blocks"], layers=doc["layers"],
        lr=doc["lr"], epochs=doc["epochs"], batch_size=doc["batch_size"],
        weight_decay=doc["weight_decay"], property1=doc["property1"], seed=doc["seed"])
    model = Autoencoder(doc["input_dim"], config)
    params = model.parameters()
    tensors = doc["tensors"]
    if len(tensors) != len(params):
        raise ConfigError(f"model document has {len(tensors)} tensors, expected {len(params)}")
    for p, t in zip(params, tensors):
        arr = np.asarray(t, dtype=np.float64)
        if arr.shape != p.value.shape:
            raise ConfigError(f"tensor shape {arr.shape} != expected {p.value.shape}")
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        p.value = arr
    return model
