"""Concept-bank bag classifier.

A bank holds K learnable concept hypervectors plus one shared bias. A
bag's score is ``min_k ( max_j v_j . c_k ) + b``: every concept must find
a well-aligned instance, and the bag is positive iff the score exceeds 0.
Because instances enter only through per-concept maxima, adding an
instance can never lower the score, which is exactly the bag-level
"positive iff some instance is positive" constraint.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import hlb, kernels
from .exceptions import ConfigError, NumericalError
from .optim import AdamW


@dataclass
class ClassifierConfig:
    concepts: int = 1
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = 16
    weight_decay: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.concepts, self.epochs, self.batch_size) < 1:
            raise ConfigError(f"classifier counts must be >= 1: {self}")


@dataclass
class BagScore:
    score: float
    label: int  # +1 iff score > 0
    winners: list  # per concept: (max response, winning instance index)


class ConceptBank:
    def __init__(self, concepts, bias, seed=None):
        self.concepts = ad.param(concepts)  # (K, d)
        self.bias = ad.param(np.asarray(bias, dtype=np.float64).reshape(()))
        self.seed = seed

    @classmethod
    def init_random(cls, n_concepts, dim, seed, mu=hlb.DEFAULT_MU):
        """Concept rows drawn from the hypervector sampling distribution."""
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0]))
        return cls(hlb.mind_sample_matrix(n_concepts, dim, mu, rng), 0.0, seed=int(seed))

    @property
    def n_concepts(self):
        return self.concepts.value.shape[0]

    @property
    def dim(self):
        return self.concepts.value.shape[1]

    def parameters(self):
        return [self.concepts, self.bias]

    def to_json(self):
        return {"n_concepts": self.n_concepts, "seed": self.seed,
                "concepts": self.concepts.value.tolist(),
                "bias": float(self.bias.value)}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["concepts"], dtype=np.float64), doc["bias"],
                   seed=doc.get("seed"))


def _check_bag(bank, instances):
    mat = np.ascontiguousarray(np.atleast_2d(np.asarray(instances, dtype=np.float64)))
    if mat.shape[0] < 1:
        raise ValueError("cannot score an empty bag")
    if mat.shape[1] != bank.dim:
        raise ValueError(f"instance dim {mat.shape[1]} != concept dim {bank.dim}")
    return mat


def score_bag(bank, instances):
    """Score one bag of (n, d) vectors on a frozen bank."""
    mat = _check_bag(bank, instances)
    offsets = np.array([0, mat.shape[0]], dtype=np.int64)
    winner_val, winner_idx = kernels.bag_concept_responses(mat, offsets, bank.concepts.value)
    score = float(winner_val[0].min() + bank.bias.value)
    winners = [(float(v), int(i)) for v, i in zip(winner_val[0], winner_idx[0])]
    return BagScore(score, 1 if score > 0 else -1, winners)


def score_bags(bank, instances, offsets):
    """Scores for many bags stacked into one (M, d) matrix with offsets."""
    winner_val, winner_idx = kernels.bag_concept_responses(
        np.ascontiguousarray(instances, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64), bank.concepts.value)
    scores = winner_val.min(axis=1) + float(bank.bias.value)
    return scores, winner_val, winner_idx


def explain_bag(bank, instances):
    """Per-concept winners plus the instance indices with positive response.

    An instance is positive when its best concept alignment clears the
    decision threshold on its own.
    """
    mat = _check_bag(bank, instances)
    responses = mat @ bank.concepts.value.T  # (n, K)
    winner_idx = np.argmax(responses, axis=0)
    winner_val = responses[winner_idx, np.arange(bank.n_concepts)]
    bias = float(bank.bias.value)
    positive = np.nonzero(responses.max(axis=1) + bias > 0)[0]
    return {
        "winners": [(int(k), int(winner_idx[k]), float(winner_val[k]))
                    for k in range(bank.n_concepts)],
        "positive_instances": [int(i) for i in positive],
        "score": float(winner_val.min() + bias),
    }


def _bag_logit_graph(bank, mat):
    responses = ad.matmul(ad.Node(mat), ad.transpose(bank.concepts))
    per_concept = ad.max_reduce(responses, axis=0)
    return ad.add(ad.min_reduce(per_concept), bank.bias)


def batch_loss_graph(bank, bag_matrices, labels):
    """Mean BCE of sigmoid(score) against {-1,+1} labels mapped to {0,1}."""
    logits = [_bag_logit_graph(bank, _check_bag(bank, mat)) for mat in bag_matrices]
    targets = (np.asarray(labels, dtype=np.float64) + 1.0) / 2.0
    return ad.mean(ad.bce_with_logits(ad.stack1d(logits), targets))


def train_classifier(bank, bag_matrices, labels, config):
    """Fit concepts and bias with AdamW; deterministic given ``config.seed``.

    Gradients reach only each concept's winning instance and the concept
    selected by the bag-level min, per the one-hot extremum subgradients.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(bag_matrices) == 0 or len(bag_matrices) != len(labels):
        raise ConfigError("train_classifier: bags and labels must align and be non-empty")
    if len(set(labels.tolist())) < 2:
        raise ConfigError("train_classifier: training split needs both classes")

    params = bank.parameters()
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC1a]))
    n = len(bag_matrices)
    curve = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            take = perm[start:start + config.batch_size]
            loss = batch_loss_graph(bank, [bag_matrices[i] for i in take], labels[take])
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite classifier loss at epoch {epoch}, step {start // config.batch_size}")
            grads = ad.backward(loss, params)
            opt.step(grads)
            total += value * len(take)
        curve.append({"epoch": epoch, "loss": total / n})
    return curve
