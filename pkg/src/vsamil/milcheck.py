"""Validity harness: poisoned corpora, calibration oracles, and audits.

A poisoned corpus has two signals. The true rule — "a bag is positive iff
it contains a witness instance" — holds in both splits. A shortcut
correlates with the label in train but is inverted at test, so a model
that leans on it collapses below chance out of sample:

  variant 1: a distinctive anti-witness instance rides in negative train
             bags and moves into positive bags at test;
  variant 2: bag size tracks the label in train and anti-tracks at test;
  variant 3: a mean shift on a few background features tracks the label
             in train and is inverted at test.

Two hand-coded oracles calibrate the harness: the valid one scores
witness evidence and must ace every test split; the invalid one reads the
shortcut and must collapse at test.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import pipeline
from .data import Bag, MilDataset
from .exceptions import ConfigError, VsamilError

WITNESS_AMP = 6.0
WITNESS_DIMS = (0, 1, 2, 3)
ANTI_SIGNS = (-1.0, 1.0, -1.0, 1.0)  # anti-witness pattern on the same dims
NOISE = 0.25
BACKGROUND_CLIP = 1.5
SHIFT_DIMS = (4, 5, 6, 7)
SHIFT_DELTA = 0.5
SIZE_SHIFT = 8  # variant 2: large bags are this much bigger


@dataclass
class PoisonSpec:
    variant: int
    feature_dim: int = 16
    bag_size: tuple = (4, 10)
    seed: int = 0
    n_train: int = 100
    n_test: int = 100

    def __post_init__(self):
        if self.variant not in (1, 2, 3):
            raise ConfigError(f"poison variant must be 1, 2 or 3, got {self.variant}")
        if self.feature_dim < max(SHIFT_DIMS) + 1:
            raise ConfigError(f"feature_dim must be >= {max(SHIFT_DIMS) + 1}")
        if not 2 <= self.bag_size[0] <= self.bag_size[1]:
            raise ConfigError(f"bad bag size range {self.bag_size}")


def _witness(rng, p):
    x = rng.normal(0.0, NOISE, p)
    for dim in WITNESS_DIMS:
        x[dim] += WITNESS_AMP
    return x


def _anti_witness(rng, p):
    x = rng.normal(0.0, NOISE, p)
    for dim, sign in zip(WITNESS_DIMS, ANTI_SIGNS):
        x[dim] += sign * WITNESS_AMP
    return x


def _background(rng, p, n, shift=0.0):
    x = rng.normal(0.0, 1.0, (n, p))
    cols = list(WITNESS_DIMS)
    x[:, cols] = np.clip(x[:, cols], -BACKGROUND_CLIP, BACKGROUND_CLIP)
    if shift != 0.0:
        x[:, SHIFT_DIMS] += shift
    return x


def _make_bag(rng, spec, positive, phase):
    """One bag for the given label; ``phase`` is +1 in train, -1 in test."""
    p = spec.feature_dim
    lo, hi = spec.bag_size
    if spec.variant == 2:
        # bag size carries the shortcut: phase +1 pairs positive with large
        large = (positive and phase > 0) or (not positive and phase < 0)
        if large:
            lo, hi = lo + SIZE_SHIFT, hi + SIZE_SHIFT
    size = int(rng.integers(lo, hi + 1))

    shift = 0.0
    if spec.variant == 3:
        shift = SHIFT_DELTA * phase * (1.0 if positive else -1.0)

    rows = []
    if positive:
        rows.append(_witness(rng, p))
    if spec.variant == 1:
        carries_anti = (not positive and phase > 0) or (positive and phase < 0)
        if carries_anti:
            rows.append(_anti_witness(rng, p))
    fill = max(0, size - len(rows))
    if fill:
        rows.append(_background(rng, p, fill, shift))
    return np.vstack([np.atleast_2d(r) for r in rows])


def generate_poison(spec):
    """Seed-deterministic poisoned dataset with train/test split assignment."""
    bags = []
    split = {}
    for split_name, count, phase, stream in (("train", spec.n_train, 1, 0),
                                             ("test", spec.n_test, -1, 1)):
        rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, spec.variant, stream]))
        n_pos = count // 2
        for i in range(count):
            positive = i < n_pos
            mat = _make_bag(rng, spec, positive, phase)
            bag_id = f"{split_name}-{i:04d}"
            bags.append(Bag(bag_id, 1 if positive else -1, mat))
            split[bag_id] = split_name
    return MilDataset(f"poison-v{spec.variant}", spec.feature_dim, bags, split)


# ---------------------------------------------------------------------------
# Calibration oracles
# ---------------------------------------------------------------------------

def valid_oracle_scores(dataset, split_name):
    """Witness evidence: per instance the weakest witness dim, maxed over
    the bag, thresholded midway between pattern and background."""
    bags = dataset.bags_in(split_name)
    cols = list(WITNESS_DIMS)
    scores = [b.instances[:, cols].min(axis=1).max() - 3.0 for b in bags]
    labels = [b.label for b in bags]
    return np.array(scores), np.array(labels)


def invalid_oracle_scores(dataset, split_name, variant):
    """Shortcut reader: perfect in train, inverted at test by construction."""
    bags = dataset.bags_in(split_name)
    if variant == 1:
        cols = list(WITNESS_DIMS)
        signs = np.array(ANTI_SIGNS)
        scores = [-(b.instances[:, cols] * signs).min(axis=1).max() for b in bags]
    elif variant == 2:
        scores = [float(b.size) for b in bags]
    elif variant == 3:
        scores = [float(b.instances[:, SHIFT_DIMS].mean()) for b in bags]
    else:
        raise ConfigError(f"unknown variant {variant}")
    labels = [b.label for b in bags]
    return np.array(scores), np.array(labels)


# ---------------------------------------------------------------------------
# Full-pipeline check
# ---------------------------------------------------------------------------

MILCHECK_COLUMNS = ("variant", "split", "accuracy", "auroc", "pass")


def default_milcheck_config():
    """Compact pipeline settings for the synthetic corpora."""
    return pipeline.RunConfig(
        seed=0, latent_dim=64, blocks=1, layers=2, codebook_k=8,
        concepts=4, classifier_lr=0.1)


def milcheck(specs, config=None):
    """Train the full pipeline on each poisoned corpus and tabulate metrics.

    A variant passes when test AUROC stays at or above 0.5. A training
    failure is reported for its variant without stopping the others.
    """
    rows = []
    for spec in specs:
        cfg = config or default_milcheck_config()
        try:
            dataset = generate_poison(spec)
            model, _ = pipeline.train_pipeline(dataset, cfg)
            reports = {name: pipeline.evaluate_model(model, dataset, name)
                       for name in ("train", "test")}
            passed = reports["test"].auroc >= 0.5
            for name in ("train", "test"):
                rows.append({"variant": spec.variant, "split": name,
                             "accuracy": reports[name].accuracy,
                             "auroc": reports[name].auroc, "pass": passed})
        except VsamilError as exc:
            rows.append({"variant": spec.variant, "split": "error",
                         "accuracy": None, "auroc": None, "pass": False,
                         "error": str(exc)})
    return rows


def write_milcheck_report(rows, json_path, csv_path):
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MILCHECK_COLUMNS)
        for row in rows:
            writer.writerow([row.get(c) for c in MILCHECK_COLUMNS])


# ---------------------------------------------------------------------------
# Structural audit
# ---------------------------------------------------------------------------

def monotonicity_audit(score_fn, dataset, trials, seed):
    """Count score decreases when a random instance joins a random bag.

    ``score_fn`` maps a raw (n, p) instance matrix to a bag score. A valid
    bag scorer must report zero violations.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA0d17]))
    bags = dataset.bags
    violations = 0
    for _ in range(int(trials)):
        bag = bags[rng.integers(len(bags))]
        donor = bags[rng.integers(len(bags))]
        extra = donor.instances[rng.integers(donor.size)]
        before = score_fn(bag.instances)
        after = score_fn(np.vstack([bag.instances, extra[None, :]]))
        if after < before:
            violations += 1
    return violations


def broken_mean_scorer(weights):
    """Negative control: mean pooling, which any low-response instance drags down."""
    weights = np.asarray(weights, dtype=np.float64)
    return lambda mat: float(np.mean(np.asarray(mat) @ weights))
