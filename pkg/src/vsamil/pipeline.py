"""End-to-end orchestration: normalize, encode, cluster, classify.

A run is fully described by a :class:`RunConfig` (flat JSON with dotted
keys on disk). Every stage draws its randomness from a seed derived from
the run seed plus the hyperparameters that stage depends on, so a stage's
output is a pure function of (data, config) — the tuner memoizes on that,
and a manifest replay reproduces metrics bit for bit.
"""

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from . import classifier as clf
from . import codebook as cb
from . import data as dat
from . import encoder as enc
from .exceptions import ConfigError, DataError
from .metrics import metrics_report

FORMAT_VERSION = 1

_DOTTED = {
    "seed": "seed",
    "split.fractions": "split_fractions",
    "autoencoder.latent_dim": "latent_dim",
    "autoencoder.blocks": "blocks",
    "autoencoder.layers": "layers",
    "autoencoder.lr": "autoencoder_lr",
    "autoencoder.epochs": "autoencoder_epochs",
    "autoencoder.batch_size": "autoencoder_batch",
    "autoencoder.property1": "property1",
    "codebook.k": "codebook_k",
    "classifier.concepts": "concepts",
    "classifier.lr": "classifier_lr",
    "classifier.epochs": "classifier_epochs",
    "classifier.batch_size": "classifier_batch",
    "quantize": "quantize",
}


@dataclass
class RunConfig:
    seed: int = 0
    split_fractions: tuple = (0.7, 0.15, 0.15)
    latent_dim: int = 128
    blocks: int = 1
    layers: int = 3
    autoencoder_lr: float = 0.1
    autoencoder_epochs: int = 50
    autoencoder_batch: int = 16
    property1: str = "squared"
    codebook_k: int = 4
    concepts: int = 1
    classifier_lr: float = 0.1
    classifier_epochs: int = 50
    classifier_batch: int = 16
    quantize: bool = True

    def __post_init__(self):
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        counts = (self.latent_dim, self.blocks, self.layers, self.codebook_k,
                  self.concepts, self.autoencoder_epochs, self.classifier_epochs,
                  self.autoencoder_batch, self.classifier_batch)
        if min(counts) < 1:
            raise ConfigError(f"all counts must be >= 1: {self.to_dotted()}")
        if self.autoencoder_lr <= 0 or self.classifier_lr <= 0:
            raise ConfigError("learning rates must be positive")

    def to_dotted(self):
        doc = {}
        for dotted, attr in _DOTTED.items():
            value = getattr(self, attr)
            doc[dotted] = list(value) if isinstance(value, tuple) else value
        return doc

    @classmethod
    def from_dotted(cls, doc):
        unknown = set(doc) - set(_DOTTED)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {_DOTTED[k]: v for k, v in doc.items()}
        return cls(**kwargs)

    def canonical_json(self):
        return json.dumps(self.to_dotted(), sort_keys=True)


def _float_bits(x):
    return int(np.float64(x).view(np.uint64))


def derive_seed(*parts):
    """Collapse non-negative integer parts into one deterministic seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def stage_seeds(config):
    """Per-stage seeds keyed by the hyperparameters each stage consumes."""
    s = config.seed
    ae = derive_seed(s, 2, config.blocks, config.layers, config.latent_dim,
                     _float_bits(config.autoencoder_lr), config.autoencoder_epochs,
                     config.autoencoder_batch,
                     0 if config.property1 == "squared" else 1)
    book = derive_seed(s, 3, ae, config.codebook_k)
    head = derive_seed(s, 4, book, config.concepts,
                       _float_bits(config.classifier_lr),
                       config.classifier_epochs, config.classifier_batch,
                       1 if config.quantize else 0)
    return {"split": derive_seed(s, 1), "autoencoder": ae,
            "codebook": book, "classifier": head}


# ---------------------------------------------------------------------------
# Trained pipeline
# ---------------------------------------------------------------------------

class PipelineModel:
    """Frozen model: normalizer -> encoder -> codebook -> concept bank."""

    def __init__(self, name, config, normalizer, autoencoder, codebook, bank,
                 split_assignment=None):
        self.name = name
        self.config = config
        self.normalizer = normalizer
        self.autoencoder = autoencoder
        self.codebook = codebook
        self.bank = bank
        self.split_assignment = dict(split_assignment or {})

    def transform_instances(self, raw):
        """Raw (n, p) features -> scored representation (n, d)."""
        raw = np.atleast_2d(raw)
        expected = self.autoencoder.input_dim
        if raw.shape[1] != expected:
            raise DataError(f"instance dim {raw.shape[1]} does not match "
                            f"model input dim {expected}")
        z = self.autoencoder.encode(self.normalizer.transform(raw))
        if self.config.quantize:
            z, _ = cb.quantize(self.codebook, z)
        return z

    def transform_instances_rowwise(self, raw):
        """Like transform_instances, one instance at a time.

        A row's result is then independent of which bag it sits in (batched
        matmuls are not bit-stable across batch sizes), which makes the
        never-decreases property of single-bag scoring exact.
        """
        raw = np.atleast_2d(raw)
        return np.vstack([self.transform_instances(row[None, :]) for row in raw])

    def score_raw_bag(self, raw):
        return clf.score_bag(self.bank, self.transform_instances_rowwise(raw)).score

    def explain_raw_bag(self, raw):
        return clf.explain_bag(self.bank, self.transform_instances_rowwise(raw))

    def to_json(self):
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "config": self.config.to_dotted(),
            "normalizer": self.normalizer.to_json(),
            "autoencoder": enc.autoencoder_to_json(self.autoencoder),
            "codebook": self.codebook.to_json(),
            "concept_bank": self.bank.to_json(),
            "split_assignment": self.split_assignment,
        }

    @classmethod
    def from_json(cls, doc):
        try:
            version = doc["format_version"]
            if version != FORMAT_VERSION:
                raise DataError(f"unsupported model format version {version}")
            return cls(
                doc["name"], RunConfig.from_dotted(doc["config"]),
                dat.Normalizer.from_json(doc["normalizer"]),
                enc.autoencoder_from_json(doc["autoencoder"]),
                cb.Codebook.from_json(doc["codebook"]),
                clf.ConceptBank.from_json(doc["concept_bank"]),
                doc.get("split_assignment"))
        except (KeyError, TypeError) as exc:
            raise DataError(f"model document is missing field {exc}") from None


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh)


def load_model(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: model document must be a JSON object")
    return PipelineModel.from_json(doc)


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------

def train_pipeline(dataset, config, name=None):
    """Run every stage in order on the train split; returns (model, manifest).

    Stage order: split (when absent) -> normalizer -> autoencoder ->
    encode train -> k-means codebook -> quantize -> concept-bank training.
    The codebook is fitted on train-split encodings only.
    """
    seeds = stage_seeds(config)
    timings = {}
    t = time.perf_counter()
    if not dataset.split:
        dataset = dat.assign_splits(dataset, config.split_fractions, seeds["split"])
    timings["split"] = time.perf_counter() - t

    t = time.perf_counter()
    normalizer = dat.fit_normalizer(dataset, "train")
    normalized = dat.apply_normalizer(normalizer, dataset)
    timings["normalize"] = time.perf_counter() - t

    t = time.perf_counter()
    train_mat, _, _ = normalized.stacked_instances("train")
    ae_config = enc.AutoencoderConfig(
        latent_dim=config.latent_dim, blocks=config.blocks, layers=config.layers,
        lr=config.autoencoder_lr, epochs=config.autoencoder_epochs,
        batch_size=config.autoencoder_batch, property1=config.property1,
        seed=seeds["autoencoder"])
    autoencoder, ae_curve = enc.train_autoencoder(train_mat, dataset.feature_dim, ae_config)
    timings["autoencoder"] = time.perf_counter() - t

    t = time.perf_counter()
    train_codes = autoencoder.encode(train_mat)
    book = cb.kmeans_fit(train_codes, config.codebook_k, seeds["codebook"])
    timings["codebook"] = time.perf_counter() - t

    t = time.perf_counter()
    model = PipelineModel(name or dataset.name, config, normalizer, autoencoder,
                          book, clf.ConceptBank.init_random(
                              config.concepts, config.latent_dim, seeds["classifier"]),
                          dataset.split)
    train_bags = dataset.bags_in("train")
    mats = [model.transform_instances(b.instances) for b in train_bags]
    labels = np.array([b.label for b in train_bags])
    clf_config = clf.ClassifierConfig(
        concepts=config.concepts, lr=config.classifier_lr,
        epochs=config.classifier_epochs, batch_size=config.classifier_batch,
        seed=seeds["classifier"])
    clf_curve = clf.train_classifier(model.bank, mats, labels, clf_config)
    timings["classifier"] = time.perf_counter() - t

    split_names = [n for n in ("train", "val", "test") if n in set(dataset.split.values())]
    metrics = {n: evaluate_model(model, dataset, n).to_json() for n in split_names}

    manifest = {
        "kind": "manifest",
        "format_version": FORMAT_VERSION,
        "dataset": {"name": dataset.name, "n_bags": len(dataset.bags),
                    "feature_dim": dataset.feature_dim},
        "config": config.to_dotted(),
        "stage_seeds": seeds,
        "stage_seconds": {k: round(v, 4) for k, v in timings.items()},
        "metrics": metrics,
        "curves": {"autoencoder": ae_curve, "classifier": clf_curve},
    }
    return model, manifest


def evaluate_model(model, dataset, split_name):
    """MetricsReport for one split, scoring with the frozen model."""
    if not dataset.split:
        if not model.split_assignment:
            raise DataError("dataset has no split assignment and the model carries none")
        dataset = replace(dataset, split=dict(model.split_assignment))
    bags = dataset.bags_in(split_name)
    stacked = np.vstack([model.transform_instances(b.instances) for b in bags])
    offsets = np.zeros(len(bags) + 1, dtype=np.int64)
    np.cumsum([b.size for b in bags], out=offsets[1:])
    scores, _, _ = clf.score_bags(model.bank, stacked, offsets)
    labels = np.array([b.label for b in bags])
    return metrics_report(scores, labels)


def config_from_file(path):
    """Load a RunConfig from flat dotted-key JSON or from a manifest."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if doc.get("kind") == "manifest":
        doc = doc["config"]
    return RunConfig.from_dotted(doc)
