"""Seeded random search over the pipeline hyperparameter space.

The space matches the ranges that matter for the bag benchmarks: residual
blocks 1-2, layers per block 1-4, codebook size 3-10, concept count 1-20,
and a log-uniform classifier learning rate in [1e-3, 0.3]. Trials are
drawn up front from the tuner seed, so a partial run resumes from its
trial log without disturbing later draws.

Stage outputs are memoized within a run: stage seeds are pure functions
of the config (see :mod:`vsamil.pipeline`), so two trials sharing encoder
hyperparameters share the identical trained encoder, and the winning
trial retrained standalone reproduces its validation score exactly.
"""

import json
import math
from dataclasses import replace

import numpy as np

from . import classifier as clf
from . import codebook as cb
from . import data as dat
from . import encoder as enc
from . import pipeline as pl
from .exceptions import ConfigError
from .metrics import metrics_report

SEARCH_SPACE = {
    "blocks": (1, 2),
    "layers": (1, 4),
    "codebook_k": (3, 10),
    "concepts": (1, 20),
    "classifier_lr": (1e-3, 0.3),
}


def sample_trials(n_trials, seed):
    """Draw every trial's hyperparameters up front, deterministically."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 5]))
    lo, hi = SEARCH_SPACE["classifier_lr"]
    out = []
    for _ in range(n_trials):
        out.append({
            "blocks": int(rng.integers(SEARCH_SPACE["blocks"][0], SEARCH_SPACE["blocks"][1] + 1)),
            "layers": int(rng.integers(SEARCH_SPACE["layers"][0], SEARCH_SPACE["layers"][1] + 1)),
            "codebook_k": int(rng.integers(SEARCH_SPACE["codebook_k"][0], SEARCH_SPACE["codebook_k"][1] + 1)),
            "concepts": int(rng.integers(SEARCH_SPACE["concepts"][0], SEARCH_SPACE["concepts"][1] + 1)),
            "classifier_lr": float(math.exp(rng.uniform(math.log(lo), math.log(hi)))),
        })
    return out


def _read_log(log_path):
    done = {}
    try:
        with open(log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    done[row["trial"]] = row
    except FileNotFoundError:
        pass
    return done


class _StageCache:
    """Shared encoder/codebook stages for trials that agree on them."""

    def __init__(self, dataset, normalized, config):
        self.dataset = dataset
        self.normalized = normalized
        self.config = config
        self.train_mat, _, _ = normalized.stacked_instances("train")
        self.encoders = {}
        self.books = {}
        self.split_mats = {}

    def encoder_for(self, cfg):
        key = (cfg.blocks, cfg.layers)
        if key not in self.encoders:
            seeds = pl.stage_seeds(cfg)
            ae_config = enc.AutoencoderConfig(
                latent_dim=cfg.latent_dim, blocks=cfg.blocks, layers=cfg.layers,
                lr=cfg.autoencoder_lr, epochs=cfg.autoencoder_epochs,
                batch_size=cfg.autoencoder_batch, property1=cfg.property1,
                seed=seeds["autoencoder"])
            model, _ = enc.train_autoencoder(self.train_mat, self.dataset.feature_dim, ae_config)
            self.encoders[key] = (model, model.encode(self.train_mat))
        return self.encoders[key]

    def book_for(self, cfg):
        key = (cfg.blocks, cfg.layers, cfg.codebook_k)
        if key not in self.books:
            _, codes = self.encoder_for(cfg)
            self.books[key] = cb.kmeans_fit(codes, cfg.codebook_k,
                                            pl.stage_seeds(cfg)["codebook"])
        return self.books[key]

    def mats_for(self, cfg, split_name):
        key = (cfg.blocks, cfg.layers, cfg.codebook_k, cfg.quantize, split_name)
        if key not in self.split_mats:
            ae, _ = self.encoder_for(cfg)
            book = self.book_for(cfg)
            mats = []
            bags = self.normalized.bags_in(split_name)
            for bag in bags:
                z = ae.encode(bag.instances)
                if cfg.quantize:
                    z, _ = cb.quantize(book, z)
                mats.append(z)
            labels = np.array([b.label for b in bags])
            self.split_mats[key] = (mats, labels)
        return self.split_mats[key]


def _score_split(bank, mats, labels):
    stacked = np.vstack(mats)
    offsets = np.zeros(len(mats) + 1, dtype=np.int64)
    np.cumsum([m.shape[0] for m in mats], out=offsets[1:])
    scores, _, _ = clf.score_bags(bank, stacked, offsets)
    return metrics_report(scores, labels)


def tune(dataset, base_config, n_trials, log_path=None):
    """Random search selecting by validation AUROC.

    Returns the winning trial, its standalone retrain (model + manifest),
    and the full trial table. ``log_path`` enables resume: completed
    trials are read back and skipped.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if not dataset.split:
        dataset = dat.assign_splits(dataset, base_config.split_fractions,
                                    pl.stage_seeds(base_config)["split"])
    if "val" not in set(dataset.split.values()):
        raise ConfigError("tuning needs a validation split")

    normalizer = dat.fit_normalizer(dataset, "train")
    normalized = dat.apply_normalizer(normalizer, dataset)
    cache = _StageCache(dataset, normalized, base_config)

    params = sample_trials(n_trials, base_config.seed)
    done = _read_log(log_path) if log_path else {}
    log_fh = open(log_path, "a", encoding="utf-8") if log_path else None
    rows = []
    try:
        for i, p in enumerate(params):
            if i in done:
                rows.append(done[i])
                continue
            cfg = replace(base_config, **p)
            train_mats, train_labels = cache.mats_for(cfg, "train")
            bank = clf.ConceptBank.init_random(cfg.concepts, cfg.latent_dim,
                                               pl.stage_seeds(cfg)["classifier"])
            clf_config = clf.ClassifierConfig(
                concepts=cfg.concepts, lr=cfg.classifier_lr,
                epochs=cfg.classifier_epochs, batch_size=cfg.classifier_batch,
                seed=pl.stage_seeds(cfg)["classifier"])
            clf.train_classifier(bank, train_mats, train_labels, clf_config)
            val_report = _score_split(bank, *cache.mats_for(cfg, "val"))
            row = {"trial": i, "params": p, "config": cfg.to_dotted(),
                   "val_auroc": val_report.auroc, "val_accuracy": val_report.accuracy}
            rows.append(row)
            if log_fh:
                log_fh.write(json.dumps(row) + "\n")
                log_fh.flush()
    finally:
        if log_fh:
            log_fh.close()

    best = max(rows, key=lambda r: (r["val_auroc"], -r["trial"]))
    best_config = pl.RunConfig.from_dotted(best["config"])
    model, manifest = pl.train_pipeline(replace(dataset, split=dict(dataset.split)),
                                        best_config, name=dataset.name)
    return {
        "best_trial": best["trial"],
        "best_params": best["params"],
        "best_config": best["config"],
        "best_val_auroc": best["val_auroc"],
        "retrained_val_auroc": manifest["metrics"]["val"]["auroc"],
        "model": model,
        "manifest": manifest,
        "trials": rows,
    }


def run_benchmark_protocol(dataset, base_config, n_trials=50, seeds=(0, 1, 2, 3, 4),
                           log_dir=None):
    """Per seed: fresh stratified split, ``n_trials`` random-search trials,
    the winner picked on validation AUROC and evaluated on test. Reports
    the best test metrics across seeds."""
    per_seed = []
    for seed in seeds:
        cfg = replace(base_config, seed=seed)
        log_path = None
        if log_dir is not None:
            log_path = f"{log_dir}/trials-seed{seed}.jsonl"
        out = tune(replace(dataset, split={}), cfg, n_trials, log_path=log_path)
        test = out["manifest"]["metrics"].get("test")
        per_seed.append({
            "seed": seed,
            "best_trial": out["best_trial"],
            "best_params": out["best_params"],
            "val_auroc": out["best_val_auroc"],
            "test_auroc": test["auroc"],
            "test_accuracy": test["accuracy"],
        })
    best = max(per_seed, key=lambda r: r["test_auroc"])
    return {"dataset": dataset.name, "n_trials": n_trials,
            "seeds": list(seeds), "per_seed": per_seed,
            "best_test_auroc": best["test_auroc"],
            "best_test_accuracy": best["test_accuracy"],
            "best_seed": best["seed"]}
