import json

import numpy as np
import pytest

from vsamil import milcheck as mc
from vsamil import pipeline as pl
from vsamil.exceptions import ConfigError, DataError
from surrogate import generate_surrogate


def tiny_dataset(seed=0):
    return generate_surrogate("tiny", 12, 12, 10, (2, 5), seed)


def tiny_config(**kw):
    base = dict(seed=0, latent_dim=16, blocks=1, layers=1, codebook_k=4, concepts=2,
                autoencoder_epochs=8, classifier_epochs=10)
    base.update(kw)
    return pl.RunConfig(**base)


class TestRunConfig:
    def test_dotted_round_trip_is_byte_identical(self):
        cfg = tiny_config(classifier_lr=0.0375)
        clone = pl.RunConfig.from_dotted(json.loads(cfg.canonical_json()))
        assert clone.canonical_json() == cfg.canonical_json()
        assert clone == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            pl.RunConfig.from_dotted({"autoencoder.nope": 3})

    def test_invalid_counts_rejected(self):
        with pytest.raises(ConfigError):
            pl.RunConfig(codebook_k=0)

    def test_stage_seeds_are_pure_functions_of_config(self):
        assert pl.stage_seeds(tiny_config()) == pl.stage_seeds(tiny_config())

    def test_stage_seeds_track_their_own_hyperparameters(self):
        base = pl.stage_seeds(tiny_config())
        more_layers = pl.stage_seeds(tiny_config(layers=2))
        assert more_layers["autoencoder"] != base["autoencoder"]
        assert more_layers["codebook"] != base["codebook"]
        other_k = pl.stage_seeds(tiny_config(codebook_k=5))
        assert other_k["autoencoder"] == base["autoencoder"]
        assert other_k["codebook"] != base["codebook"]
        other_clf = pl.stage_seeds(tiny_config(classifier_lr=0.2))
        assert other_clf["codebook"] == base["codebook"]
        assert other_clf["classifier"] != base["classifier"]


class TestTrainPipeline:
    def test_smoke_and_metrics_ranges(self):
        model, manifest = pl.train_pipeline(tiny_dataset(), tiny_config())
        for split in ("train", "val", "test"):
            rep = manifest["metrics"][split]
            assert 0.0 <= rep["accuracy"] <= 1.0
        assert set(manifest["stage_seconds"]) == {"split", "normalize", "autoencoder",
                                                  "codebook", "classifier"}

    def test_existing_split_is_respected(self):
        ds = mc.generate_poison(mc.PoisonSpec(variant=1, seed=0, n_train=20, n_test=20))
        model, manifest = pl.train_pipeline(ds, tiny_config())
        assert set(manifest["metrics"]) == {"train", "test"}
        assert model.split_assignment == ds.split

    def test_manifest_replay_reproduces_metrics_bitwise(self):
        ds = tiny_dataset()
        _, first = pl.train_pipeline(ds, tiny_config())
        replay_cfg = pl.RunConfig.from_dotted(first["config"])
        _, second = pl.train_pipeline(tiny_dataset(), replay_cfg)
        assert first["metrics"] == second["metrics"]

    def test_quantize_flag_changes_representation(self):
        model_q, _ = pl.train_pipeline(tiny_dataset(), tiny_config())
        model_r, _ = pl.train_pipeline(tiny_dataset(), tiny_config(quantize=False))
        bag = tiny_dataset().bags[0].instances
        rows_q = model_q.transform_instances(bag)
        rows_r = model_r.transform_instances(bag)
        centroids = model_q.codebook.centroids
        assert all(any(np.array_equal(r, c) for c in centroids) for r in rows_q)
        assert not all(any(np.array_equal(r, c) for c in centroids) for r in rows_r)


class TestModelDocument:
    def test_save_load_value_exact(self, tmp_path):
        ds = tiny_dataset()
        model, manifest = pl.train_pipeline(ds, tiny_config())
        path = tmp_path / "model.json"
        pl.save_model(model, path)
        clone = pl.load_model(path)
        for split in ("train", "val", "test"):
            assert pl.evaluate_model(clone, ds, split).to_json() == manifest["metrics"][split]
        bag = ds.bags[3].instances
        assert clone.score_raw_bag(bag) == model.score_raw_bag(bag)

    def test_model_carries_split_for_raw_datasets(self, tmp_path):
        ds = tiny_dataset()
        model, manifest = pl.train_pipeline(ds, tiny_config())
        bare = pl.load_model((pl.save_model(model, tmp_path / "m.json"), tmp_path / "m.json")[1])
        from dataclasses import replace
        raw = replace(ds, split={})
        rep = pl.evaluate_model(bare, raw, "test")
        assert rep.to_json() == manifest["metrics"]["test"]

    def test_corrupted_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(DataError, match="JSON"):
            pl.load_model(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format_version": 99}))
        with pytest.raises(DataError, match="version"):
            pl.load_model(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format_version": 1, "name": "x"}))
        with pytest.raises(DataError, match="missing"):
            pl.load_model(path)

    def test_dimension_mismatch_rejected(self):
        model, _ = pl.train_pipeline(tiny_dataset(), tiny_config())
        with pytest.raises(DataError, match="dim"):
            model.score_raw_bag(np.ones((2, 99)))


class TestExplainPath:
    def test_explanation_is_consistent_with_score(self):
        ds = tiny_dataset()
        model, _ = pl.train_pipeline(ds, tiny_config())
        bag = ds.bags[0].instances
        out = model.explain_raw_bag(bag)
        assert out["score"] == pytest.approx(model.score_raw_bag(bag), abs=1e-12)
        for _, idx, _ in out["winners"]:
            assert 0 <= idx < bag.shape[0]
