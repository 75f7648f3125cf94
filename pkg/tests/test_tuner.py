import json

import pytest

from vsamil import pipeline as pl
from vsamil import tuner
from vsamil.exceptions import ConfigError
from surrogate import generate_surrogate


def small_dataset():
    return generate_surrogate("tune-toy", 16, 16, 12, (2, 5), seed=3)


def base_config():
    return pl.RunConfig(seed=0, latent_dim=16, blocks=1, layers=1,
                        autoencoder_epochs=8, classifier_epochs=10)


class TestSampling:
    def test_ranges_respected(self):
        for p in tuner.sample_trials(200, seed=0):
            assert 1 <= p["blocks"] <= 2
            assert 1 <= p["layers"] <= 4
            assert 3 <= p["codebook_k"] <= 10
            assert 1 <= p["concepts"] <= 20
            assert 1e-3 <= p["classifier_lr"] <= 0.3

    def test_deterministic(self):
        assert tuner.sample_trials(20, seed=4) == tuner.sample_trials(20, seed=4)

    def test_space_is_actually_explored(self):
        draws = tuner.sample_trials(200, seed=1)
        assert {p["blocks"] for p in draws} == {1, 2}
        assert {p["layers"] for p in draws} == {1, 2, 3, 4}
        assert {p["codebook_k"] for p in draws} == set(range(3, 11))


class TestTune:
    def test_selects_by_val_auroc_and_reproduces(self):
        out = tuner.tune(small_dataset(), base_config(), n_trials=5)
        best_rows = [r for r in out["trials"] if r["trial"] == out["best_trial"]]
        assert best_rows[0]["val_auroc"] == max(r["val_auroc"] for r in out["trials"])
        # the standalone retrain of the winning config hits the same number
        assert out["retrained_val_auroc"] == out["best_val_auroc"]

    def test_resume_from_partial_log(self, tmp_path):
        log = tmp_path / "trials.jsonl"
        full = tuner.tune(small_dataset(), base_config(), n_trials=5, log_path=str(log))
        lines = log.read_text().strip().splitlines()
        assert len(lines) == 5
        # keep only the first 2 trials and resume
        log.write_text("\n".join(lines[:2]) + "\n")
        resumed = tuner.tune(small_dataset(), base_config(), n_trials=5, log_path=str(log))
        assert resumed["trials"] == full["trials"]
        assert len(log.read_text().strip().splitlines()) == 5

    def test_requires_validation_split(self):
        from vsamil import milcheck as mc
        ds = mc.generate_poison(mc.PoisonSpec(variant=1, seed=0, n_train=16, n_test=16))
        with pytest.raises(ConfigError, match="validation"):
            tuner.tune(ds, base_config(), n_trials=2)

    def test_trial_log_rows_are_json_with_config(self, tmp_path):
        log = tmp_path / "trials.jsonl"
        tuner.tune(small_dataset(), base_config(), n_trials=2, log_path=str(log))
        rows = [json.loads(l) for l in log.read_text().strip().splitlines()]
        for row in rows:
            pl.RunConfig.from_dotted(row["config"])  # must parse back
            assert 0.0 <= row["val_auroc"] <= 1.0


class TestProtocol:
    def test_per_seed_reports_and_best(self):
        out = tuner.run_benchmark_protocol(small_dataset(), base_config(),
                                           n_trials=3, seeds=(0, 1))
        assert [r["seed"] for r in out["per_seed"]] == [0, 1]
        assert out["best_test_auroc"] == max(r["test_auroc"] for r in out["per_seed"])
