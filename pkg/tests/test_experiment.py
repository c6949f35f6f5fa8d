import dataclasses
import hashlib
import json

import numpy as np
import pytest

from percentmatch import (
    ConfigError,
    ExperimentConfig,
    TrainingDiverged,
    compare_runs,
    read_trace,
    run_experiment,
)
import percentmatch.experiment as experiment_mod


def quick_config(**overrides):
    """A config small enough to train in well under a second."""
    kwargs = dict(
        seed=0,
        n_samples=600,
        n_classes=5,
        n_features=12,
        imbalance_ratio=5.0,
        label_fraction=0.2,
        proto_rank=0,
        hidden_dim=0,
        total_iters=60,
        eval_every=30,
        warmup_iters=20,
        n_bins=20,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


class TestConfigFile:
    def test_roundtrip(self, tmp_path):
        cfg = quick_config(method="fixmatch-fixed", decay=0.5, scalar_alpha=True)
        path = tmp_path / "run.cfg"
        lines = [f"{k} = {v}" for k, v in cfg.to_dict().items()]
        path.write_text("\n".join(lines) + "\n")
        assert ExperimentConfig.from_file(path) == cfg

    def test_comments_and_colon_syntax(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# a comment\nseed: 3\nmethod = supervised-only  # trailing\n\n")
        cfg = ExperimentConfig.from_file(path)
        assert cfg.seed == 3
        assert cfg.method == "supervised-only"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seeed = 3\n")
        with pytest.raises(ConfigError, match="seeed"):
            ExperimentConfig.from_file(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("total_iters = many\n")
        with pytest.raises(ConfigError, match="total_iters"):
            ExperimentConfig.from_file(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            ExperimentConfig.from_file(path)

    def test_bool_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("scalar_alpha = true\nclamp_kappa_minus = 0\n")
        cfg = ExperimentConfig.from_file(path)
        assert cfg.scalar_alpha is True
        assert cfg.clamp_kappa_minus is False


class TestValidation:
    def test_bad_method(self, tmp_path):
        cfg = quick_config(method="mixmatch")
        with pytest.raises(ConfigError, match="method"):
            run_experiment(cfg, tmp_path / "t.jsonl")
        assert not (tmp_path / "t.jsonl").exists()

    def test_batch_exceeding_labeled_split(self):
        cfg = quick_config(batch_size=200)
        with pytest.raises(ConfigError, match="labeled split"):
            cfg.validate()

    def test_kappa_ordering(self):
        with pytest.raises(ConfigError, match="kappa"):
            quick_config(kappa_plus=0.1, kappa_minus=0.9).validate()

    def test_collects_multiple_problems(self):
        with pytest.raises(ConfigError, match="n_bins.*lr|lr.*n_bins"):
            quick_config(n_bins=0, lr=-1.0).validate()


class TestRun:
    def test_trace_structure_and_stamps(self, tmp_path):
        cfg = quick_config()
        report, path = run_experiment(cfg, tmp_path / "t.jsonl")
        header, iters, evals = read_trace(path)
        assert header["config"] == cfg.to_dict()
        assert [rec["t"] for rec in iters] == list(range(cfg.total_iters))
        assert [rec["t"] for rec in evals] == [29, 59]
        assert report.iteration == 59
        assert report.mean_ap == evals[-1]["mean_ap"]

    def test_warmup_alphas_are_zero(self, tmp_path):
        cfg = quick_config(total_iters=40, warmup_iters=25)
        _, path = run_experiment(cfg, tmp_path / "t.jsonl")
        _, iters, _ = read_trace(path)
        for rec in iters[:25]:
            assert all(a == 0.0 for a in rec["alpha"])

    def test_supervised_only_weights_nothing(self, tmp_path):
        cfg = quick_config(method="supervised-only", warmup_iters=0)
        _, path = run_experiment(cfg, tmp_path / "t.jsonl")
        _, iters, _ = read_trace(path)
        for rec in iters:
            assert all(a == 0.0 for a in rec["alpha"])
            assert rec["loss_total"] == rec["loss_sup"]
        assert any(rec["loss_unl"] > 0.0 for rec in iters[20:])

    def test_fixmatch_thresholds_are_constant(self, tmp_path):
        cfg = quick_config(method="fixmatch-fixed", total_iters=50)
        _, path = run_experiment(cfg, tmp_path / "t.jsonl")
        _, iters, _ = read_trace(path)
        for rec in iters:
            assert all(v == 0.95 for v in rec["tau_plus"])
            assert all(v == 0.0 for v in rec["tau_minus"])
            assert all(v == 0 for v in rec["sel_neg"])

    def test_first_iteration_uses_pre_update_histograms(self, tmp_path):
        # Thresholds recorded at t=0 must come from the untouched uniform
        # histograms (identity CDF, so tau equals the clamped percentile)
        # even though the histograms absorb the first batch within that same
        # iteration. By t=1 the EMA has moved them.
        from percentmatch import dataset_from_config, init_class_percentiles

        cfg = quick_config(decay=0.5)
        labeled, _, _ = dataset_from_config(cfg)
        expected = init_class_percentiles(cfg.kappa_plus, cfg.kappa_minus, labeled.labels)
        _, path = run_experiment(cfg, tmp_path / "t.jsonl")
        _, iters, _ = read_trace(path)
        first = iters[0]
        assert np.allclose(first["tau_plus"], expected.kappa_plus, atol=1e-9)
        assert np.allclose(first["tau_minus"], expected.kappa_minus, atol=1e-9)
        second = iters[1]
        assert any(abs(a - b) > 1e-12 for a, b in zip(first["tau_plus"], second["tau_plus"]))

    def test_scalar_alpha_mode_applies_uniform_weight(self, tmp_path):
        cfg = quick_config(scalar_alpha=True, warmup_iters=0)
        _, path = run_experiment(cfg, tmp_path / "t.jsonl")
        _, iters, _ = read_trace(path)
        for rec in iters:
            assert len(set(rec["alpha"])) == 1

    def test_replay_is_byte_identical(self, tmp_path):
        cfg = quick_config(total_iters=50)
        run_experiment(cfg, tmp_path / "a.jsonl")
        run_experiment(cfg, tmp_path / "b.jsonl")
        digest_a = hashlib.sha256((tmp_path / "a.jsonl").read_bytes()).hexdigest()
        digest_b = hashlib.sha256((tmp_path / "b.jsonl").read_bytes()).hexdigest()
        assert digest_a == digest_b

    def test_nan_loss_aborts_with_iteration(self, tmp_path, monkeypatch):
        calls = {"n": 0}
        real = experiment_mod.supervised_loss

        def poisoned(labels, scores, cfg):
            calls["n"] += 1
            if calls["n"] > 10:
                return float("nan")
            return real(labels, scores, cfg)

        monkeypatch.setattr(experiment_mod, "supervised_loss", poisoned)
        with pytest.raises(TrainingDiverged) as excinfo:
            run_experiment(quick_config(), tmp_path / "t.jsonl")
        assert excinfo.value.iteration == 10


class TestCompare:
    def test_identical_runs_have_zero_delta(self, tmp_path):
        cfg = quick_config()
        run_experiment(cfg, tmp_path / "a.jsonl")
        run_experiment(cfg, tmp_path / "b.jsonl")
        summary = compare_runs([tmp_path / "a.jsonl", tmp_path / "b.jsonl"])
        assert summary["pairwise_map_delta"] == 0.0

    def test_method_comparison_summary(self, tmp_path):
        paths = []
        for method in ("percentmatch", "supervised-only"):
            for seed in (0, 1):
                cfg = quick_config(seed=seed, method=method)
                _, path = run_experiment(cfg, tmp_path / f"{method}-{seed}.jsonl")
                paths.append(path)
        summary = compare_runs(paths)
        assert set(summary["methods"]) == {"percentmatch", "supervised-only"}
        assert summary["methods"]["percentmatch"]["seeds"] == [0, 1]
        (delta,) = summary["deltas"]
        assert delta["seeds"] == [0, 1]
        assert len(delta["map_delta_by_seed"]) == 2

    def test_mismatched_seeds_refused(self, tmp_path):
        run_experiment(quick_config(seed=0), tmp_path / "a.jsonl")
        run_experiment(quick_config(seed=1, method="supervised-only"), tmp_path / "b.jsonl")
        with pytest.raises(ValueError, match="seed"):
            compare_runs([tmp_path / "a.jsonl", tmp_path / "b.jsonl"])

    def test_mismatched_dataset_parameters_refused(self, tmp_path):
        run_experiment(quick_config(), tmp_path / "a.jsonl")
        run_experiment(quick_config(n_samples=700), tmp_path / "b.jsonl")
        with pytest.raises(ValueError, match="dataset parameters"):
            compare_runs([tmp_path / "a.jsonl", tmp_path / "b.jsonl"])

    def test_single_trace_refused(self, tmp_path):
        _, path = run_experiment(quick_config(), tmp_path / "a.jsonl")
        with pytest.raises(ValueError, match="two traces"):
            compare_runs([path])

    def test_read_trace_rejects_headerless_file(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps({"record": "iteration", "t": 0}) + "\n")
        with pytest.raises(ValueError, match="header"):
            read_trace(path)
