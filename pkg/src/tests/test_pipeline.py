"""
End-to-end tests of the command pipeline on a small synthetic benchmark
"""

import json

import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def synth_data(tmp_path, write_run_config):
    """Synthetic embeddings and interactions under tmp_path/data"""
    from src.main import main

    data_dir = tmp_path / "data"
    config_path = write_run_config(data_dir)
    assert main(["synth", "--config", str(config_path)]) == 0
    return data_dir


@pytest.fixture
def prepared_run(tmp_path, synth_data, write_run_config):
    """Return a factory for preprocessed run directories (config path, out dir)"""
    from src.main import main

    def _prepare(name: str, transform: str = "spectran", **kwargs):
        out_dir = tmp_path / name
        config_path = write_run_config(
            out_dir,
            transform=transform,
            embeddings=(synth_data / "embeddings.emb1").as_posix(),
            interactions=(synth_data / "interactions.tsv").as_posix(),
            **kwargs,
        )
        assert main(["preprocess", "--config", str(config_path)]) == 0
        return config_path, out_dir

    return _prepare


class TestSynthCommand:
    """Tests for benchmark generation"""

    def test_outputs(self, synth_data):
        """An EMB1 matrix and a three-column interaction log"""
        from src.layers.ingestion import load_embedding_matrix, load_interactions

        assert load_embedding_matrix(synth_data / "embeddings.emb1").shape == (40, 16)
        log = load_interactions(synth_data / "interactions.tsv", min_interactions=1)
        assert log.n_users == 30

    def test_seed_reproducible(self, tmp_path, write_run_config):
        """Same seed, byte-identical files"""
        from src.main import main

        for name in ("a", "b"):
            assert main(["synth", "--config", str(write_run_config(tmp_path / name))]) == 0
        for file_name in ("embeddings.emb1", "interactions.tsv"):
            assert (tmp_path / "a" / file_name).read_bytes() == (tmp_path / "b" / file_name).read_bytes()

    def test_seed_flag_changes_output(self, tmp_path, write_run_config):
        """--seed overrides run.seed"""
        from src.main import main

        config_path = write_run_config(tmp_path / "a")
        assert main(["synth", "--config", str(config_path)]) == 0
        assert main(["synth", "--config", str(config_path), "--seed", "12", "--out", str(tmp_path / "c")]) == 0
        assert (tmp_path / "a" / "embeddings.emb1").read_bytes() != (tmp_path / "c" / "embeddings.emb1").read_bytes()


class TestPreprocessCommand:
    """Tests for filtering and splitting"""

    def test_split_files(self, prepared_run):
        """splits.bin and stats.json describe a 24/3/3 partition"""
        _, out_dir = prepared_run("run")
        stats = json.loads((out_dir / "stats.json").read_text(encoding="utf-8"))
        assert stats["users"] == 30
        assert stats["partitions"] == {"train": 24, "valid": 3, "test": 3}
        assert (out_dir / "splits.bin").exists()

    def test_ten_users(self, tmp_path, write_run_config):
        """Ten users split 8/1/1"""
        from src.main import main
        from src.utils.file_handlers import write_interactions_tsv

        users = np.repeat(np.arange(10), 3)
        log_path = write_interactions_tsv(tmp_path / "log.tsv", users, np.tile([1, 2, 3], 10), np.arange(30))
        config_path = write_run_config(tmp_path / "run", interactions=log_path.as_posix())
        assert main(["preprocess", "--config", str(config_path)]) == 0

        stats = json.loads((tmp_path / "run" / "stats.json").read_text(encoding="utf-8"))
        assert stats["partitions"] == {"train": 8, "valid": 1, "test": 1}

    def test_missing_interactions(self, tmp_path, write_run_config):
        """A missing input path exits with the usage code"""
        from src.main import main

        config_path = write_run_config(tmp_path / "run", interactions=(tmp_path / "absent.tsv").as_posix())
        assert main(["preprocess", "--config", str(config_path)]) == 2

    def test_reference_mismatch(self, tmp_path, synth_data, write_run_config):
        """Counts that disagree with the named reference exit with the data code"""
        from src.main import main

        config_path = write_run_config(
            tmp_path / "run",
            interactions=(synth_data / "interactions.tsv").as_posix(),
            reference_stats="toy",
        )
        assert main(["preprocess", "--config", str(config_path)]) == 3
        assert (tmp_path / "run" / "stats.json").exists()

    def test_parse_error_exit_code(self, tmp_path, write_run_config):
        """Malformed logs exit with the data code"""
        from src.main import main

        log_path = tmp_path / "bad.tsv"
        log_path.write_text("1\t2\tthree\n", encoding="utf-8")
        config_path = write_run_config(tmp_path / "run", interactions=log_path.as_posix())
        assert main(["preprocess", "--config", str(config_path)]) == 3

    def test_invalid_utf8_exit_code(self, tmp_path, write_run_config):
        """Undecodable log bytes exit with the data code"""
        from src.main import main

        log_path = tmp_path / "bad.tsv"
        log_path.write_bytes(b"\xff\t2\t3\n")
        config_path = write_run_config(tmp_path / "run", interactions=log_path.as_posix())
        assert main(["preprocess", "--config", str(config_path)]) == 3


class TestTrainEvaluateDiagnose:
    """Tests for the train / evaluate / diagnose commands"""

    def test_full_run(self, prepared_run):
        """Training writes a checkpoint; evaluation and diagnosis read it"""
        from src.layers.scoring import MetricsRow
        from src.main import main

        config_path, out_dir = prepared_run("run")
        assert main(["train", "--config", str(config_path)]) == 0
        for name in ("checkpoint.bin", "efficiency.json", "config_echo.json", "train_log.jsonl"):
            assert (out_dir / name).exists()

        echo = json.loads((out_dir / "config_echo.json").read_text(encoding="utf-8"))
        assert echo["model"]["m"] == 4
        efficiency = json.loads((out_dir / "efficiency.json").read_text(encoding="utf-8"))
        assert efficiency["adapter_params"] > 0

        assert main(["evaluate", "--config", str(config_path)]) == 0
        metrics = json.loads((out_dir / "metrics.json").read_text(encoding="utf-8"))
        assert metrics["users"] == 3
        assert MetricsRow(**metrics).is_consistent()
        assert list(pd.read_csv(out_dir / "metrics.csv").columns) == list(MetricsRow.COLUMNS)

        checkpoint = str(out_dir / "checkpoint.bin")
        assert main(["diagnose", "--config", str(config_path), "--checkpoint", checkpoint, "--weights",
                     "--top-k", "3", "--dataset-name", "synthetic-small"]) == 0
        spectrum = pd.read_csv(out_dir / "spectrum.csv")
        assert list(spectrum.columns) == ["source", "rank", "eigenvalue", "cumulative_fraction"]
        assert sorted(spectrum["source"].unique()) == ["projected", "raw"]
        assert len(spectrum) == 6
        weights = pd.read_csv(out_dir / "weights.csv")
        assert weights["dataset"].tolist() == ["synthetic-small"]
        assert (weights[["principal", "subordinate"]].to_numpy() >= 0).all()

    def test_evaluation_is_repeatable(self, prepared_run):
        """Evaluating one checkpoint twice writes identical files"""
        from src.main import main

        config_path, out_dir = prepared_run("run")
        assert main(["train", "--config", str(config_path)]) == 0
        assert main(["evaluate", "--config", str(config_path)]) == 0
        first = (out_dir / "metrics.json").read_bytes()
        assert main(["evaluate", "--config", str(config_path)]) == 0
        assert (out_dir / "metrics.json").read_bytes() == first

    def test_training_is_repeatable(self, prepared_run):
        """Same configuration and seed give byte-identical checkpoints"""
        from src.main import main

        config_a, out_a = prepared_run("a")
        config_b, out_b = prepared_run("b")
        assert main(["train", "--config", str(config_a)]) == 0
        assert main(["train", "--config", str(config_b)]) == 0
        assert (out_a / "checkpoint.bin").read_bytes() == (out_b / "checkpoint.bin").read_bytes()

    def test_checkpoint_dimension_mismatch(self, prepared_run, write_run_config, synth_data):
        """A checkpoint trained with another d is rejected"""
        from src.config.run_config import load_run_config
        from src.main import main
        from src.services.pipeline_service import PipelineService
        from src.utils.errors import ConfigError

        config_path, out_dir = prepared_run("run")
        assert main(["train", "--config", str(config_path)]) == 0

        other = write_run_config(
            out_dir, d=2,
            embeddings=(synth_data / "embeddings.emb1").as_posix(),
            interactions=(synth_data / "interactions.tsv").as_posix(),
        )
        with pytest.raises(ConfigError):
            PipelineService(load_run_config(other)).evaluate()
        assert main(["evaluate", "--config", str(other)]) == 2

    def test_weights_need_spectran(self, prepared_run):
        """The weight report is refused for a model without the spectral adapter"""
        from src.main import main

        config_path, out_dir = prepared_run("run", transform="none")
        assert main(["train", "--config", str(config_path)]) == 0
        checkpoint = str(out_dir / "checkpoint.bin")
        assert main(["diagnose", "--config", str(config_path), "--checkpoint", checkpoint, "--weights"]) == 2
        assert main(["diagnose", "--config", str(config_path), "--checkpoint", checkpoint]) == 0

    def test_train_without_splits(self, tmp_path, write_run_config):
        """Training before preprocessing is a usage error"""
        from src.main import main

        assert main(["train", "--config", str(write_run_config(tmp_path / "empty"))]) == 2


class TestCli:
    """Tests for argument handling"""

    def test_no_command(self):
        """Running without a command prints help and exits with the usage code"""
        from src.main import main

        assert main([]) == 2

    def test_missing_config(self, tmp_path):
        """An unreadable configuration exits with the usage code"""
        from src.main import main

        assert main(["synth", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_invalid_config_value(self, tmp_path):
        """Out-of-range values are reported as configuration errors"""
        from src.config.run_config import load_run_config
        from src.utils.errors import ConfigError

        path = tmp_path / "bad.toml"
        path.write_text("[train]\ndropout = 0.9\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="dropout"):
            load_run_config(path)

    def test_unknown_flag(self):
        """argparse rejects unknown options"""
        from src.main import main

        with pytest.raises(SystemExit):
            main(["train", "--no-such-flag"])
