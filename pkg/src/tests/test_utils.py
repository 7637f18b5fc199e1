"""
Tests for utility modules
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest


class TestErrors:
    """Tests for the exception hierarchy"""

    def test_exit_codes(self):
        """Each error family maps to one process exit code"""
        from src.config.constants import ExitCode
        from src.utils.errors import ConfigError, DataError, FormatError, NumericalAbort, SplitError

        assert ConfigError("x").exit_code == ExitCode.USAGE
        assert DataError("x").exit_code == ExitCode.DATA
        assert FormatError("x").exit_code == ExitCode.DATA
        assert SplitError("x").exit_code == ExitCode.DATA
        assert NumericalAbort("x").exit_code == ExitCode.NUMERICAL

    def test_parse_error_line_number(self):
        """The offending line is kept and prefixed to the message"""
        from src.utils.errors import DataError, ParseError

        error = ParseError("expected 3 fields", line_number=7)
        assert error.line_number == 7
        assert str(error) == "line 7: expected 3 fields"
        assert isinstance(error, DataError)
        assert str(ParseError("bad")) == "bad"


class TestCaching:
    """Tests for caching utilities"""

    def test_matrix_digest(self):
        """Digest depends on content, shape, dtype and tag"""
        from src.utils.caching import matrix_digest

        a = np.arange(6, dtype=np.float64).reshape(2, 3)
        assert matrix_digest(a) == matrix_digest(a.copy())
        assert matrix_digest(a) != matrix_digest(a.reshape(3, 2))
        assert matrix_digest(a) != matrix_digest(a.astype(np.float32))
        assert matrix_digest(a) != matrix_digest(a, tag="svd")
        assert matrix_digest(a.T) == matrix_digest(np.ascontiguousarray(a.T))

    def test_get_or_compute(self, tmp_path):
        """Second request for the same matrix is a hit"""
        from src.utils.caching import FactorCache

        cache = FactorCache(cache_dir=tmp_path / "factors")
        calls = []

        def compute(matrix):
            calls.append(1)
            return matrix.sum()

        matrix = np.ones((3, 3))
        assert cache.get_or_compute(matrix, compute) == 9.0
        assert cache.get_or_compute(matrix, compute) == 9.0
        assert len(calls) == 1
        assert cache.get_stats() == {"memory_items": 1, "hits": 1, "misses": 1, "enabled": True}

    def test_disk_survives_new_instance(self, tmp_path):
        """Entries written by one cache are read by another on the same directory"""
        from src.utils.caching import FactorCache

        FactorCache(cache_dir=tmp_path).set("key", {"value": 3})
        assert FactorCache(cache_dir=tmp_path).get("key") == {"value": 3}

    def test_memory_eviction(self):
        """The oldest in-memory entry is dropped at capacity"""
        from src.utils.caching import FactorCache

        cache = FactorCache(max_memory_items=2)
        for key in ("a", "b", "c"):
            cache.set(key, key.upper())
        assert cache.get("a") is None
        assert cache.get("c") == "C"

    def test_disabled(self, tmp_path):
        """A disabled cache stores nothing and recomputes every time"""
        from src.utils.caching import FactorCache

        cache = FactorCache(cache_dir=tmp_path / "off", enabled=False)
        cache.set("key", 1)
        assert cache.get("key") is None
        assert not (tmp_path / "off").exists()

        calls = []
        for _ in range(2):
            cache.get_or_compute(np.zeros(2), lambda m: calls.append(1) or 0)
        assert len(calls) == 2

    def test_clear(self, tmp_path):
        """Clearing counts memory entries and files"""
        from src.utils.caching import FactorCache

        cache = FactorCache(cache_dir=tmp_path)
        cache.set("a", 1)
        cache.set("b", 2)
        assert cache.clear(memory_only=True) == 2
        assert cache.get("a") == 1
        assert cache.clear() == 3
        assert cache.get("b") is None

    def test_global_cache_singleton(self, tmp_path):
        """get_factor_cache returns one instance configured from settings"""
        from src.utils.caching import get_factor_cache

        cache = get_factor_cache()
        assert cache is get_factor_cache()
        assert cache.cache_dir == tmp_path / "cache"


class TestSeeding:
    """Tests for named random streams"""

    def test_independent_of_request_order(self):
        """A stream's draws do not depend on which streams were created first"""
        from src.utils.seeding import RngStreams

        first = RngStreams(5)
        first.stream(RngStreams.NEGATIVES).random(10)
        drawn = first.stream(RngStreams.INIT).random(4)

        assert np.array_equal(drawn, RngStreams(5).stream(RngStreams.INIT).random(4))

    def test_streams_differ(self):
        """Different names and different seeds give different draws"""
        from src.utils.seeding import RngStreams

        streams = RngStreams(5)
        init = streams.stream(RngStreams.INIT).random(4)
        assert not np.array_equal(init, streams.stream(RngStreams.DROPOUT).random(4))
        assert not np.array_equal(init, RngStreams(6).stream(RngStreams.INIT).random(4))

    def test_stream_is_reused(self):
        """stream() continues one generator; fresh() restarts it"""
        from src.utils.seeding import RngStreams

        streams = RngStreams(5)
        assert streams.stream(RngStreams.SHUFFLE) is streams.stream(RngStreams.SHUFFLE)
        head = streams.stream(RngStreams.SHUFFLE).random(3)
        assert np.array_equal(streams.fresh(RngStreams.SHUFFLE).random(3), head)


class TestValidation:
    """Tests for validation utilities"""

    def test_validate_paths(self, tmp_path):
        """Missing and unset paths are both reported"""
        from src.utils.validation import ConfigValidator

        present = tmp_path / "present.tsv"
        present.write_text("", encoding="utf-8")

        assert ConfigValidator.validate_paths([present], ["run.interactions"])
        result = ConfigValidator.validate_paths([None, tmp_path / "absent"], ["run.embeddings", "checkpoint"])
        assert not result
        assert result.errors[0] == "run.embeddings is required"
        assert result.errors[1].startswith("checkpoint not found")

    def test_validate_synth(self):
        """Latent rank must fit the matrix; few users only warn"""
        from src.config.run_config import SynthSection
        from src.utils.validation import ConfigValidator

        assert not ConfigValidator.validate_synth(SynthSection(n_items=5, dim=4, rank=6))
        assert not ConfigValidator.validate_synth(SynthSection(min_seq_len=9, max_seq_len=5))

        result = ConfigValidator.validate_synth(SynthSection(n_users=5))
        assert result.is_valid
        assert len(result.warnings) == 1

    def test_validate_model(self):
        """d is bounded by the spectral rank for spectral transforms only"""
        from src.config.run_config import ModelSection, RunConfig
        from src.utils.validation import ConfigValidator

        spectral = RunConfig(model=ModelSection(transform="spectran", d=8))
        assert not ConfigValidator.validate_model(spectral, rank=4)
        assert ConfigValidator.validate_model(spectral, rank=8)
        assert ConfigValidator.validate_model(RunConfig(model=ModelSection(transform="mlp", d=8)), rank=4)

        orphan = RunConfig(model=ModelSection(transform="none", fusion="semantic_init"))
        assert not ConfigValidator.validate_model(orphan)

    def test_validate_and_raise(self):
        """Failures become ConfigError with every message joined"""
        from src.utils.errors import ConfigError
        from src.utils.validation import ValidationResult, validate_and_raise

        validate_and_raise(ValidationResult.success())
        with pytest.raises(ConfigError, match="Model invalid: a; b"):
            validate_and_raise(ValidationResult.failure(["a", "b"]), "Model")


class TestLogging:
    """Tests for logging utilities"""

    def test_training_logger_jsonl(self, tmp_path):
        """One JSON object per epoch; an existing log is truncated"""
        from src.utils.logging_config import TrainingLogger

        path = tmp_path / "logs" / "train_log.jsonl"
        path.parent.mkdir()
        path.write_text("stale\n", encoding="utf-8")

        training_log = TrainingLogger(path)
        record = training_log.log_epoch(1, 2.5, 0.125, 0.5, 100)
        training_log.log_epoch(2, 2.0, 0.25, 1.0, 100)

        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0]) == record
        assert tuple(record) == TrainingLogger.FIELDS

    def test_training_logger_without_file(self):
        """Records are still returned when no file is configured"""
        from src.utils.logging_config import TrainingLogger

        record = TrainingLogger().log_epoch(3, 1.0, 0.5, 2.0, 10)
        assert record["epoch"] == 3

    def test_progress_tracker(self):
        """Progress is clamped to the total"""
        from src.utils.logging_config import ProgressTracker

        tracker = ProgressTracker(total=3, description="Training")
        tracker.update(2, "half")
        tracker.update(5)
        assert tracker.current == 3
        assert tracker.finish() >= 0.0

    def test_setup_logging_file(self, tmp_path):
        """A log file handler is added next to the console handler"""
        from src.utils.logging_config import get_logger, setup_logging

        log_file = tmp_path / "logs" / "run.log"
        root = setup_logging(level="DEBUG", log_file=str(log_file), use_rich=False)
        try:
            assert root.level == logging.DEBUG
            assert len(root.handlers) == 2
            get_logger("spectran.test").info("SPLIT | users=30")
            assert "SPLIT | users=30" in log_file.read_text(encoding="utf-8")
        finally:
            for handler in list(root.handlers):
                handler.close()
                root.removeHandler(handler)
            root.setLevel(logging.WARNING)


class TestConstants:
    """Tests for constant vocabularies"""

    def test_partition_codes(self):
        """Partitions round-trip through their binary codes"""
        from src.config.constants import Partition

        assert [p.code for p in Partition] == [0, 1, 2]
        assert Partition.from_code(1) == Partition.VALID
        with pytest.raises(ValueError):
            Partition.from_code(9)

    def test_static_transforms(self):
        """Only the SVD baselines are parameter-free"""
        from src.config.constants import TransformKind

        assert {t for t in TransformKind if t.is_static} == {
            TransformKind.SVD_TRUNCATE,
            TransformKind.SVD_IDENTITY,
        }

    def test_protocol_grids(self):
        """Search grids cover the documented values"""
        from src.config.constants import DROPOUT_GRID, WEIGHT_DECAY_GRID

        assert DROPOUT_GRID == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
        assert 0.0 in WEIGHT_DECAY_GRID


class TestSettings:
    """Tests for process settings and run configuration"""

    def test_env_prefix(self, monkeypatch):
        """SPECTRAN_ environment variables override defaults"""
        from src.config.settings import get_settings

        monkeypatch.setenv("SPECTRAN_EVAL_WORKERS", "2")
        get_settings.cache_clear()
        settings = get_settings()
        assert settings.eval_workers == 2
        assert settings.use_rich is False

    def test_settings_cached(self):
        """get_settings returns one instance until cleared"""
        from src.config.settings import get_settings

        assert get_settings() is get_settings()

    def test_defaults(self):
        """An empty configuration carries the protocol defaults"""
        from src.config.constants import DEFAULT_EMBED_DIM, DEFAULT_SEED
        from src.config.run_config import RunConfig, load_run_config

        config = load_run_config(None)
        assert config == RunConfig()
        assert config.run.seed == DEFAULT_SEED
        assert config.model.m is None
        assert config.echo()["model"]["m"] == DEFAULT_EMBED_DIM

    def test_empty_file(self, tmp_path):
        """An empty TOML file is a valid configuration"""
        from src.config.run_config import RunConfig, load_run_config

        path = tmp_path / "empty.toml"
        path.write_text("", encoding="utf-8")
        assert load_run_config(path) == RunConfig()

    def test_overrides(self):
        """Command-line overrides return a new configuration"""
        from src.config.run_config import RunConfig

        config = RunConfig()
        assert config.with_overrides() is config

        changed = config.with_overrides(seed=5, deterministic=False, output_dir="out")
        assert changed.run.seed == 5
        assert changed.run.deterministic is False
        assert changed.run.output_dir == Path("out")
        assert config.run.seed != 5

    def test_grid_order(self):
        """Dropout varies slowest, weight decay fastest"""
        from src.config.run_config import TrainSection

        section = TrainSection(dropout=[0.0, 0.1], weight_decay=[1e-4, 0.0])
        assert section.grid() == [(0.0, 1e-4), (0.0, 0.0), (0.1, 1e-4), (0.1, 0.0)]
        assert TrainSection().grid() == [(0.0, 0.0)]

    def test_heads_must_divide_dim(self):
        """Model sections reject head counts that do not divide d"""
        from src.config.run_config import ModelSection

        with pytest.raises(ValueError):
            ModelSection(d=6, heads=4)
        assert ModelSection(d=8, m=3).attention_dim == 3

    @pytest.mark.parametrize("text", [
        "[run\n",
        "[run]\nunknown = 1\n",
        "[run]\nsplit_ratios = [0.5, 0.5, 0.5]\n",
        "[model]\ntaylor_order = 9\n",
        "[train]\nweight_decay = [0.0, -1.0]\n",
        "[train]\nweight_decay = 0.5\n",
        "[train]\nweight_decay = [1e-4, 3e-3]\n",
    ])
    def test_invalid_files(self, tmp_path, text):
        """Syntax errors, unknown keys and out-of-range values are ConfigError"""
        from src.config.run_config import load_run_config
        from src.utils.errors import ConfigError

        path = tmp_path / "bad.toml"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_invalid_utf8_file(self, tmp_path):
        """Undecodable bytes are a ConfigError"""
        from src.config.run_config import load_run_config
        from src.utils.errors import ConfigError

        path = tmp_path / "bad.toml"
        path.write_bytes(b"[run]\nname = \"\xff\"\n")
        with pytest.raises(ConfigError):
            load_run_config(path)
