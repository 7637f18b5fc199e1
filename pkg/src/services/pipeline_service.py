"""
Pipeline Service for SpecTran
Wires the layers into the synth / preprocess / train / evaluate / diagnose commands
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.config.constants import (
    DEFAULT_SPECTRUM_TOP_K,
    REFERENCE_DATASET_STATS,
    OutputFiles,
    Partition,
    TransformKind,
)
from src.config.run_config import RunConfig
from src.layers.ingestion import align_embeddings, load_embedding_matrix, load_interactions
from src.layers.model import SequentialRecommender
from src.layers.scoring import MetricsRow, evaluate_split
from src.layers.spectral import SpectralLayer, SpectrumReport, SvdFactors, cumulative_spectrum
from src.layers.splitting import SplitDataset, chronological_split, split_summary
from src.layers.synthetic import synth_generate
from src.numkit.matrix import set_deterministic
from src.services.training_service import EfficiencyReport, Trainer, TrainingResult
from src.utils.errors import ConfigError, DataError, UnsupportedOperationError
from src.utils.file_handlers import (
    read_checkpoint,
    read_splits,
    write_checkpoint,
    write_csv,
    write_emb1,
    write_interactions_tsv,
    write_json,
    write_splits,
)
from src.utils.logging_config import get_logger
from src.utils.seeding import RngStreams
from src.utils.validation import ConfigValidator, validate_and_raise

logger = get_logger(__name__)

PathLike = Union[str, Path]

SPECTRUM_COLUMNS = ("source", "rank", "eigenvalue", "cumulative_fraction")
WEIGHT_COLUMNS = ("dataset", "principal", "subordinate")


class PipelineService:
    """
    Command orchestration for one run configuration.

    Every command fixes the kernel mode from run.deterministic first, so
    identical configuration and seed give bitwise-identical files.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.run.output_dir)
        self._spectral_layer: Optional[SpectralLayer] = None
        set_deterministic(config.run.deterministic)

    @property
    def spectral_layer(self) -> SpectralLayer:
        if self._spectral_layer is None:
            self._spectral_layer = SpectralLayer()
        return self._spectral_layer

    def _out(self, name: str) -> Path:
        return self.out_dir / name

    # ------------------------------------------------------------------
    # Shared loaders
    # ------------------------------------------------------------------

    def load_dataset(self) -> SplitDataset:
        splits = self._out(OutputFiles.SPLITS)
        if not splits.exists():
            raise ConfigError(f"No split file at {splits}; run preprocess first")
        return SplitDataset.from_records(read_splits(splits))

    def load_semantic(self, dataset: SplitDataset) -> Optional[np.ndarray]:
        """Embedding rows of the retained items, or None when the model ignores them"""
        if self.config.model.transform == TransformKind.NONE:
            return None
        path = self.config.run.embeddings
        validate_and_raise(ConfigValidator.validate_paths([path], ["run.embeddings"]), "Run paths")
        return align_embeddings(load_embedding_matrix(path), dataset.item_ids)

    def spectral_factors(self, semantic: Optional[np.ndarray]) -> Optional[SvdFactors]:
        transform = self.config.model.transform
        if semantic is None or transform in (TransformKind.NONE, TransformKind.MLP):
            return None
        factors = self.spectral_layer.decompose(semantic)
        validate_and_raise(ConfigValidator.validate_model(self.config, factors.rank), "Model")
        return factors

    def restore_model(self, checkpoint: Optional[PathLike] = None) -> Tuple[SequentialRecommender, SplitDataset, Dict[str, Any]]:
        """
        Rebuild the configured model and load checkpoint weights into it

        Raises:
            ConfigError: checkpoint d, transform or fusion disagree with the configuration
        """
        path = Path(checkpoint) if checkpoint is not None else self._out(OutputFiles.CHECKPOINT)
        validate_and_raise(ConfigValidator.validate_paths([path], ["checkpoint"]), "Checkpoint")
        tensors, meta = read_checkpoint(path)

        model_cfg = self.config.model
        expected = {"d": model_cfg.d, "transform": model_cfg.transform.value, "fusion": model_cfg.fusion.value}
        for key, value in expected.items():
            if key in meta and meta[key] != value:
                raise ConfigError(f"Checkpoint {key}={meta[key]} but configuration has {key}={value}")

        dataset = self.load_dataset()
        semantic = self.load_semantic(dataset)
        model = SequentialRecommender(
            model_cfg,
            n_items=dataset.n_items,
            max_len=dataset.max_len,
            dropout=float(meta.get("dropout", 0.0)),
            semantic=semantic,
            factors=self.spectral_factors(semantic),
        )
        model.initialize(RngStreams(self.config.run.seed).stream(RngStreams.INIT))
        model.load_tensors(tensors)
        logger.info(f"CHECKPOINT_LOADED | path={path} | tensors={len(tensors)}")
        return model, dataset, meta

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def synth(self) -> Dict[str, Path]:
        """Write a synthetic embeddings.emb1 and interactions.tsv"""
        streams = RngStreams(self.config.run.seed)
        semantic, log = synth_generate(self.config.synth, streams.stream(RngStreams.SYNTH))
        paths = {
            "embeddings": write_emb1(self._out(OutputFiles.EMBEDDINGS), semantic),
            "interactions": write_interactions_tsv(
                self._out(OutputFiles.INTERACTIONS),
                log.user_ids[log.users], log.item_ids[log.items], log.timestamps,
            ),
        }
        logger.info(f"SYNTH_WRITTEN | out={self.out_dir}")
        return paths

    def preprocess(self) -> Dict[str, Any]:
        """
        Filter, split and write splits.bin plus stats.json

        Raises:
            ConfigError: interactions path missing
            DataError: counts disagree with the named reference dataset
        """
        run = self.config.run
        validate_and_raise(ConfigValidator.validate_paths([run.interactions], ["run.interactions"]), "Run paths")

        log = load_interactions(run.interactions, run.min_interactions)
        dataset = chronological_split(log, run.split_ratios, run.max_len)
        write_splits(self._out(OutputFiles.SPLITS), dataset.to_records())

        reference = None
        if run.reference_stats is not None:
            if run.reference_stats not in REFERENCE_DATASET_STATS:
                raise ConfigError(f"Unknown reference dataset: {run.reference_stats}")
            reference = REFERENCE_DATASET_STATS[run.reference_stats]
        summary = split_summary(dataset, reference)
        summary["dataset"] = run.dataset_name
        write_json(self._out(OutputFiles.STATS), summary)

        if reference is not None and not summary["reference_match"]:
            raise DataError(
                f"Dataset statistics {summary['users']}/{summary['items']}/{summary['interactions']} "
                f"do not match reference {run.reference_stats} {reference}"
            )
        logger.info(
            f"PREPROCESS_COMPLETE | users={summary['users']} | items={summary['items']} | "
            f"interactions={summary['interactions']} | density={summary['density']:.6f}"
        )
        return summary

    def train(self) -> TrainingResult:
        """Train (over the configured grid) and write the best checkpoint and reports"""
        dataset = self.load_dataset()
        validate_and_raise(ConfigValidator.validate_model(self.config), "Model")
        semantic = self.load_semantic(dataset)
        factors = self.spectral_factors(semantic)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(self._out(OutputFiles.CONFIG_ECHO), self.config.echo())

        trainer = Trainer(self.config, dataset, semantic=semantic, factors=factors)
        best, _ = trainer.train_grid(self.out_dir)

        meta = {
            **best.model.meta(),
            "dropout": best.dropout,
            "weight_decay": best.weight_decay,
            "best_epoch": best.best_epoch,
            "best_valid_ndcg20": best.best_valid_ndcg20,
            "seed": self.config.run.seed,
        }
        write_checkpoint(self._out(OutputFiles.CHECKPOINT), best.model.tensors(), meta)
        write_json(self._out(OutputFiles.EFFICIENCY), best.efficiency.to_dict())
        logger.info(
            f"TRAIN_WRITTEN | out={self.out_dir} | best_epoch={best.best_epoch} | "
            f"params={best.efficiency.trainable_params}"
        )
        return best

    def evaluate(self, checkpoint: Optional[PathLike] = None) -> MetricsRow:
        """Test-partition metrics from a checkpoint, written as CSV and JSON"""
        model, dataset, _ = self.restore_model(checkpoint)
        row = evaluate_split(
            model,
            dataset.partition(Partition.TEST),
            exclude_history=self.config.train.exclude_history_eval,
            deterministic=self.config.run.deterministic,
        )
        write_csv(self._out(OutputFiles.METRICS_CSV), [row.to_dict()], MetricsRow.COLUMNS)
        write_json(self._out(OutputFiles.METRICS_JSON), row.to_dict())
        logger.info(
            f"EVALUATE_COMPLETE | users={row.users} | hr10={row.hr10:.5f} | hr20={row.hr20:.5f} | "
            f"ndcg10={row.ndcg10:.5f} | ndcg20={row.ndcg20:.5f}"
        )
        return row

    def diagnose(
        self,
        checkpoint: Optional[PathLike] = None,
        weights: bool = False,
        top_k: int = DEFAULT_SPECTRUM_TOP_K,
        dataset_name: Optional[str] = None
    ) -> Dict[str, Any]:
        """
        Covariance spectra of raw and projected embeddings, and optionally the
        principal/subordinate attention totals of a SpecTran checkpoint

        Raises:
            ConfigError: nothing to diagnose, or weights requested without a checkpoint
            UnsupportedOperationError: weights requested for a non-SpecTran checkpoint
        """
        raw_path = self.config.run.embeddings
        if raw_path is None and checkpoint is None:
            raise ConfigError("diagnose needs run.embeddings or a checkpoint")
        if weights and checkpoint is None:
            raise ConfigError("The weight report needs a checkpoint")

        rows: List[Dict[str, Any]] = []
        reports: Dict[str, SpectrumReport] = {}
        if raw_path is not None:
            validate_and_raise(ConfigValidator.validate_paths([raw_path], ["run.embeddings"]), "Run paths")
            raw = load_embedding_matrix(raw_path)
            reports["raw"] = cumulative_spectrum(raw, min(top_k, raw.shape[1]))

        weight_row: Optional[Dict[str, Any]] = None
        if checkpoint is not None:
            model, _, _ = self.restore_model(checkpoint)
            projected = model.semantic_embeddings()
            if projected is None:
                projected = model.item_embeddings()
            reports["projected"] = cumulative_spectrum(projected, min(top_k, projected.shape[1]))
            if weights:
                totals = model.weight_report()
                if totals is None:
                    raise UnsupportedOperationError(
                        f"Weight report needs a SpecTran checkpoint, got transform={model.transform.value}"
                    )
                weight_row = {
                    "dataset": dataset_name or self.config.run.dataset_name,
                    "principal": totals[0],
                    "subordinate": totals[1],
                }

        for source, report in reports.items():
            rows.extend(report.rows(source))
        write_csv(self._out(OutputFiles.SPECTRUM), rows, SPECTRUM_COLUMNS)
        if weight_row is not None:
            write_csv(self._out(OutputFiles.WEIGHTS), [weight_row], WEIGHT_COLUMNS)

        for source, report in reports.items():
            logger.info(
                f"SPECTRUM | source={source} | top{report.top_k}={report.fraction_at(report.top_k):.4f} | "
                f"effective_rank_95={report.effective_rank()}"
            )
        return {
            "spectra": {source: report.to_dict() for source, report in reports.items()},
            "weights": weight_row,
        }


# =============================================================================
# Command entry points
# =============================================================================

def cmd_synth(config: RunConfig) -> Dict[str, Path]:
    return PipelineService(config).synth()


def cmd_preprocess(config: RunConfig) -> Dict[str, Any]:
    return PipelineService(config).preprocess()


def cmd_train(config: RunConfig) -> EfficiencyReport:
    return PipelineService(config).train().efficiency


def cmd_evaluate(config: RunConfig, checkpoint: Optional[PathLike] = None) -> MetricsRow:
    return PipelineService(config).evaluate(checkpoint)


def cmd_diagnose(
    config: RunConfig,
    checkpoint: Optional[PathLike] = None,
    weights: bool = False,
    top_k: int = DEFAULT_SPECTRUM_TOP_K,
    dataset_name: Optional[str] = None
) -> Dict[str, Any]:
    return PipelineService(config).diagnose(checkpoint, weights, top_k, dataset_name)
