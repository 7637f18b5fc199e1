"""
Training Service for SpecTran
Runs the mini-batch InfoNCE protocol with validation early stopping
"""

import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.config.constants import OutputFiles, Partition, StopDecision
from src.config.run_config import RunConfig
from src.config.settings import Settings, get_settings
from src.layers.model import SequentialRecommender
from src.layers.objective import sample_negative_batch
from src.layers.scoring import EarlyStopState, early_stop_update, evaluate_split
from src.layers.spectral import SvdFactors
from src.layers.splitting import SplitDataset, training_examples
from src.numkit.autograd import Tape
from src.numkit.optim import AdamState, adam_step
from src.utils.errors import EvaluationError, NumericalAbort
from src.utils.file_handlers import write_csv, write_json
from src.utils.logging_config import ProgressTracker, TrainingLogger, get_logger
from src.utils.seeding import RngStreams

logger = get_logger(__name__)

GRID_COLUMNS = ("dropout", "weight_decay", "best_epoch", "best_valid_ndcg20", "epochs", "trainable_params")


@dataclass
class EfficiencyReport:
    """Trainable-parameter and wall-clock accounting of one run"""
    trainable_params: int
    adapter_params: int
    train_seconds: float
    mean_eval_seconds: float
    epochs: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trainable_params": self.trainable_params,
            "adapter_params": self.adapter_params,
            "train_seconds": self.train_seconds,
            "mean_eval_seconds": self.mean_eval_seconds,
            "epochs": self.epochs,
        }


@dataclass
class TrainingResult:
    """Trained model (best validation checkpoint restored) and its history"""
    model: SequentialRecommender
    dropout: float
    weight_decay: float
    best_epoch: int
    best_valid_ndcg20: float
    epochs: int
    efficiency: EfficiencyReport
    history: List[Dict[str, Any]] = field(default_factory=list)

    def grid_row(self) -> Dict[str, Any]:
        return {
            "dropout": self.dropout,
            "weight_decay": self.weight_decay,
            "best_epoch": self.best_epoch,
            "best_valid_ndcg20": self.best_valid_ndcg20,
            "epochs": self.epochs,
            "trainable_params": self.efficiency.trainable_params,
        }


class Trainer:
    """
    Trains one model configuration on a split dataset.

    Randomness comes from named streams of the run seed: init (parameters),
    shuffle (batch order), negatives and dropout.
    """

    def __init__(
        self,
        config: RunConfig,
        dataset: SplitDataset,
        semantic: Optional[np.ndarray] = None,
        factors: Optional[SvdFactors] = None,
        settings: Optional[Settings] = None
    ):
        self.config = config
        self.dataset = dataset
        self.semantic = semantic
        self.factors = factors
        self.settings = settings or get_settings()

    def build_model(self, streams: RngStreams, dropout: float) -> SequentialRecommender:
        model = SequentialRecommender(
            self.config.model,
            n_items=self.dataset.n_items,
            max_len=self.dataset.max_len,
            dropout=dropout,
            semantic=self.semantic,
            factors=self.factors,
        )
        return model.initialize(streams.stream(RngStreams.INIT))

    def _validate(self, model: SequentialRecommender) -> Tuple[float, float]:
        started = time.perf_counter()
        row = evaluate_split(
            model,
            self.dataset.partition(Partition.VALID),
            exclude_history=self.config.train.exclude_history_eval,
            workers=self.settings.eval_workers,
            deterministic=self.config.run.deterministic,
        )
        return row.ndcg20, time.perf_counter() - started

    def _abort(
        self,
        model: SequentialRecommender,
        epoch: int,
        batch: int,
        last_finite_loss: Optional[float],
        dump_path: Optional[Path]
    ) -> NumericalAbort:
        dump = {
            "epoch": epoch,
            "batch": batch,
            "last_finite_loss": last_finite_loss,
            "param_norms": model.params.global_norm(),
        }
        if dump_path is not None:
            write_json(dump_path, dump)
        logger.error(f"TRAIN_DIVERGED | epoch={epoch} | batch={batch} | last_finite_loss={last_finite_loss}")
        return NumericalAbort(f"Non-finite loss at epoch {epoch}, batch {batch}")

    def train(
        self,
        dropout: float,
        weight_decay: float,
        log_path: Optional[Path] = None,
        dump_path: Optional[Path] = None,
        progress_callback: Optional[Callable[[int, float], None]] = None
    ) -> TrainingResult:
        """
        Train until early stopping, then restore the best validation snapshot

        Raises:
            NumericalAbort: a batch loss is not finite (diagnostics written to dump_path)
        """
        train_cfg = self.config.train
        streams = RngStreams(self.config.run.seed)
        model = self.build_model(streams, dropout)
        shuffle_rng = streams.stream(RngStreams.SHUFFLE)
        negatives_rng = streams.stream(RngStreams.NEGATIVES)
        dropout_rng = streams.stream(RngStreams.DROPOUT)

        sequences, targets, histories = training_examples(self.dataset, prefixes=train_cfg.train_on_prefixes)
        if len(targets) == 0:
            raise EvaluationError("Training partition is empty")

        optimizer = AdamState(
            lr=train_cfg.lr,
            beta1=train_cfg.beta1,
            beta2=train_cfg.beta2,
            epsilon=train_cfg.epsilon,
            weight_decay=weight_decay,
        )
        stopper = EarlyStopState(patience=train_cfg.patience, max_epochs=train_cfg.max_epochs)
        training_log = TrainingLogger(log_path)
        trainable = model.num_trainable()
        training_log.log_run_start(
            f"{model.transform.value}/dropout={dropout}/wd={weight_decay}", trainable, len(targets)
        )

        tracker = ProgressTracker(train_cfg.max_epochs, "Training")
        best_snapshot = model.tensors()
        history: List[Dict[str, Any]] = []
        eval_seconds: List[float] = []
        last_finite: Optional[float] = None
        started = time.perf_counter()

        while True:
            epoch = stopper.epoch + 1
            order = shuffle_rng.permutation(len(targets))
            loss_sum = 0.0
            for batch_index, start in enumerate(range(0, len(order), train_cfg.batch_size)):
                idx = order[start:start + train_cfg.batch_size]
                batch_histories = [histories[i] for i in idx] if train_cfg.exclude_history_negatives else None
                negatives = sample_negative_batch(
                    negatives_rng, targets[idx], self.dataset.n_items, train_cfg.num_negatives, batch_histories
                )
                tape = Tape()
                loss = model.loss(tape, sequences[idx], targets[idx], negatives, training=True, rng=dropout_rng)
                value = loss.item()
                if not np.isfinite(value):
                    raise self._abort(model, epoch, batch_index, last_finite, dump_path)
                last_finite = value
                tape.backprop(loss, model.params)
                adam_step(model.params, optimizer)
                loss_sum += value * len(idx)

            valid_ndcg20, seconds = self._validate(model)
            eval_seconds.append(seconds)
            record = training_log.log_epoch(
                epoch, loss_sum / len(targets), valid_ndcg20, time.perf_counter() - started, trainable
            )
            history.append(record)
            decision = early_stop_update(stopper, valid_ndcg20)
            if stopper.improved:
                best_snapshot = model.tensors()
            tracker.update(1, f"epoch {epoch} loss={record['train_loss']:.5f} ndcg20={valid_ndcg20:.5f}")
            if progress_callback:
                progress_callback(epoch, valid_ndcg20)
            if decision == StopDecision.STOP:
                break

        train_seconds = time.perf_counter() - started
        tracker.finish()
        model.params.load_snapshot(best_snapshot)
        training_log.log_run_complete(stopper.best_epoch, stopper.best, train_seconds)

        efficiency = EfficiencyReport(
            trainable_params=trainable,
            adapter_params=model.adapter_param_count(),
            train_seconds=train_seconds,
            mean_eval_seconds=float(np.mean(eval_seconds)),
            epochs=stopper.epoch,
        )
        return TrainingResult(
            model=model,
            dropout=dropout,
            weight_decay=weight_decay,
            best_epoch=stopper.best_epoch,
            best_valid_ndcg20=stopper.best,
            epochs=stopper.epoch,
            efficiency=efficiency,
            history=history,
        )

    def train_grid(self, out_dir: Optional[Path] = None) -> Tuple[TrainingResult, List[TrainingResult]]:
        """
        Train every (dropout, weight_decay) combination in declaration order

        Each combination restarts the run's random streams. The highest
        validation NDCG@20 wins; earlier combinations win ties. With more than
        one combination, per-combination logs go under grid/ and the winner's
        log is copied to the main training log.
        """
        grid = self.config.train.grid()
        out = Path(out_dir) if out_dir is not None else None
        dump_path = out / OutputFiles.NAN_DUMP if out else None

        if len(grid) == 1:
            dropout, decay = grid[0]
            log_path = out / OutputFiles.TRAIN_LOG if out else None
            result = self.train(dropout, decay, log_path, dump_path)
            return result, [result]

        results: List[TrainingResult] = []
        log_paths: List[Optional[Path]] = []
        best_index = 0
        for index, (dropout, decay) in enumerate(grid):
            log_path = out / "grid" / f"train_log_{index}.jsonl" if out else None
            result = self.train(dropout, decay, log_path, dump_path)
            results.append(result)
            log_paths.append(log_path)
            if result.best_valid_ndcg20 > results[best_index].best_valid_ndcg20:
                best_index = index
            logger.info(
                f"GRID_POINT | index={index} | dropout={dropout} | weight_decay={decay} | "
                f"best_valid_ndcg20={result.best_valid_ndcg20:.5f}"
            )

        if out is not None:
            write_csv(out / OutputFiles.GRID, [r.grid_row() for r in results], GRID_COLUMNS)
            shutil.copyfile(log_paths[best_index], out / OutputFiles.TRAIN_LOG)
        best = results[best_index]
        logger.info(
            f"GRID_COMPLETE | points={len(results)} | dropout={best.dropout} | "
            f"weight_decay={best.weight_decay}"
        )
        return best, results
