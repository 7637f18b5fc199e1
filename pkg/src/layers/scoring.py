"""
Layer 8: Scoring Layer
Leave-one-out full-catalog ranking, HR@K / NDCG@K and early stopping
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.config.constants import (
    DEFAULT_MAX_EPOCHS,
    DEFAULT_PATIENCE,
    METRIC_CUTOFFS,
    StopDecision,
)
from src.layers.objective import user_item_scores
from src.layers.splitting import UserSequence, evaluation_rows
from src.utils.errors import ContractError, EvaluationError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

EVAL_CHUNK_SIZE = 256


class RankingModel(Protocol):
    """What evaluation needs from a trained model"""
    n_items: int
    max_len: int

    def item_embeddings(self) -> np.ndarray: ...

    def user_representations(self, sequences: np.ndarray, item_table: Optional[np.ndarray] = None) -> np.ndarray: ...


@dataclass
class MetricsRow:
    """Mean leave-one-out metrics over a partition"""
    hr10: float
    hr20: float
    ndcg10: float
    ndcg20: float
    users: int

    COLUMNS = ("hr10", "hr20", "ndcg10", "ndcg20", "users")

    def to_dict(self) -> Dict:
        return {
            "hr10": self.hr10,
            "hr20": self.hr20,
            "ndcg10": self.ndcg10,
            "ndcg20": self.ndcg20,
            "users": self.users,
        }

    def is_consistent(self) -> bool:
        """HR@10 <= HR@20, NDCG@10 <= NDCG@20, NDCG@K <= HR@K, all within [0, 1]"""
        values = (self.hr10, self.hr20, self.ndcg10, self.ndcg20)
        return (
            all(0.0 <= v <= 1.0 for v in values)
            and self.hr10 <= self.hr20
            and self.ndcg10 <= self.ndcg20
            and self.ndcg10 <= self.hr10
            and self.ndcg20 <= self.hr20
        )


# =============================================================================
# Per-user metrics
# =============================================================================

def hr_at_k(rank: int, k: int) -> int:
    if rank < 1:
        raise ContractError(f"rank must be >= 1, got {rank}")
    return 1 if rank <= k else 0


def ndcg_at_k(rank: int, k: int) -> float:
    """Single relevant item: 1 / log2(rank + 1) inside the cutoff"""
    if rank < 1:
        raise ContractError(f"rank must be >= 1, got {rank}")
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def _rank_from_scores(scores: np.ndarray, target: int, removed: np.ndarray) -> int:
    target_score = scores[target]
    ahead = (scores > target_score) | ((scores == target_score) & (np.arange(scores.size) < target))
    ahead[removed] = False
    return int(ahead.sum()) + 1


def rank_target(
    user_repr: np.ndarray,
    E_item: np.ndarray,
    target: int,
    history: Optional[Iterable[int]] = None
) -> int:
    """
    1-based rank of target among all items by descending score

    History items are removed from the candidates; ties go to the smaller id.

    Raises:
        ContractError: target is in the removed set
        IndexError: target outside the catalog
    """
    n_items = E_item.shape[0]
    if not 0 <= target < n_items:
        raise IndexError(f"Target {target} outside [0, {n_items})")
    removed = np.unique(np.asarray(list(history or []), dtype=np.int64))
    if np.any(removed == target):
        raise ContractError(f"Target {target} is in the removed candidate set")
    scores = user_item_scores(np.asarray(user_repr)[None, :], E_item)[0]
    return _rank_from_scores(scores, target, removed)


def rank_batch(
    user_reprs: np.ndarray,
    E_item: np.ndarray,
    targets: np.ndarray,
    histories: Optional[Sequence[np.ndarray]] = None
) -> np.ndarray:
    """
    Ranks for B users at once

    A target that reappears in its own history stays a candidate; only the
    other history items are removed.
    """
    scores = user_item_scores(user_reprs, E_item)
    batch, n_items = scores.shape
    target_scores = scores[np.arange(batch), targets][:, None]
    ids = np.arange(n_items)[None, :]
    ahead = (scores > target_scores) | ((scores == target_scores) & (ids < targets[:, None]))
    if histories is not None:
        for row, history in enumerate(histories):
            removed = np.asarray(history, dtype=np.int64)
            ahead[row, removed[removed != targets[row]]] = False
    return ahead.sum(axis=1).astype(np.int64) + 1


def metrics_from_ranks(ranks: Sequence[int], cutoffs: Sequence[int] = METRIC_CUTOFFS) -> MetricsRow:
    """
    Mean of per-user metrics

    Sums use math.fsum so the result does not depend on user order.

    Raises:
        EvaluationError: no ranks
    """
    if len(ranks) == 0:
        raise EvaluationError("Cannot aggregate metrics over zero users")
    low, high = cutoffs
    n = len(ranks)

    def mean(values: Iterable[float]) -> float:
        return math.fsum(values) / n

    return MetricsRow(
        hr10=mean(hr_at_k(int(r), low) for r in ranks),
        hr20=mean(hr_at_k(int(r), high) for r in ranks),
        ndcg10=mean(ndcg_at_k(int(r), low) for r in ranks),
        ndcg20=mean(ndcg_at_k(int(r), high) for r in ranks),
        users=n,
    )


# =============================================================================
# Partition evaluation
# =============================================================================

def _rank_chunk(
    model: RankingModel,
    item_table: np.ndarray,
    users: Sequence[UserSequence],
    exclude_history: bool
) -> np.ndarray:
    sequences, targets, histories = evaluation_rows(users, model.max_len, model.n_items)
    reprs = model.user_representations(sequences, item_table)
    return rank_batch(reprs, item_table, targets, histories if exclude_history else None)


def evaluate_ranks(
    model: RankingModel,
    users: Sequence[UserSequence],
    exclude_history: bool = True,
    workers: int = 1,
    deterministic: bool = True
) -> np.ndarray:
    """Per-user ranks in the given user order"""
    if len(users) == 0:
        raise EvaluationError("Evaluation partition is empty")
    item_table = model.item_embeddings()
    if not np.all(np.isfinite(item_table)):
        raise EvaluationError("Item embeddings contain non-finite values")

    chunks = [users[i:i + EVAL_CHUNK_SIZE] for i in range(0, len(users), EVAL_CHUNK_SIZE)]
    if deterministic or workers <= 1 or len(chunks) == 1:
        parts = [_rank_chunk(model, item_table, chunk, exclude_history) for chunk in chunks]
    else:
        parts = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_rank_chunk)(model, item_table, chunk, exclude_history) for chunk in chunks
        )
    return np.concatenate(parts)


def evaluate_split(
    model: RankingModel,
    users: Sequence[UserSequence],
    cutoffs: Sequence[int] = METRIC_CUTOFFS,
    exclude_history: bool = True,
    workers: int = 1,
    deterministic: bool = True
) -> MetricsRow:
    """
    Mean HR@K and NDCG@K over a partition

    Raises:
        EvaluationError: empty partition or non-finite model output
    """
    ranks = evaluate_ranks(model, users, exclude_history, workers, deterministic)
    row = metrics_from_ranks(ranks.tolist(), cutoffs)
    logger.debug(
        f"EVALUATED | users={row.users} | hr20={row.hr20:.5f} | ndcg20={row.ndcg20:.5f}"
    )
    return row


# =============================================================================
# Early stopping
# =============================================================================

@dataclass
class EarlyStopState:
    """Best validation NDCG@20 so far and epochs without strict improvement"""
    patience: int = DEFAULT_PATIENCE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    best: float = float("-inf")
    best_epoch: int = 0
    epoch: int = 0
    since_improvement: int = 0
    improved: bool = False
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "patience": self.patience,
            "max_epochs": self.max_epochs,
            "best": self.best,
            "best_epoch": self.best_epoch,
            "epoch": self.epoch,
            "since_improvement": self.since_improvement,
        }


def early_stop_update(state: EarlyStopState, ndcg20: float) -> StopDecision:
    """
    Record one validation result

    A strictly greater value resets the counter and marks the epoch as the
    best checkpoint (state.improved). Stops when the counter reaches patience
    or the epoch cap is hit.
    """
    state.epoch += 1
    state.history.append(float(ndcg20))
    if ndcg20 > state.best:
        state.best = float(ndcg20)
        state.best_epoch = state.epoch
        state.since_improvement = 0
        state.improved = True
    else:
        state.since_improvement += 1
        state.improved = False

    if state.since_improvement >= state.patience or state.epoch >= state.max_epochs:
        return StopDecision.STOP
    return StopDecision.CONTINUE
