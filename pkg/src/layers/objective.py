"""
Layer 6: Objective Layer
Dot-product item scoring, InfoNCE with sampled negatives
"""

from typing import Iterable, Optional, Sequence

import numpy as np

from src.config.constants import DEFAULT_NUM_NEGATIVES, DEFAULT_TEMPERATURE
from src.numkit import autograd as ag
from src.numkit.autograd import Tape, Var
from src.numkit.matrix import mm
from src.utils.errors import ContractError, DimensionError, SamplingError


def score_items(user_repr: np.ndarray, E_item: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """
    score(u, i) = <user_repr[u], E_item[i]>

    Args:
        user_repr: B x d
        E_item: N x d
        candidates: B x C item ids

    Returns:
        B x C scores
    """
    ids = np.asarray(candidates, dtype=np.int64)
    if ids.ndim != 2 or ids.shape[0] != user_repr.shape[0]:
        raise DimensionError(f"Candidates must be {user_repr.shape[0]} x C, got {ids.shape}")
    if user_repr.shape[1] != E_item.shape[1]:
        raise DimensionError(f"Representation dim {user_repr.shape[1]} != item dim {E_item.shape[1]}")
    if ids.size and (ids.min() < 0 or ids.max() >= E_item.shape[0]):
        raise IndexError(f"Candidate id out of range for {E_item.shape[0]} items")
    return np.einsum("bd,bcd->bc", user_repr, E_item[ids])


def score_candidates(user_repr: Var, item_table: Var, candidates: np.ndarray) -> Var:
    """Recorded version of score_items (B x C)"""
    rows = ag.take_rows(item_table, candidates)
    batch, _, d = rows.shape
    return ag.reshape(ag.matmul(rows, ag.reshape(user_repr, (batch, d, 1))), (batch, rows.shape[1]))


def infonce_loss(pos_score: float, neg_scores: Sequence[float], temperature: float = DEFAULT_TEMPERATURE) -> float:
    """-log(exp(s+/t) / (exp(s+/t) + sum_j exp(s_j/t))), max-stabilised"""
    row = np.concatenate([[float(pos_score)], np.asarray(neg_scores, dtype=np.float64)])
    tape = Tape(enabled=False)
    return ag.infonce(tape.constant(row[None, :]), temperature).item()


def sample_negatives(
    rng: np.random.Generator,
    target: int,
    N: int,
    k: int = DEFAULT_NUM_NEGATIVES,
    exclude: Optional[Iterable[int]] = None
) -> np.ndarray:
    """
    k ids drawn uniformly with replacement from [0, N) minus the target

    With exclude, those ids are removed from the candidate set as well.

    Raises:
        SamplingError: N < 2, or nothing is left to sample
    """
    if N < 2:
        raise SamplingError(f"Negative sampling needs at least 2 items, got N={N}")
    if not 0 <= target < N:
        raise ContractError(f"Target {target} outside [0, {N})")

    if not exclude:
        draws = rng.integers(0, N - 1, size=k)
        return draws + (draws >= target)

    banned = np.union1d(np.asarray(list(exclude), dtype=np.int64), [target])
    allowed = np.setdiff1d(np.arange(N), banned, assume_unique=True)
    if allowed.size == 0:
        raise SamplingError(f"No negative candidates remain for target {target}")
    return allowed[rng.integers(0, allowed.size, size=k)]


def sample_negative_batch(
    rng: np.random.Generator,
    targets: np.ndarray,
    N: int,
    k: int = DEFAULT_NUM_NEGATIVES,
    histories: Optional[Sequence[np.ndarray]] = None
) -> np.ndarray:
    """B x k negatives; vectorised when histories are not excluded"""
    targets = np.asarray(targets, dtype=np.int64)
    if histories is not None:
        return np.stack([
            sample_negatives(rng, int(t), N, k, exclude=h.tolist())
            for t, h in zip(targets, histories)
        ]) if len(targets) else np.zeros((0, k), dtype=np.int64)

    if N < 2:
        raise SamplingError(f"Negative sampling needs at least 2 items, got N={N}")
    draws = rng.integers(0, N - 1, size=(len(targets), k))
    return draws + (draws >= targets[:, None])


def user_item_scores(user_repr: np.ndarray, E_item: np.ndarray) -> np.ndarray:
    """Full-catalog score matrix B x N"""
    return mm(user_repr, E_item.T)
