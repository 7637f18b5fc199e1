"""
Synthetic benchmark generator

Semantic matrix with a planted geometric spectrum, and user sequences drawn
from a latent-factor preference model over the same principal directions, so
semantic content predicts behaviour.
"""

from typing import Tuple

import numpy as np

from src.config.run_config import SynthSection
from src.layers.ingestion import InteractionLog, build_interaction_log
from src.numkit.matrix import mm
from src.utils.logging_config import get_logger
from src.utils.validation import ConfigValidator, validate_and_raise

logger = get_logger(__name__)

_TIME_ORIGIN_SPAN = 1_000_000
_MAX_GAP_SECONDS = 3600


def planted_spectrum(cfg: SynthSection) -> np.ndarray:
    """s_i = s_1 * decay^i for i < k"""
    return cfg.top_singular_value * cfg.decay ** np.arange(cfg.rank)


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int, zero_mean: bool) -> np.ndarray:
    """Random orthonormal columns, optionally also orthogonal to the all-ones vector"""
    if zero_mean and cols < rows:
        basis = np.concatenate([np.ones((rows, 1)), rng.standard_normal((rows, cols))], axis=1)
        q, r = np.linalg.qr(basis)
        q = q * np.sign(np.diag(r))
        return q[:, 1:]
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def sample_sequences(
    tastes: np.ndarray,
    item_factors: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    drift: float = 0.0,
    scale: float = 1.0
) -> np.ndarray:
    """
    Draw item ids for every user and step

    Each step samples the next item with probability softmax(state . item
    factors) via the Gumbel-max trick. With drift 0 the state is the user's
    fixed taste vector; otherwise it moves toward the last chosen item.

    Returns:
        users x steps int64 array of item ids
    """
    chosen = np.zeros((tastes.shape[0], steps), dtype=np.int64)
    state = tastes
    for t in range(steps):
        logits = mm(state, item_factors.T)
        chosen[:, t] = np.argmax(logits + rng.gumbel(size=logits.shape), axis=1)
        if drift > 0:
            state = (1.0 - drift) * tastes + drift * scale * item_factors[chosen[:, t]]
    return chosen


def synth_generate(cfg: SynthSection, rng: np.random.Generator) -> Tuple[np.ndarray, InteractionLog]:
    """
    Build an N x l semantic matrix and an interaction log

    Returns:
        (semantic matrix, log with original ids 0..N-1 for items and 0..M-1 for users)

    Raises:
        ConfigError: k > min(N, l) or inconsistent sequence lengths
    """
    validate_and_raise(ConfigValidator.validate_synth(cfg), "Synthetic benchmark")
    n_items, n_users, k = cfg.n_items, cfg.n_users, cfg.rank

    spectrum = planted_spectrum(cfg)
    left = _orthonormal_columns(rng, n_items, k, zero_mean=True)
    right = _orthonormal_columns(rng, cfg.dim, k, zero_mean=False)
    semantic = mm(left * spectrum, right.T)
    if cfg.noise > 0:
        semantic = semantic + cfg.noise * rng.standard_normal((n_items, cfg.dim))

    item_factors = np.sqrt(n_items) * left
    scale = cfg.preference_strength / np.sqrt(k)
    tastes = rng.standard_normal((n_users, k)) * scale
    lengths = rng.integers(cfg.min_seq_len, cfg.max_seq_len + 1, size=n_users)
    steps = int(lengths.max())

    chosen = sample_sequences(tastes, item_factors, steps, rng, drift=cfg.drift, scale=scale)

    starts = rng.integers(0, _TIME_ORIGIN_SPAN, size=n_users)
    stamps = starts[:, None] + np.cumsum(rng.integers(1, _MAX_GAP_SECONDS, size=(n_users, steps)), axis=1)

    valid = np.arange(steps)[None, :] < lengths[:, None]
    users = np.broadcast_to(np.arange(n_users)[:, None], valid.shape)[valid]
    log = build_interaction_log(users, chosen[valid], stamps[valid], min_interactions=1)

    logger.info(
        f"SYNTH_COMPLETE | items={n_items} | users={n_users} | dim={cfg.dim} | rank={k} | "
        f"interactions={log.n_interactions}"
    )
    return semantic, log

