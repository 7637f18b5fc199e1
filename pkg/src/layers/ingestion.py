"""
Layer 1: Ingestion Layer
Loads semantic embedding matrices and interaction logs, filters and re-indexes them
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from src.config.constants import DEFAULT_MIN_INTERACTIONS, MIN_SEQUENCE_INTERACTIONS
from src.utils.errors import DataError, DimensionError
from src.utils.file_handlers import read_emb1, read_embedding_csv, read_interactions_tsv
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

CSV_SUFFIXES = {".csv", ".txt"}


@dataclass
class InteractionLog:
    """
    Densely indexed interaction records

    users and items hold dense ids; user_ids[u] and item_ids[i] recover the
    original ids. Records are ordered by (user, timestamp, file order).
    """
    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_interactions(self) -> int:
        return len(self.users)

    @property
    def density(self) -> float:
        cells = self.n_users * self.n_items
        return self.n_interactions / cells if cells else 0.0

    def sequences(self) -> List[np.ndarray]:
        """Chronological item sequence per dense user id"""
        bounds = np.searchsorted(self.users, np.arange(self.n_users + 1))
        return [self.items[bounds[u]:bounds[u + 1]] for u in range(self.n_users)]

    def last_timestamps(self) -> np.ndarray:
        bounds = np.searchsorted(self.users, np.arange(1, self.n_users + 1))
        return self.timestamps[bounds - 1]

    def to_dict(self) -> Dict:
        return {
            "users": self.n_users,
            "items": self.n_items,
            "interactions": self.n_interactions,
            "density": self.density,
        }


def load_embedding_matrix(path: Union[str, Path]) -> np.ndarray:
    """
    Read an N x l semantic embedding matrix (EMB1 binary, or CSV by suffix)

    Raises:
        FormatError: bad magic or size mismatch
        DataError: non-finite entries
    """
    file_path = Path(path)
    if file_path.suffix.lower() in CSV_SUFFIXES:
        matrix = read_embedding_csv(file_path)
    else:
        matrix = read_emb1(file_path)
    logger.info(f"EMBEDDINGS_LOADED | path={file_path} | shape={matrix.shape[0]}x{matrix.shape[1]}")
    return matrix


def build_interaction_log(
    users: np.ndarray,
    items: np.ndarray,
    timestamps: np.ndarray,
    min_interactions: int = DEFAULT_MIN_INTERACTIONS
) -> InteractionLog:
    """
    Filter and densify raw records

    Users and items with fewer than min_interactions records are dropped in a
    single pass (not iterated to a fixed point); users left with fewer than
    three interactions are then dropped. Dense ids follow ascending original id.
    """
    frame = pd.DataFrame({
        "user": np.asarray(users, dtype=np.int64),
        "item": np.asarray(items, dtype=np.int64),
        "ts": np.asarray(timestamps, dtype=np.int64),
    })
    frame["order"] = np.arange(len(frame))

    user_counts = frame["user"].map(frame["user"].value_counts())
    item_counts = frame["item"].map(frame["item"].value_counts())
    frame = frame[(user_counts >= min_interactions) & (item_counts >= min_interactions)]

    remaining = frame["user"].map(frame["user"].value_counts())
    frame = frame[remaining >= MIN_SEQUENCE_INTERACTIONS]
    if frame.empty:
        raise DataError("No users remain after interaction filtering")

    user_ids = np.sort(frame["user"].unique())
    item_ids = np.sort(frame["item"].unique())
    frame = frame.assign(
        user=np.searchsorted(user_ids, frame["user"].to_numpy()),
        item=np.searchsorted(item_ids, frame["item"].to_numpy()),
    )
    frame = frame.sort_values(["user", "ts", "order"], kind="mergesort")

    log = InteractionLog(
        users=frame["user"].to_numpy(dtype=np.int64),
        items=frame["item"].to_numpy(dtype=np.int64),
        timestamps=frame["ts"].to_numpy(dtype=np.int64),
        user_ids=user_ids.astype(np.int64),
        item_ids=item_ids.astype(np.int64),
    )
    logger.info(
        f"INTERACTIONS_FILTERED | users={log.n_users} | items={log.n_items} | "
        f"interactions={log.n_interactions} | min_interactions={min_interactions}"
    )
    return log


def load_interactions(
    path: Union[str, Path],
    min_interactions: int = DEFAULT_MIN_INTERACTIONS
) -> InteractionLog:
    """
    Parse a user/item/timestamp TSV into a filtered, densely indexed log

    Raises:
        ParseError: malformed line (message names the line number)
    """
    users, items, stamps = read_interactions_tsv(path)
    logger.info(f"INTERACTIONS_LOADED | path={path} | records={len(users)}")
    return build_interaction_log(users, items, stamps, min_interactions)


def align_embeddings(matrix: np.ndarray, item_ids: np.ndarray) -> np.ndarray:
    """
    Select embedding rows for retained items, in dense id order

    Row k of the result is the embedding of original item item_ids[k].
    """
    ids = np.asarray(item_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= matrix.shape[0]):
        raise DimensionError(
            f"Item id {int(ids.max())} has no row in a {matrix.shape[0]}-row embedding matrix"
        )
    return matrix[ids]

