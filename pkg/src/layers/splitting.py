"""
Layer 2: Splitting Layer
User-level chronological train/valid/test partition with leave-one-out targets
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.constants import (
    DEFAULT_MAX_LEN,
    DEFAULT_SPLIT_RATIOS,
    MIN_SPLIT_USERS,
    Partition,
)
from src.layers.ingestion import InteractionLog
from src.utils.errors import SplitError
from src.utils.file_handlers import SplitRecords
from src.utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass
class UserSequence:
    """One user's chronological items and partition"""
    user: int
    partition: Partition
    items: np.ndarray

    @property
    def target(self) -> int:
        return int(self.items[-1])

    def history(self, max_len: int) -> np.ndarray:
        """Most recent max_len items preceding the target"""
        return self.items[:-1][-max_len:]


@dataclass
class SplitDataset:
    """Partitioned user sequences over a catalog of n_items"""
    users: List[UserSequence]
    n_items: int
    max_len: int
    item_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def partition(self, which: Partition) -> List[UserSequence]:
        return [u for u in self.users if u.partition == which]

    def counts(self) -> Dict[str, int]:
        return {p.value: len(self.partition(p)) for p in Partition}

    @property
    def pad_id(self) -> int:
        return self.n_items

    def stats(self) -> Dict:
        n_users = len(self.users)
        interactions = int(sum(len(u.items) for u in self.users))
        cells = n_users * self.n_items
        return {
            "users": n_users,
            "items": self.n_items,
            "interactions": interactions,
            "density": interactions / cells if cells else 0.0,
            "partitions": self.counts(),
            "max_len": self.max_len,
        }

    def to_records(self) -> SplitRecords:
        return SplitRecords(
            n_items=self.n_items,
            max_len=self.max_len,
            item_ids=np.asarray(self.item_ids, dtype=np.int64),
            user_ids=[u.user for u in self.users],
            partitions=[u.partition.code for u in self.users],
            sequences=[u.items for u in self.users],
        )

    @classmethod
    def from_records(cls, records: SplitRecords) -> "SplitDataset":
        users = [
            UserSequence(user=user, partition=Partition.from_code(code), items=seq)
            for user, code, seq in zip(records.user_ids, records.partitions, records.sequences)
        ]
        return cls(users=users, n_items=records.n_items, max_len=records.max_len, item_ids=records.item_ids)


def partition_sizes(n_users: int, ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS) -> Tuple[int, int, int]:
    """Valid and test sizes rounded half-up; train takes the remainder"""
    n_valid = int(np.floor(n_users * ratios[1] + 0.5))
    n_test = int(np.floor(n_users * ratios[2] + 0.5))
    return n_users - n_valid - n_test, n_valid, n_test


def chronological_split(
    log: InteractionLog,
    ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS,
    max_len: int = DEFAULT_MAX_LEN
) -> SplitDataset:
    """
    Order users by their final timestamp (ties by user id) and cut 8:1:1

    Histories are truncated to max_len at use time; the target is never removed.

    Raises:
        SplitError: fewer than 10 users
    """
    if log.n_users < MIN_SPLIT_USERS:
        raise SplitError(f"Need at least {MIN_SPLIT_USERS} users to split, got {log.n_users}")

    sequences = log.sequences()
    last = log.last_timestamps()
    order = np.lexsort((np.arange(log.n_users), last))
    n_train, n_valid, _ = partition_sizes(log.n_users, ratios)

    users: List[UserSequence] = []
    for position, user in enumerate(order):
        if position < n_train:
            partition = Partition.TRAIN
        elif position < n_train + n_valid:
            partition = Partition.VALID
        else:
            partition = Partition.TEST
        users.append(UserSequence(user=int(user), partition=partition, items=sequences[user]))

    dataset = SplitDataset(users=users, n_items=log.n_items, max_len=max_len, item_ids=log.item_ids)
    logger.info(f"SPLIT_COMPLETE | users={log.n_users} | partitions={dataset.counts()}")
    return dataset


def pad_histories(
    histories: Sequence[np.ndarray],
    max_len: int,
    pad_id: int
) -> np.ndarray:
    """Left-pad (and left-truncate) histories into a B x max_len id matrix"""
    batch = np.full((len(histories), max_len), pad_id, dtype=np.int64)
    for row, history in enumerate(histories):
        recent = np.asarray(history, dtype=np.int64)[-max_len:]
        if recent.size:
            batch[row, max_len - recent.size:] = recent
    return batch


def training_examples(
    dataset: SplitDataset,
    prefixes: bool = False,
    partition: Partition = Partition.TRAIN
) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    """
    (padded histories, targets, full histories) for a partition

    With prefixes=True every position t >= 1 of each sequence is a target with
    the items before it as history; otherwise only the final item is.
    """
    histories: List[np.ndarray] = []
    targets: List[int] = []
    for user in dataset.partition(partition):
        positions = range(1, len(user.items)) if prefixes else [len(user.items) - 1]
        for t in positions:
            histories.append(user.items[:t])
            targets.append(int(user.items[t]))
    padded = pad_histories(histories, dataset.max_len, dataset.pad_id)
    return padded, np.asarray(targets, dtype=np.int64), histories


def evaluation_rows(users: Sequence[UserSequence], max_len: int, pad_id: int) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    """Padded histories, targets and full pre-target histories for evaluation"""
    histories = [u.items[:-1] for u in users]
    targets = np.asarray([u.target for u in users], dtype=np.int64)
    return pad_histories(histories, max_len, pad_id), targets, histories


def split_summary(dataset: SplitDataset, reference: Optional[Tuple[int, int, int]] = None) -> Dict:
    summary = dataset.stats()
    if reference is not None:
        summary["reference"] = {"users": reference[0], "items": reference[1], "interactions": reference[2]}
        summary["reference_match"] = (
            summary["users"], summary["items"], summary["interactions"]
        ) == tuple(reference)
    return summary
