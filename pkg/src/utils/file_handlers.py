"""
File handling utilities: embedding matrices, interaction logs, splits,
checkpoints and report files
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.utils.errors import DataError, FormatError, ParseError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

EMB1_MAGIC = b"EMB1"
SPLITS_MAGIC = b"SPL1"
CHECKPOINT_MAGIC = "SPCK1"
CHECKPOINT_END = "END"

_U32 = struct.Struct("<I")
_HEADER = struct.Struct("<4sII")


def _require_file(path: PathLike) -> Path:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    return file_path


# =============================================================================
# Embedding matrices
# =============================================================================

def encode_emb1(matrix: np.ndarray) -> bytes:
    """EMB1 bytes: magic, u32 rows, u32 cols, float32 row-major (all little-endian)"""
    array = np.asarray(matrix)
    if array.ndim != 2:
        raise FormatError(f"EMB1 holds 2-D matrices, got shape {array.shape}")
    rows, cols = array.shape
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return _HEADER.pack(EMB1_MAGIC, rows, cols) + payload


def decode_emb1(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """Parse EMB1 bytes into a float64 matrix"""
    if len(data) < _HEADER.size:
        raise FormatError(f"{source}: truncated EMB1 header")
    magic, rows, cols = _HEADER.unpack_from(data, 0)
    if magic != EMB1_MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}, expected {EMB1_MAGIC!r}")
    expected = _HEADER.size + rows * cols * 4
    if len(data) != expected:
        raise FormatError(
            f"{source}: header declares {rows}x{cols} ({expected} bytes) but file has {len(data)} bytes"
        )
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=rows * cols)
    matrix = values.reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{source}: embedding matrix contains non-finite entries")
    return matrix


def write_emb1(path: PathLike, matrix: np.ndarray) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_bytes(encode_emb1(matrix))
    return file_path


def read_emb1(path: PathLike) -> np.ndarray:
    file_path = _require_file(path)
    return decode_emb1(file_path.read_bytes(), str(file_path))


def read_embedding_csv(path: PathLike) -> np.ndarray:
    """Header-less numeric CSV, one item per row"""
    file_path = _require_file(path)
    try:
        frame = pd.read_csv(file_path, header=None)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise FormatError(f"{file_path}: {e}") from e
    try:
        matrix = frame.to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise FormatError(f"{file_path}: non-numeric cell ({e})") from e
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{file_path}: embedding matrix contains NaN or Inf")
    return matrix


def write_embedding_csv(path: PathLike, matrix: np.ndarray) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(np.asarray(matrix)).to_csv(file_path, header=False, index=False)
    return file_path


# =============================================================================
# Interaction logs
# =============================================================================

def read_interactions_tsv(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Parse "user<TAB>item<TAB>timestamp" lines

    Returns:
        (users, items, timestamps) as int64 arrays in file order

    Raises:
        ParseError: a line is not UTF-8, has the wrong field count or a non-integer field
    """
    file_path = _require_file(path)
    users: List[int] = []
    items: List[int] = []
    stamps: List[int] = []
    with open(file_path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                stripped = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError as e:
                raise ParseError(f"invalid UTF-8 ({e.reason})", line_number) from e
            if not stripped.strip():
                continue
            fields = stripped.split("\t")
            if len(fields) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", line_number)
            try:
                user, item, stamp = (int(value) for value in fields)
            except ValueError as e:
                raise ParseError(f"non-integer field ({e})", line_number) from e
            users.append(user)
            items.append(item)
            stamps.append(stamp)
    return (
        np.asarray(users, dtype=np.int64),
        np.asarray(items, dtype=np.int64),
        np.asarray(stamps, dtype=np.int64),
    )


def write_interactions_tsv(
    path: PathLike,
    users: Sequence[int],
    items: Sequence[int],
    timestamps: Sequence[int]
) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{int(u)}\t{int(i)}\t{int(t)}\n" for u, i, t in zip(users, items, timestamps)]
    file_path.write_text("".join(lines), encoding="utf-8")
    return file_path


# =============================================================================
# Split files
# =============================================================================

@dataclass
class SplitRecords:
    """Raw contents of a splits file"""
    n_items: int
    max_len: int
    item_ids: np.ndarray
    user_ids: List[int] = field(default_factory=list)
    partitions: List[int] = field(default_factory=list)
    sequences: List[np.ndarray] = field(default_factory=list)


def write_splits(path: PathLike, records: SplitRecords) -> Path:
    """
    Layout (little-endian): magic SPL1, u32 user count, u32 item count, u32
    max_len, item count x u64 original item ids, then per user: u32 user id,
    u32 partition code, u32 sequence length, sequence item ids as u32
    """
    chunks = [
        SPLITS_MAGIC,
        struct.pack("<III", len(records.user_ids), records.n_items, records.max_len),
        np.ascontiguousarray(records.item_ids, dtype="<u8").tobytes(),
    ]
    for user, partition, sequence in zip(records.user_ids, records.partitions, records.sequences):
        chunks.append(struct.pack("<III", user, partition, len(sequence)))
        chunks.append(np.ascontiguousarray(sequence, dtype="<u4").tobytes())

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_bytes(b"".join(chunks))
    return file_path


def read_splits(path: PathLike) -> SplitRecords:
    file_path = _require_file(path)
    data = file_path.read_bytes()
    if data[:4] != SPLITS_MAGIC:
        raise FormatError(f"{file_path}: bad magic {data[:4]!r}, expected {SPLITS_MAGIC!r}")
    try:
        n_users, n_items, max_len = struct.unpack_from("<III", data, 4)
        offset = 16
        item_ids = np.frombuffer(data, dtype="<u8", count=n_items, offset=offset).astype(np.int64)
        offset += 8 * n_items
        records = SplitRecords(n_items=n_items, max_len=max_len, item_ids=item_ids)
        for _ in range(n_users):
            user, partition, length = struct.unpack_from("<III", data, offset)
            offset += 12
            sequence = np.frombuffer(data, dtype="<u4", count=length, offset=offset).astype(np.int64)
            offset += 4 * length
            records.user_ids.append(user)
            records.partitions.append(partition)
            records.sequences.append(sequence)
    except (struct.error, ValueError) as e:
        raise FormatError(f"{file_path}: truncated splits file ({e})") from e
    if offset != len(data):
        raise FormatError(f"{file_path}: {len(data) - offset} trailing bytes")
    return records


# =============================================================================
# Checkpoints
# =============================================================================

def write_checkpoint(path: PathLike, tensors: Mapping[str, np.ndarray], meta: Dict[str, Any]) -> Path:
    """
    Text manifest followed by EMB1 blobs

    Manifest lines: SPCK1, meta<TAB>json, one name<TAB>shape<TAB>offset<TAB>nbytes
    line per tensor (offsets relative to the first blob), END.
    """
    blobs: List[bytes] = []
    lines = [CHECKPOINT_MAGIC, "meta\t" + json.dumps(meta, sort_keys=True)]
    offset = 0
    for name in sorted(tensors):
        array = np.asarray(tensors[name], dtype=np.float64)
        shape = "x".join(str(s) for s in array.shape) or "scalar"
        blob = encode_emb1(array.reshape(1, -1) if array.ndim != 2 else array)
        lines.append(f"{name}\t{shape}\t{offset}\t{len(blob)}")
        blobs.append(blob)
        offset += len(blob)
    lines.append(CHECKPOINT_END)

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_bytes(("\n".join(lines) + "\n").encode("utf-8") + b"".join(blobs))
    return file_path


def read_checkpoint(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    file_path = _require_file(path)
    data = file_path.read_bytes()
    marker = f"\n{CHECKPOINT_END}\n".encode("utf-8")
    cut = data.find(marker)
    if not data.startswith(CHECKPOINT_MAGIC.encode("utf-8")) or cut < 0:
        raise FormatError(f"{file_path}: not a checkpoint file")
    header = data[:cut].decode("utf-8").split("\n")
    body = data[cut + len(marker):]

    meta: Dict[str, Any] = {}
    tensors: Dict[str, np.ndarray] = {}
    for line in header[1:]:
        fields = line.split("\t")
        if fields[0] == "meta" and len(fields) == 2:
            meta = json.loads(fields[1])
            continue
        if len(fields) != 4:
            raise FormatError(f"{file_path}: malformed manifest line {line!r}")
        name, shape_text, offset, nbytes = fields[0], fields[1], int(fields[2]), int(fields[3])
        shape = () if shape_text == "scalar" else tuple(int(s) for s in shape_text.split("x"))
        matrix = decode_emb1(body[offset:offset + nbytes], f"{file_path}:{name}")
        tensors[name] = matrix.reshape(shape)
    return tensors, meta


# =============================================================================
# Reports
# =============================================================================

def write_json(path: PathLike, data: Any) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return file_path


def write_csv(path: PathLike, rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> Path:
    """Write dict rows with a fixed column order"""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=list(columns)).to_csv(file_path, index=False)
    return file_path
