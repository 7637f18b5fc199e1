"""
Layer 5: Backbone Layer
SASRec-style causal self-attention encoder over left-padded item sequences
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.config.constants import (
    DEFAULT_BLOCKS,
    DEFAULT_DROPOUT,
    DEFAULT_EMBED_DIM,
    DEFAULT_EMBED_INIT_STD,
    DEFAULT_HEADS,
    DEFAULT_MAX_LEN,
    Activation,
)
from src.config.run_config import ModelSection
from src.numkit import autograd as ag
from src.numkit.autograd import Tape, Var
from src.numkit.params import ParamStore
from src.utils.errors import ConfigError, DimensionError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass
class BackboneConfig:
    """Encoder shape; d must be divisible by heads"""
    d: int = DEFAULT_EMBED_DIM
    blocks: int = DEFAULT_BLOCKS
    heads: int = DEFAULT_HEADS
    max_len: int = DEFAULT_MAX_LEN
    dropout: float = DEFAULT_DROPOUT
    hidden_act: Activation = Activation.GELU
    init_std: float = DEFAULT_EMBED_INIT_STD

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ConfigError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be at least 1, got {self.max_len}")

    @classmethod
    def from_model(cls, model: ModelSection, max_len: int, dropout: float) -> "BackboneConfig":
        return cls(
            d=model.d,
            blocks=model.blocks,
            heads=model.heads,
            max_len=max_len,
            dropout=dropout,
            hidden_act=model.hidden_act,
            init_std=model.embed_init_std,
        )


class SasrecBackbone:
    """
    Layer 5: Backbone

    Each block: causal softmax attention, residual + layer-norm, pointwise
    feed-forward, residual + layer-norm. Padding positions are zeroed after
    every block and never attended to. Dropout acts on attention weights and
    feed-forward outputs during training only.
    """

    PREFIX = "sasrec"

    def __init__(self, config: BackboneConfig):
        self.config = config

    def _block_names(self, block: int) -> List[str]:
        base = f"{self.PREFIX}.block{block}"
        parts = [
            "attn.wq", "attn.bq", "attn.wk", "attn.wv", "attn.bv",
            "attn.wo", "attn.bo", "ln1.gamma", "ln1.beta",
            "ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2", "ln2.gamma", "ln2.beta",
        ]
        return [f"{base}.{part}" for part in parts]

    @property
    def param_names(self) -> List[str]:
        names = [f"{self.PREFIX}.pos"]
        for block in range(self.config.blocks):
            names += self._block_names(block)
        return names

    def register(self, store: ParamStore, rng: np.random.Generator) -> None:
        d = self.config.d
        weight_std = 1.0 / np.sqrt(d)
        store.register(f"{self.PREFIX}.pos", rng.normal(0.0, self.config.init_std, size=(self.config.max_len, d)))
        for block in range(self.config.blocks):
            for name in self._block_names(block):
                part = name.rsplit(".", 1)[-1]
                if part.startswith("w"):
                    value = rng.normal(0.0, weight_std, size=(d, d))
                elif part == "gamma":
                    value = np.ones(d)
                else:
                    value = np.zeros(d)
                store.register(name, value)

    def embed_sequence(
        self,
        tape: Tape,
        store: ParamStore,
        item_table: Var,
        sequences: np.ndarray
    ) -> Tuple[Var, np.ndarray]:
        """
        Item rows plus position embeddings; padding positions zeroed

        Args:
            item_table: N x d item embeddings
            sequences: B x max_len ids, left-padded with id N

        Returns:
            (B x max_len x d tensor, B x max_len keep mask)
        """
        ids = np.asarray(sequences, dtype=np.int64)
        n_items, d = item_table.shape
        if ids.ndim != 2 or ids.shape[1] != self.config.max_len:
            raise DimensionError(f"Sequences must be B x {self.config.max_len}, got {ids.shape}")
        if ids.size and (ids.min() < 0 or ids.max() > n_items):
            raise IndexError(f"Item id out of range for a catalog of {n_items} items")

        keep = ids != n_items
        gate = tape.constant(keep[..., None].astype(np.float64))
        padded_table = ag.concat([item_table, tape.constant(np.zeros((1, d)))], axis=0)
        embedded = ag.mul(ag.take_rows(padded_table, ids), gate)
        embedded = ag.add(embedded, tape.param(store, f"{self.PREFIX}.pos"))
        return ag.mul(embedded, gate), keep

    def _attention(
        self,
        tape: Tape,
        store: ParamStore,
        x: Var,
        keep: np.ndarray,
        base: str,
        rng: Optional[np.random.Generator]
    ) -> Var:
        batch, length, d = x.shape
        heads = self.config.heads
        head_dim = d // heads

        def project(kind: str) -> Var:
            out = ag.matmul(x, tape.param(store, f"{base}.attn.w{kind}"))
            # keys carry no bias: it would shift every score of a query row equally
            if kind == "k":
                return out
            return ag.add(out, tape.param(store, f"{base}.attn.b{kind}"))

        def split(v: Var) -> Var:
            if heads == 1:
                return ag.reshape(v, (batch, 1, length, d))
            return ag.permute(ag.reshape(v, (batch, length, heads, head_dim)), (0, 2, 1, 3))

        q, k, v = split(project("q")), split(project("k")), split(project("v"))
        scores = ag.mul(ag.matmul(q, ag.transpose(k)), 1.0 / np.sqrt(head_dim))
        causal = np.tril(np.ones((length, length), dtype=bool))
        allowed = causal[None, None, :, :] & keep[:, None, None, :]
        weights = ag.dropout(ag.masked_softmax(scores, allowed), self.config.dropout, rng)
        context = ag.matmul(weights, v)
        if heads == 1:
            context = ag.reshape(context, (batch, length, d))
        else:
            context = ag.reshape(ag.permute(context, (0, 2, 1, 3)), (batch, length, d))
        return ag.add(
            ag.matmul(context, tape.param(store, f"{base}.attn.wo")),
            tape.param(store, f"{base}.attn.bo"),
        )

    def hidden_states(
        self,
        tape: Tape,
        store: ParamStore,
        embedded: Var,
        keep: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None
    ) -> Var:
        """All positions after the final block (B x max_len x d)"""
        dropout_rng = rng if training else None
        gate = tape.constant(keep[..., None].astype(np.float64))
        x = embedded
        for block in range(self.config.blocks):
            base = f"{self.PREFIX}.block{block}"
            attended = self._attention(tape, store, x, keep, base, dropout_rng)
            x = ag.layer_norm(
                ag.add(x, attended),
                tape.param(store, f"{base}.ln1.gamma"),
                tape.param(store, f"{base}.ln1.beta"),
            )
            hidden = ag.activation(
                ag.add(ag.matmul(x, tape.param(store, f"{base}.ffn.w1")), tape.param(store, f"{base}.ffn.b1")),
                self.config.hidden_act,
            )
            ffn = ag.add(ag.matmul(hidden, tape.param(store, f"{base}.ffn.w2")), tape.param(store, f"{base}.ffn.b2"))
            ffn = ag.dropout(ffn, self.config.dropout, dropout_rng)
            x = ag.layer_norm(
                ag.add(x, ffn),
                tape.param(store, f"{base}.ln2.gamma"),
                tape.param(store, f"{base}.ln2.beta"),
            )
            x = ag.mul(x, gate)
        return x

    def encode_sequence(
        self,
        tape: Tape,
        store: ParamStore,
        embedded: Var,
        keep: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None
    ) -> Var:
        """User representation: the final-position vector (B x d)"""
        states = self.hidden_states(tape, store, embedded, keep, training, rng)
        return ag.getitem(states, (slice(None), -1, slice(None)))
