"""
Layer 7: Model Layer
Semantic adapter + ID embeddings + SASRec backbone over one parameter store
"""

from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from src.config.constants import (
    DEFAULT_DROPOUT,
    DEFAULT_MAX_LEN,
    FusionMode,
    TransformKind,
)
from src.config.run_config import ModelSection
from src.layers.adapter import FusionLayer, MlpAdapter, SpecTranAdapter, SpecTranConfig, StaticAdapter
from src.layers.backbone import BackboneConfig, SasrecBackbone
from src.layers.objective import score_candidates
from src.layers.spectral import SpectralLayer, SvdFactors, static_projection
from src.numkit import autograd as ag
from src.numkit.autograd import Tape, Var
from src.numkit.params import ParamStore
from src.utils.errors import ConfigError, ContractError, DimensionError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

Adapter = Union[SpecTranAdapter, MlpAdapter, StaticAdapter]

ITEM_TABLE = "item.id"


class SequentialRecommender:
    """
    Layer 7: Model

    Responsibilities:
    - Own every parameter (ID table, adapter, fusion, backbone) in one ParamStore
    - Build the fused item table E_item on a tape
    - Training loss: InfoNCE over (target, negatives) with tied input/output items
    - Inference: user representations and the fused item table as plain arrays

    With semantic_init fusion the adapter output only seeds the ID table and
    the adapter itself is not part of the trained model.
    """

    def __init__(
        self,
        model_cfg: ModelSection,
        n_items: int,
        max_len: int = DEFAULT_MAX_LEN,
        dropout: float = DEFAULT_DROPOUT,
        semantic: Optional[np.ndarray] = None,
        factors: Optional[SvdFactors] = None
    ):
        if n_items < 1:
            raise ConfigError(f"Catalog must hold at least one item, got {n_items}")
        if semantic is not None and semantic.shape[0] != n_items:
            raise DimensionError(f"Semantic matrix has {semantic.shape[0]} rows for {n_items} items")
        if factors is not None and factors.n_items != n_items:
            raise DimensionError(f"Spectral basis has {factors.n_items} rows for {n_items} items")

        self.model_cfg = model_cfg
        self.n_items = n_items
        self.d = model_cfg.d
        self.semantic = semantic
        self.factors = factors
        self.temperature = model_cfg.temperature

        self.adapter: Optional[Adapter] = self._make_adapter()
        self.fusion = FusionLayer(model_cfg.fusion, self.d)
        self.backbone = SasrecBackbone(BackboneConfig.from_model(model_cfg, max_len, dropout))
        self.params = ParamStore()

    @property
    def transform(self) -> TransformKind:
        return self.model_cfg.transform

    @property
    def max_len(self) -> int:
        return self.backbone.config.max_len

    def _make_adapter(self) -> Optional[Adapter]:
        kind = self.model_cfg.transform
        if kind == TransformKind.NONE:
            return None
        if kind == TransformKind.MLP:
            if self.semantic is None:
                raise ConfigError("mlp transform needs a semantic matrix")
            return MlpAdapter(self.semantic, list(self.model_cfg.mlp_hidden), self.d, self.model_cfg.mlp_activation)

        factors = self.factors
        if factors is None:
            if self.semantic is None:
                raise ConfigError(f"{kind.value} transform needs a semantic matrix")
            factors = SpectralLayer().decompose(self.semantic)
            self.factors = factors
        if kind == TransformKind.SPECTRAN:
            return SpecTranAdapter(factors, SpecTranConfig.from_model(self.model_cfg))
        return StaticAdapter(static_projection(factors, kind, self.d))

    @property
    def trains_adapter(self) -> bool:
        return self.adapter is not None and self.model_cfg.fusion != FusionMode.SEMANTIC_INIT

    def initialize(self, rng: np.random.Generator) -> "SequentialRecommender":
        """Register and initialise every parameter from the init stream"""
        if len(self.params):
            raise ContractError("Model parameters are already initialised")

        std = self.model_cfg.embed_init_std
        if self.model_cfg.fusion == FusionMode.SEMANTIC_INIT:
            if self.adapter is None:
                raise ConfigError("semantic_init fusion needs a semantic transform")
            scratch = ParamStore()
            self.adapter.register(scratch, rng)
            id_table = self.adapter.project(Tape(enabled=False), scratch).value
        else:
            id_table = rng.normal(0.0, std, size=(self.n_items, self.d))
        self.params.register(ITEM_TABLE, id_table)

        if self.trains_adapter:
            self.adapter.register(self.params, rng)
        self.fusion.register(self.params)
        self.backbone.register(self.params, rng)

        logger.info(
            f"MODEL_INITIALISED | transform={self.transform.value} | fusion={self.fusion.mode.value} | "
            f"items={self.n_items} | d={self.d} | params={self.num_trainable()}"
        )
        return self

    # ------------------------------------------------------------------
    # Graph construction
    # ------------------------------------------------------------------

    def semantic_table(self, tape: Tape) -> Optional[Var]:
        if not self.trains_adapter:
            return None
        return self.adapter.project(tape, self.params)

    def item_table(self, tape: Tape) -> Var:
        """Fused N x d item embeddings, shared by input lookup and output scoring"""
        E_id = tape.param(self.params, ITEM_TABLE)
        return self.fusion.fuse(tape, self.params, self.semantic_table(tape), E_id)

    def represent(
        self,
        tape: Tape,
        sequences: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None
    ) -> Var:
        table = self.item_table(tape)
        return self._represent_with(tape, table, sequences, training, rng)

    def _represent_with(
        self,
        tape: Tape,
        table: Var,
        sequences: np.ndarray,
        training: bool,
        rng: Optional[np.random.Generator]
    ) -> Var:
        embedded, keep = self.backbone.embed_sequence(tape, self.params, table, sequences)
        return self.backbone.encode_sequence(tape, self.params, embedded, keep, training, rng)

    def loss(
        self,
        tape: Tape,
        sequences: np.ndarray,
        targets: np.ndarray,
        negatives: np.ndarray,
        training: bool = True,
        rng: Optional[np.random.Generator] = None
    ) -> Var:
        """Mean InfoNCE with the positive in column 0"""
        targets = np.asarray(targets, dtype=np.int64)
        negatives = np.asarray(negatives, dtype=np.int64)
        if negatives.shape[0] != targets.shape[0]:
            raise DimensionError(f"{negatives.shape[0]} negative rows for {targets.shape[0]} targets")
        table = self.item_table(tape)
        users = self._represent_with(tape, table, sequences, training, rng)
        candidates = np.concatenate([targets[:, None], negatives], axis=1)
        return ag.infonce(score_candidates(users, table, candidates), self.temperature)

    # ------------------------------------------------------------------
    # Inference (no recording)
    # ------------------------------------------------------------------

    def item_embeddings(self) -> np.ndarray:
        return self.item_table(Tape(enabled=False)).value.copy()

    def semantic_embeddings(self) -> Optional[np.ndarray]:
        """Adapter output E_s, or None for the ID-only model"""
        if self.adapter is None:
            return None
        if self.trains_adapter:
            return self.semantic_table(Tape(enabled=False)).value.copy()
        return self.params.value(ITEM_TABLE).copy() if self.model_cfg.fusion == FusionMode.SEMANTIC_INIT else None

    def user_representations(self, sequences: np.ndarray, item_table: Optional[np.ndarray] = None) -> np.ndarray:
        tape = Tape(enabled=False)
        table = tape.constant(item_table) if item_table is not None else self.item_table(tape)
        return self._represent_with(tape, table, sequences, False, None).value

    # ------------------------------------------------------------------
    # Accounting and persistence
    # ------------------------------------------------------------------

    def num_trainable(self) -> int:
        return self.params.num_trainable()

    def adapter_param_count(self) -> int:
        if not self.trains_adapter:
            return 0
        return int(sum(self.params.value(name).size for name in self.adapter.param_names))

    def weight_report(self) -> Optional[Tuple[float, float]]:
        """(principal, subordinate) absolute attention totals of a SpecTran adapter"""
        if not isinstance(self.adapter, SpecTranAdapter) or not self.trains_adapter:
            return None
        return self.adapter.weight_report(self.params)

    def meta(self) -> Dict[str, Any]:
        return {
            "transform": self.transform.value,
            "fusion": self.fusion.mode.value,
            "d": self.d,
            "n_items": self.n_items,
            "max_len": self.max_len,
            "rank": self.factors.rank if self.factors is not None else None,
            "trainable_params": self.num_trainable(),
            "adapter_params": self.adapter_param_count(),
        }

    def tensors(self) -> Dict[str, np.ndarray]:
        return self.params.snapshot()

    def load_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        """
        Restore parameters from checkpoint tensors

        Raises:
            ConfigError: the tensor names or sizes do not match this model
        """
        expected = set(self.params.names())
        if set(tensors) != expected:
            missing = sorted(expected - set(tensors))
            extra = sorted(set(tensors) - expected)
            raise ConfigError(f"Checkpoint does not match the configured model; missing={missing[:5]} extra={extra[:5]}")
        restored = {}
        for name, value in tensors.items():
            shape = self.params.value(name).shape
            if np.asarray(value).size != int(np.prod(shape)):
                raise ConfigError(f"Checkpoint tensor {name} has {np.asarray(value).size} entries, model expects {shape}")
            restored[name] = np.asarray(value, dtype=np.float64).reshape(shape)
        self.params.load_snapshot(restored, strict=True)
