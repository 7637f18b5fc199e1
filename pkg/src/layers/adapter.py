"""
Layer 4: Adapter Layer
Maps semantic item embeddings to the recommender's dimension and fuses them
with ID embeddings

SpecTran attends over the full spectral basis U of the semantic matrix:
E_s = U [shrink(Q K^T, |lambda|) + A]^T, where A places a learnable Taylor
reweighting of the leading singular values on its diagonal block.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.config.constants import (
    DEFAULT_QK_INIT_STD,
    DEFAULT_TAYLOR_ORDER,
    Activation,
    EncodingKind,
    FusionMode,
)
from src.config.run_config import ModelSection
from src.layers.spectral import SvdFactors
from src.numkit import autograd as ag
from src.numkit.autograd import Tape, Var
from src.numkit.params import ParamStore
from src.utils.errors import ContractError, DimensionError, SingularityError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)


# =============================================================================
# Parameter containers
# =============================================================================

@dataclass
class SpecTranConfig:
    """Shape and ablation switches of the spectral adapter"""
    d: int
    m: Optional[int] = None
    taylor_order: int = DEFAULT_TAYLOR_ORDER
    use_attention: bool = True
    encoding: EncodingKind = EncodingKind.TAYLOR
    per_component_alpha: bool = False
    qk_init_std: float = DEFAULT_QK_INIT_STD

    @property
    def attention_dim(self) -> int:
        return self.m if self.m is not None else self.d

    @classmethod
    def from_model(cls, model: ModelSection) -> "SpecTranConfig":
        return cls(
            d=model.d,
            m=model.attention_dim,
            taylor_order=model.taylor_order,
            use_attention=model.use_attention,
            encoding=model.encoding,
            per_component_alpha=model.per_component_alpha,
            qk_init_std=model.qk_init_std,
        )


@dataclass
class SpecTranParams:
    """
    Q (d x m), K (r x m), Taylor coefficients alpha and the raw threshold

    The shrink threshold is |lambda_raw|. alpha is (n+1,) when shared across
    components and (d, n+1) in per-component mode.
    """
    Q: np.ndarray
    K: np.ndarray
    alpha: np.ndarray
    lambda_raw: float = 0.0

    @property
    def d(self) -> int:
        return int(self.Q.shape[0])

    @property
    def r(self) -> int:
        return int(self.K.shape[0])

    @property
    def m(self) -> int:
        return int(self.Q.shape[1])

    @property
    def order(self) -> int:
        return int(self.alpha.shape[-1]) - 1

    @classmethod
    def initialize(
        cls,
        d: int,
        r: int,
        rng: np.random.Generator,
        m: Optional[int] = None,
        order: int = DEFAULT_TAYLOR_ORDER,
        std: float = DEFAULT_QK_INIT_STD,
        per_component: bool = False
    ) -> "SpecTranParams":
        """Q, K ~ N(0, std^2), alpha = 1, lambda_raw = 0"""
        inner = m if m is not None else d
        alpha_shape: Tuple[int, ...] = (d, order + 1) if per_component else (order + 1,)
        return cls(
            Q=rng.normal(0.0, std, size=(d, inner)),
            K=rng.normal(0.0, std, size=(r, inner)),
            alpha=np.ones(alpha_shape),
            lambda_raw=0.0,
        )


@dataclass
class MlpAdapterParams:
    """Layer weights (in x out) and biases of the projection network"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: Activation = Activation.GELU

    @classmethod
    def initialize(
        cls,
        sizes: List[int],
        rng: np.random.Generator,
        activation: Activation = Activation.GELU
    ) -> "MlpAdapterParams":
        """Glorot-normal weights, zero biases"""
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            std = np.sqrt(2.0 / (fan_in + fan_out))
            weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights=weights, biases=biases, activation=activation)


# =============================================================================
# Shared graph builders (used with recording and non-recording tapes)
# =============================================================================

def _principal_weights(
    tape: Tape,
    sigma: np.ndarray,
    d: int,
    encoding: EncodingKind,
    alpha: Optional[Var]
) -> Optional[Var]:
    if encoding == EncodingKind.TAYLOR:
        if alpha is None:
            raise ContractError("Taylor encoding needs coefficients")
        return ag.taylor_weights(alpha, sigma, d)
    if encoding == EncodingKind.SIGMA:
        return tape.constant(sigma[:d].copy())
    if encoding == EncodingKind.IDENTITY:
        return tape.constant(np.ones(d))
    return None


def _attention_matrix(
    tape: Tape,
    sigma: np.ndarray,
    d: int,
    r: int,
    encoding: EncodingKind,
    q: Optional[Var],
    k: Optional[Var],
    lam: Optional[Var],
    alpha: Optional[Var]
) -> Var:
    """W = shrink(Q K^T, |lambda|) + A, a d x r matrix"""
    if float(sigma[0]) == 0.0:
        raise SingularityError("Largest singular value is zero (all-zero semantic matrix)")
    if d > r:
        raise DimensionError(f"d={d} exceeds spectral rank r={r}")

    weights = _principal_weights(tape, sigma, d, encoding, alpha)
    encoding_block = ag.diag_block(weights, r) if weights is not None else None

    if q is None or k is None or lam is None:
        if encoding_block is None:
            return tape.constant(np.zeros((d, r)))
        return encoding_block

    if q.shape[1] != k.shape[1] or q.shape[0] != d or k.shape[0] != r:
        raise DimensionError(f"Q {q.shape} and K {k.shape} do not give a {d}x{r} score matrix")
    scores = ag.shrink(ag.matmul(q, ag.transpose(k)), lam)
    return scores if encoding_block is None else ag.add(scores, encoding_block)


def _spectran_graph(tape: Tape, F: SvdFactors, W: Var) -> Var:
    return ag.matmul(tape.constant(F.U), ag.transpose(W))


def _mlp_graph(
    tape: Tape,
    x: Var,
    weights: List[Var],
    biases: List[Var],
    activation: Activation
) -> Var:
    if x.shape[1] != weights[0].shape[0]:
        raise DimensionError(f"Input has {x.shape[1]} columns, first layer expects {weights[0].shape[0]}")
    hidden = x
    for index, (w, b) in enumerate(zip(weights, biases)):
        hidden = ag.add(ag.matmul(hidden, w), b)
        if index < len(weights) - 1:
            hidden = ag.activation(hidden, activation)
    return hidden


# =============================================================================
# Pure operations
# =============================================================================

def taylor_diag(sigma: np.ndarray, alpha: np.ndarray, d: int) -> np.ndarray:
    """
    sigma_1 * sum_k alpha_k (sigma_i / sigma_1)^k for the first d components

    Raises:
        SingularityError: sigma_1 is zero
    """
    if d > len(sigma):
        raise DimensionError(f"d={d} exceeds the {len(sigma)} available singular values")
    tape = Tape(enabled=False)
    return ag.taylor_weights(tape.constant(alpha), np.asarray(sigma, dtype=np.float64), d).value


def build_positional_encoding(F: SvdFactors, params: SpecTranParams) -> np.ndarray:
    """A = [diag(taylor_diag(sigma, alpha, d)), 0]"""
    if params.d > F.rank:
        raise DimensionError(f"d={params.d} exceeds spectral rank r={F.rank}")
    weights = taylor_diag(F.sigma, params.alpha, params.d)
    block = np.zeros((params.d, F.rank))
    block[np.arange(params.d), np.arange(params.d)] = weights
    return block


def spectral_attention(F: SvdFactors, params: SpecTranParams) -> np.ndarray:
    """W = shrink(Q K^T, |lambda|) + A"""
    tape = Tape(enabled=False)
    return _attention_matrix(
        tape, F.sigma, params.d, F.rank, EncodingKind.TAYLOR,
        tape.constant(params.Q), tape.constant(params.K),
        tape.constant(params.lambda_raw), tape.constant(params.alpha),
    ).value


def spectran_project(F: SvdFactors, params: SpecTranParams) -> np.ndarray:
    """E_s = U W^T, shape N x d"""
    tape = Tape(enabled=False)
    W = tape.constant(spectral_attention(F, params))
    return _spectran_graph(tape, F, W).value


def mlp_project(E_llm: np.ndarray, params: MlpAdapterParams) -> np.ndarray:
    """Feed-forward projection; activation between layers, none after the last"""
    tape = Tape(enabled=False)
    return _mlp_graph(
        tape,
        tape.constant(E_llm),
        [tape.constant(w) for w in params.weights],
        [tape.constant(b) for b in params.biases],
        params.activation,
    ).value


def fuse_embeddings(
    E_s: np.ndarray,
    E_id: np.ndarray,
    mode: FusionMode,
    projection: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Combine semantic and ID embeddings

    add: E_s + E_id. concat_project: [E_s | E_id] @ projection (2d x d).
    semantic_init: the initial ID table, which is E_s itself.
    """
    if E_s.shape != E_id.shape:
        raise DimensionError(f"Semantic {E_s.shape} and ID {E_id.shape} embeddings differ in shape")
    if mode == FusionMode.ADD:
        return E_s + E_id
    if mode == FusionMode.SEMANTIC_INIT:
        return E_s.copy()
    if projection is None:
        raise ContractError("concat_project fusion needs a projection matrix")
    d = E_s.shape[1]
    if projection.shape != (2 * d, d):
        raise DimensionError(f"Projection must be {2 * d}x{d}, got {projection.shape}")
    tape = Tape(enabled=False)
    stacked = ag.concat([tape.constant(E_s), tape.constant(E_id)], axis=1)
    return ag.matmul(stacked, tape.constant(projection)).value


def spectral_weight_report(params: SpecTranParams, F: SvdFactors) -> Tuple[float, float]:
    """
    Total absolute attention on principal (j < d) and subordinate (j >= d) directions
    """
    W = spectral_attention(F, params)
    d = params.d
    return float(np.abs(W[:, :d]).sum()), float(np.abs(W[:, d:]).sum())


# =============================================================================
# Trainable adapters
# =============================================================================

class SpecTranAdapter:
    """
    Trainable spectral adapter bound to a ParamStore

    Parameters: spectran.Q, spectran.K (when attention is on), spectran.lambda
    (a 0-d scalar) and spectran.alpha (Taylor encoding only).
    """

    PREFIX = "spectran"

    def __init__(self, factors: SvdFactors, config: SpecTranConfig):
        if config.d > factors.rank:
            raise DimensionError(f"d={config.d} exceeds spectral rank r={factors.rank}")
        if factors.rank == 0 or float(factors.sigma[0]) == 0.0:
            raise SingularityError("Largest singular value is zero (all-zero semantic matrix)")
        self.factors = factors
        self.config = config

    def _name(self, part: str) -> str:
        return f"{self.PREFIX}.{part}"

    @property
    def param_names(self) -> List[str]:
        names = []
        if self.config.use_attention:
            names += [self._name("Q"), self._name("K"), self._name("lambda")]
        if self.config.encoding == EncodingKind.TAYLOR:
            names.append(self._name("alpha"))
        return names

    def register(self, store: ParamStore, rng: np.random.Generator) -> None:
        cfg = self.config
        init = SpecTranParams.initialize(
            cfg.d, self.factors.rank, rng,
            m=cfg.attention_dim, order=cfg.taylor_order,
            std=cfg.qk_init_std, per_component=cfg.per_component_alpha,
        )
        if cfg.use_attention:
            store.register(self._name("Q"), init.Q)
            store.register(self._name("K"), init.K)
            store.register(self._name("lambda"), np.asarray(init.lambda_raw))
        if cfg.encoding == EncodingKind.TAYLOR:
            store.register(self._name("alpha"), init.alpha)
        logger.debug(
            f"ADAPTER_REGISTERED | kind=spectran | d={cfg.d} | r={self.factors.rank} | "
            f"m={cfg.attention_dim} | order={cfg.taylor_order}"
        )

    def _param(self, tape: Tape, store: ParamStore, part: str) -> Optional[Var]:
        name = self._name(part)
        return tape.param(store, name) if name in store else None

    def attention(self, tape: Tape, store: ParamStore) -> Var:
        return _attention_matrix(
            tape, self.factors.sigma, self.config.d, self.factors.rank, self.config.encoding,
            self._param(tape, store, "Q"), self._param(tape, store, "K"),
            self._param(tape, store, "lambda"), self._param(tape, store, "alpha"),
        )

    def project(self, tape: Tape, store: ParamStore) -> Var:
        return _spectran_graph(tape, self.factors, self.attention(tape, store))

    def params(self, store: ParamStore) -> SpecTranParams:
        """Current values as a parameter container (attention-enabled Taylor mode)"""
        d, r, m = self.config.d, self.factors.rank, self.config.attention_dim
        order = self.config.taylor_order

        def value(part: str, default: np.ndarray) -> np.ndarray:
            name = self._name(part)
            return store.value(name).copy() if name in store else default

        return SpecTranParams(
            Q=value("Q", np.zeros((d, m))),
            K=value("K", np.zeros((r, m))),
            alpha=value("alpha", np.ones(order + 1)),
            lambda_raw=float(value("lambda", np.zeros(()))),
        )

    def weight_report(self, store: ParamStore) -> Tuple[float, float]:
        W = self.attention(Tape(enabled=False), store).value
        d = self.config.d
        return float(np.abs(W[:, :d]).sum()), float(np.abs(W[:, d:]).sum())


class MlpAdapter:
    """Trainable l -> hidden -> d projection network"""

    PREFIX = "mlp"

    def __init__(
        self,
        semantic: np.ndarray,
        hidden: List[int],
        d: int,
        activation: Activation = Activation.GELU
    ):
        self.semantic = semantic
        self.sizes = [semantic.shape[1], *hidden, d]
        self.activation = activation

    @property
    def param_names(self) -> List[str]:
        names = []
        for layer in range(len(self.sizes) - 1):
            names += [f"{self.PREFIX}.{layer}.weight", f"{self.PREFIX}.{layer}.bias"]
        return names

    def register(self, store: ParamStore, rng: np.random.Generator) -> None:
        init = MlpAdapterParams.initialize(self.sizes, rng, self.activation)
        for layer, (w, b) in enumerate(zip(init.weights, init.biases)):
            store.register(f"{self.PREFIX}.{layer}.weight", w)
            store.register(f"{self.PREFIX}.{layer}.bias", b)
        logger.debug(f"ADAPTER_REGISTERED | kind=mlp | sizes={self.sizes}")

    def project(self, tape: Tape, store: ParamStore) -> Var:
        layers = len(self.sizes) - 1
        weights = [tape.param(store, f"{self.PREFIX}.{i}.weight") for i in range(layers)]
        biases = [tape.param(store, f"{self.PREFIX}.{i}.bias") for i in range(layers)]
        return _mlp_graph(tape, tape.constant(self.semantic), weights, biases, self.activation)


class StaticAdapter:
    """Fixed semantic embeddings (truncation/whitening baselines); no parameters"""

    param_names: List[str] = []

    def __init__(self, embeddings: np.ndarray):
        self.embeddings = embeddings

    def register(self, store: ParamStore, rng: np.random.Generator) -> None:
        return None

    def project(self, tape: Tape, store: ParamStore) -> Var:
        return tape.constant(self.embeddings)


@dataclass
class FusionLayer:
    """Combines semantic and ID embeddings into the item table"""
    mode: FusionMode
    d: int
    name: str = "fusion.proj"

    def register(self, store: ParamStore) -> None:
        if self.mode == FusionMode.CONCAT_PROJECT:
            store.register(self.name, np.vstack([np.eye(self.d), np.eye(self.d)]))

    @property
    def param_names(self) -> List[str]:
        return [self.name] if self.mode == FusionMode.CONCAT_PROJECT else []

    def fuse(self, tape: Tape, store: ParamStore, E_s: Optional[Var], E_id: Var) -> Var:
        if E_s is None or self.mode == FusionMode.SEMANTIC_INIT:
            return E_id
        if E_s.shape != E_id.shape:
            raise DimensionError(f"Semantic {E_s.shape} and ID {E_id.shape} embeddings differ in shape")
        if self.mode == FusionMode.ADD:
            return ag.add(E_s, E_id)
        stacked = ag.concat([E_s, E_id], axis=1)
        return ag.matmul(stacked, tape.param(store, self.name))

