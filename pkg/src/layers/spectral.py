"""
Layer 3: Spectral Layer
SVD of the semantic matrix, static spectral transforms and the collapse diagnostic
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from src.config.constants import COLLAPSE_MASS_THRESHOLD, SVD_RANK_TOLERANCE, TransformKind
from src.numkit.matrix import as_dense, mm
from src.utils.caching import FactorCache, get_factor_cache
from src.utils.errors import (
    DataError,
    DimensionError,
    SingularityError,
    UnsupportedOperationError,
)
from src.utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SvdFactors:
    """
    Thin SVD E = U diag(sigma) Vt trimmed to the effective rank

    U is N x r, sigma holds r nonincreasing values, Vt is r x l. In each column
    of U the entry of largest magnitude is positive.
    """
    U: np.ndarray
    sigma: np.ndarray
    Vt: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.U.shape[0])

    def reconstruct(self) -> np.ndarray:
        return mm(self.U * self.sigma, self.Vt)

    def to_dict(self) -> Dict:
        return {
            "rows": self.n_items,
            "cols": int(self.Vt.shape[1]),
            "rank": self.rank,
            "sigma_max": float(self.sigma[0]) if self.rank else 0.0,
            "sigma_min": float(self.sigma[-1]) if self.rank else 0.0,
        }


def svd_decompose(E: np.ndarray, tolerance: float = SVD_RANK_TOLERANCE) -> SvdFactors:
    """
    Deterministic thin SVD with trailing near-zero singular values trimmed

    Raises:
        DataError: non-finite input
    """
    matrix = as_dense(E, "semantic matrix")
    if min(matrix.shape) == 0:
        raise DataError(f"Cannot decompose an empty matrix of shape {matrix.shape}")

    U, sigma, Vt = np.linalg.svd(matrix, full_matrices=False)

    pivots = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pivots, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    U = U * signs
    Vt = Vt * signs[:, None]

    keep = int(np.sum(sigma >= tolerance * sigma[0])) if sigma.size else 0
    factors = SvdFactors(
        U=np.ascontiguousarray(U[:, :keep]),
        sigma=sigma[:keep].copy(),
        Vt=np.ascontiguousarray(Vt[:keep]),
    )
    logger.debug(f"SVD_COMPLETE | shape={matrix.shape} | rank={factors.rank}")
    return factors


def _check_dim(F: SvdFactors, d: int) -> None:
    if d < 1 or d > F.rank:
        raise DimensionError(f"Projection dimension d={d} must lie in [1, r={F.rank}]")


def truncate_project(F: SvdFactors, d: int) -> np.ndarray:
    """Principal-component projection U[:, :d] diag(sigma[:d]), i.e. E V[:, :d]"""
    _check_dim(F, d)
    return F.U[:, :d] * F.sigma[:d]


def identity_project(F: SvdFactors, d: int) -> np.ndarray:
    """
    Whitened principal directions U[:, :d]

    Raises:
        SingularityError: sigma_d is zero
    """
    _check_dim(F, d)
    if F.sigma[d - 1] == 0.0:
        raise SingularityError(f"sigma_{d} is zero; whitening is undefined")
    return F.U[:, :d].copy()


def static_projection(F: SvdFactors, kind: TransformKind, d: int) -> np.ndarray:
    """Fixed semantic embeddings for the truncation or whitening baseline"""
    if not kind.is_static:
        raise UnsupportedOperationError(f"{kind.value} is not a static transform")
    if kind == TransformKind.SVD_TRUNCATE:
        return truncate_project(F, d)
    return identity_project(F, d)


@dataclass
class SpectrumReport:
    """Covariance eigenvalues of an embedding matrix, nonincreasing, with cumulative mass"""
    eigenvalues: np.ndarray
    fractions: np.ndarray
    top_k: int

    def effective_rank(self, threshold: float = COLLAPSE_MASS_THRESHOLD) -> int:
        """Smallest k whose cumulative fraction reaches the threshold"""
        return int(np.searchsorted(self.fractions, threshold - 1e-12) + 1)

    def entropy_effective_rank(self) -> float:
        """exp of the Shannon entropy of the normalized eigenvalues"""
        weights = self.eigenvalues / self.eigenvalues.sum()
        weights = weights[weights > 0]
        return float(np.exp(-np.sum(weights * np.log(weights))))

    def fraction_at(self, k: int) -> float:
        return float(self.fractions[min(k, len(self.fractions)) - 1])

    def rows(self, source: Optional[str] = None) -> List[Dict]:
        rows = []
        for k in range(self.top_k):
            row = {
                "rank": k + 1,
                "eigenvalue": float(self.eigenvalues[k]),
                "cumulative_fraction": float(self.fractions[k]),
            }
            if source is not None:
                row = {"source": source, **row}
            rows.append(row)
        return rows

    def to_dict(self) -> Dict:
        return {
            "top_k": self.top_k,
            "effective_rank_95": self.effective_rank(),
            "entropy_effective_rank": self.entropy_effective_rank(),
            "fractions": [float(f) for f in self.fractions[:self.top_k]],
        }


def cumulative_spectrum(E: np.ndarray, top_k: Optional[int] = None, center: bool = True) -> SpectrumReport:
    """
    Eigenvalues of the column covariance of E with cumulative fractions

    Args:
        E: N x d embeddings (rows are items)
        top_k: number of leading components to report (default: all)
        center: subtract column means first; False gives the raw second moment

    Raises:
        DimensionError: top_k exceeds the column count
        DataError: fewer than two rows, or zero total variance
    """
    matrix = as_dense(E, "embeddings")
    rows, cols = matrix.shape
    if rows < 2:
        raise DataError(f"Spectrum needs at least 2 rows, got {rows}")
    k = cols if top_k is None else top_k
    if k < 1 or k > cols:
        raise DimensionError(f"top_k={k} must lie in [1, {cols}]")

    centred = matrix - matrix.mean(axis=0, keepdims=True) if center else matrix
    covariance = mm(centred.T, centred) / (rows - 1)
    eigenvalues = np.clip(np.linalg.eigvalsh(covariance)[::-1], 0.0, None)
    total = eigenvalues.sum()
    if total <= 0.0:
        raise DataError("Embeddings have zero total variance")
    fractions = np.cumsum(eigenvalues) / total
    return SpectrumReport(eigenvalues=eigenvalues, fractions=fractions, top_k=k)


class SpectralLayer:
    """
    Layer 3: Spectral

    Responsibilities:
    - Decompose semantic matrices (memoized through the factor cache)
    - Produce static projections for the truncation and whitening baselines
    """

    def __init__(self, cache: Optional[FactorCache] = None):
        self.cache = cache if cache is not None else get_factor_cache()

    def decompose(self, E: np.ndarray) -> SvdFactors:
        factors = self.cache.get_or_compute(E, svd_decompose, tag="svd")
        logger.info(
            f"SPECTRUM_READY | rank={factors.rank} | sigma_max={factors.sigma[0]:.4f} | "
            f"cache_hits={self.cache.hits}"
        )
        return factors

    def static_projection(self, F: SvdFactors, kind: TransformKind, d: int) -> np.ndarray:
        return static_projection(F, kind, d)
