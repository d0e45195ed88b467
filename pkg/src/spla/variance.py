"""Explained-variance accounting.

The corrected variance of the i-th projected variable is the squared i-th
diagonal of the triangular factor: project the sample onto the loadings, then
QR-decompose — each column's variance is corrected upward for every earlier
column. Equivalently (and without needing a data matrix), it is the squared
diagonal of the upper Cholesky factor of the Gram matrix ``U^T S U``, because
``R^T R = (N-1) U^T S U`` for the QR factor ``R`` of the projected sample.

Partial covariance conditions one variable block on another by the regression
projection ``S_22 - S_21 S_11^-1 S_12``; its trace over the total variance is
the share a block retains once every other block is accounted for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockPartition
from .data import CovMatrix, DataMatrix
from .matops import cholesky_upper, qr_decompose, solve_spd
from .sparse_loadings import LoadingMatrix

__all__ = [
    "CorrectedVariances",
    "VarianceShares",
    "PartialCov",
    "corrected_variances",
    "corrected_variances_from_data",
    "variance_shares",
    "partial_cov",
    "partial_trace_share",
]


@dataclass(frozen=True)
class CorrectedVariances:
    """Per-loading corrected variances, in covariance units."""

    r_squared: np.ndarray
    loading_order: tuple[int, ...]

    def __post_init__(self):
        r2 = np.asarray(self.r_squared, dtype=float)
        object.__setattr__(self, "r_squared", r2)
        object.__setattr__(self, "loading_order", tuple(self.loading_order))
        if np.any(r2 < 0):
            raise ValueError("corrected variances must be nonnegative")


@dataclass(frozen=True)
class VarianceShares:
    """SV per loading and per block, CV cumulative per block (percent)."""

    per_loading_sv: np.ndarray
    block_sv: np.ndarray
    block_cv: np.ndarray


@dataclass(frozen=True)
class PartialCov:
    """Covariance of a variable block conditioned on its complement."""

    values: np.ndarray
    d_set: tuple[int, ...]
    conditioned_on: tuple[int, ...]

    def trace(self) -> float:
        return float(np.trace(self.values))


def corrected_variances(cov: CovMatrix, u: LoadingMatrix) -> CorrectedVariances:
    """Corrected variances from the covariance only (Cholesky-on-Gram path)."""
    gram = u.u.T @ cov.values @ u.u
    gram = (gram + gram.T) / 2.0
    r = cholesky_upper(gram)
    return CorrectedVariances(np.diag(r) ** 2, tuple(range(u.n_vars)))


def corrected_variances_from_data(d: DataMatrix, u: LoadingMatrix) -> CorrectedVariances:
    """Corrected variances via the QR decomposition of the projected sample.

    Agrees with :func:`corrected_variances` applied to the sample covariance;
    kept as an independent route for cross-checking.
    """
    x = d.values - d.values.mean(axis=0)
    _, r = qr_decompose(x @ u.u)
    r2 = np.diag(r) ** 2 / (d.n_obs - 1)
    return CorrectedVariances(r2, tuple(range(u.n_vars)))


def variance_shares(
    cv: CorrectedVariances, cov: CovMatrix, p: BlockPartition
) -> VarianceShares:
    """Percent shares of total variance, per loading and per block.

    ``cv`` must correspond to loadings laid out in block order (all loadings
    of the first block first, and so on); block SV sums the block's positions,
    CV accumulates over blocks in order.
    """
    total = cov.trace()
    per = 100.0 * cv.r_squared / total
    if sum(b.size for b in p.blocks) != per.size:
        raise ValueError("partition size does not match corrected variances")
    block_sv = []
    pos = 0
    for b in p.blocks:
        block_sv.append(float(np.sum(per[pos:pos + b.size])))
        pos += b.size
    block_sv = np.array(block_sv)
    return VarianceShares(per, block_sv, np.cumsum(block_sv))


def partial_cov(cov: CovMatrix, d_set) -> PartialCov:
    """Partial covariance of the variables ``d_set`` given the complement.

    ``S[D,D] - S[D,K] S[K,K]^-1 S[K,D]`` where ``K`` is every other variable.
    """
    m = cov.n_vars
    d = sorted(int(i) for i in d_set)
    if not d or len(d) >= m:
        raise ValueError("d_set must be a proper nonempty subset of the variables")
    k = [i for i in range(m) if i not in set(d)]
    s = cov.values
    sdd = s[np.ix_(d, d)]
    sdk = s[np.ix_(d, k)]
    skk = s[np.ix_(k, k)]
    values = sdd - sdk @ solve_spd(skk, sdk.T)
    values = (values + values.T) / 2.0
    return PartialCov(values, tuple(d), tuple(k))


def partial_trace_share(cov: CovMatrix, d_set) -> float:
    """Percent of total variance retained by ``d_set`` after conditioning."""
    return 100.0 * partial_cov(cov, d_set).trace() / cov.trace()
