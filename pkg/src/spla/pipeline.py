"""End-to-end analysis: sparsity sweep, structure selection, discards.

The four stages are: (1) compute sparse loadings over a penalty grid,
(2) detect the block structure at each grid point and gate it on the minimum
evaluation criterion, (3) rank the retained blocks by explained variance and
flag low-share blocks as discard candidates, (4) verify each candidate
against the partial covariance before recommending a discard.

The whole grid is scanned and the partition with the most blocks among those
passing the gate is selected (ties broken by larger minimum EC) — the EC is
not guaranteed monotone across grid points, so early stopping is avoided.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blocks import (
    Block,
    BlockError,
    BlockPartition,
    detect_blocks,
)
from .data import CovMatrix, DataMatrix, sample_cov, standardize
from .evaluation import (
    BlockEvaluation,
    EcGate,
    evaluate_partition,
    weight_basis,
)
from .matops import MatopsError, sym_eigen
from .sparse_loadings import (
    LoadingMatrix,
    PenaltyConfig,
    elastic_net_loadings,
    orthogonalize,
    sparse_loading_matrix,
)
from .variance import (
    VarianceShares,
    corrected_variances,
    partial_trace_share,
    variance_shares,
)

__all__ = [
    "SplaConfig",
    "GridPoint",
    "DiscardRecommendation",
    "SplaReport",
    "run_spla",
    "structure_scan",
]


class EmptyGridError(ValueError):
    """The penalty grid is empty."""


@dataclass(frozen=True)
class SplaConfig:
    """Configuration of a full analysis run.

    ``grid`` holds penalty values scanned from least to most sparse: L1
    budgets ``c`` for the penalized decomposition (``method='pmd'``) or
    L1 penalties for the elastic net (``method='spca'``). An elastic-net
    grid entry may also be a tuple of per-loading penalties (one per
    loading). An empty grid means "derive a default from the data
    dimension".

    ``discard_sv_threshold`` is the per-variable average share (percent); a
    block whose SV falls below ``discard_margin`` times that threshold is a
    discard candidate, confirmed only when its partial-trace share is also
    below the bound. ``block_order`` optionally pins the
    evaluation order as a tuple of variable-index tuples.

    ``detect_tol`` is the support tolerance for block detection: loading
    components below it in magnitude are structural zeros. The deflation
    route leaves sub-percent residue on otherwise-zero components; a genuine
    component this small contributes a negligible variance share, so
    suppressing it only removes spurious block bridges.
    """

    method: str = "pmd"
    grid: tuple[float | tuple[float, ...], ...] = ()
    gate: EcGate = field(default_factory=EcGate)
    discard_sv_threshold: float | None = None
    discard_margin: float = 0.8
    block_order: tuple[tuple[int, ...], ...] | None = None
    standardize: bool = False
    ridge: float = 1e-6
    max_iter: int = 500
    detect_tol: float = 1e-2

    def resolved_grid(self, m: int) -> tuple[float | tuple[float, ...], ...]:
        if self.grid:
            return self.grid
        if self.method == "pmd":
            # Least to most sparse: budgets just under sqrt(k) for every
            # candidate block size k (the L1 norm of an equal-weight loading
            # on k variables is sqrt(k), so these are the natural knots
            # where a k-variable block becomes expressible), plus the two
            # endpoints.
            knots = [np.sqrt(m)] + [
                max(1.0, np.sqrt(k) - 0.005) for k in range(m, 1, -1)
            ] + [1.0]
            out: list[float] = []
            for c in knots:
                if not out or abs(out[-1] - c) > 1e-9:
                    out.append(float(c))
            return tuple(out)
        # Elastic net: increasing per-loading L1 penalty.
        return tuple(np.geomspace(1e-3, 10.0, 12))


@dataclass(frozen=True)
class GridPoint:
    """One penalty-trace entry."""

    penalty: float | tuple[float, ...]
    partition: BlockPartition | None
    min_ec: float | None
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class DiscardRecommendation:
    """Step-3 flag plus step-4 verification for one block."""

    block_index: int
    variables: tuple[str, ...]
    block_sv: float
    sv_flagged: bool
    partial_share: float
    verified: bool

    @property
    def discard(self) -> bool:
        return self.sv_flagged and self.verified


@dataclass(frozen=True)
class SplaReport:
    """Everything a run produces; immutable and safe to share."""

    variable_names: tuple[str, ...]
    partition: BlockPartition
    loadings: LoadingMatrix | None
    evaluations: tuple[BlockEvaluation, ...]
    min_ec: float
    shares: VarianceShares
    partial_shares: tuple[float, ...]
    recommendations: tuple[DiscardRecommendation, ...]
    penalty_trace: tuple[GridPoint, ...]

    def block_names(self) -> list[tuple[str, ...]]:
        return [
            tuple(self.variable_names[i] for i in b.variable_indices)
            for b in self.partition.blocks
        ]

    def to_json_dict(self) -> dict:
        """Schema-stable report value (the table renderer derives from this)."""
        return {
            "partition": [list(b) for b in self.block_names()],
            "ordering": [list(b.variable_indices) for b in self.partition.blocks],
            "ec": [e.ec for e in self.evaluations],
            "shares": {
                "per_loading_sv": self.shares.per_loading_sv.tolist(),
                "block_sv": self.shares.block_sv.tolist(),
                "block_cv": self.shares.block_cv.tolist(),
            },
            "partial_shares": list(self.partial_shares),
            "recommendations": [
                {
                    "block": list(r.variables),
                    "block_sv": r.block_sv,
                    "sv_flagged": r.sv_flagged,
                    "partial_share": r.partial_share,
                    "verified": r.verified,
                    "discard": r.discard,
                }
                for r in self.recommendations
            ],
            "penalty_trace": [
                {
                    "penalty": (
                        list(g.penalty)
                        if isinstance(g.penalty, tuple)
                        else float(g.penalty)
                    ),
                    "n_blocks": g.partition.n_blocks if g.partition else None,
                    "min_ec": g.min_ec,
                    "passed": g.passed,
                    "note": g.note,
                }
                for g in self.penalty_trace
            ],
        }


def _default_order(cov: CovMatrix, p: BlockPartition) -> BlockPartition:
    """Default evaluation order: descending leading block variance.

    Blocks are ranked by the largest eigenvalue of their covariance
    sub-matrix (the top single-loading variance available inside the block);
    ties fall back to ascending minimum variable index.
    """
    keys = []
    for i, b in enumerate(p.blocks):
        rows = np.asarray(b.variable_indices)
        sub = cov.values[np.ix_(rows, rows)]
        lam = sym_eigen((sub + sub.T) / 2.0)[0][0]
        keys.append((-lam, b.variable_indices[0], i))
    order = [i for *_, i in sorted(keys)]
    return p.reordered(order)


def _apply_explicit_order(
    p: BlockPartition, order: tuple[tuple[int, ...], ...]
) -> BlockPartition:
    want = [tuple(sorted(b)) for b in order]
    have = {b.variable_indices: i for i, b in enumerate(p.blocks)}
    if sorted(want) != sorted(have):
        raise BlockError(
            f"requested block order {want} does not match detected blocks "
            f"{sorted(have)}"
        )
    return p.reordered([have[w] for w in want])


def _loadings_for(
    x: np.ndarray, cov: CovMatrix, cfg: SplaConfig,
    penalty: float | tuple[float, ...],
) -> LoadingMatrix:
    pcfg = PenaltyConfig(max_iter=cfg.max_iter)
    if cfg.method == "pmd":
        if not np.isscalar(penalty):
            raise ValueError("per-loading penalty vectors require method 'spca'")
        lm = sparse_loading_matrix(
            x,
            replace(
                pcfg, l1_bound=penalty, conv_tol=1e-7,
                strict_convergence=False, max_iter=min(cfg.max_iter, 200),
            ),
            orthogonalize_result=False,
        )
        # Deflation leaves sub-percent residue on structurally-zero
        # components; the elastic net below produces exact zeros, so the
        # detection tolerance applies to this route only.
        return LoadingMatrix(
            lm.u, zero_tol=max(lm.zero_tol, cfg.detect_tol),
            source_method=lm.source_method,
        )
    if cfg.method == "spca":
        per = [penalty] if np.isscalar(penalty) else list(penalty)
        return elastic_net_loadings(
            cov, per, cfg.ridge, cov.n_vars,
            replace(pcfg, method="elastic_net", conv_tol=1e-4, max_iter=300),
            orthogonalize_result=False,
        )
    raise ValueError(f"unknown method {cfg.method!r}")


def _scan(
    x: np.ndarray, cov: CovMatrix, cfg: SplaConfig
) -> tuple[list[GridPoint], dict[int, tuple[BlockPartition, LoadingMatrix]]]:
    grid = cfg.resolved_grid(cov.n_vars)
    if not grid:
        raise EmptyGridError("penalty grid is empty")
    trace: list[GridPoint] = []
    found: dict[int, tuple[BlockPartition, LoadingMatrix, float]] = {}
    for penalty in grid:
        try:
            lm = _loadings_for(x, cov, cfg, penalty)
            detected = detect_blocks(lm)
        except BlockError as exc:
            trace.append(GridPoint(penalty, None, None, False, str(exc)))
            continue
        except MatopsError as exc:
            trace.append(GridPoint(penalty, None, None, False, str(exc)))
            continue
        if cfg.block_order is not None:
            try:
                ordered = _apply_explicit_order(detected, cfg.block_order)
            except BlockError:
                ordered = _default_order(cov, detected)
        else:
            ordered = _default_order(cov, detected)
        _, min_ec, passed = evaluate_partition(cov, ordered, cfg.gate)
        trace.append(GridPoint(penalty, ordered, min_ec, passed, ""))
        key = ordered.n_blocks
        if passed and (key not in found or min_ec > found[key][2]):
            found[key] = (ordered, lm, min_ec)
    return trace, found


def _choose(
    cov: CovMatrix, cfg: SplaConfig, trace, found
) -> tuple[BlockPartition, LoadingMatrix | None]:
    if found:
        partition, lm, _ = found[max(found)]
        return partition, lm
    # Nothing passed the gate: fall back to the trivial single block.
    m = cov.n_vars
    single = BlockPartition((Block(tuple(range(m)), tuple(range(m))),))
    return single, None


def _report(
    cov: CovMatrix,
    cfg: SplaConfig,
    chosen: BlockPartition,
    lm: LoadingMatrix | None,
    trace,
) -> SplaReport:
    names = cov.variable_names
    m = cov.n_vars
    # Share accounting in the evaluation (weight) basis, laid out block-first.
    # An explicit block_order also pins the within-block variable sequence.
    within = None
    if cfg.block_order is not None and [
        tuple(sorted(b)) for b in cfg.block_order
    ] == [b.variable_indices for b in chosen.blocks]:
        within = tuple(tuple(int(i) for i in b) for b in cfg.block_order)
    wb = weight_basis(chosen, m, within_block_order=within)
    cv = corrected_variances(cov, wb)
    shares = variance_shares(cv, cov, chosen)
    entries, min_ec, _ = evaluate_partition(cov, chosen, cfg.gate)
    evaluations = tuple(entries)

    if chosen.n_blocks > 1:
        partial = tuple(
            partial_trace_share(cov, b.variable_indices) for b in chosen.blocks
        )
    else:
        partial = (100.0,)

    threshold = (
        cfg.discard_sv_threshold
        if cfg.discard_sv_threshold is not None
        else 100.0 / m
    )
    recs = []
    for i, b in enumerate(chosen.blocks):
        if chosen.n_blocks == 1:
            break
        bound = cfg.discard_margin * threshold
        sv = float(shares.block_sv[i])
        flagged = sv < bound
        # Step 4 runs only for flagged candidates; unflagged blocks reuse the
        # reporting value already computed above.
        share = partial[i]
        verified = flagged and share < bound
        if flagged:
            recs.append(
                DiscardRecommendation(
                    i,
                    tuple(names[j] for j in b.variable_indices),
                    sv,
                    flagged,
                    share,
                    verified,
                )
            )

    final_loadings = None
    if lm is not None:
        try:
            final_loadings = orthogonalize(
                lm.u, partition_hint=chosen, source_method=lm.source_method
            )
        except MatopsError:
            final_loadings = None

    return SplaReport(
        tuple(names),
        chosen,
        final_loadings,
        evaluations,
        min_ec,
        shares,
        partial,
        tuple(recs),
        tuple(trace),
    )


def run_spla(d: DataMatrix, cfg: SplaConfig = SplaConfig()) -> SplaReport:
    """Full analysis of a dataset (all four stages)."""
    data = standardize(d) if cfg.standardize else d
    cov = sample_cov(data)
    x = data.values - data.values.mean(axis=0)
    trace, found = _scan(x, cov, cfg)
    chosen, lm = _choose(cov, cfg, trace, found)
    return _report(cov, cfg, chosen, lm, trace)


def structure_scan(cov: CovMatrix, cfg: SplaConfig = SplaConfig()) -> SplaReport:
    """Stages 1-3 only, driven by a covariance matrix directly.

    For the penalized decomposition a matrix square root ``L`` with
    ``L^T L = S`` stands in for the sample, which leaves the Gram structure —
    and therefore every pattern and criterion — unchanged.
    """
    lam, vecs = sym_eigen(cov.values)
    x = np.sqrt(np.maximum(lam, 0.0))[:, None] * vecs.T
    trace, found = _scan(x, cov, cfg)
    chosen, lm = _choose(cov, cfg, trace, found)
    return _report(cov, cfg, chosen, lm, trace)
