"""Random-sample generators and Monte-Carlo experiments.

All randomness flows through :class:`numpy.random.Generator` (PCG64) seeded
from explicit integer seeds. Replicates and grid cells derive their streams
from ``(seed, cell key, replicate index)`` tuples, so adding a cell or a
replicate never shifts the draws of another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import Block, BlockPartition
from .data import CovMatrix, DataMatrix, sample_cov, standardize
from .evaluation import EcGate, block_ec
from .pipeline import SplaConfig, structure_scan

__all__ = [
    "BlockDesign",
    "gen_block_sample",
    "ec_distribution",
    "identification_rate",
    "random_wishart_demo",
    "gen_spiked_sample",
]


@dataclass(frozen=True)
class BlockDesign:
    """Paired-variable design with a shared spike.

    Variables come in ``n_blocks`` consecutive groups of ``block_size``; each
    group shares a latent factor ``Z_i``, all variables share ``Y`` with
    weight ``sqrt(rho)``, and every variable has its own noise ``W``:
    ``X_j = sqrt(1 - rho) Z_i + sqrt(rho) Y + W``. ``rho`` is the approximate
    correlation between blocks.
    """

    n_blocks: int = 7
    block_size: int = 2
    rho: float = 0.0
    latent_sd_sq: float = 10.0
    noise_sd_sq: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1)")
        if self.n_blocks < 1 or self.block_size < 1:
            raise ValueError("sizes must be >= 1")

    @property
    def n_vars(self) -> int:
        return self.n_blocks * self.block_size

    def true_partition(self) -> BlockPartition:
        blocks = []
        for i in range(self.n_blocks):
            idx = tuple(range(i * self.block_size, (i + 1) * self.block_size))
            blocks.append(Block(idx, idx))
        return BlockPartition(tuple(blocks))

    def population_cov(self) -> np.ndarray:
        """Closed-form covariance of ``X`` (before standardization)."""
        m = self.n_vars
        v, w = self.latent_sd_sq, self.noise_sd_sq
        cov = np.full((m, m), self.rho * v)
        for i in range(self.n_blocks):
            sl = slice(i * self.block_size, (i + 1) * self.block_size)
            cov[sl, sl] = v  # (1 - rho) v + rho v
        np.fill_diagonal(cov, v + w)
        return cov

    def population_correlation(self) -> np.ndarray:
        cov = self.population_cov()
        d = 1.0 / np.sqrt(np.diag(cov))
        return d[:, None] * cov * d[None, :]


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def _draw(design: BlockDesign, n: int, rng: np.random.Generator) -> DataMatrix:
    z = rng.normal(0.0, np.sqrt(design.latent_sd_sq), size=(n, design.n_blocks))
    y = rng.normal(0.0, np.sqrt(design.latent_sd_sq), size=n)
    w = rng.normal(0.0, np.sqrt(design.noise_sd_sq), size=(n, design.n_vars))
    x = np.empty((n, design.n_vars))
    for j in range(design.n_vars):
        i = j // design.block_size
        x[:, j] = (
            np.sqrt(1.0 - design.rho) * z[:, i]
            + np.sqrt(design.rho) * y
            + w[:, j]
        )
    names = tuple(f"X{j + 1}" for j in range(design.n_vars))
    return standardize(DataMatrix(x, names))


def gen_block_sample(design: BlockDesign, n: int, seed: int) -> DataMatrix:
    """Draw ``n`` observations from the design, then standardize."""
    if n < 2:
        raise ValueError("need n >= 2")
    return _draw(design, n, _rng(seed))


def ec_distribution(
    design: BlockDesign,
    n: int,
    reps: int,
    blocks_to_eval,
    seed: int,
) -> np.ndarray:
    """EC of designated blocks under the known true partition, per replicate.

    ``blocks_to_eval`` holds 0-based block indices; blocks are evaluated in
    index order (block 0 first). Returns an array of shape
    ``(reps, len(blocks_to_eval))``.
    """
    blocks_to_eval = list(blocks_to_eval)
    p = design.true_partition()
    out = np.empty((reps, len(blocks_to_eval)))
    for r in range(reps):
        sample = gen_block_sample_keyed(design, n, seed, r)
        cov = sample_cov(sample)
        for c, b in enumerate(blocks_to_eval):
            out[r, c] = block_ec(cov, p, b).ec if b > 0 else 1.0
    return out


def gen_block_sample_keyed(
    design: BlockDesign, n: int, seed: int, rep: int
) -> DataMatrix:
    """Replicate-keyed variant of :func:`gen_block_sample`.

    The stream is keyed on ``(seed, rho, n, rep)``, so every ``(n, rho)``
    grid cell and every replicate owns an independent sub-stream.
    """
    return _draw(design, n, _rng(seed, round(design.rho * 1000), n, rep))


def identification_rate(
    design: BlockDesign,
    n_list,
    rho_list,
    reps: int,
    gate: EcGate,
    seed: int,
    cfg: SplaConfig | None = None,
) -> list[dict]:
    """Fraction of samples whose detected partition equals the truth.

    Returns one row per ``(n, rho)`` cell:
    ``{detector, n, rho, c_ec, reps, rate}``.
    """
    rows = []
    for n in n_list:
        for rho in rho_list:
            cell = BlockDesign(
                design.n_blocks, design.block_size, rho,
                design.latent_sd_sq, design.noise_sd_sq,
            )
            truth = [b.variable_indices for b in cell.true_partition().blocks]
            hits = 0
            for r in range(reps):
                sample = gen_block_sample_keyed(cell, n, seed, r)
                cov = sample_cov(sample)
                run_cfg = cfg if cfg is not None else SplaConfig(gate=gate)
                if run_cfg.gate.c_ec != gate.c_ec:
                    run_cfg = SplaConfig(
                        method=run_cfg.method, grid=run_cfg.grid, gate=gate
                    )
                report = structure_scan(cov, run_cfg)
                got = sorted(
                    b.variable_indices for b in report.partition.blocks
                )
                if got == sorted(truth):
                    hits += 1
            rows.append({
                "detector": "spla",
                "n": int(n),
                "rho": float(rho),
                "c_ec": gate.c_ec,
                "reps": int(reps),
                "rate": hits / reps,
            })
    return rows


def random_wishart_demo(reps: int, seed: int) -> list[tuple[int, float]]:
    """Block counts and ECs of random 3x3 Wishart-style correlation matrices.

    Each replicate draws ``A`` with independent U(0, 1) entries, forms
    ``S = A^T A``, converts it to a correlation matrix and structure-scans
    it. The recorded EC is the minimum EC of the chosen partition when a
    split was accepted; when the scan keeps a single block, it is the best
    minimum EC among the rejected multi-block candidates (the strength of
    the evidence for splitting, which is small by construction).
    """
    out = []
    cfg = SplaConfig()
    r = 0
    draws = 0
    while r < reps:
        rng = _rng(seed, r, draws)
        a = rng.uniform(0.0, 1.0, size=(3, 3))
        s = a.T @ a
        d = np.sqrt(np.diag(s))
        if np.min(d) < 1e-6 or np.linalg.det(s) < 1e-10:
            draws += 1  # singular draw: redraw (measure zero)
            continue
        corr = s / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
        cov = CovMatrix(corr, ("A", "B", "C"), is_correlation=True)
        report = structure_scan(cov, cfg)
        k = report.partition.n_blocks
        if k > 1:
            ec = report.min_ec
        else:
            candidates = [
                g.min_ec
                for g in report.penalty_trace
                if g.partition is not None and g.partition.n_blocks > 1
                and g.min_ec is not None
            ]
            ec = max(candidates) if candidates else 0.0
        out.append((k, float(ec)))
        r += 1
        draws = 0
    return out


def gen_spiked_sample(ten_vars: bool, n: int, seed: int) -> DataMatrix:
    """Spiked two-factor sample: 8 or 10 variables, not standardized.

    Variables 1-4 load on ``Z_1`` (variance 290), variables 5-8 on ``Z_2``
    (variance 300); the 10-variable extension adds two variables
    ``-0.3 Z_1 + 0.925 Z_2 + noise``. Per-variable noise is N(0, 1).
    """
    rng = _rng(seed, 10 if ten_vars else 8, n)
    z1 = rng.normal(0.0, np.sqrt(290.0), size=n)
    z2 = rng.normal(0.0, np.sqrt(300.0), size=n)
    m = 10 if ten_vars else 8
    theta = rng.normal(0.0, 1.0, size=(n, m))
    x = np.empty((n, m))
    for j in range(4):
        x[:, j] = z1 + theta[:, j]
    for j in range(4, 8):
        x[:, j] = z2 + theta[:, j]
    if ten_vars:
        for j in range(8, 10):
            x[:, j] = -0.3 * z1 + 0.925 * z2 + theta[:, j]
    names = tuple(f"X{j + 1}" for j in range(m))
    return DataMatrix(x, names)
