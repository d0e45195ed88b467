"""Block-structure detection from sparse loading patterns.

Variables (rows) and loadings (columns) form a bipartite graph with an edge
wherever a loading component is nonzero; connected components of that graph
are the blocks. A valid partition pairs each variable group with an equally
sized loading group, so a row/column permutation brings the loading matrix to
block-diagonal form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CovMatrix
from .sparse_loadings import LoadingMatrix, ZERO_TOL
from .matops import sym_eigen

__all__ = [
    "BlockError",
    "NonSquareBlockError",
    "IsolatedVariableError",
    "InconsistentPartitionError",
    "Block",
    "BlockPartition",
    "PermutationPair",
    "detect_blocks",
    "permute_to_block_diagonal",
    "pla_detect",
]


class BlockError(Exception):
    """Base class for block-structure errors."""


class NonSquareBlockError(BlockError):
    """A connected component pairs unequal numbers of variables and loadings."""


class IsolatedVariableError(BlockError):
    """A variable has no incident loading in the support pattern."""


class InconsistentPartitionError(BlockError):
    """A partition does not match the loading matrix it is applied to."""


@dataclass(frozen=True)
class Block:
    """One block: a variable-index set paired with a loading-index set."""

    variable_indices: tuple[int, ...]
    loading_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "variable_indices",
                           tuple(sorted(int(i) for i in self.variable_indices)))
        object.__setattr__(self, "loading_indices",
                           tuple(sorted(int(i) for i in self.loading_indices)))
        if len(self.variable_indices) != len(self.loading_indices):
            raise NonSquareBlockError(
                f"{len(self.variable_indices)} variables vs "
                f"{len(self.loading_indices)} loadings"
            )

    @property
    def size(self) -> int:
        return len(self.variable_indices)


@dataclass(frozen=True)
class BlockPartition:
    """An ordered list of disjoint blocks covering all variables and loadings."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        var_all = [i for b in self.blocks for i in b.variable_indices]
        load_all = [i for b in self.blocks for i in b.loading_indices]
        m = len(var_all)
        if sorted(var_all) != list(range(m)) or sorted(load_all) != list(range(m)):
            raise InconsistentPartitionError(
                "blocks must disjointly cover all variable and loading indices"
            )

    @property
    def n_vars(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def reordered(self, order) -> "BlockPartition":
        """The same blocks in a new evaluation order."""
        order = list(order)
        if sorted(order) != list(range(self.n_blocks)):
            raise InconsistentPartitionError(f"invalid block order {order}")
        return BlockPartition(tuple(self.blocks[i] for i in order))

    def variable_sets(self, names=None):
        """Blocks as tuples of indices, or of names when ``names`` is given."""
        if names is None:
            return [b.variable_indices for b in self.blocks]
        return [tuple(names[i] for i in b.variable_indices) for b in self.blocks]


@dataclass(frozen=True)
class PermutationPair:
    """Row and column permutations bringing a loading matrix to block form."""

    row_perm: tuple[int, ...]
    col_perm: tuple[int, ...]

    def __post_init__(self):
        m = len(self.row_perm)
        for p in (self.row_perm, self.col_perm):
            if sorted(p) != list(range(m)):
                raise InconsistentPartitionError(f"not a permutation: {p}")


def _connected_components(pattern: np.ndarray):
    """Connected components of the bipartite variable/loading graph.

    Iterative depth-first traversal; nodes ``0..M-1`` are variables (rows),
    ``M..2M-1`` are loadings (columns).
    """
    m = pattern.shape[0]
    seen = np.zeros(2 * m, dtype=bool)
    components = []
    for start in range(2 * m):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        rows, cols = [], []
        while stack:
            node = stack.pop()
            if node < m:
                rows.append(node)
                neighbors = np.nonzero(pattern[node])[0] + m
            else:
                cols.append(node - m)
                neighbors = np.nonzero(pattern[:, node - m])[0]
            for nb in neighbors:
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        components.append((sorted(rows), sorted(cols)))
    return components


def detect_blocks(u: LoadingMatrix, order: str = "min_variable") -> BlockPartition:
    """Partition variables and loadings by the support pattern of ``u``.

    Blocks are the connected components of the bipartite support graph. The
    default order sorts blocks by ascending minimum variable index; the order
    is data, not a commitment — evaluation routines take it as explicit input.
    """
    pattern = u.support_pattern()
    # Diagnose isolated variables up front: the more specific error should
    # win over a non-square component elsewhere in the pattern.
    lonely = np.nonzero(~pattern.any(axis=1))[0]
    if lonely.size:
        raise IsolatedVariableError(
            f"variable {int(lonely[0])} has no incident loading"
        )
    blocks = []
    for rows, cols in _connected_components(pattern):
        if not cols and rows:
            raise IsolatedVariableError(f"variable {rows[0]} has no incident loading")
        if not rows and cols:
            raise NonSquareBlockError(f"loading {cols[0]} touches no variable")
        if len(rows) != len(cols):
            raise NonSquareBlockError(
                f"component with variables {rows} pairs {len(cols)} loadings"
            )
        blocks.append(Block(tuple(rows), tuple(cols)))
    if order == "min_variable":
        blocks.sort(key=lambda b: b.variable_indices[0])
    elif order is not None:  # pragma: no cover - guarded API
        raise ValueError(f"unknown order {order!r}")
    return BlockPartition(tuple(blocks))


def permute_to_block_diagonal(
    u: LoadingMatrix, p: BlockPartition
) -> tuple[LoadingMatrix, PermutationPair]:
    """Permute rows/columns of ``u`` so blocks sit on the diagonal.

    Entries outside the diagonal blocks must already be (structural) zeros;
    they are zeroed exactly in the result. Applying the inverse permutations
    recovers ``u``.
    """
    m = u.n_vars
    row_perm = [i for b in p.blocks for i in b.variable_indices]
    col_perm = [j for b in p.blocks for j in b.loading_indices]
    if sorted(row_perm) != list(range(m)) or sorted(col_perm) != list(range(m)):
        raise InconsistentPartitionError("partition does not cover the matrix")
    permuted = u.u[np.ix_(row_perm, col_perm)].copy()
    # Verify and enforce exact zeros off the diagonal blocks.
    pos = 0
    mask = np.zeros((m, m), dtype=bool)
    for b in p.blocks:
        mask[pos:pos + b.size, pos:pos + b.size] = True
        pos += b.size
    off = permuted[~mask]
    if np.any(np.abs(off) > u.zero_tol):
        raise InconsistentPartitionError(
            "support pattern has entries outside the partition's blocks"
        )
    permuted[~mask] = 0.0
    return (
        LoadingMatrix(permuted, zero_tol=u.zero_tol, source_method=u.source_method),
        PermutationPair(tuple(row_perm), tuple(col_perm)),
    )


def pla_detect(cov: CovMatrix, tau: float) -> BlockPartition | None:
    """Hard-threshold block detector on the eigenvectors of ``cov``.

    Eigenvector entries with ``|v_ij| <= tau`` are zeroed and the resulting
    pattern is fed to :func:`detect_blocks`. Returns ``None`` when the pattern
    admits no square block structure — absence of structure is a valid result.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau={tau} outside (0, 1)")
    _, vecs = sym_eigen(cov.values)
    thresholded = np.where(np.abs(vecs) > tau, vecs, 0.0)
    lm = LoadingMatrix(thresholded, zero_tol=ZERO_TOL, source_method="eigenvectors")
    try:
        return detect_blocks(lm)
    except (NonSquareBlockError, IsolatedVariableError):
        return None
