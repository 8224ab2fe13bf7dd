"""Single-pass multi-way tabulation and conditional expected frequencies.

A table over ``(x, y, z_1..z_k)`` is built once from the dataset; per-slice
marginals and expected frequencies are then derived from it without ever
re-scanning the rows.  Cells use a mixed-radix flat index with the first
variable fastest, so each conditioning combination owns one contiguous
``dx * dy`` block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import core
from .core import ContingencyTable, DataError, Dataset, SpecError, _freeze

# Flat tables beyond this index range would overflow int64 arithmetic.
_MAX_CELLS = 1 << 62


@dataclass(frozen=True, eq=False)
class SliceMarginals:
    """Per-conditioning-combination marginals of an ``(x, y, z...)`` table.

    Row ``s`` of ``n_xz`` / ``n_yz`` / ``n_z`` holds ``N_{x+z}``, ``N_{+yz}``
    and ``N_{++z}`` for one z-combination.  For dense tables all ``n_slices``
    combinations are present in order; for sparse tables only occupied
    combinations appear and ``z_index`` records their flat z indices.
    The unconditional case is the single-slice instance (``n_slices == 1``).
    """

    dims_xy: tuple[int, int]
    n_slices: int
    z_index: np.ndarray | None
    n_xz: np.ndarray
    n_yz: np.ndarray
    n_z: np.ndarray
    total: int

    @property
    def is_compressed(self) -> bool:
        return self.z_index is not None

    @property
    def occupied_slices(self) -> int:
        return int(np.count_nonzero(self.n_z))


def build_table(
    data: Dataset, variables: Sequence[int], *, dense_limit: int | None = None
) -> ContingencyTable:
    """Cross-tabulate the given columns in one pass over the rows.

    An empty variable list yields the scalar table holding ``n_rows``.
    ``dense_limit`` overrides the storage threshold (tests force sparse
    storage on small tables with it).
    """
    limit = core.DENSE_CELL_LIMIT if dense_limit is None else dense_limit
    variables = tuple(int(v) for v in variables)
    for v in variables:
        if not 0 <= v < data.n_cols:
            raise SpecError(f"table variable index {v} out of range for {data.n_cols} columns")
    if len(set(variables)) != len(variables):
        dup = next(v for i, v in enumerate(variables) if v in variables[:i])
        raise SpecError(f"table variable index {dup} listed twice")

    n = data.n_rows
    if not variables:
        return ContingencyTable(dims=(), total=n, dense=np.array([n], dtype=np.int64))

    dims = tuple(data.levels(v) for v in variables)
    n_cells = math.prod(dims)
    if n_cells > _MAX_CELLS:
        raise DataError(f"table with {n_cells} cells exceeds the addressable range")

    flat = np.zeros(n, dtype=np.int64)
    stride = 1
    for v, d in zip(variables, dims):
        flat += stride * data.columns[v].codes
        stride *= d

    if n_cells <= limit:
        cells = np.bincount(flat, minlength=n_cells).astype(np.int64, copy=False)
        return ContingencyTable(dims=dims, total=n, dense=cells)
    index, count = np.unique(flat, return_counts=True)
    return ContingencyTable(dims=dims, total=n, sparse_index=index, sparse_count=count)


def table_from_counts(counts: np.ndarray | Sequence) -> ContingencyTable:
    """Wrap an explicit count array (indexed ``[x, y, z...]``) as a table."""
    arr = np.asarray(counts)
    if np.issubdtype(arr.dtype, np.floating):
        if not np.all(arr == np.floor(arr)):
            raise DataError("cell counts must be integers")
        arr = arr.astype(np.int64)
    if arr.ndim == 0:
        flat = arr.reshape(1).astype(np.int64)
        return ContingencyTable(dims=(), total=int(flat[0]), dense=flat)
    flat = np.asarray(arr, dtype=np.int64).ravel(order="F")
    return ContingencyTable(dims=arr.shape, total=int(flat.sum()), dense=flat)


def slice_marginals(table: ContingencyTable) -> SliceMarginals:
    """Marginal counts for every conditioning combination of the table.

    The table's first two dimensions are taken as x and y; all remaining
    dimensions form the conditioning set.
    """
    if len(table.dims) < 2:
        raise DataError("slice marginals need a table with at least x and y dimensions")
    dx, dy = table.dims[0], table.dims[1]
    n_slices = math.prod(table.dims[2:])
    block = dx * dy

    if table.is_dense:
        # [z, y, x] view of the flat buffer: z blocks are contiguous.
        arr = table.dense.reshape(n_slices, dy, dx)
        return SliceMarginals(
            dims_xy=(dx, dy),
            n_slices=n_slices,
            z_index=None,
            n_xz=_freeze(arr.sum(axis=1)),
            n_yz=_freeze(arr.sum(axis=2)),
            n_z=_freeze(arr.sum(axis=(1, 2))),
            total=table.total,
        )

    index, count = table.sparse_index, table.sparse_count
    z = index // block
    xy = index - z * block
    x = xy % dx
    y = xy // dx
    z_vals, z_inv = np.unique(z, return_inverse=True)
    s = z_vals.size
    n_xz = np.bincount(z_inv * dx + x, weights=count, minlength=s * dx)
    n_yz = np.bincount(z_inv * dy + y, weights=count, minlength=s * dy)
    n_z = np.bincount(z_inv, weights=count, minlength=s)
    return SliceMarginals(
        dims_xy=(dx, dy),
        n_slices=n_slices,
        z_index=_freeze(z_vals),
        n_xz=_freeze(n_xz.astype(np.int64).reshape(s, dx)),
        n_yz=_freeze(n_yz.astype(np.int64).reshape(s, dy)),
        n_z=_freeze(n_z.astype(np.int64)),
        total=table.total,
    )


def expected_ci(marginals: SliceMarginals) -> np.ndarray:
    """Expected frequencies under conditional independence, per slice.

    ``E[x, y, z] = N_{x+z} * N_{+yz} / N_{++z}``; slices with no
    observations get all-zero expectations.  The result is a flat float
    array in the source table's cell layout.
    """
    if marginals.is_compressed:
        raise DataError(
            "expected frequencies need uncompressed marginals; sparse tables "
            "are handled by the marginal form inside ci_test"
        )
    n_xz = marginals.n_xz.astype(np.float64)
    n_yz = marginals.n_yz.astype(np.float64)
    n_z = marginals.n_z.astype(np.float64)
    outer = n_xz[:, None, :] * n_yz[:, :, None]  # [z, y, x]
    denom = n_z[:, None, None]
    expected = np.divide(outer, denom, out=np.zeros_like(outer), where=denom > 0)
    return expected.reshape(-1)
