"""Delimited-text ingestion, serialization, and synthetic scenario generation.

File format: UTF-8 text, one observation per row, fields split on a single
delimiter character (comma by default, no quoting — tokens must not contain
the delimiter), first line an optional header.  Columns are factorized to
0-based codes in first-appearance order.

The generator is deterministic given (seed, config) via numpy's PCG64
stream, so datasets are bit-reproducible across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .core import CategoricalColumn, DataError, Dataset

# Weight with which the dependent scenario pulls Y toward a deterministic
# function of X, breaking conditional independence.
DEPENDENT_MIX_WEIGHT = 0.3

_GEN_MODES = ("null_ci", "dependent")


@dataclass(frozen=True)
class GenConfig:
    """Scenario description for :func:`generate`.

    ``levels`` lists the level counts for (X, Y, Z_1..Z_k) in order, so the
    benchmark scenario with two conditioning variables of 2 and 4 levels is
    ``levels=(3, 4, 2, 4)``.
    """

    n: int
    levels: tuple[int, ...]
    dependence: str = "null_ci"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(int(d) for d in self.levels))
        if self.n < 1:
            raise ValueError(f"sample size must be >= 1, got {self.n}")
        if len(self.levels) < 2:
            raise ValueError("need level counts for at least X and Y")
        if any(d < 2 for d in self.levels):
            raise ValueError(f"every level count must be >= 2, got {self.levels}")
        if self.dependence not in _GEN_MODES:
            raise ValueError(f"dependence must be one of {_GEN_MODES}, got {self.dependence!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _draw_categories(prob_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row from that row's probability vector."""
    u = rng.random(prob_rows.shape[0])
    cdf = np.cumsum(prob_rows, axis=1)
    draw = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(draw, prob_rows.shape[1] - 1).astype(np.int64)


def _first_appearance_map(codes: np.ndarray, levels: int) -> np.ndarray:
    """Bijection on level codes sending first-appearance order to 0,1,2,..."""
    values, first_pos = np.unique(codes, return_index=True)
    by_appearance = values[np.argsort(first_pos)]
    mapping = np.full(levels, -1, dtype=np.int64)
    mapping[by_appearance] = np.arange(by_appearance.size)
    unseen = np.flatnonzero(mapping < 0)
    mapping[unseen] = np.arange(by_appearance.size, levels)
    return mapping


def generate(config: GenConfig) -> Dataset:
    """Draw a synthetic dataset with columns (X, Y, Z_1..Z_k).

    null_ci mode: each Z_i is uniform; X and Y are drawn independently
    given the realized Z combination from per-slice conditional
    distributions (normalized uniform draws), so X ⊥ Y | Z holds by
    construction while X and Y both depend on Z marginally.

    dependent mode additionally replaces Y by a deterministic function of X
    with probability ``DEPENDENT_MIX_WEIGHT``, so X ⊥̸ Y | Z.

    Level codes are renumbered to first-appearance order after the draw
    (a relabeling the construction is invariant under), which makes
    write_delimited / read_delimited an exact round trip whenever every
    level is realized.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    dx, dy, *dzs = config.levels
    n_slices = math.prod(dzs) if dzs else 1

    z_cols = [rng.integers(0, d, size=n, dtype=np.int64) for d in dzs]
    z_index = np.zeros(n, dtype=np.int64)
    stride = 1
    for col, d in zip(z_cols, dzs):
        z_index += stride * col
        stride *= d

    p_x = rng.random((n_slices, dx))
    p_x /= p_x.sum(axis=1, keepdims=True)
    p_y = rng.random((n_slices, dy))
    p_y /= p_y.sum(axis=1, keepdims=True)

    x = _draw_categories(p_x[z_index], rng)
    y = _draw_categories(p_y[z_index], rng)
    if config.dependence == "dependent":
        forced = rng.random(n) < DEPENDENT_MIX_WEIGHT
        y = np.where(forced, x % dy, y)

    names = ["X", "Y"] + [f"Z{i + 1}" for i in range(len(dzs))]
    columns = []
    for name, codes, levels in zip(names, [x, y, *z_cols], config.levels):
        remap = _first_appearance_map(codes, levels)
        columns.append(
            CategoricalColumn(
                name=name,
                levels=levels,
                codes=remap[codes],
                labels=tuple(str(c) for c in range(levels)),
            )
        )
    return Dataset(n_rows=n, columns=tuple(columns))


def _read_text(source: str | Path | IO[str]) -> str:
    if hasattr(source, "read"):
        return source.read()
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read {source}: {err}") from err


def read_delimited(
    source: str | Path | IO[str],
    *,
    delimiter: str = ",",
    has_header: bool = True,
) -> Dataset:
    """Parse a delimited text table into a factorized :class:`Dataset`.

    Raises DataError for empty input, ragged rows, or empty fields, naming
    the offending physical line.
    """
    text = _read_text(source)
    lines = text.splitlines()
    if not lines or all(not ln for ln in lines):
        raise DataError("empty input")

    rows: list[list[str]] = []
    names: list[str] | None = None
    width: int | None = None
    for lineno, line in enumerate(lines, start=1):
        if line == "" and lineno == len(lines):
            break  # trailing newline
        fields = line.split(delimiter)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataError(f"line {lineno}: expected {width} fields, found {len(fields)}")
        for j, tok in enumerate(fields):
            if tok == "":
                raise DataError(f"line {lineno}: missing value in field {j + 1}")
        if has_header and names is None:
            names = fields
        else:
            rows.append(fields)

    if has_header and names is not None and len(set(names)) != len(names):
        dup = next(nm for i, nm in enumerate(names) if nm in names[:i])
        raise DataError(f"duplicate column name {dup!r} in header")
    if not rows:
        raise DataError("empty input: no data rows")
    if names is None:
        names = [f"V{j + 1}" for j in range(width or 0)]

    columns = tuple(
        CategoricalColumn.from_tokens(name, column_tokens)
        for name, column_tokens in zip(names, zip(*rows))
    )
    return Dataset(n_rows=len(rows), columns=columns)


def write_delimited(
    data: Dataset,
    dest: str | Path | IO[str],
    *,
    delimiter: str = ",",
) -> None:
    """Serialize ``data`` with a header row; inverse of :func:`read_delimited`.

    Values are written as the original labels when present, decimal codes
    otherwise.  Tokens containing the delimiter are rejected (no quoting).
    """
    names = [col.name for col in data.columns]
    token_columns = [col.tokens() for col in data.columns]
    for name in names:
        if delimiter in name:
            raise DataError(f"column name {name!r} contains the delimiter")
    for col in data.columns:
        for tok in col.labels or ():
            if delimiter in tok:
                raise DataError(f"column {col.name!r}: token {tok!r} contains the delimiter")

    out = [delimiter.join(names)]
    for row in zip(*token_columns):
        out.append(delimiter.join(row))
    text = "\n".join(out) + "\n"

    if hasattr(dest, "write"):
        dest.write(text)
    else:
        try:
            Path(dest).write_text(text, encoding="utf-8")
        except OSError as err:
            raise DataError(f"cannot write {dest}: {err}") from err
