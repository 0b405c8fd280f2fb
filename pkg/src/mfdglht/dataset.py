"""Ingestion and validation of multivariate functional samples.

A dataset holds ``k`` independent groups of discretized p-dimensional
curves observed on one shared grid. The on-disk format is a long (tidy)
CSV with header ``group,obs,component,time_index,value``; indices are
1-based in files and 0-based in memory.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError, ValidationError
from .grid import Grid, make_uniform_grid

__all__ = ["GroupSample", "FunctionalDataset", "load_csv", "write_csv", "validate"]

CSV_HEADER = ("group", "obs", "component", "time_index", "value")


@dataclass(frozen=True)
class GroupSample:
    """One group's observations: array of shape (n_obs, p, m)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if arr.ndim != 3:
            raise ValidationError("group values must have shape (n_obs, p, m)")
        if arr.shape[0] < 1:
            raise ValidationError("each group needs at least one observation")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(
                f"non-finite value at (obs={bad[0] + 1}, component={bad[1] + 1}, "
                f"time_index={bad[2] + 1})"
            )

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FunctionalDataset:
    """k independent multivariate functional samples on a shared grid."""

    grid: Grid
    groups: tuple[GroupSample, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        validate(self)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].values.shape[1]

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(g.n_obs for g in self.groups)

    def group_values(self, i: int) -> np.ndarray:
        return self.groups[i].values


def validate(ds: FunctionalDataset) -> None:
    """Raise ``ValidationError`` unless every dataset invariant holds."""
    if len(ds.groups) < 1:
        raise ValidationError("dataset needs at least one group")
    p = ds.groups[0].values.shape[1]
    m = ds.grid.m
    for i, g in enumerate(ds.groups):
        if not isinstance(g, GroupSample):
            raise ValidationError(f"group {i + 1} is not a GroupSample")
        if g.values.shape[1] != p:
            raise ValidationError(
                f"component count mismatch: group {i + 1} has p={g.values.shape[1]}, "
                f"group 1 has p={p}"
            )
        if g.values.shape[2] != m:
            raise ValidationError(
                f"time grid mismatch: group {i + 1} has {g.values.shape[2]} points, "
                f"grid has {m}"
            )
        # GroupSample's own constructor guarantees finiteness and n_obs >= 1.


def _parse_index(raw: str, name: str, line_no: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise IngestionError(f"line {line_no}: {name} {raw!r} is not an integer") from None
    if value < 1:
        raise IngestionError(f"line {line_no}: {name} must be >= 1, got {value}")
    return value


def load_csv(source, a: float = 0.0, b: float = 1.0, grid: Grid | None = None) -> FunctionalDataset:
    """Read a dataset from a long-format CSV stream or path.

    The grid is either supplied explicitly or taken as uniform on [a, b]
    with as many points as the largest ``time_index`` in the file. Lines
    starting with ``#`` are ignored. Every (group, obs, component,
    time_index) cell must be present exactly once.
    """
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_csv(fh, a=a, b=b, grid=grid)

    cells: dict[tuple[int, int, int, int], float] = {}
    header_seen = False
    for line_no, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [part.strip() for part in line.split(",")]
        if not header_seen:
            if tuple(part.lower() for part in parts) != CSV_HEADER:
                raise IngestionError(
                    f"line {line_no}: expected header {','.join(CSV_HEADER)!r}"
                )
            header_seen = True
            continue
        if len(parts) != 5:
            raise IngestionError(f"line {line_no}: expected 5 fields, got {len(parts)}")
        gi = _parse_index(parts[0], "group", line_no)
        oi = _parse_index(parts[1], "obs", line_no)
        ci = _parse_index(parts[2], "component", line_no)
        ti = _parse_index(parts[3], "time_index", line_no)
        try:
            value = float(parts[4])
        except ValueError:
            raise IngestionError(f"line {line_no}: value {parts[4]!r} is not a number") from None
        if not np.isfinite(value):
            raise IngestionError(
                f"non-finite value at (group={gi}, obs={oi}, component={ci}, time_index={ti})"
            )
        key = (gi, oi, ci, ti)
        if key in cells:
            raise IngestionError(
                f"duplicate cell (group={gi}, obs={oi}, component={ci}, time_index={ti})"
            )
        cells[key] = value
    if not header_seen:
        raise IngestionError("empty file: missing header")
    if not cells:
        raise IngestionError("no data rows")

    k = max(key[0] for key in cells)
    m = max(key[3] for key in cells)
    if grid is None:
        grid = make_uniform_grid(m, a, b)
    elif grid.m != m:
        raise IngestionError(f"grid has {grid.m} points but file uses time_index up to {m}")

    groups = []
    for gi in range(1, k + 1):
        group_keys = [key for key in cells if key[0] == gi]
        if not group_keys:
            raise IngestionError(f"group {gi} has no rows (groups must be numbered 1..k)")
        n_obs = max(key[1] for key in group_keys)
        p = max(key[2] for key in group_keys)
        values = np.empty((n_obs, p, m))
        for oi in range(1, n_obs + 1):
            for ci in range(1, p + 1):
                for ti in range(1, m + 1):
                    try:
                        values[oi - 1, ci - 1, ti - 1] = cells[(gi, oi, ci, ti)]
                    except KeyError:
                        raise IngestionError(
                            f"missing cell (group={gi}, obs={oi}, component={ci}, "
                            f"time_index={ti})"
                        ) from None
        groups.append(GroupSample(values))

    p = groups[0].values.shape[1]
    for gi, g in enumerate(groups[1:], start=2):
        if g.values.shape[1] != p:
            raise IngestionError(
                f"component count mismatch: group {gi} has p={g.values.shape[1]}, "
                f"group 1 has p={p}"
            )
    return FunctionalDataset(grid, tuple(groups))


def write_csv(ds: FunctionalDataset, sink) -> None:
    """Write a dataset in the long CSV format (17 significant digits)."""
    if isinstance(sink, (str, bytes)):
        with open(sink, "w", encoding="utf-8") as fh:
            write_csv(ds, fh)
            return
    sink.write(",".join(CSV_HEADER) + "\n")
    for gi, group in enumerate(ds.groups, start=1):
        n_obs, p, m = group.values.shape
        for oi in range(n_obs):
            for ci in range(p):
                for ti in range(m):
                    value = group.values[oi, ci, ti]
                    sink.write(f"{gi},{oi + 1},{ci + 1},{ti + 1},{value:.17g}\n")
