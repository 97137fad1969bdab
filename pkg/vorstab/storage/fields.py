"""Field CSV codec: a grid header line followed by one ``j,k,r,theta,value`` row per cell."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import polars as pl

from vorstab.errors import FieldFormatError, GridError
from vorstab.grid import Grid, ScalarField, make_grid

COLUMNS = ["j", "k", "r", "theta", "value"]
_HEADER = re.compile(
    r"^#\s*a=(?P<a>\S+)\s+nr=(?P<nr>\d+)\s+ntheta=(?P<ntheta>\d+)\s*$"
)


def _fmt(values: np.ndarray) -> list[str]:
    return [format(float(x), ".17g") for x in values]


def format_header(grid: Grid) -> str:
    return f"# a={grid.a!r} nr={grid.nr} ntheta={grid.ntheta}"


def field_frame(field: ScalarField) -> pl.DataFrame:
    """Polars table of a field, values rendered with 17 significant digits."""
    grid = field.grid
    r, theta = grid.mesh()
    j, k = np.meshgrid(np.arange(grid.nr), np.arange(grid.ntheta), indexing="ij")
    return pl.DataFrame(
        {
            "j": j.ravel(),
            "k": k.ravel(),
            "r": _fmt(r.ravel()),
            "theta": _fmt(theta.ravel()),
            "value": _fmt(field.values.ravel()),
        }
    )


def write_field(field: ScalarField, path: str | Path) -> Path:
    """Write ``field`` as a grid CSV and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = field_frame(field).write_csv()
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_header(field.grid) + "\n")
        fh.write(body)
    return path


def read_header(path: str | Path) -> Grid:
    """Parse the grid header of a field CSV."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"field file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            first = fh.readline().strip()
    except (OSError, UnicodeDecodeError) as exc:
        raise FieldFormatError(f"cannot read field file {path}: {exc}") from exc
    match = _HEADER.match(first)
    if match is None:
        raise FieldFormatError(f"invalid field header in {path}: {first!r}")
    try:
        return make_grid(float(match["a"]), int(match["nr"]), int(match["ntheta"]))
    except (ValueError, GridError) as exc:
        raise FieldFormatError(f"invalid grid in header of {path}: {exc}") from exc


def read_field(path: str | Path, grid: Grid | None = None) -> ScalarField:
    """Read a field CSV; when ``grid`` is given the header must match it."""
    path = Path(path)
    header_grid = read_header(path)
    if grid is not None and header_grid != grid:
        raise FieldFormatError(
            f"field header {header_grid.params()} does not match grid {grid.params()}"
        )
    grid = header_grid
    try:
        frame = pl.read_csv(
            path,
            skip_rows=1,
            dtypes={
                "j": pl.Int64,
                "k": pl.Int64,
                "r": pl.Float64,
                "theta": pl.Float64,
                "value": pl.Float64,
            },
        )
    except (pl.exceptions.ComputeError, pl.exceptions.NoDataError) as exc:
        raise FieldFormatError(f"cannot parse field rows of {path}: {exc}") from exc
    if frame.columns != COLUMNS:
        raise FieldFormatError(f"expected columns {COLUMNS}, got {frame.columns}")
    if frame.height != grid.nr * grid.ntheta or sum(frame.null_count().row(0)):
        raise FieldFormatError(
            f"expected {grid.nr * grid.ntheta} complete rows, got {frame.height}"
        )
    j = frame["j"].to_numpy()
    k = frame["k"].to_numpy()
    if j.min() < 0 or j.max() >= grid.nr or k.min() < 0 or k.max() >= grid.ntheta:
        raise FieldFormatError("cell index out of range")
    values = np.full(grid.shape, np.nan)
    values[j, k] = frame["value"].to_numpy()
    if np.isnan(values).any():
        raise FieldFormatError("missing or duplicated cells")
    try:
        return ScalarField(grid, values)
    except GridError as exc:
        raise FieldFormatError(str(exc)) from exc
