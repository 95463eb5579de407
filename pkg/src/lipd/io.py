"""Flat-file persistence (CSV/JSON), key=value configs and market-data ingestion.

Floats are written with ``repr`` so every file reads back bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .fbi import PhaseField, PhaseGrid
from .forward import solve_base_U0
from .model import Field, Grid, ModelParams, ParameterError

SCHEMA_VERSION = 1
FIELD_HEADER = ("y", "value_re", "value_im")
PHASE_HEADER = ("x", "xi", "re", "im", "h")
MARKET_HEADER = ("A", "u")
MIN_MARKET_ROWS = 4


class ParseError(ParameterError):
    """Malformed input file; the message names the offending row."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_rows(path, header: tuple[str, ...]):
    """Yield ``(line_number, row)`` for the data rows of a CSV with the given columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None:
            raise ParseError(f"{path}: empty file")
        head = [c.strip() for c in head]
        if tuple(head) != header:
            raise ParseError(f"{path}: row 1: expected header {','.join(header)}, got {','.join(head)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {reader.line_num}: expected {len(header)} columns, got {len(row)}")
            try:
                yield reader.line_num, [float(c) for c in row]
            except ValueError:
                raise ParseError(f"{path}: row {reader.line_num}: non-numeric value in {row}") from None


# --- fields -------------------------------------------------------------------


def write_field_csv(field: Field, path) -> None:
    vals = np.asarray(field.values)
    re, im = np.real(vals), (np.imag(vals) if np.iscomplexobj(vals) else np.zeros(vals.size))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_HEADER)
        for y, a, b in zip(field.y, re, im):
            w.writerow((_fmt(y), _fmt(a), _fmt(b)))


def read_field_csv(path) -> Field:
    """Read a field; the result is real when every imaginary part is zero."""
    rows = [r for _, r in _read_rows(path, FIELD_HEADER)]
    if len(rows) < 2:
        raise ParseError(f"{path}: a field needs at least two rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{path}: non-finite values")
    grid = Grid.from_nodes(arr[:, 0])
    vals = arr[:, 1] if not np.any(arr[:, 2]) else arr[:, 1] + 1j * arr[:, 2]
    return Field(grid, vals)


def write_phase_csv(pf: PhaseField, path) -> None:
    g = pf.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PHASE_HEADER)
        for i, x in enumerate(g.x):
            for j, xi in enumerate(g.xi):
                z = pf.values[i, j]
                w.writerow((_fmt(x), _fmt(xi), _fmt(z.real), _fmt(z.imag), _fmt(g.h)))


def read_phase_csv(path) -> PhaseField:
    """Read a phase-space field written row-major in ``(x, xi)``."""
    arr = np.array([r for _, r in _read_rows(path, PHASE_HEADER)])
    if arr.size == 0:
        raise ParseError(f"{path}: no data rows")
    x, xi = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    hs = np.unique(arr[:, 4])
    if hs.size != 1:
        raise ParseError(f"{path}: mixed h values {hs.tolist()}")
    if arr.shape[0] != x.size * xi.size:
        raise ParseError(f"{path}: rows do not form a full (x, xi) grid")
    vals = (arr[:, 2] + 1j * arr[:, 3]).reshape(x.size, xi.size)
    if not (np.array_equal(arr[:, 0], np.repeat(x, xi.size)) and np.array_equal(arr[:, 1], np.tile(xi, x.size))):
        raise ParseError(f"{path}: rows are not ordered by (x, xi)")
    return PhaseField(PhaseGrid(x, xi, float(hs[0])), vals)


# --- JSON reports ---------------------------------------------------------------


def to_jsonable(obj):
    """Convert numpy scalars/arrays, dataclass-like reports and non-finite floats."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(payload: dict, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **to_jsonable(payload)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


# --- key=value configuration -----------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, keys use ``-`` or ``_``."""
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}: row {num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{path}: row {num}: empty key")
        out[key.replace("-", "_")] = value
    return out


# --- market data ----------------------------------------------------------------


@dataclass(frozen=True)
class MarketData:
    """Observed prices mapped to heat coordinates."""

    U_star: Field
    mask: np.ndarray
    y_obs: np.ndarray
    U_obs: np.ndarray


def ingest_market_csv(path, params: ModelParams, grid: Grid) -> MarketData:
    """Read ``A,u`` rows observed at ``t*`` and map them onto ``grid``.

    ``y = log(A / D)`` and ``U = u / D``; monotone cubic (PCHIP) interpolation
    fills the observed interval, the mask marks it, and outside it ``U*`` is
    set to the base price so that ``V* = U* - U0`` vanishes there.
    """
    A, u = [], []
    prev = -math.inf
    for num, (a, price) in _read_rows(path, MARKET_HEADER):
        if not (math.isfinite(a) and math.isfinite(price)):
            raise ParseError(f"{path}: row {num}: non-finite value")
        if a <= 0:
            raise ParseError(f"{path}: row {num}: asset value must be positive, got {a!r}")
        if price < 0:
            raise ParseError(f"{path}: row {num}: price must be nonnegative, got {price!r}")
        if a <= prev:
            raise ParseError(f"{path}: row {num}: asset values must be strictly increasing")
        prev = a
        A.append(a)
        u.append(price)
    if len(A) < MIN_MARKET_ROWS:
        raise ParseError(f"{path}: need at least {MIN_MARKET_ROWS} rows, got {len(A)}")
    y_obs = np.log(np.array(A) / params.debt)
    U_obs = np.array(u) / params.debt
    y = grid.nodes
    mask = (y >= y_obs[0]) & (y <= y_obs[-1])
    if not mask.any():
        raise ParseError(f"{path}: observed range [{y_obs[0]:g}, {y_obs[-1]:g}] misses the grid")
    vals = np.array(solve_base_U0(params, params.tau_star, grid).values, dtype=float)
    vals[mask] = PchipInterpolator(y_obs, U_obs)(y[mask])
    return MarketData(Field(grid, vals), mask, y_obs, U_obs)


def write_market_csv(A, u, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKET_HEADER)
        for a, p in zip(A, u):
            w.writerow((_fmt(a), _fmt(p)))


DELTA_MAP_HEADER = ("x_lo", "x_hi", "xi_lo", "xi_hi", "delta", "r2")


def write_delta_map_csv(tiles, path) -> None:
    """Wave-front scan result, one tile per row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DELTA_MAP_HEADER)
        for t in tiles:
            row = t.row()
            w.writerow(tuple(_fmt(row[k]) for k in DELTA_MAP_HEADER))


def read_delta_map_csv(path) -> np.ndarray:
    """Rows of ``(x_lo, x_hi, xi_lo, xi_hi, delta, r2)``; ``delta`` may be ``inf``."""
    return np.array([r for _, r in _read_rows(path, DELTA_MAP_HEADER)]).reshape(-1, len(DELTA_MAP_HEADER))
