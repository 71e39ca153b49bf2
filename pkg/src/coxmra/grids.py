"""Dyadic time grids, regular spatial grids and curve fields.

A curve field holds one sampled curve per node of a regular S1 x S2
lattice.  Curves are sampled at the 2^D midpoints t_m = (m + 1/2)/2^D of
the unit interval, so that inner products reduce to Riemann sums with
weight 2^-D (exact for the Haar system on this grid).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class FieldFormatError(ValueError):
    """Raised when a serialized field is malformed or inconsistent."""


@dataclass(frozen=True)
class TimeGrid:
    """Midpoint sampling grid of 2**depth points on (0, 1)."""

    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")

    @property
    def n(self) -> int:
        return 1 << self.depth

    @property
    def points(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n

    @property
    def weight(self) -> float:
        """Quadrature weight of each sample in the Riemann sum."""
        return 1.0 / self.n

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete L2(0,1) inner product of two sampled curves."""
        return float(np.dot(f, g) * self.weight)


@dataclass(frozen=True)
class SpatialGrid:
    """Regular lattice of s1 rows by s2 columns."""

    s1: int
    s2: int

    def __post_init__(self):
        if self.s1 < 2 or self.s2 < 2:
            raise ValueError(f"grid sides must be >= 2, got {self.s1}x{self.s2}")

    @property
    def n(self) -> int:
        return self.s1 * self.s2


@dataclass(frozen=True)
class MeanCurve:
    time: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.time.n,):
            raise ValueError(f"mean curve shape {v.shape} != ({self.time.n},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("mean curve contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FunctionalField:
    """Array of curves over a spatial grid, shape (s1, s2, 2**depth)."""

    grid: SpatialGrid
    time: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (self.grid.s1, self.grid.s2, self.time.n)
        if v.shape != expected:
            raise ValueError(f"field shape {v.shape} != {expected}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)


def detrend(fld: FunctionalField) -> tuple[FunctionalField, MeanCurve]:
    """Remove the cross-site sample mean curve.

    Returns the residual field together with the removed mean; adding the
    mean back reproduces the input exactly.
    """
    mean = fld.values.mean(axis=(0, 1))
    residual = fld.values - mean
    return (
        FunctionalField(fld.grid, fld.time, residual),
        MeanCurve(fld.time, mean),
    )


def add_mean(fld: FunctionalField, mean: MeanCurve) -> FunctionalField:
    if mean.time != fld.time:
        raise ValueError("mean curve time grid does not match field")
    return FunctionalField(fld.grid, fld.time, fld.values + mean.values)


# ---------------------------------------------------------------------------
# serialization
#
# CSV-long: header "p,q,t_index,value", 0-based indices.
# NDJSON: metadata line {"s1":..,"s2":..,"depth":..} then one object per
# site {"p":..,"q":..,"curve":[..]}.

FORMATS = ("csv", "ndjson")


def save_field(fld: FunctionalField, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        _save_csv(fld, path)
    elif fmt == "ndjson":
        _save_ndjson(fld, path)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def load_field(path, fmt: str = "csv") -> FunctionalField:
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "ndjson":
        return _load_ndjson(path)
    raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def _save_csv(fld: FunctionalField, path) -> None:
    with open(path, "w") as fh:
        fh.write("p,q,t_index,value\n")
        for p in range(fld.grid.s1):
            for q in range(fld.grid.s2):
                for m, v in enumerate(fld.values[p, q]):
                    fh.write(f"{p},{q},{m},{float(v)!r}\n")


def _load_csv(path) -> FunctionalField:
    rows = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "p,q,t_index,value":
            raise FieldFormatError(f"unexpected CSV header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FieldFormatError(f"line {lineno}: expected 4 fields")
            try:
                p, q, m = int(parts[0]), int(parts[1]), int(parts[2])
                v = float(parts[3])
            except ValueError as exc:
                raise FieldFormatError(f"line {lineno}: {exc}") from exc
            if not np.isfinite(v):
                raise FieldFormatError(f"line {lineno}: non-finite value")
            key = (p, q, m)
            if key in rows:
                raise FieldFormatError(f"line {lineno}: duplicate entry {key}")
            rows[key] = v
    if not rows:
        raise FieldFormatError("empty field file")
    s1 = max(k[0] for k in rows) + 1
    s2 = max(k[1] for k in rows) + 1
    nt = max(k[2] for k in rows) + 1
    if len(rows) != s1 * s2 * nt:
        raise FieldFormatError(
            f"incomplete field: got {len(rows)} entries, "
            f"expected {s1}*{s2}*{nt} = {s1 * s2 * nt}"
        )
    depth = nt.bit_length() - 1
    if 1 << depth != nt:
        raise FieldFormatError(f"time grid size {nt} is not a power of two")
    values = np.empty((s1, s2, nt))
    for (p, q, m), v in rows.items():
        values[p, q, m] = v
    return FunctionalField(SpatialGrid(s1, s2), TimeGrid(depth), values)


def _save_ndjson(fld: FunctionalField, path) -> None:
    with open(path, "w") as fh:
        meta = {"s1": fld.grid.s1, "s2": fld.grid.s2, "depth": fld.time.depth}
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for p in range(fld.grid.s1):
            for q in range(fld.grid.s2):
                rec = {"p": p, "q": q, "curve": list(fld.values[p, q])}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _load_ndjson(path) -> FunctionalField:
    with open(path) as fh:
        try:
            meta = json.loads(fh.readline())
            s1, s2, depth = meta["s1"], meta["s2"], meta["depth"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FieldFormatError(f"bad metadata line: {exc}") from exc
        grid, time = SpatialGrid(s1, s2), TimeGrid(depth)
        values = np.full((s1, s2, time.n), np.nan)
        seen = np.zeros((s1, s2), dtype=bool)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                p, q, curve = rec["p"], rec["q"], rec["curve"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FieldFormatError(f"line {lineno}: {exc}") from exc
            if not (0 <= p < s1 and 0 <= q < s2):
                raise FieldFormatError(f"line {lineno}: site ({p},{q}) out of range")
            if seen[p, q]:
                raise FieldFormatError(f"line {lineno}: duplicate site ({p},{q})")
            curve = np.asarray(curve, dtype=float)
            if curve.shape != (time.n,):
                raise FieldFormatError(
                    f"line {lineno}: curve length {curve.shape[0]} != {time.n}"
                )
            if not np.all(np.isfinite(curve)):
                raise FieldFormatError(f"line {lineno}: non-finite curve value")
            values[p, q] = curve
            seen[p, q] = True
    if not seen.all():
        missing = np.argwhere(~seen)[0]
        raise FieldFormatError(f"missing site ({missing[0]},{missing[1]})")
    return FunctionalField(grid, time, values)
