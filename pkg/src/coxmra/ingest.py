"""Ingestion of raw count records into a curve field.

Counts observed at scattered sites are turned into per-site log-intensity
series with a log(count + 1) transform, interpolated onto a regular grid
by inverse-distance weighting (power 2, 4 nearest sites, exact hits copy
the site value), and resampled in time onto the dyadic midpoint grid.
"""

from __future__ import annotations

import numpy as np

from .grids import FieldFormatError, FunctionalField, SpatialGrid, TimeGrid

IDW_POWER = 2
IDW_NEIGHBOURS = 4
_EXACT_HIT = 1e-12


def read_count_records(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse `site_id,x,y,time_index,count` CSV.

    Returns (coords (n_sites, 2), series (n_sites, n_times), site order
    follows first appearance).  Every site must cover every time index.
    """
    coords: dict[str, tuple[float, float]] = {}
    obs: dict[tuple[str, int], float] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "site_id,x,y,time_index,count":
            raise FieldFormatError(f"unexpected header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise FieldFormatError(f"line {lineno}: expected 5 fields")
            sid = parts[0]
            try:
                x, y = float(parts[1]), float(parts[2])
                ti, count = int(parts[3]), float(parts[4])
            except ValueError as exc:
                raise FieldFormatError(f"line {lineno}: {exc}") from exc
            if count < 0:
                raise FieldFormatError(f"line {lineno}: negative count")
            if sid in coords and coords[sid] != (x, y):
                raise FieldFormatError(f"line {lineno}: site {sid} moved")
            coords.setdefault(sid, (x, y))
            key = (sid, ti)
            if key in obs:
                raise FieldFormatError(f"line {lineno}: duplicate (site,time) {key}")
            obs[key] = count
    if not obs:
        raise FieldFormatError("empty count file")
    site_ids = list(coords)
    n_times = max(t for _, t in obs) + 1
    series = np.empty((len(site_ids), n_times))
    for i, sid in enumerate(site_ids):
        for t in range(n_times):
            if (sid, t) not in obs:
                raise FieldFormatError(f"site {sid} missing time index {t}")
            series[i, t] = obs[(sid, t)]
    xy = np.array([coords[s] for s in site_ids])
    return xy, series, np.array(site_ids)


def idw_interpolate(
    coords: np.ndarray, values: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Inverse-distance-weighted interpolation.

    `values` may carry trailing axes (e.g. a time series per site); an
    exact positional hit copies the site value.
    """
    out = np.empty(targets.shape[:1] + values.shape[1:])
    d = np.linalg.norm(targets[:, None, :] - coords[None, :, :], axis=2)
    k = min(IDW_NEIGHBOURS, coords.shape[0])
    for i in range(targets.shape[0]):
        nearest = np.argsort(d[i], kind="stable")[:k]
        dn = d[i, nearest]
        if dn[0] < _EXACT_HIT:
            out[i] = values[nearest[0]]
            continue
        w = 1.0 / dn**IDW_POWER
        w_ext = w.reshape((-1,) + (1,) * (values.ndim - 1))
        out[i] = (w_ext * values[nearest]).sum(axis=0) / w.sum()
    return out


def _grid_targets(coords: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Grid node positions spanning the data bounding box inclusively."""
    xmin, ymin = coords.min(axis=0)
    xmax, ymax = coords.max(axis=0)
    xs = np.linspace(xmin, xmax, grid.s1) if xmax > xmin else np.full(grid.s1, xmin)
    ys = np.linspace(ymin, ymax, grid.s2) if ymax > ymin else np.full(grid.s2, ymin)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def resample_time(series: np.ndarray, depth: int) -> np.ndarray:
    """Linear resampling from midpoint samples of the raw series onto the
    dyadic midpoint grid (endpoints clamped)."""
    n_raw = series.shape[-1]
    t_raw = (np.arange(n_raw) + 0.5) / n_raw
    t_new = TimeGrid(depth).points
    return np.apply_along_axis(lambda v: np.interp(t_new, t_raw, v), -1, series)


def ingest_counts(
    path, grid: SpatialGrid, depth: int, transform: str = "log1p"
) -> FunctionalField:
    """Full ingestion pipeline: parse, transform, interpolate, resample."""
    coords, series, _ = read_count_records(path)
    if transform == "log1p":
        log_series = np.log1p(series)
    else:
        raise ValueError(f"unknown count transform {transform!r}")
    targets = _grid_targets(coords, grid)
    interpolated = idw_interpolate(coords, log_series, targets)
    values = resample_time(interpolated, depth).reshape(grid.s1, grid.s2, -1)
    return FunctionalField(grid, TimeGrid(depth), values)
