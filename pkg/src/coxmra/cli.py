"""Command-line pipeline binding the library modules.

Every command is referentially transparent given (config, inputs, seed):
reruns produce byte-identical outputs.  Multi-file outputs carry a
manifest.json with the config digest and the seeds used.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import cox, estimator, grids, ingest, sarh, wavelet
from .predict import loo_validate, predict as predict_field, save_validation
from .config import ConfigError, RunConfig, load_config


def _fail(exc: Exception) -> None:
    payload = {"error": str(exc), "type": type(exc).__name__}
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(1)


def _write_manifest(out_dir: Path, config: RunConfig, command: str, files, seeds) -> None:
    manifest = {
        "command": command,
        "config_sha256": config.digest(),
        "files": sorted(str(f) for f in files),
        "seeds": list(seeds),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--out", "out_dir", type=click.Path(), default=".", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.pass_context
def main(ctx, config_path, seed, out_dir, threads):
    """Multiscale spatial curve-field modelling pipeline."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(exc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx.obj = {
        "config": cfg,
        "seed": seed if seed is not None else cfg.simulation.seed,
        "out": out,
        "threads": max(1, threads),
    }


def _field_name(cfg: RunConfig, i: int) -> str:
    ext = "csv" if cfg.io.format == "csv" else "ndjson"
    return f"field_{i:03d}.{ext}"


@main.command()
@click.pass_obj
def simulate(obj):
    """Simulate curve fields; one file per replication plus a manifest."""
    cfg: RunConfig = obj["config"]
    try:
        spec = cfg.sarh_spec()
        grid = cfg.spatial_grid()
        reps = cfg.simulation.replications
        seeds = [obj["seed"] + i for i in range(reps)]

        def run(i: int) -> str:
            fld = sarh.simulate(spec, grid, cfg.simulation.burn_in, seeds[i])
            name = _field_name(cfg, i)
            grids.save_field(fld, obj["out"] / name, cfg.io.format)
            return name

        with ThreadPoolExecutor(max_workers=obj["threads"]) as pool:
            files = list(pool.map(run, range(reps)))
        _write_manifest(obj["out"], cfg, "simulate", files, seeds)
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        _fail(exc)


@main.command()
@click.argument("field_file", type=click.Path(exists=True))
@click.pass_obj
def dwt(obj, field_file):
    """Wavelet-transform a field file into a coefficient file."""
    cfg: RunConfig = obj["config"]
    try:
        fld = grids.load_field(field_file, cfg.io.format)
        mc = wavelet.field_dwt(fld, cfg.time.j0)
        out = obj["out"] / (Path(field_file).stem + "_coeffs.ndjson")
        wavelet.save_coefficients(mc, out)
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


def _estimate_field(cfg: RunConfig, fld: grids.FunctionalField):
    residual, mean = grids.detrend(fld)
    mc = wavelet.field_dwt(residual, cfg.time.j0)
    report = estimator.estimate_all(
        mc, cfg.theta_domain(), include_cross=cfg.estimation.include_cross
    )
    return report, mean, mc


@main.command()
@click.argument("field_file", type=click.Path(exists=True))
@click.pass_obj
def estimate(obj, field_file):
    """Detrend, transform and fit the wavelet-domain parameters."""
    cfg: RunConfig = obj["config"]
    try:
        fld = grids.load_field(field_file, cfg.io.format)
        report, mean, _ = _estimate_field(cfg, fld)
        stem = Path(field_file).stem
        report_path = obj["out"] / f"{stem}_report.ndjson"
        eig_path = obj["out"] / f"{stem}_eigenvalues.csv"
        mean_path = obj["out"] / f"{stem}_mean.csv"
        estimator.save_report(report, report_path)
        estimator.save_eigenvalue_table(report, eig_path)
        with open(mean_path, "w") as fh:
            fh.write("t_index,value\n")
            for m, v in enumerate(mean.values):
                fh.write(f"{m},{float(v)!r}\n")
        _write_manifest(
            obj["out"], cfg, "estimate",
            [p.name for p in (report_path, eig_path, mean_path)], [],
        )
    except Exception as exc:
        _fail(exc)


@main.command("predict")
@click.argument("field_file", type=click.Path(exists=True))
@click.argument("report_file", type=click.Path(exists=True))
@click.pass_obj
def predict_cmd(obj, field_file, report_file):
    """One-step plug-in prediction at every interior site."""
    cfg: RunConfig = obj["config"]
    try:
        fld = grids.load_field(field_file, cfg.io.format)
        report = estimator.load_report(report_file)
        residual, mean = grids.detrend(fld)
        mc = wavelet.field_dwt(residual, cfg.time.j0)
        result = predict_field(mc, report)
        out = obj["out"] / (Path(field_file).stem + "_predicted.csv")
        with open(out, "w") as fh:
            fh.write("p,q,t_index,predicted,residual\n")
            for p in range(fld.grid.s1):
                for q in range(fld.grid.s2):
                    if not result.mask[p, q]:
                        continue
                    pred_curve = result.predicted.values[p, q] + mean.values
                    res_curve = result.residuals.values[p, q]
                    for m in range(fld.time.n):
                        fh.write(
                            f"{p},{q},{m},"
                            f"{float(pred_curve[m])!r},{float(res_curve[m])!r}\n"
                        )
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command()
@click.argument("field_file", type=click.Path(exists=True))
@click.pass_obj
def validate(obj, field_file):
    """Leave-one-site-out validation with per-period error table."""
    cfg: RunConfig = obj["config"]
    try:
        fld = grids.load_field(field_file, cfg.io.format)
        residual, _ = grids.detrend(fld)
        sites = None
        if cfg.validation.max_folds is not None:
            all_sites = [
                (p, q)
                for p in range(1, fld.grid.s1)
                for q in range(1, fld.grid.s2)
            ]
            idx = np.linspace(
                0, len(all_sites) - 1, min(cfg.validation.max_folds, len(all_sites))
            ).astype(int)
            sites = [all_sites[i] for i in idx]
        summary = loo_validate(
            residual,
            cfg.theta_domain(),
            j0=cfg.time.j0,
            neighborhood_radius=cfg.validation.neighborhood_radius,
            period_length=cfg.validation.period_length,
            include_cross=cfg.estimation.include_cross,
            sites=sites,
        )
        stem = Path(field_file).stem
        folds_path = obj["out"] / f"{stem}_folds.csv"
        periods_path = obj["out"] / f"{stem}_periods.csv"
        save_validation(summary, folds_path, periods_path)
        _write_manifest(
            obj["out"], cfg, "validate",
            [folds_path.name, periods_path.name], [],
        )
    except Exception as exc:
        _fail(exc)


@main.command()
@click.argument("field_file", type=click.Path(exists=True))
@click.pass_obj
def counts(obj, field_file):
    """Poisson counts from the integrated intensity of a log-field."""
    cfg: RunConfig = obj["config"]
    try:
        fld = grids.load_field(field_file, cfg.io.format)
        inten = cox.intensity(fld)
        means = cox.integrated_intensity(inten) * cfg.counts.area_scale
        cg = cox.sample_counts(means, cfg.counts.seed, fld.grid)
        out = obj["out"] / (Path(field_file).stem + "_counts.csv")
        cox.save_counts(cg, out)
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command("ingest")
@click.argument("raw_csv", type=click.Path(exists=True))
@click.pass_obj
def ingest_cmd(obj, raw_csv):
    """Interpolate raw count records onto the configured grid."""
    cfg: RunConfig = obj["config"]
    try:
        fld = ingest.ingest_counts(raw_csv, cfg.spatial_grid(), cfg.time.depth)
        out = obj["out"] / (Path(raw_csv).stem + "_field." + (
            "csv" if cfg.io.format == "csv" else "ndjson"
        ))
        grids.save_field(fld, out, cfg.io.format)
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--kind", type=click.Choice(["mse", "eigs", "slice"]), required=True)
@click.option("--at", "t_at", type=float, default=0.5, show_default=True,
              help="Time point for --kind slice.")
@click.argument("inputs", nargs=-1, type=click.Path(exists=True))
@click.pass_obj
def report(obj, kind, t_at, inputs):
    """Plot-ready CSV tables from earlier pipeline outputs."""
    cfg: RunConfig = obj["config"]
    try:
        if not inputs:
            raise ValueError("report requires at least one input file")
        if kind == "slice":
            _report_slice(obj, cfg, inputs[0], t_at)
        elif kind == "eigs":
            _report_eigs(obj, inputs)
        else:
            _report_mse(obj, cfg, inputs)
    except Exception as exc:
        _fail(exc)


def _report_slice(obj, cfg: RunConfig, field_file, t_at: float):
    fld = grids.load_field(field_file, cfg.io.format)
    m = int(np.argmin(np.abs(fld.time.points - t_at)))
    out = obj["out"] / (Path(field_file).stem + f"_slice.csv")
    with open(out, "w") as fh:
        fh.write("p,q,value\n")
        for p in range(fld.grid.s1):
            for q in range(fld.grid.s2):
                fh.write(f"{p},{q},{float(fld.values[p, q, m])!r}\n")
    click.echo(str(out))


def _report_eigs(obj, report_files):
    out = obj["out"] / "eigenvalue_samples.csv"
    with open(out, "w") as fh:
        fh.write("replication,operator,p,lambda_hat\n")
        for rep_idx, rf in enumerate(report_files):
            rep = estimator.load_report(rf)
            for op_idx, lams in ((1, rep.eigenvalues1), (2, rep.eigenvalues2)):
                for p, lam in enumerate(lams, start=1):
                    fh.write(f"{rep_idx},{op_idx},{p},{float(lam)!r}\n")
    click.echo(str(out))


def _report_mse(obj, cfg: RunConfig, report_files):
    """Per-scale mean quadratic errors against the configured model."""
    spec = cfg.sarh_spec()
    j0 = cfg.time.j0
    phi = wavelet.normalized_eigenfunctions(cfg.time_grid(), spec.truncation)
    true_ops = [
        wavelet.operator_to_wavelet(lams, phi, cfg.time_grid(), j0)
        for lams in (spec.eigenvalues1, spec.eigenvalues2, spec.eigenvalues3)
    ]
    theta0 = np.stack([op.matrix.diagonal() for op in true_ops], axis=1)
    slices = wavelet.level_slices(j0, cfg.time.depth)
    by_n: dict[int, list[np.ndarray]] = {}
    for rf in report_files:
        rep = estimator.load_report(rf)
        if (rep.j0, rep.depth) != (j0, cfg.time.depth):
            raise ValueError(f"{rf}: layout does not match configuration")
        sq = (rep.diagonal_thetas() - theta0) ** 2
        by_n.setdefault(rep.n_sites, []).append(sq)
    out = obj["out"] / "mse_by_scale.csv"
    labels = [f"{kind}_{level}" for kind, level in slices]
    with open(out, "w") as fh:
        fh.write("n," + ",".join(labels) + "\n")
        for n in sorted(by_n):
            sq = np.stack(by_n[n])  # (reps, nodes, 3)
            cells = [f"{float(np.mean(sq[:, sl, :]))!r}" for sl in slices.values()]
            fh.write(f"{n}," + ",".join(cells) + "\n")
    click.echo(str(out))
