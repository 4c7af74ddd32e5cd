"""Command-line entry point: ``lagspec <subcommand> --config file.yaml --out dir``."""
from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from .config import load_config
from .io import write_csv, write_json


def _limit_threads(n: int | None) -> None:
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _emit(report: dict, out: Path, name: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    series = report.get("series") or {}
    if series:
        cols = {k: v for k, v in series.items() if np.ndim(v) == 1}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) == 1:
            write_csv(out / f"{name}.csv", cols)
    summary = {k: v for k, v in report.items() if k != "series"}
    write_json(out / f"{name}.json", summary)
    for check, ok in report.get("checks", {}).items():
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}: {check}")
    if "status" in report and report["status"] != "ok":
        click.echo(f"status: {report['status']}")
    return 0 if report.get("passed", False) else 1


_CONFIG = click.Path(exists=True, dir_okay=False)
_OUT = click.Path(file_okay=False)


@click.group()
@click.option("--config", "config_path", type=_CONFIG, default=None, help="Experiment YAML file.")
@click.option("--out", "out_dir", type=_OUT, default="out", show_default=True, help="Output directory.")
@click.option("--threads", type=int, default=None, help="Worker processes / BLAS threads.")
@click.pass_context
def main(ctx, config_path, out_dir, threads):
    """Spectral experiments for 1D compressible Navier-Stokes in Lagrangian variables."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, out=out_dir, threads=threads)
    _limit_threads(threads)


def _experiment(kind: str):
    @click.option("--config", "config_path", type=_CONFIG, default=None, help="Overrides the global --config.")
    @click.option("--out", "out_dir", type=_OUT, default=None, help="Overrides the global --out.")
    @click.pass_context
    def cmd(ctx, config_path, out_dir):
        from . import experiments

        config_path = config_path or ctx.obj.get("config")
        out_dir = out_dir or ctx.obj.get("out") or "out"
        if config_path is None:
            raise click.UsageError("missing --config")
        cfg = load_config(config_path)
        runner = experiments.RUNNERS[kind]
        if kind == "visco-limit":
            report = runner(cfg, workers=ctx.obj.get("threads"))
        else:
            report = runner(cfg)
        sys.exit(_emit(report, Path(out_dir), kind))

    cmd.__name__ = kind.replace("-", "_")
    cmd.__doc__ = f"Run the {kind} experiment described by --config."
    return main.command(name=kind)(cmd)


for _kind in ("linear-check", "simulate", "decay", "visco-limit", "stability", "picard"):
    _experiment(_kind)


@main.command()
@click.option("--datum", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Samples as .npy or one-column text.")
@click.option("--length", type=float, required=True, help="Domain length.")
@click.option("--sigma", type=float, default=0.0, show_default=True)
@click.option("--p", "p", type=float, default=2.0, show_default=True)
@click.option("--r", "r", type=click.Choice(["1", "inf"]), default="1", show_default=True)
@click.option("--range", "rng", type=click.Choice(["full", "low", "high"]), default="full", show_default=True)
@click.option("--j0", type=int, default=0, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
def besov(datum, length, sigma, p, r, rng, j0, alpha):
    """Print one Besov (semi)norm of a sampled periodic datum."""
    from ..field import SpectralField
    from ..lp_besov import BesovSpec, besov_norm, default_bank

    vals = np.load(datum) if datum.endswith(".npy") else np.loadtxt(datum)
    f = SpectralField(np.ravel(vals), length)
    spec = BesovSpec(p=p, r=1 if r == "1" else np.inf, sigma=sigma, range=rng, j0=j0, alpha=alpha)
    click.echo(repr(besov_norm(f, spec, default_bank(f.n, length))))


if __name__ == "__main__":
    main()
