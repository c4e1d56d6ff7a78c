"""Command-line entry point: normalize, plan-windows, simulate, compare, serve, metrics."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics as metrics_mod
from . import preprocess
from .simulator import (
    ExperimentConfig,
    compare_strategies,
    format_comparison,
    run_experiment,
)
from .volume import VolumeError, load_mask, load_volume, save_nifti, save_volume
from .windowing import WindowConfig, plan_windows

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_RUNTIME = 4


def _parse_triple(text: str, name: str):
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise click.UsageError(f"{name} must be one integer or three comma-separated")
    return tuple(parts)


@click.group()
def main():
    """Interactive sliding-window segmentation toolkit."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--lo", default=0.05, show_default=True, help="Lower clip percentile.")
@click.option("--hi", default=99.95, show_default=True, help="Upper clip percentile.")
def normalize(input_path, output_path, lo, hi):
    """Percentile-clip a volume and rescale it to [0, 1]."""
    try:
        vol = load_volume(input_path)
        out = preprocess.percentile_normalize(vol, lo, hi)
        if str(output_path).endswith((".nii", ".nii.gz")):
            save_nifti(out, output_path)
        else:
            save_volume(out, output_path)
    except VolumeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_IO)


@main.command("plan-windows")
@click.option("--dims", required=True, help="Volume dims, e.g. 224,224,224.")
@click.option("--window", default="128", show_default=True, help="Window dims.")
@click.option("--overlap", default=0.25, show_default=True)
@click.option("--output", "output_path", type=click.Path(), default=None,
              help="Write the grid JSON here instead of stdout.")
def plan_windows_cmd(dims, window, overlap, output_path):
    """Print the deterministic sliding-window plan as JSON."""
    vdims = _parse_triple(dims, "--dims")
    wdims = _parse_triple(window, "--window")
    grid = plan_windows(vdims, WindowConfig(window_dims=wdims, overlap=overlap))
    text = json.dumps(grid.to_json(), indent=2)
    if output_path:
        Path(output_path).write_text(text)
    else:
        click.echo(text)


@main.command()
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--label", required=True, type=click.Path(exists=True))
@click.option("--tolerance", default=2.0, show_default=True, help="NSD tolerance in mm.")
def metrics(pred, label, tolerance):
    """Compute Dice and NSD between two mask files."""
    try:
        p = load_mask(pred)
        l = load_mask(label)
        vol = load_volume(label)
        d = metrics_mod.dice(p, l)
        n = metrics_mod.nsd(p, l, tolerance, vol.spacing)
    except VolumeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_IO)
    click.echo(json.dumps({"dice": d, "nsd": n}))


def _load_config(path: str) -> dict:
    return json.loads(Path(path).read_text())


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="JSON file with ExperimentConfig fields.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--jobs", type=int, default=None, help="Override the worker count.")
def simulate(config_path, seed, jobs):
    """Run one simulated-user experiment from a config file."""
    cfg_dict = _load_config(config_path)
    if seed is not None:
        cfg_dict["seed"] = seed
    if jobs is not None:
        cfg_dict["jobs"] = jobs
    cfg = ExperimentConfig.from_json(cfg_dict)
    try:
        report = run_experiment(cfg)
    except (FileNotFoundError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(json.dumps(report.aggregate(), indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="JSON file: {'configs': [ExperimentConfig, ...]}.")
@click.option("--seed", type=int, default=None)
def compare(config_path, seed):
    """Run several strategy configs over the same dataset and tabulate them."""
    raw = _load_config(config_path)
    cfg_dicts = raw["configs"] if isinstance(raw, dict) else raw
    if seed is not None:
        for d in cfg_dicts:
            d["seed"] = seed
    cfgs = [ExperimentConfig.from_json(d) for d in cfg_dicts]
    try:
        table = compare_strategies(cfgs)
    except (FileNotFoundError, RuntimeError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(format_comparison(table))


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--storage", envvar="SWISEG_SESSIONS", default="./sessions",
              show_default=True, help="Session storage directory.")
@click.option("--segmenter", default="threshold:0.5", show_default=True,
              help="Backend spec: oracle | click_oracle | threshold[:t] | URL | command.")
@click.option("--window", default="128", show_default=True)
@click.option("--overlap", default=0.25, show_default=True)
def serve(port, host, storage, segmenter, window, overlap):
    """Start the annotation HTTP service."""
    import uvicorn

    from .service import create_app
    from .windowing import WindowConfig

    wdims = _parse_triple(window, "--window")
    app = create_app(
        storage, segmenter_spec=segmenter,
        window=WindowConfig(window_dims=wdims, overlap=overlap),
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
