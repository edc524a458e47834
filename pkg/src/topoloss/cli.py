"""Command-line front end.

Subcommands: gen (phantom volumes), pd (persistence diagrams), dist
(diagram transport distance), loss (combined loss report), betti
(brute-force Betti numbers). Exit codes: 0 success, 1 I/O or format
failure, 2 usage error, 3 resource limit. Numeric output uses 17
significant digits; identical invocations produce byte-identical output.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import __version__
from .cubical import (
    ComplexTooLargeError,
    DiagramFormatError,
    betti_oracle,
    read_diagram,
    sublevel_persistence,
    write_diagram,
)
from .loss import FocalConfig, SinkhornConfig, TaflConfig, tafl_loss
from .transport import transport_plan
from .volume import (
    PHANTOM_KINDS,
    PhantomError,
    VolumeFormatError,
    generate_phantom,
    load_labels,
    load_volume,
    save_volume,
)

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_dims(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.UsageError(f"--dims expects nx,ny,nz, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise click.UsageError(f"--dims expects integers, got {text!r}")


def _load_volume_or_fail(path):
    try:
        return load_volume(path)
    except FileNotFoundError:
        _fail(EXIT_IO, f"no such file: {path}")
    except VolumeFormatError as exc:
        _fail(EXIT_IO, str(exc))


@click.group()
@click.version_option(__version__, prog_name="topoloss")
def main():
    """Cubical persistence, diagram transport, and topology-aware loss."""


@main.command()
@click.option("--kind", required=True, type=click.Choice(PHANTOM_KINDS))
@click.option("--dims", default=None, help="nx,ny,nz (fig2-line defaults to 5,1,1)")
@click.option("--value", type=float, default=None, help="constant phantom value")
@click.option("--radius", type=float, default=None, help="ball/shell/torus radius")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gen(kind, dims, value, radius, out):
    """Write a phantom volume as a VOL1 file."""
    if dims is None:
        if kind != "fig2-line":
            raise click.UsageError("--dims is required for this kind")
        dims = "5,1,1"
    params = {}
    if value is not None:
        params["value"] = value
    if radius is not None:
        params["radius"] = radius
    try:
        volume = generate_phantom(kind, _parse_dims(dims), params)
    except PhantomError as exc:
        raise click.UsageError(str(exc))
    try:
        save_volume(volume, out)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {out}: {exc}")


@main.command()
@click.argument("volume_path", type=click.Path(dir_okay=False))
@click.option("--max-dim", type=click.IntRange(0, 2), default=2, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def pd(volume_path, max_dim, out):
    """Sublevel persistence diagram of a volume, written as CSV."""
    volume = _load_volume_or_fail(volume_path)
    diagram = sublevel_persistence(volume, max_dim=max_dim)
    try:
        write_diagram(diagram, out)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {out}: {exc}")
    for dim in range(max_dim + 1):
        click.echo(f"dim={dim} count={len(diagram.in_dim(dim))}")


@main.command()
@click.argument("csv1", type=click.Path(dir_okay=False))
@click.argument("csv2", type=click.Path(dir_okay=False))
@click.option("--mu", type=float, default=0.01, show_default=True)
@click.option("--p", type=float, default=2.0, show_default=True)
@click.option("--mode", type=click.Choice(("paper-literal", "diagonal-augmented")),
              default="paper-literal", show_default=True)
@click.option("--stabilization", type=click.Choice(("naive", "log-domain")),
              default="naive", show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--plan", "plan_out", type=click.Path(dir_okay=False), default=None,
              help="also dump the transport plan as CSV")
def dist(csv1, csv2, mu, p, mode, stabilization, tol, max_iter, plan_out):
    """Transport distance between two diagram CSVs (finite deaths only)."""
    points = []
    for path in (csv1, csv2):
        try:
            diagram = read_diagram(path)
        except FileNotFoundError:
            _fail(EXIT_IO, f"no such file: {path}")
        except DiagramFormatError as exc:
            _fail(EXIT_IO, str(exc))
        pts = [(pr.birth, pr.death) for pr in diagram.pairs if not pr.essential]
        points.append(pts)
    try:
        config = SinkhornConfig(mu=mu, p=p, tol=tol, max_iter=max_iter,
                                stabilization=stabilization, cardinality_mode=mode)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        plan, cost = transport_plan(points[0], points[1], config)
    except ValueError as exc:
        _fail(EXIT_IO, str(exc))
    distance = float(np.sum(plan.matrix * cost))
    if plan_out is not None:
        try:
            with open(plan_out, "w") as fh:
                for row in plan.matrix:
                    fh.write(",".join(_fmt(x) for x in row) + "\n")
        except OSError as exc:
            _fail(EXIT_IO, f"cannot write {plan_out}: {exc}")
    click.echo(_fmt(distance))


@main.command()
@click.option("--probs", "probs_paths", required=True,
              help="comma-separated per-class probability volumes p0.vol,p1.vol,...")
@click.option("--gt", "gt_path", required=True, type=click.Path(dir_okay=False),
              help="ground-truth label mask (VOL1 dtype 2)")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="JSON file overriding loss defaults")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def loss(probs_paths, gt_path, config_path, out):
    """Evaluate the combined loss and write the report JSON."""
    from .volume import ProbabilityField

    try:
        mask = load_labels(gt_path)
    except FileNotFoundError:
        _fail(EXIT_IO, f"no such file: {gt_path}")
    except VolumeFormatError as exc:
        _fail(EXIT_IO, str(exc))

    paths = [p for p in probs_paths.split(",") if p]
    if len(paths) < 2:
        raise click.UsageError("--probs needs at least two per-class volumes")
    channels = []
    for path in paths:
        vol = _load_volume_or_fail(path)
        channels.append(vol.values)
    try:
        probs = ProbabilityField(channels[0].shape, np.stack(channels))
    except ValueError as exc:
        _fail(EXIT_IO, f"invalid probability field: {exc}")

    config = _load_loss_config(config_path)
    try:
        report = tafl_loss(probs, mask, config)
    except ValueError as exc:
        _fail(EXIT_IO, str(exc))
    try:
        with open(out, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {out}: {exc}")
    click.echo(f"total={_fmt(report.total)}")


_LOSS_CONFIG_KEYS = {
    "lambda", "alpha", "gamma", "reduction", "prob_floor", "mu", "epsilon",
    "max_iter", "tol", "p", "stabilization", "cardinality_mode",
    "homology_dims", "classes", "top_k",
}


def _load_loss_config(config_path) -> TaflConfig:
    if config_path is None:
        return TaflConfig()
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        _fail(EXIT_IO, f"no such file: {config_path}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_IO, f"{config_path}: invalid JSON: {exc}")
    if not isinstance(raw, dict):
        raise click.UsageError(f"{config_path}: config must be a JSON object")
    unknown = set(raw) - _LOSS_CONFIG_KEYS
    if unknown:
        raise click.UsageError(f"{config_path}: unknown config keys {sorted(unknown)}")
    try:
        focal = FocalConfig(
            alpha=raw.get("alpha", 1.0),
            gamma=raw.get("gamma", 2.0),
            reduction=raw.get("reduction", "mean"),
            prob_floor=raw.get("prob_floor", 1e-12),
        )
        sinkhorn = SinkhornConfig(
            mu=raw.get("mu", 0.01),
            epsilon=raw.get("epsilon", 1e-99),
            max_iter=raw.get("max_iter", 1000),
            tol=raw.get("tol", 1e-6),
            p=raw.get("p", 2.0),
            stabilization=raw.get("stabilization", "log-domain"),
            cardinality_mode=raw.get("cardinality_mode", "diagonal-augmented"),
        )
        return TaflConfig(
            lam=raw.get("lambda", 0.001),
            focal=focal,
            sinkhorn=sinkhorn,
            homology_dims=tuple(raw.get("homology_dims", (0, 1, 2))),
            classes=tuple(raw["classes"]) if raw.get("classes") is not None else None,
            top_k=raw.get("top_k", 128),
        )
    except ValueError as exc:
        raise click.UsageError(f"{config_path}: {exc}")


@main.command()
@click.argument("volume_path", type=click.Path(dir_okay=False))
@click.option("--threshold", type=float, required=True)
@click.option("--max-dim", type=click.IntRange(0, 2), default=2, show_default=True)
def betti(volume_path, threshold, max_dim):
    """Brute-force Betti numbers of the sublevel complex at a threshold."""
    volume = _load_volume_or_fail(volume_path)
    try:
        numbers = betti_oracle(volume, threshold, max_dim=max_dim)
    except ComplexTooLargeError as exc:
        _fail(EXIT_RESOURCE, str(exc))
    click.echo(" ".join(str(b) for b in numbers))


if __name__ == "__main__":
    main()
