"""Command-line front end: ``wcfs run | sweep | validate | pack``.

Every option also reads an environment variable named ``WCFS_<OPTION>``,
e.g. ``WCFS_ARRIVALS=100000 wcfs sweep --config fig4``.
"""
from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import analysis as A
from . import packing, validation
from .config import ExperimentConfig, resolve_config
from .engine import simulate
from .errors import InvalidRequirement, WcfsError
from .policies import POLICIES, ModelSpec
from .svg import line_chart

COLUMNS = ("model", "policy", "rho", "seed", "arrivals", "mean_T", "ci", "scaled_T", "delta",
           "c_lower", "c_upper", "little_law_gap", "busy_fraction", "error")


def run_seed(base_seed: int, model_index: int, rho_index: int, replication: int) -> int:
    """Independent 64-bit seed for one (model, rho, replication) cell."""
    words = np.random.SeedSequence([base_seed, model_index, rho_index, replication]).generate_state(
        2, dtype=np.uint32)
    return int(words[0]) << 32 | int(words[1])


def _task(args):
    key, model, rho, arrivals, seed, warmup = args
    row = {"model": model.name, "policy": model.policy, "rho": rho, "seed": seed,
           "arrivals": arrivals}
    try:
        mom = model.distribution.moments()
        lam = rho / mom.mean
        m = simulate(model, lam, arrivals, seed, warmup=warmup)
        row.update(mean_T=m.mean_T, ci=m.ci_T, scaled_T=A.scaled_response(m, rho),
                   delta=A.delta_pi(m, lam, mom).value, little_law_gap=A.little_law_gap(m),
                   busy_fraction=m.busy_fraction)
        if POLICIES[model.policy].wcfs:
            row["c_lower"], row["c_upper"] = A.band_constants(model)
    except Exception as exc:  # recorded as an error row, the sweep goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return key, row


def sweep_tasks(config: ExperimentConfig):
    for mi, model in enumerate(config.models):
        for ri, rho in enumerate(config.rho_grid):
            for rep in range(config.replications):
                seed = run_seed(config.seed, mi, ri, rep)
                yield (mi, ri, rep), model, rho, config.arrivals, seed, config.warmup


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Rows for every (model, rho, replication), in config order."""
    tasks = list(sweep_tasks(config))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks, chunksize=1))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda kr: kr[0])
    return [row for _, row in results]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def write_csv(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))


def rows_to_svg(config: ExperimentConfig, rows: list[dict]) -> str:
    """Mean over replications of the configured y column, one series per model."""
    ycol = config.plot
    acc: dict[str, dict[float, list[float]]] = {m.name: {} for m in config.models}
    for row in rows:
        if not row.get("error"):
            acc[row["model"]].setdefault(row["rho"], []).append(row[ycol])
    series = {name: [(rho, math.fsum(v) / len(v)) for rho, v in sorted(pts.items())]
              for name, pts in acc.items()}
    if ycol == "scaled_T":
        excess = sorted({round(m.distribution.moments().excess_mean, 12) for m in config.models})
        refs = [(f"E[S^2]/2E[S] = {e:g}", e) for e in excess]
        label = "E[T](1 - rho)"
    else:
        refs = [("0", 0.0)]
        label = "Delta = E[T] - E[T_Q] of M/G/1"
    return line_chart(config.name, label, series, refs)


def _apply_overrides(config: ExperimentConfig, arrivals, seed, replications, extended):
    if extended:
        config = config.extended()
    if arrivals is not None:
        config.arrivals = arrivals * (10 if extended else 1)
    if seed is not None:
        config.seed = seed
    if replications is not None:
        config.replications = replications
    config.__post_init__()
    return config


def _opt(*names, **kw):
    env = "WCFS_" + names[0].lstrip("-").replace("-", "_").upper()
    return click.option(*names, envvar=env, show_envvar=True, **kw)


_config_opt = _opt("--config", "config_ref", required=True,
                   help="Preset name (fig1, fig2, fig4, fig5a, fig5b) or YAML path.")
_arrivals_opt = _opt("--arrivals", type=click.IntRange(1000), default=None,
                     help="Arrivals per run (overrides the config).")
_seed_opt = _opt("--seed", type=int, default=None, help="Base seed (overrides the config).")


@click.group()
def main():
    """Simulate and analyze work-conserving finite-skip queueing models."""


@main.command()
@_config_opt
@_opt("--model", "model_name", default=None, help="Model name in the config (default: first).")
@_opt("--rho", type=click.FloatRange(0, 1, min_open=True, max_open=True), required=True)
@_arrivals_opt
@_seed_opt
def run(config_ref, model_name, rho, arrivals, seed):
    """Simulate one model at one load and print its metrics and checks."""
    config = _load(config_ref)
    config = _apply_overrides(config, arrivals, seed, None, False)
    models = {m.name: m for m in config.models}
    if model_name is None:
        model = config.models[0]
    elif model_name in models:
        model = models[model_name]
    else:
        raise click.BadParameter(f"unknown model {model_name!r}; choose from {sorted(models)}",
                                 param_hint="--model")
    mom = model.distribution.moments()
    lam = rho / mom.mean
    try:
        m = simulate(model, lam, config.arrivals, run_seed(config.seed, 0, 0, 0), config.warmup)
    except WcfsError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(f"model {model.name} ({model.policy}), rho={rho}, arrivals={config.arrivals}")
    for key, value in m.as_dict().items():
        click.echo(f"  {key:18s} {_fmt(value)}")
    d = A.delta_pi(m, lam, mom)
    click.echo(f"  {'scaled_T':18s} {_fmt(A.scaled_response(m, rho))}")
    click.echo(f"  {'delta':18s} {_fmt(d.value)} +/- {_fmt(d.ci)}")
    if POLICIES[model.policy].wcfs:
        band = A.theorem2_band(model, rho)
        click.echo(f"  {'band':18s} [{band.lower:.6g}, {band.upper:.6g}]")
    for check in A.self_consistency(model, m, include_work=POLICIES[model.policy].wcfs):
        click.echo(f"  {'PASS' if check.ok else 'FAIL'} {check.name}: {check.detail}")


@main.command()
@_config_opt
@_arrivals_opt
@_seed_opt
@_opt("--replications", type=click.IntRange(1), default=None)
@_opt("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
      help="CSV path (default: <config name>.csv).")
@_opt("--svg", is_flag=True, default=False, help="Also write a line chart next to the CSV.")
@_opt("--extended", is_flag=True, default=False,
      help="Extend the load grid to 0.99 with ten times the arrivals.")
@_opt("--jobs", type=click.IntRange(1), default=1, help="Worker processes.")
def sweep(config_ref, arrivals, seed, replications, out, svg, extended, jobs):
    """Run every (model, rho, replication) of a config and write a CSV."""
    config = _load(config_ref)
    config = _apply_overrides(config, arrivals, seed, replications, extended)
    out = out or Path(config.output or f"{config.name}.csv")
    rows = run_sweep(config, jobs)
    write_csv(rows, out)
    errors = sum(1 for r in rows if r.get("error"))
    click.echo(f"wrote {len(rows)} rows to {out}" + (f" ({errors} errors)" if errors else ""))
    if svg:
        svg_path = out.with_suffix(".svg")
        svg_path.write_text(rows_to_svg(config, rows), encoding="utf-8")
        click.echo(f"wrote {svg_path}")


@main.command()
@_opt("--seed", type=int, default=1)
@_arrivals_opt
def validate(seed, arrivals):
    """Run the oracle and packing checks; exit nonzero on any failure."""
    checks = validation.run_all(seed=seed, arrivals=arrivals or 200_000)
    for check in checks:
        click.echo(f"{'PASS' if check.ok else 'FAIL'} {check.name}: {check.detail}")
    failed = [c.name for c in checks if not c.ok]
    if failed:
        click.echo(f"{len(failed)} of {len(checks)} checks failed")
        sys.exit(1)
    click.echo(f"all {len(checks)} checks passed")


@main.command()
@click.argument("k", type=int)
@click.argument("requirements")
@click.argument("algorithm", type=click.Choice(["serverfilling", "divisorfilling", "maxweight"]))
def pack(k, requirements, algorithm):
    """Show which jobs a packing algorithm serves.

    REQUIREMENTS is a comma-separated list in arrival order; printed indices
    are 1-based.
    """
    try:
        reqs = [int(x) for x in requirements.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("requirements must be comma-separated integers")
    cands = list(enumerate(reqs, start=1))
    try:
        if algorithm == "serverfilling":
            chosen = packing.server_filling_select(k, cands)
        elif algorithm == "divisorfilling":
            chosen = packing.divisor_filling_select(k, cands)
        else:
            counts: dict[int, int] = {}
            for v in reqs:
                if v < 1 or v > k:
                    raise InvalidRequirement(f"requirement {v} outside [1, {k}]")
                counts[v] = counts.get(v, 0) + 1
            z = packing.maxweight_select(k, counts)
            click.echo("packing {" + ", ".join(f"{v}: {n}" for v, n in z.items()) + "}")
            chosen = [i for v, n in z.items() for i in [i for i, r in cands if r == v][:n]]
    except WcfsError as exc:
        raise click.ClickException(str(exc))
    used = sum(reqs[i - 1] for i in chosen)
    click.echo(f"indices {','.join(map(str, chosen))}; {used} servers")


def _load(ref: str) -> ExperimentConfig:
    try:
        return resolve_config(ref)
    except (WcfsError, OSError) as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
