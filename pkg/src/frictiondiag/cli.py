"""Command-line interface.

Stage subcommands chain through files::

    frictiondiag simulate --window-status nominal      -> window.csv, truth.json
    frictiondiag detect window.csv                      -> changepoints.json (+ .csv)
    frictiondiag estimate window.csv changepoints.json  -> fit.json
    frictiondiag assign fit.json                        -> assignment.json
    frictiondiag classify assignment.json models.json   -> diagnosis.json

``diagnose`` runs all four stages at once and writes the same diagnosis.
Exit codes: 0 success, 2 validation error, 3 runtime or data error.
"""
from __future__ import annotations

import functools
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from .assignment import AssignmentResult, NoFeasibleAssignment
from .benchmarks import run_benchmarks
from .changepoint import ChangepointList
from .classifier import AnomalyModels, ProcessedDataset, fit_models, train_all
from .config import Config, default_scenario, load_config
from .core import AnomalyStatus, UnidentifiableError, ValidationError, anomaly_names
from .estimation import IntervalSet, SegmentedFit, estimate_noise_sigma, excess_rmse, rmse
from .io import (
    read_dataset_jsonl,
    read_json,
    read_processed_jsonl,
    read_window_csv,
    write_csv,
    write_dataset_jsonl,
    write_json,
    write_processed_jsonl,
    write_window_csv,
)
from .pipeline import Pipeline, StageError, build_processed_dataset
from .simulator import make_dataset, simulate_run

log = logging.getLogger("frictiondiag")

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class Ctx:
    def __init__(self, cfg: Config, seed: int, out: Path, fmt: str):
        self.cfg, self.seed, self.out, self.fmt = cfg, seed, out, fmt

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def emit(self, path: Path) -> None:
        click.echo(str(path))


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    return EXIT_VALIDATION if isinstance(exc, ValidationError) else EXIT_RUNTIME


def handled(fn):
    """Map library errors to exit codes with a one-line message on stderr."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except (ValidationError, StageError, UnidentifiableError, NoFeasibleAssignment, OSError,
                KeyError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))
    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="JSON configuration file (defaults are built in).")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
              help="Master seed; defaults to the pipeline seed in the config.")
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True,
              help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True,
              help="Format of tabular outputs.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.pass_context
def main(ctx, config_path, seed, out, fmt, verbose):
    """Friction anomaly diagnosis for reaction-wheel telemetry."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    ctx.obj = Ctx(cfg, cfg.pipeline.seed if seed is None else seed, Path(out), fmt)


pass_ctx = click.make_pass_decorator(Ctx)


def _status_from_label(label: str, n_s: int) -> AnomalyStatus:
    names = ["nominal"] + anomaly_names(n_s)
    if label not in names:
        raise ValidationError(f"unknown status {label!r}; expected one of {names}")
    vec = [label == n for n in anomaly_names(n_s)]
    return AnomalyStatus.from_vector(vec)


# ---------------------------------------------------------------------------
# stage subcommands

@main.command()
@click.option("--runs", type=click.IntRange(1), default=None, help="Number of windows (default: the configured scenario).")
@click.option("--steps", type=click.IntRange(2), default=None, help="Samples per window.")
@click.option("--window-status", default=None,
              help="Simulate one window with this status (nominal, dry, viscous, fss1, ...).")
@click.option("--processed", is_flag=True, help="Run detection, estimation and assignment and write processed.jsonl.")
@pass_ctx
@handled
def simulate(c: Ctx, runs, steps, window_status, processed):
    """Simulate labelled telemetry windows with ground truth."""
    cfg = c.cfg
    n_steps = steps or cfg.scenario.n_steps
    if window_status is not None:
        status = _status_from_label(window_status, cfg.model.n_s)
        window, truth = simulate_run(cfg.model, cfg.effects, status, n_steps, cfg.scenario.spin_profile, c.seed)
        write_window_csv(c.path("window.csv"), window)
        write_json(c.path("truth.json"), {"status": status.to_vector(), "label": status.label, **truth.to_dict()})
        c.emit(c.path("window.csv"))
        return
    scen = cfg.scenario if runs is None else default_scenario(runs, n_steps)
    scen = replace(scen, n_steps=n_steps, spin_profile=cfg.scenario.spin_profile)
    ds = make_dataset(scen, cfg.model, cfg.effects, c.seed)
    if processed:
        proc, failures = build_processed_dataset(ds, cfg.pipeline)
        write_processed_jsonl(c.path("processed.jsonl"), proc)
        if failures:
            write_csv(c.path("failures.csv"), ["window", "error"], failures)
        c.emit(c.path("processed.jsonl"))
    else:
        write_dataset_jsonl(c.path("dataset.jsonl"), ds)
        c.emit(c.path("dataset.jsonl"))


def _write_changepoints(c: Ctx, cps: ChangepointList, n_m: int) -> Path:
    p = c.path("changepoints.json")
    write_json(p, {**cps.to_dict(), "n_m": n_m, "detector": c.cfg.pipeline.detector.to_dict()})
    if c.fmt == "csv":
        write_csv(c.path("changepoints.csv"), ["k", "score"], zip(cps.indices, cps.scores))
    return p


def _read_changepoints(path) -> list[int]:
    path = Path(path)
    if path.suffix == ".json":
        return [int(k) for k in read_json(path)["indices"]]
    lines = path.read_text().splitlines()
    if not lines or lines[0].split(",")[0] != "k":
        raise ValidationError(f"{path}: expected a 'k' column")
    try:
        return [int(line.split(",")[0]) for line in lines[1:] if line.strip()]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-integer changepoint index") from exc


@main.command()
@click.argument("window", type=click.Path(exists=True, dir_okay=False))
@pass_ctx
@handled
def detect(c: Ctx, window):
    """Detect changepoints in a WINDOW csv."""
    w = read_window_csv(window)
    try:
        cps = Pipeline(c.cfg.pipeline).detect(w)
    except (ValidationError, UnidentifiableError) as exc:
        raise StageError("changepoint", exc) from exc
    c.emit(_write_changepoints(c, cps, w.n))


@main.command()
@click.argument("window", type=click.Path(exists=True, dir_okay=False))
@click.argument("changepoints", type=click.Path(exists=True, dir_okay=False))
@pass_ctx
@handled
def estimate(c: Ctx, window, changepoints):
    """Fit dry and viscous coefficients between CHANGEPOINTS of WINDOW."""
    w = read_window_csv(window)
    cps = _read_changepoints(changepoints)
    try:
        iv, seg = Pipeline(c.cfg.pipeline).estimate(w, cps)
    except (ValidationError, UnidentifiableError) as exc:
        raise StageError("estimation", exc) from exc
    p = c.path("fit.json")
    r = rmse(w, iv, seg)
    sigma_hat = estimate_noise_sigma(w)
    write_json(p, {"intervals": iv.to_dict(), "fit": seg.to_dict(), "rmse": r, "sigma_hat": sigma_hat,
                   "excess_rmse": excess_rmse(r, sigma_hat)})
    if c.fmt == "csv":
        write_csv(c.path("fit.csv"), ["interval", "k_o", "k_f", "F", "rejection_cost_after"],
                  ((i, a, b, float(seg.F[i]), float(seg.rejection_costs[i]) if i < len(seg.rejection_costs) else "")
                   for i, (a, b) in enumerate(iv.intervals)))
    c.emit(p)


@main.command()
@click.argument("fit_json", type=click.Path(exists=True, dir_okay=False))
@pass_ctx
@handled
def assign(c: Ctx, fit_json):
    """Assign the changepoints of FIT_JSON to switching systems."""
    d = read_json(fit_json)
    try:
        iv = IntervalSet.from_dict(d["intervals"])
        seg = SegmentedFit.from_dict(d["fit"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{fit_json}: malformed fit file ({exc})") from exc
    try:
        res = Pipeline(c.cfg.pipeline).assign(iv, seg, iv.n_m)
    except (ValidationError, NoFeasibleAssignment) as exc:
        raise StageError("assignment", exc) from exc
    p = c.path("assignment.json")
    write_json(p, res.to_dict())
    if c.fmt == "csv":
        write_csv(c.path("assignment.csv"), ["k", "u"], zip(iv.changepoints, res.u))
    c.emit(p)


def _diagnosis_dict(theta: AnomalyStatus) -> dict:
    return {"theta_hat": theta.to_vector(), "label": theta.label}


@main.command()
@click.argument("assignment_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("models_json", type=click.Path(exists=True, dir_okay=False))
@pass_ctx
@handled
def classify(c: Ctx, assignment_json, models_json):
    """Classify the per-system friction values of ASSIGNMENT_JSON with MODELS_JSON."""
    res = AssignmentResult.from_dict(read_json(assignment_json))
    models = _read_models(models_json)
    try:
        theta = models.predict(res.f_bar_d, res.f_v, res.per_fss)
    except ValidationError as exc:
        raise StageError("classification", exc) from exc
    p = c.path("diagnosis.json")
    write_json(p, _diagnosis_dict(theta))
    c.emit(p)


def _read_models(path) -> AnomalyModels:
    try:
        return AnomalyModels.from_dict(read_json(path))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed models file ({exc})") from exc


def _read_training_input(c: Ctx, path) -> ProcessedDataset:
    if path is None:
        ds = make_dataset(c.cfg.scenario, c.cfg.model, c.cfg.effects, c.seed)
        proc, _ = build_processed_dataset(ds, c.cfg.pipeline)
        return proc
    with open(path) as fh:
        first = fh.readline()
    if '"omega"' in first:
        proc, _ = build_processed_dataset(read_dataset_jsonl(path), c.cfg.pipeline)
        return proc
    return read_processed_jsonl(path)


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--split", type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=0.2, show_default=True,
              help="Training fraction of each random split.")
@click.option("--repeats", type=click.IntRange(1), default=30, show_default=True)
@click.option("--fit-all", is_flag=True, help="Write models refitted on the whole dataset instead of the first split.")
@pass_ctx
@handled
def train(c: Ctx, dataset, split, repeats, fit_all):
    """Train per-anomaly classifiers on DATASET (processed or raw JSONL; default: simulate the scenario)."""
    proc = _read_training_input(c, dataset)
    ccfg = c.cfg.pipeline.classifier
    models, rep = train_all(proc, split, repeats, c.seed, ccfg)
    if fit_all:
        models = fit_models(proc.entries, ccfg, seed=c.seed)
    write_json(c.path("models.json"), models.to_dict())
    header = ["true_class", "detected", "min", "mean", "max"]
    if c.fmt == "csv":
        write_csv(c.path("report.csv"), header, rep.to_rows())
    write_json(c.path("report.json"), rep.to_dict())
    c.emit(c.path("models.json"))


@main.command()
@click.argument("window", type=click.Path(exists=True, dir_okay=False))
@click.argument("models_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--embed/--no-embed", default=False, help="Include every stage output in the report.")
@pass_ctx
@handled
def diagnose(c: Ctx, window, models_json, embed):
    """Run all four stages on WINDOW with MODELS_JSON."""
    w = read_window_csv(window)
    models = _read_models(models_json)
    rep = Pipeline(c.cfg.pipeline).diagnose(w, models)
    p = c.path("diagnosis.json")
    d = _diagnosis_dict(rep.theta_hat)
    if embed:
        d.update(rep.to_dict(embed=True, timings=False))
    write_json(p, d)
    write_json(c.path("timings.json"), rep.timings_ms)
    c.emit(p)


# ---------------------------------------------------------------------------
# benchmarks

def _bench(suite):
    @pass_ctx
    @handled
    def cmd(c: Ctx):
        summary = run_benchmarks(suite, c.cfg, c.seed, c.out, c.fmt)
        for name in summary["files"]:
            c.emit(c.out / name)
    cmd.__doc__ = f"Run the {suite} benchmark suite."
    return cmd


for _suite in ("cpd", "rmse", "assign", "accuracy", "bins", "timing"):
    main.command(name=f"bench-{_suite}")(_bench(_suite))

main.command(name="bench-all")(_bench("all"))


if __name__ == "__main__":  # pragma: no cover
    main()
