"""Benchmark harness: every suite writes data tables, SVG previews and a summary.

Suites:

* ``cpd``: missed-detection grid over window size and step size at a fixed
  threshold, and average run length at the 0.1% missed-detection threshold
  over window size and prior weight.
* ``rmse``: excess RMSE of the segmented fit against a single-coefficient
  fit, plus the survival function of the segmented residuals.
* ``assign``: rejections and search iterations per run, and labelling
  accuracy against the simulated ground truth.
* ``accuracy``: detection probability per (true class, detected anomaly).
* ``bins``: train/validation hinge loss against the histogram bin count.
* ``timing``: per-stage wall-clock time of ``diagnose`` on long windows.

All data outputs except the timing tables are deterministic given the
configuration and seed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import svg
from .changepoint import (
    BenchSignal,
    DetectorConfig,
    calibrate_threshold,
    count_false_alarms,
    detect,
    estimate_mdr,
    mdr_threshold,
    step_noncentrality,
    with_threshold,
    wglr_profile,
)
from .classifier import ProcessedDataset, ProcessedEntry, bin_sweep, fit_models, train_all
from .config import Config, default_scenario, example_model
from .core import AnomalyStatus, ValidationError, spawn_seeds
from .estimation import (
    build_intervals,
    error_survival,
    estimate_noise_sigma,
    excess_rmse,
    fit,
    naive_fit,
    residuals,
    rmse,
)
from .io import write_csv, write_json
from .pipeline import STAGES, Pipeline, StageError, build_processed_dataset
from .simulator import AnomalyEffect, Scenario, make_dataset, simulate_run

log = logging.getLogger(__name__)

SUITES = ("cpd", "rmse", "assign", "accuracy", "bins", "timing")

BENCH_DEFAULTS = {
    "cpd_ws": [10, 20, 50, 100],
    "cpd_delta_sigmas": [2.0, 3.0, 5.0],
    "cpd_W_bs": [0.0, 1e-8, 1e-6, 1e-4, 1e-2],
    "cpd_arl_ws": [10, 20, 50],
    "cpd_mdr_trials": 200,
    "cpd_mdr_alpha": 1e-9,  # per-point null exceedance of the fixed MDR-grid threshold
    "cpd_mdr_W_b": 1e-4,
    "cpd_target_mdr": 1e-3,
    "cpd_arl_windows": 10,
    "cpd_arl_points": 100_000,
    "cpd_signal_slope": 1e-6,
    "rmse_runs": 200,
    "rmse_steps": 40_000,
    "survival_grid": 400,
    "dataset_runs": None,  # None: use the scenario as configured
    "split": 0.2,
    "repeats": 30,
    "bins": [5, 10, 20, 40, 80, 120, 200],
    "timing_windows": 3,
    "timing_steps": 80_000,
    "timing_train_runs": 60,
}


def bench_settings(cfg: Config) -> dict:
    unknown = set(cfg.bench) - set(BENCH_DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown bench settings: {sorted(unknown)}")
    return {**BENCH_DEFAULTS, **cfg.bench}


class _Writer:
    """Writes tables as CSV or JSON records and remembers every file produced."""

    def __init__(self, out: Path, fmt: str):
        if fmt not in ("csv", "json"):
            raise ValidationError(f"unknown format {fmt!r}")
        self.out, self.fmt = out, fmt
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def table(self, name, header, rows) -> None:
        rows = [list(r) for r in rows]
        path = self.out / f"{name}.{self.fmt}"
        if self.fmt == "csv":
            write_csv(path, header, rows)
        else:
            write_json(path, [dict(zip(header, (_plain(v) for v in r))) for r in rows])
        self.files.append(path.name)

    def path(self, name) -> Path:
        self.files.append(name)
        return self.out / name


def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# cpd

def bench_cpd(cfg: Config, seed, wr: _Writer, b: dict) -> dict:
    sigma = cfg.pipeline.detector.sigma_v
    signal = BenchSignal(slope=b["cpd_signal_slope"])
    base = DetectorConfig(w=20, W_b=b["cpd_mdr_W_b"], f_tilde_v=signal.f_v,
                          glr_thr=calibrate_threshold(sigma, b["cpd_mdr_alpha"]), sigma_v=sigma)
    seeds = iter(spawn_seeds(seed, 2))
    mdr_seed, arl_seed = next(seeds), next(seeds)

    mdr_rows = []
    for w in b["cpd_ws"]:
        for ds in b["cpd_delta_sigmas"]:
            c = replace(base, w=int(w))
            m = estimate_mdr(c, ds * sigma, b["cpd_mdr_trials"], mdr_seed, signal)
            mdr_rows.append((int(w), float(ds), m))
    wr.table("cpd_mdr", ["w", "delta_f_over_sigma", "mdr"], mdr_rows)
    svg.line_plot(wr.path("cpd_mdr.svg"),
                  {f"df={ds:g} sigma": ([r[0] for r in mdr_rows if r[1] == ds], [r[2] for r in mdr_rows if r[1] == ds])
                   for ds in b["cpd_delta_sigmas"]},
                  title="Missed detection rate at fixed threshold", xlabel="w", ylabel="MDR", markers=True)

    budget = b["cpd_arl_windows"] * b["cpd_arl_points"]
    arl_rows = []
    for w in b["cpd_arl_ws"]:
        for W_b in b["cpd_W_bs"]:
            c = DetectorConfig(w=int(w), W_b=float(W_b), f_tilde_v=signal.f_v, glr_thr=1.0, sigma_v=sigma)
            nc = step_noncentrality(signal.omega(2 * int(w)), 3.0 * sigma, c)
            thr = mdr_threshold(nc, b["cpd_target_mdr"])
            c = with_threshold(c, thr)
            alarms = points = 0
            for child in spawn_seeds(arl_seed, b["cpd_arl_windows"]):
                a, p = count_false_alarms(c, b["cpd_arl_points"], child, signal)
                alarms += a
                points += p
            arl = points / alarms if alarms else float("inf")
            arl_rows.append((int(w), float(W_b), nc, thr, alarms, points, arl, int(alarms == 0)))
    wr.table("cpd_arl", ["w", "W_b", "noncentrality", "threshold", "alarms", "points", "arl", "censored"], arl_rows)
    svg.line_plot(wr.path("cpd_arl.svg"),
                  {f"w={w}": ([max(r[1], 1e-10) for r in arl_rows if r[0] == w],
                              [r[6] if np.isfinite(r[6]) else r[5] for r in arl_rows if r[0] == w])
                   for w in b["cpd_arl_ws"]},
                  title="ARL at 0.1% MDR (censored runs plotted at the budget)", xlabel="W_b (0 at 1e-10)",
                  ylabel="ARL", logx=True, logy=True, markers=True)
    return {"mdr": [list(r) for r in mdr_rows], "arl_budget": budget,
            "arl": [list(r) for r in arl_rows]}


def arl_ratio(rows, w: int, W_lo: float, W_hi: float) -> float:
    """Lower bound on ``ARL(W_hi) / ARL(W_lo)``; a censored ``W_hi`` cell counts as its budget."""
    def get(W):
        for r in rows:
            if r[0] == w and r[1] == W:
                return r
        raise ValidationError(f"no ARL cell for w={w}, W_b={W}")
    lo, hi = get(W_lo), get(W_hi)
    hi_val = float(hi[5]) if hi[7] else float(hi[6])
    lo_val = float(lo[6])
    return hi_val / lo_val if np.isfinite(lo_val) else float("nan")


# ---------------------------------------------------------------------------
# rmse

def rmse_records(cfg: Config, seed, n_runs: int, n_steps: int):
    """Per-run ``(seg_rmse, naive_rmse, sigma_hat, residuals)`` on nominal Examples 1-2 windows."""
    model = example_model(cfg.pipeline.detector.sigma_v)
    scen = Scenario(n_runs, 0, 0, (0,) * model.n_s, n_steps, cfg.scenario.spin_profile)
    ds = make_dataset(scen, model, AnomalyEffect(), seed)
    det = cfg.pipeline.detector
    out = []
    for window, _ in ds.entries:
        cps = detect(wglr_profile(window, det), det)
        iv = build_intervals(cps, window.n, cfg.pipeline.delta_k_error)
        seg = fit(window, iv)
        whole = build_intervals([], window.n, 0)
        out.append((rmse(window, iv, seg), rmse(window, whole, naive_fit(window)),
                    estimate_noise_sigma(window), residuals(window, iv, seg)))
    return out


def bench_rmse(cfg: Config, seed, wr: _Writer, b: dict) -> dict:
    recs = rmse_records(cfg, seed, b["rmse_runs"], b["rmse_steps"])
    rows = []
    for i, (r_seg, r_naive, s_hat, _) in enumerate(recs):
        rows.append((i, r_seg, r_naive, s_hat, excess_rmse(r_seg, s_hat), excess_rmse(r_naive, s_hat)))
    wr.table("rmse", ["run", "seg_rmse", "naive_rmse", "sigma_hat", "seg_excess", "naive_excess"], rows)
    seg_ex = np.array([r[4] for r in rows])
    naive_ex = np.array([r[5] for r in rows])
    surv = error_survival([r[3] for r in recs], cfg.pipeline.detector.sigma_v, b["survival_grid"])
    wr.table("survival", ["abs_error", "empirical", "gaussian"], surv.rows())
    svg.scatter_plot(wr.path("rmse.svg"),
                     {"segmented": (np.arange(len(rows)), np.maximum(seg_ex, 1e-6)),
                      "single coefficient": (np.arange(len(rows)), np.maximum(naive_ex, 1e-6))},
                     title="Excess RMSE per run", xlabel="run", ylabel="excess RMSE", logy=True)
    svg.line_plot(wr.path("survival.svg"),
                  {"empirical": (surv.x, surv.empirical), "gaussian": (surv.x, surv.theoretical)},
                  title="Survival of absolute fit errors", xlabel="|error|", ylabel="P(|e| > x)", logy=True)
    ratio = float(seg_ex.mean() / naive_ex.mean()) if naive_ex.mean() > 0 else float("nan")
    return {"mean_seg_excess": float(seg_ex.mean()), "mean_naive_excess": float(naive_ex.mean()),
            "ratio": ratio, "survival_ks": surv.ks_distance()}


# ---------------------------------------------------------------------------
# default-scenario dataset shared by assign, accuracy and bins

def scenario_dataset(cfg: Config, seed, n_runs: int | None = None):
    scen = cfg.scenario
    if n_runs is not None:
        scen = replace(default_scenario(n_runs, scen.n_steps), spin_profile=scen.spin_profile)
    return make_dataset(scen, cfg.model, cfg.effects, seed)


def _match_labels(truth, cps, u, tol):
    """``(matched, correct)``: detected changepoints near a true one, and those labelled with its system."""
    true_k = np.array([c.k for c in truth.changepoints])
    matched = correct = 0
    for k, label in zip(cps, u):
        if true_k.size == 0:
            break
        j = int(np.argmin(np.abs(true_k - k)))
        if abs(int(true_k[j]) - int(k)) <= tol:
            matched += 1
            correct += int(label == truth.changepoints[j].fss)
    return matched, correct


class _Cache:
    def __init__(self, cfg, seed, b):
        self.cfg, self.seed, self.b = cfg, seed, b
        self._ds = None
        self._proc = None

    def dataset(self):
        if self._ds is None:
            self._ds = scenario_dataset(self.cfg, self.seed, self.b["dataset_runs"])
        return self._ds

    def processed(self):
        if self._proc is None:
            pipe = Pipeline(self.cfg.pipeline)
            entries, rows, failures = [], [], []
            ds = self.dataset()
            for i, (window, status) in enumerate(ds.entries):
                try:
                    _, iv, _, res = pipe.process(window)
                except StageError as exc:
                    failures.append((i, str(exc)))
                    continue
                entries.append(ProcessedEntry(res.f_bar_d, res.f_v, res.per_fss, status))
                m, c = _match_labels(ds.ground_truth[i], iv.changepoints, res.u, self.cfg.pipeline.detector.w)
                rows.append((i, status.label, len(res.u), res.rejections, res.iterations, int(res.exact), m, c))
            if not entries:
                raise ValidationError("every window failed processing")
            self._proc = (ProcessedDataset(tuple(entries)), rows, failures)
        return self._proc


def bench_assign(cfg: Config, seed, wr: _Writer, b: dict, cache: _Cache) -> dict:
    _, rows, failures = cache.processed()
    wr.table("assign_runs", ["run", "class", "changepoints", "rejections", "iterations", "exact",
                             "matched", "correctly_labelled"], rows)
    rej = np.array([r[3] for r in rows])
    its = np.array([r[4] for r in rows])
    n = len(rows) + len(failures)
    table = [(str(k), int(np.sum(rej == k)), float(np.mean(rej == k))) for k in range(4)]
    table.append((">3", int(np.sum(rej > 3)), float(np.mean(rej > 3))))
    wr.table("assign_rejections", ["rejections", "runs", "fraction"], table)
    matched = sum(r[6] for r in rows)
    correct = sum(r[7] for r in rows)
    svg.scatter_plot(wr.path("assign.svg"), {"runs": (rej, its)}, title="Search iterations vs rejections",
                     xlabel="rejections", ylabel="iterations")
    return {
        "runs": n,
        "failed_runs": len(failures),
        "frac_le3_rejections": float(np.sum(rej <= 3) / n),
        "mean_iterations": float(its.mean()),
        "max_iterations": int(its.max()),
        "inexact_runs": int(sum(1 - r[5] for r in rows)),
        "label_accuracy": float(correct / matched) if matched else float("nan"),
    }


def bench_accuracy(cfg: Config, seed, wr: _Writer, b: dict, cache: _Cache) -> dict:
    proc, _, _ = cache.processed()
    _, rep = train_all(proc, b["split"], b["repeats"], seed, cfg.pipeline.classifier)
    wr.table("accuracy", ["true_class", "detected", "min", "mean", "max"], rep.to_rows())
    svg.heatmap(wr.path("accuracy.svg"), rep.mean, rep.rows, rep.cols,
                title=f"Mean detection probability ({rep.n_repeats} splits)")
    return {"detection": rep.detection(), "max_cross_detection": rep.cross_detection()}


def bench_bins(cfg: Config, seed, wr: _Writer, b: dict, cache: _Cache) -> dict:
    proc, _, _ = cache.processed()
    rows = []
    for s in range(proc.n_s):
        for nb, tr, va in bin_sweep(proc, s, b["bins"], b["split"], seed, cfg.pipeline.classifier):
            rows.append((f"fss{s + 1}", nb, tr, va))
    wr.table("bins", ["system", "n_bins", "train_hinge", "validation_hinge"], rows)
    series = {}
    for name in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == name]
        series[f"{name} train"] = ([r[1] for r in sel], [r[2] for r in sel])
        series[f"{name} validation"] = ([r[1] for r in sel], [r[3] for r in sel])
    svg.line_plot(wr.path("bins.svg"), series, title="Hinge loss vs histogram bins", xlabel="bins",
                  ylabel="mean hinge loss", logx=True, markers=True)
    return {"bins": [[r[0], r[1], r[2], r[3]] for r in rows]}


# ---------------------------------------------------------------------------
# timing

def bench_timing(cfg: Config, seed, wr: _Writer, b: dict) -> dict:
    seeds = spawn_seeds(seed, 2)
    pipe = Pipeline(cfg.pipeline)
    train_ds = scenario_dataset(cfg, seeds[0], b["timing_train_runs"])
    proc, _ = build_processed_dataset(train_ds, cfg.pipeline, pipe)
    models = fit_models(proc.entries, cfg.pipeline.classifier, seed=seeds[1])
    rows = []
    totals = []
    for i, child in enumerate(spawn_seeds(seeds[1], b["timing_windows"])):
        window, _ = simulate_run(cfg.model, cfg.effects, AnomalyStatus.nominal(cfg.model.n_s), b["timing_steps"],
                                 cfg.scenario.spin_profile, child)
        t0 = time.perf_counter()
        rep = pipe.diagnose(window, models)
        wall = (time.perf_counter() - t0) * 1e3
        for st in STAGES:
            rows.append((i, st, rep.timings_ms[st]))
        rows.append((i, "total", rep.timings_ms["total"]))
        rows.append((i, "wall", wall))
        totals.append(wall)
    wr.table("timing", ["window", "stage", "ms"], rows)
    svg.line_plot(wr.path("timing.svg"),
                  {st: (list(range(b["timing_windows"])), [r[2] for r in rows if r[1] == st])
                   for st in STAGES + ("total",)},
                  title=f"diagnose stage times, {b['timing_steps']} samples", xlabel="window", ylabel="ms",
                  markers=True)
    means = {st: float(np.mean([r[2] for r in rows if r[1] == st])) for st in STAGES + ("total", "wall")}
    return {"steps": b["timing_steps"], "mean_ms": means, "max_wall_ms": float(max(totals))}


# ---------------------------------------------------------------------------

def run_benchmarks(suite: str, cfg: Config | None = None, seed=0, out="bench", fmt: str = "csv") -> dict:
    """Run one suite (or ``all``) and write its outputs under ``out``.

    Returns the summary; it is also written to ``summary.json`` (timing
    figures go to ``timing_summary.json`` so the former stays deterministic).
    """
    cfg = cfg or Config()
    if suite != "all" and suite not in SUITES:
        raise ValidationError(f"unknown suite {suite!r}; expected one of {SUITES + ('all',)}")
    b = bench_settings(cfg)
    wr = _Writer(Path(out), fmt)
    cache = _Cache(cfg, seed, b)
    selected = SUITES if suite == "all" else (suite,)
    summary: dict = {"seed": int(seed) if isinstance(seed, (int, np.integer)) else str(seed)}
    timing = None
    for name in selected:
        log.info("running suite %s", name)
        if name == "cpd":
            summary["cpd"] = bench_cpd(cfg, seed, wr, b)
        elif name == "rmse":
            summary["rmse"] = bench_rmse(cfg, seed, wr, b)
        elif name == "assign":
            summary["assign"] = bench_assign(cfg, seed, wr, b, cache)
        elif name == "accuracy":
            summary["accuracy"] = bench_accuracy(cfg, seed, wr, b, cache)
        elif name == "bins":
            summary["bins"] = bench_bins(cfg, seed, wr, b, cache)
        elif name == "timing":
            timing = bench_timing(cfg, seed, wr, b)
    write_json(wr.path("summary.json"), _jsonable(summary))
    if timing is not None:
        write_json(wr.path("timing_summary.json"), timing)
        summary["timing"] = timing
    summary["files"] = sorted(set(wr.files))
    return summary


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _plain(obj)
