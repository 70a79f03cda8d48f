"""Four-stage diagnosis: detect, fit, assign, classify."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .assignment import AssignmentProblem, AssignmentResult, assign, events_from_fit
from .changepoint import ChangepointList, detect, wglr_profile
from .classifier import AnomalyModels, ProcessedDataset, ProcessedEntry
from .config import PipelineConfig
from .core import AnomalyStatus, LabeledDataset, TelemetryWindow, ValidationError
from .estimation import IntervalSet, SegmentedFit, build_intervals, fit

log = logging.getLogger(__name__)

STAGES = ("changepoint", "estimation", "assignment", "classification")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class DiagnosisReport:
    theta_hat: AnomalyStatus | None
    timings_ms: dict
    changepoints: ChangepointList | None = None
    intervals: IntervalSet | None = None
    fit: SegmentedFit | None = None
    assignment: AssignmentResult | None = None

    def to_dict(self, embed: bool = True, timings: bool = True) -> dict:
        d = {"theta_hat": None if self.theta_hat is None else self.theta_hat.to_vector()}
        if self.theta_hat is not None:
            d["label"] = self.theta_hat.label
        if timings:
            d["timings_ms"] = dict(self.timings_ms)
        if embed:
            d["changepoints"] = self.changepoints.to_dict() if self.changepoints else None
            d["intervals"] = self.intervals.to_dict() if self.intervals else None
            d["fit"] = self.fit.to_dict() if self.fit else None
            d["assignment"] = self.assignment.to_dict() if self.assignment else None
        return d


class Pipeline:
    """Holds the precomputed assignment tables so repeated diagnoses share them."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._problems: dict = {}

    def problem(self, n_m: int) -> AssignmentProblem:
        tau_max = self.cfg.tau_max(n_m)
        if tau_max not in self._problems:
            self._problems[tau_max] = AssignmentProblem(
                self.cfg.fss_specs, self.cfg.detector.sigma_v, tau_max, self.cfg.hazard_eps)
        return self._problems[tau_max]

    def detect(self, window: TelemetryWindow) -> ChangepointList:
        return detect(wglr_profile(window, self.cfg.detector), self.cfg.detector)

    def estimate(self, window: TelemetryWindow, cps) -> tuple[IntervalSet, SegmentedFit]:
        iv = build_intervals(cps, window.n, self.cfg.delta_k_error)
        return iv, fit(window, iv)

    def assign(self, iv: IntervalSet, seg: SegmentedFit, n_m: int) -> AssignmentResult:
        events = events_from_fit(iv.changepoints, seg.F, seg.rejection_costs)
        return assign(events, self.cfg.fss_specs, F_hat=seg.F, f_v=seg.f_v,
                      max_expansions=self.cfg.max_expansions, problem=self.problem(n_m))

    def process(self, window: TelemetryWindow, timings: dict | None = None):
        """Run the first three stages; returns ``(changepoints, intervals, fit, assignment)``."""
        timings = {} if timings is None else timings
        with _stage("changepoint", timings):
            cps = self.detect(window)
        with _stage("estimation", timings):
            iv, seg = self.estimate(window, cps)
        with _stage("assignment", timings):
            res = self.assign(iv, seg, window.n)
        return cps, iv, seg, res

    def diagnose(self, window: TelemetryWindow, models: AnomalyModels) -> DiagnosisReport:
        if models.n_s != self.cfg.n_s:
            raise ValidationError("trained models do not match the configured switching systems")
        timings: dict = {}
        cps, iv, seg, res = self.process(window, timings)
        with _stage("classification", timings):
            theta = models.predict(res.f_bar_d, res.f_v, res.per_fss)
        timings["total"] = sum(timings[s] for s in STAGES)
        return DiagnosisReport(theta, timings, cps, iv, seg, res)


class _stage:
    def __init__(self, name, timings):
        self.name, self.timings = name, timings

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, et, ev, tb):
        self.timings[self.name] = (time.perf_counter() - self.t0) * 1e3
        if ev is not None and not isinstance(ev, StageError):
            raise StageError(self.name, ev) from ev
        return False


def diagnose(window: TelemetryWindow, cfg: PipelineConfig, models: AnomalyModels) -> DiagnosisReport:
    return Pipeline(cfg).diagnose(window, models)


def build_processed_dataset(dataset: LabeledDataset, cfg: PipelineConfig,
                            pipeline: Pipeline | None = None) -> tuple[ProcessedDataset, list]:
    """Detect, fit and assign every window. Windows whose processing fails are
    skipped and returned as ``(index, error message)`` pairs."""
    pipe = pipeline or Pipeline(cfg)
    entries, failures = [], []
    for i, (window, status) in enumerate(dataset.entries):
        try:
            _, _, _, res = pipe.process(window)
        except StageError as exc:
            log.warning("window %d skipped: %s", i, exc)
            failures.append((i, str(exc)))
            continue
        entries.append(ProcessedEntry(res.f_bar_d, res.f_v, res.per_fss, status))
    if not entries:
        raise ValidationError("every window failed processing")
    return ProcessedDataset(tuple(entries)), failures


def processed_with_results(dataset: LabeledDataset, cfg: PipelineConfig, pipeline: Pipeline | None = None):
    """Like :func:`build_processed_dataset` but also returns every stage output per window."""
    pipe = pipeline or Pipeline(cfg)
    out = []
    for window, status in dataset.entries:
        timings: dict = {}
        try:
            stages = pipe.process(window, timings)
        except StageError as exc:
            out.append((status, None, timings, exc))
            continue
        out.append((status, stages, timings, None))
    return out
