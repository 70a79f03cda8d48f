"""Built-in models, scenarios and pipeline settings, with JSON round-tripping."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .changepoint import DetectorConfig, calibrate_threshold
from .classifier import ClassifierConfig
from .core import FssSpec, RwaModel, ValidationError, countdown_hazard
from .simulator import AnomalyEffect, Scenario, SpinProfile

FLIP = np.array([[0.0, 1.0], [1.0, 0.0]])
THREE_STATE = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]])


def example1_fss() -> FssSpec:
    """Two configurations alternating deterministically, dwell horizons 200 and 2000."""
    return FssSpec(2, countdown_hazard([200, 2000]), FLIP, [(0.0, 0.1), (0.3, 0.4)], "example1")


def example2_fss() -> FssSpec:
    """Three configurations; no jump before 10000 steps, certain jump by 30000."""
    return FssSpec(3, countdown_hazard([30000] * 3, [10000] * 3), THREE_STATE,
                   [(0.0, 0.4), (0.5, 0.9), (1.0, 1.4)], "example2")


def example_model(sigma_v: float = 0.02) -> RwaModel:
    return RwaModel(1.0, 1.0, sigma_v, [example1_fss(), example2_fss()])


def default_fss() -> list[FssSpec]:
    fss1 = FssSpec(2, countdown_hazard([5000, 1200], [1000, 200]), FLIP, [(0.0, 0.02), (0.3, 0.32)], "fss1")
    fss2 = FssSpec(3, countdown_hazard([8000] * 3, [2500] * 3), THREE_STATE,
                   [(0.0, 0.02), (0.25, 0.27), (0.5, 0.52)], "fss2")
    return [fss1, fss2]


def default_model(sigma_v: float = 0.02) -> RwaModel:
    return RwaModel(1.0, 1.0, sigma_v, default_fss())


def default_effects() -> AnomalyEffect:
    return AnomalyEffect(
        dry_shift=1.5,
        viscous_shift=0.2,
        fss_support_override=(
            ((0.0, 0.02), (0.6, 0.62)),
            ((0.0, 0.02), (0.75, 0.77), (1.5, 1.52)),
        ),
    )


def default_scenario(n_runs: int = 500, n_steps: int = 20000) -> Scenario:
    """``n_runs`` windows: 40% nominal, 15% each single-anomaly class."""
    k = round(0.15 * n_runs)
    return Scenario(n_runs - 4 * k, k, k, (k, k), n_steps, SpinProfile())


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorConfig = field(default_factory=lambda: DetectorConfig(
        w=20, W_b=1.0, f_tilde_v=1.0, glr_thr=calibrate_threshold(0.02, 1e-9), sigma_v=0.02))
    delta_k_error: int = 10
    fss_specs: tuple = field(default_factory=lambda: tuple(default_fss()))
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    tau_max_factor: float = 2.0
    hazard_eps: float = 1e-12
    max_expansions: int = 200000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fss_specs", tuple(self.fss_specs))
        if not self.fss_specs:
            raise ValidationError("pipeline needs at least one switching system")
        if self.delta_k_error < 0:
            raise ValidationError("delta_k_error must be non-negative")
        filters = self.classifier.config_filters
        if filters and len(filters) != len(self.fss_specs):
            raise ValidationError("classifier config_filters must list one entry per switching system")

    @property
    def n_s(self) -> int:
        return len(self.fss_specs)

    def tau_max(self, n_m: int) -> int:
        return int(round(self.tau_max_factor * n_m))

    def to_dict(self) -> dict:
        return {
            "detector": self.detector.to_dict(),
            "delta_k_error": self.delta_k_error,
            "fss_specs": [s.to_dict() for s in self.fss_specs],
            "classifier": self.classifier.to_dict(),
            "tau_max_factor": self.tau_max_factor,
            "hazard_eps": self.hazard_eps,
            "max_expansions": self.max_expansions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        base = cls()
        kw = {}
        if "detector" in d:
            kw["detector"] = DetectorConfig(**d["detector"])
        if "fss_specs" in d:
            kw["fss_specs"] = tuple(FssSpec.from_dict(s) for s in d["fss_specs"])
        if "classifier" in d:
            kw["classifier"] = ClassifierConfig.from_dict(d["classifier"])
        for name in ("delta_k_error", "max_expansions", "seed"):
            if name in d:
                kw[name] = int(d[name])
        for name in ("tau_max_factor", "hazard_eps"):
            if name in d:
                kw[name] = float(d[name])
        return replace(base, **kw)


@dataclass(frozen=True)
class Config:
    """Everything a CLI run needs: the simulated model, anomaly effects, scenario and pipeline."""

    model: RwaModel = field(default_factory=default_model)
    effects: AnomalyEffect = field(default_factory=default_effects)
    scenario: Scenario = field(default_factory=default_scenario)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    bench: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model.n_s != self.pipeline.n_s:
            raise ValidationError("model and pipeline disagree on the number of switching systems")
        if len(self.scenario.fss) != self.model.n_s:
            raise ValidationError("scenario and model disagree on the number of switching systems")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "effects": self.effects.to_dict(),
            "scenario": self.scenario.to_dict(),
            "pipeline": self.pipeline.to_dict(),
            "bench": dict(self.bench),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        model = RwaModel.from_dict(d["model"]) if "model" in d else default_model()
        pipe = d.get("pipeline", {})
        if "fss_specs" not in pipe and "model" in d:
            pipe = {**pipe, "fss_specs": [s.to_dict() for s in model.fss]}
        return cls(
            model=model,
            effects=AnomalyEffect.from_dict(d["effects"]) if "effects" in d else default_effects(),
            scenario=Scenario.from_dict(d["scenario"]) if "scenario" in d else default_scenario(),
            pipeline=PipelineConfig.from_dict(pipe),
            bench=dict(d.get("bench", {})),
        )


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    try:
        cfg = Config.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    cfg.model.validate()
    return cfg
