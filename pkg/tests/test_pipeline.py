import json

import numpy as np
import pytest

from frictiondiag.classifier import ProcessedDataset
from frictiondiag.config import Config, PipelineConfig, load_config
from frictiondiag.core import AnomalyStatus, LabeledDataset, TelemetryWindow, ValidationError
from frictiondiag.pipeline import Pipeline, StageError, build_processed_dataset, diagnose
from frictiondiag.simulator import simulate_run


def window_for(cfg, label, seed, n_steps=20000):
    names = ["dry", "viscous", "fss1", "fss2"]
    status = AnomalyStatus.from_vector([label == n for n in names])
    win, _ = simulate_run(cfg.model, cfg.effects, status, n_steps, cfg.scenario.spin_profile, seed)
    return win


class TestDiagnose:
    def test_nominal(self, cfg, pipeline, small_models):
        rep = pipeline.diagnose(window_for(cfg, "nominal", 1001), small_models)
        assert rep.theta_hat.to_vector() == [0, 0, 0, 0]

    def test_dry(self, cfg, pipeline, small_models):
        rep = pipeline.diagnose(window_for(cfg, "dry", 1002), small_models)
        assert rep.theta_hat.theta_d

    def test_stage_outputs_and_timings(self, cfg, pipeline, small_models):
        rep = pipeline.diagnose(window_for(cfg, "fss1", 1003), small_models)
        assert set(rep.timings_ms) == {"changepoint", "estimation", "assignment", "classification", "total"}
        assert all(v >= 0 for v in rep.timings_ms.values())
        assert len(rep.intervals) == len(rep.changepoints) - len(rep.intervals.dropped) + 1
        assert len(rep.assignment.u) == len(rep.intervals.changepoints)

    def test_short_window(self, cfg, pipeline, small_models):
        win = window_for(cfg, "nominal", 1, n_steps=30)
        with pytest.raises(StageError, match="window too short") as exc:
            pipeline.diagnose(win, small_models)
        assert exc.value.stage == "changepoint"
        assert isinstance(exc.value.cause, ValidationError)

    def test_deterministic(self, cfg, small_models):
        win = window_for(cfg, "fss2", 1004)
        a = diagnose(win, cfg.pipeline, small_models).to_dict(timings=False)
        b = diagnose(win, cfg.pipeline, small_models).to_dict(timings=False)
        assert json.dumps(a) == json.dumps(b)

    def test_stages_compose(self, cfg, pipeline, small_models):
        win = window_for(cfg, "viscous", 1005)
        cps = pipeline.detect(win)
        iv, seg = pipeline.estimate(win, cps)
        res = pipeline.assign(iv, seg, win.n)
        theta = small_models.predict(res.f_bar_d, res.f_v, res.per_fss)
        assert theta == pipeline.diagnose(win, small_models).theta_hat

    def test_model_mismatch(self, cfg, pipeline, small_models):
        one = PipelineConfig(fss_specs=cfg.pipeline.fss_specs[:1])
        with pytest.raises(ValidationError):
            Pipeline(one).diagnose(window_for(cfg, "nominal", 1), small_models)


class TestProcessedDataset:
    def test_failures_are_reported(self, cfg):
        good = window_for(cfg, "nominal", 7, n_steps=3000)
        short = TelemetryWindow(np.ones(10), np.ones(10))
        ds = LabeledDataset([(good, AnomalyStatus.nominal(2)), (short, AnomalyStatus.nominal(2))])
        proc, failures = build_processed_dataset(ds, cfg.pipeline)
        assert len(proc) == 1 and failures[0][0] == 1 and "window too short" in failures[0][1]

    def test_all_failed(self, cfg):
        short = TelemetryWindow(np.ones(10), np.ones(10))
        with pytest.raises(ValidationError):
            build_processed_dataset(LabeledDataset([(short, AnomalyStatus.nominal(2))]), cfg.pipeline)

    def test_size(self, small_processed, small_dataset):
        assert isinstance(small_processed, ProcessedDataset)
        assert len(small_processed) == len(small_dataset)


class TestConfig:
    def test_round_trip(self):
        c = Config()
        assert Config.from_dict(json.loads(json.dumps(c.to_dict()))).to_dict() == c.to_dict()

    def test_load_errors(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ValidationError):
            load_config(p)
        p.write_text("[1, 2]")
        with pytest.raises(ValidationError):
            load_config(p)

    def test_default_when_missing(self):
        assert load_config(None).to_dict() == Config().to_dict()
