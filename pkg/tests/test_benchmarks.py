import math
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from frictiondiag import svg
from frictiondiag.benchmarks import arl_ratio, bench_settings, rmse_records, run_benchmarks
from frictiondiag.config import Config
from frictiondiag.core import ValidationError

# rows: w, W_b, nc, thr, alarms, points, arl, censored
ROWS = [
    [20, 1e-8, 1.0, 2.0, 50, 1000, 20.0, False],
    [20, 1e-4, 1.0, 2.0, 0, 1000, math.inf, True],
    [20, 1e-2, 1.0, 2.0, 2, 1000, 500.0, False],
]


class TestArlRatio:
    def test_censored_counts_as_budget(self):
        assert arl_ratio(ROWS, 20, 1e-8, 1e-4) == pytest.approx(1000 / 20)

    def test_uncensored(self):
        assert arl_ratio(ROWS, 20, 1e-8, 1e-2) == pytest.approx(25.0)

    def test_missing_cell(self):
        with pytest.raises(ValidationError):
            arl_ratio(ROWS, 50, 1e-8, 1e-4)


class TestSettings:
    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="unknown bench settings"):
            bench_settings(replace(Config(), bench={"nope": 1}))

    def test_unknown_suite(self, tmp_path):
        with pytest.raises(ValidationError):
            run_benchmarks("everything", out=tmp_path)

    def test_override(self):
        assert bench_settings(replace(Config(), bench={"repeats": 3}))["repeats"] == 3


class TestSvg:
    def test_line_plot_is_xml(self, tmp_path):
        p = tmp_path / "a.svg"
        svg.line_plot(p, {"a": ([1, 10, 100], [1e-3, 1e-2, np.nan]), "b": ([1, 2], [0, 0])},
                      title="t & u", logx=True, logy=True, markers=True)
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")

    def test_heatmap_and_scatter(self, tmp_path):
        svg.heatmap(tmp_path / "h.svg", [[0.1, 0.9], [np.nan, 0.5]], ["r1", "r2"], ["c1", "c2"])
        svg.scatter_plot(tmp_path / "s.svg", {"x": ([0, 1], [1, 0])})
        for name in ("h.svg", "s.svg"):
            ET.parse(tmp_path / name)

    def test_deterministic(self, tmp_path):
        for name in ("a.svg", "b.svg"):
            svg.line_plot(tmp_path / name, {"s": ([0, 1, 2], [3, 1, 2])})
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


class TestSuites:
    def test_rmse_records_segmented_better(self):
        recs = rmse_records(Config(), 0, 3, 20000)
        for seg, naive, sigma, _ in recs:
            assert seg <= naive + 1e-12 and sigma > 0

    def test_cpd_summary(self, tmp_path):
        cfg = replace(Config(), bench=dict(cpd_ws=[10, 20], cpd_delta_sigmas=[3.0, 5.0], cpd_W_bs=[1e-8, 1e-4],
                                           cpd_arl_ws=[20], cpd_mdr_trials=20, cpd_arl_windows=1,
                                           cpd_arl_points=5000))
        s = run_benchmarks("cpd", cfg, seed=1, out=tmp_path, fmt="json")
        assert {"cpd_mdr.json", "cpd_arl.json", "summary.json"} <= set(s["files"])
        for f in s["files"]:
            assert (tmp_path / f).is_file()
