"""Segmented least-squares friction estimation between changepoints.

The design has one indicator column per interval (carrying ``sign(omega)``)
and one shared spin-rate column. Its normal equations are an arrow matrix,
so the viscous coefficient is solved from pooled within-interval moments and
the dry coefficients follow by back-substitution in O(N).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import TelemetryWindow, UnidentifiableError, ValidationError, sign

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple  # inclusive (k_o, k_f) pairs
    changepoints: tuple  # changepoints kept after the degenerate-interval policy
    delta_k_error: int
    n_m: int
    dropped: tuple = ()

    def __len__(self):
        return len(self.intervals)

    def mask(self) -> np.ndarray:
        """Samples that belong to some interval (guard bands excluded)."""
        m = np.zeros(self.n_m, dtype=bool)
        for a, b in self.intervals:
            m[a:b + 1] = True
        return m

    def to_dict(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "changepoints": list(self.changepoints),
            "delta_k_error": self.delta_k_error,
            "n_m": self.n_m,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntervalSet":
        return cls(
            tuple(tuple(iv) for iv in d["intervals"]),
            tuple(d["changepoints"]),
            int(d["delta_k_error"]),
            int(d["n_m"]),
            tuple(d.get("dropped", ())),
        )


def _bounds(cps, n_m, guards):
    out = []
    for i, g in enumerate(guards):
        start = 0 if i == 0 else cps[i - 1] + g
        stop = n_m - 1 if i == len(cps) else cps[i] - max(g, 1)
        out.append((start, stop))
    return out


def build_intervals(changepoints, n_m: int, delta_k_error: int) -> IntervalSet:
    """Intervals between changepoints with a guard band of ``delta_k_error`` on each side.

    A changepoint index is the first sample after the change. An interval
    left with fewer than 2 samples first has its own guard bands shrunk
    (down to zero); if that is not enough, the changepoint shared with its
    shorter neighbour is dropped and the two intervals merge.
    """
    cps = sorted(int(k) for k in getattr(changepoints, "indices", changepoints))
    if any(not 0 <= k < n_m for k in cps):
        raise ValidationError("changepoint outside the window")
    if len(set(cps)) != len(cps):
        raise ValidationError("duplicate changepoints")
    if n_m < 2:
        raise ValidationError("over-segmented window")
    g0 = max(int(delta_k_error), 0)
    dropped = []
    while True:
        guards = [g0] * (len(cps) + 1)
        bounds = _bounds(cps, n_m, guards)
        bad = None
        for i in range(len(bounds)):
            while bounds[i][1] - bounds[i][0] + 1 < 2 and guards[i] > 0:
                guards[i] -= 1
                bounds = _bounds(cps, n_m, guards)
            if bounds[i][1] - bounds[i][0] + 1 < 2:
                bad = i
                break
        if bad is None:
            break
        # merge with the shorter neighbour: drop the changepoint between them
        left = bounds[bad - 1][1] - bounds[bad - 1][0] if bad > 0 else math.inf
        right = bounds[bad + 1][1] - bounds[bad + 1][0] if bad + 1 < len(bounds) else math.inf
        drop = bad - 1 if left <= right else bad
        if not 0 <= drop < len(cps):
            raise ValidationError("over-segmented window")
        log.warning("dropping changepoint %d: interval too short", cps[drop])
        dropped.append(cps.pop(drop))
    return IntervalSet(tuple(bounds), tuple(cps), g0, n_m, tuple(dropped))


@dataclass(frozen=True)
class SegmentedFit:
    F: np.ndarray
    f_v: float
    gram_diag: np.ndarray
    rejection_costs: np.ndarray
    sse: float

    def to_dict(self) -> dict:
        return {
            "F": self.F.tolist(),
            "f_v": self.f_v,
            "gram_diag": self.gram_diag.tolist(),
            "rejection_costs": self.rejection_costs.tolist(),
            "sse": self.sse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentedFit":
        return cls(
            np.asarray(d["F"], dtype=float),
            float(d["f_v"]),
            np.asarray(d["gram_diag"], dtype=float),
            np.asarray(d["rejection_costs"], dtype=float),
            float(d["sse"]),
        )


def rejection_costs(F: np.ndarray, gram_diag: np.ndarray) -> np.ndarray:
    """Increase in squared error from merging neighbouring intervals (dry terms only)."""
    g1, g2 = gram_diag[:-1], gram_diag[1:]
    return g1 * g2 / (g1 + g2) * np.diff(F) ** 2


def fit(window: TelemetryWindow, intervals: IntervalSet) -> SegmentedFit:
    """Least-squares dry coefficient per interval and one shared viscous coefficient."""
    if intervals.n_m != window.n:
        raise ValidationError("interval set was built for a different window length")
    x = np.abs(window.omega)
    y = sign(window.omega) * window.f_hat
    m = len(intervals)
    n = np.empty(m)
    mx = np.empty(m)
    my = np.empty(m)
    cxx = np.empty(m)
    cxy = np.empty(m)
    cyy = np.empty(m)
    for i, (a, b) in enumerate(intervals.intervals):
        if b - a + 1 < 2:
            raise ValidationError(f"interval {i} has fewer than 2 samples")
        xi, yi = x[a:b + 1], y[a:b + 1]
        n[i] = xi.size
        mx[i], my[i] = xi.mean(), yi.mean()
        dx, dy = xi - mx[i], yi - my[i]
        cxx[i], cxy[i], cyy[i] = dx @ dx, dx @ dy, dy @ dy
    sxx = cxx.sum()
    scale = float(n @ (mx * mx)) + sxx
    if sxx <= 1e-13 * max(scale, 1.0):
        raise UnidentifiableError("unidentifiable viscous coefficient")
    f_v = cxy.sum() / sxx
    F = my - f_v * mx
    sse = float(max(cyy.sum() - cxy.sum() ** 2 / sxx, 0.0))
    return SegmentedFit(F, float(f_v), n, rejection_costs(F, n), sse)


def naive_fit(window: TelemetryWindow) -> SegmentedFit:
    """Single dry coefficient over the whole window."""
    return fit(window, build_intervals([], window.n, 0))


def residuals(window: TelemetryWindow, intervals: IntervalSet, seg: SegmentedFit) -> np.ndarray:
    """Residuals of the in-interval samples, in interval order."""
    out = []
    for i, (a, b) in enumerate(intervals.intervals):
        om = window.omega[a:b + 1]
        out.append(window.f_hat[a:b + 1] - seg.F[i] * sign(om) - seg.f_v * om)
    return np.concatenate(out)


def rmse(window: TelemetryWindow, intervals: IntervalSet, seg: SegmentedFit) -> float:
    r = residuals(window, intervals, seg)
    return float(np.sqrt(np.mean(r * r)))


def excess_rmse(rmse_value: float, sigma_hat: float) -> float:
    return max(rmse_value - sigma_hat, 0.0)


_MAD_TO_SIGMA = 1.0 / (math.sqrt(2.0) * stats.norm.ppf(0.75))


def estimate_noise_sigma(window, short: int = 512) -> float:
    """Robust noise scale from first differences.

    ``median |f_{k+1} - f_k| / (sqrt(2) * 0.6745)`` over the first ``short``
    samples and over the whole series; the smaller value is returned.
    """
    f = np.asarray(getattr(window, "f_hat", window), dtype=float)
    if f.size < 32:
        raise ValidationError("need at least 32 samples to estimate the noise level")
    d = np.abs(np.diff(f))
    head = float(np.median(d[: max(short - 1, 1)]))
    full = float(np.median(d))
    return min(head, full) * _MAD_TO_SIGMA


@dataclass(frozen=True)
class SurvivalCurve:
    x: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    sigma: float
    n: int

    def ks_distance(self) -> float:
        """Sup distance, checking both sides of each empirical step."""
        left = np.abs(self.empirical - self.theoretical)
        right = np.abs(self.empirical - 1.0 / self.n - self.theoretical)[1:]
        return float(max(left.max(), right.max(initial=0.0)))

    def rows(self):
        return zip(self.x.tolist(), self.empirical.tolist(), self.theoretical.tolist())


def error_survival(residual_sets, sigma_hat: float | None = None, n_grid: int | None = None) -> SurvivalCurve:
    """Empirical survival of pooled absolute residuals vs. the Gaussian ``2 (1 - Phi(x / sigma))``.

    Without ``sigma_hat`` the scale is the pooled median absolute residual
    divided by 0.6745. ``n_grid`` subsamples the curve for output.
    """
    r = np.abs(np.concatenate([np.asarray(s, dtype=float).ravel() for s in residual_sets]))
    if r.size == 0:
        raise ValidationError("no residuals")
    if sigma_hat is None:
        sigma_hat = float(np.median(r) / stats.norm.ppf(0.75))
    xs = np.sort(r)
    # survival at (just before) each order statistic, with S(0) = 1 prepended
    emp = 1.0 - np.arange(xs.size) / xs.size
    xs = np.r_[0.0, xs]
    emp = np.r_[1.0, emp]
    if sigma_hat > 0:
        theo = 2.0 * stats.norm.sf(xs / sigma_hat)
    else:
        theo = (xs == 0).astype(float)
    n = r.size
    if n_grid and xs.size > n_grid:
        pick = np.unique(np.linspace(0, xs.size - 1, n_grid).round().astype(int))
        xs, emp, theo = xs[pick], emp[pick], theo[pick]
    return SurvivalCurve(xs, emp, theo, float(sigma_hat), n)
