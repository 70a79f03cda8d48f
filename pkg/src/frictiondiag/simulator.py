"""Synthetic friction telemetry from the switching-system friction model.

A switching system in state ``(q, f, tau)`` jumps at a step with probability
``h(q, tau)``; the state reached by a jump decided at step ``k`` is the state
of step ``k + 1``, which is where the ground-truth changepoint is recorded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    AnomalyStatus,
    FssSpec,
    LabeledDataset,
    RawTelemetry,
    RwaModel,
    TelemetryWindow,
    ValidationError,
    log1m,
    make_rng,
    sign,
    spawn_seeds,
    validate_fss_spec,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FssState:
    q: int
    f: float
    tau: int


@dataclass(frozen=True)
class Changepoint:
    k: int
    fss: int
    q_old: int
    q_new: int


@dataclass(frozen=True)
class GroundTruth:
    changepoints: tuple
    q: np.ndarray  # (N_s, n_steps) configuration per step
    f: np.ndarray  # (N_s, n_steps) friction contribution per step
    base_dry: float
    viscous: float

    def to_dict(self) -> dict:
        return {
            "changepoints": [[c.k, c.fss, c.q_old, c.q_new] for c in self.changepoints],
            "base_dry": self.base_dry,
            "viscous": self.viscous,
            "segments": [_segments(self.q[s], self.f[s]) for s in range(self.q.shape[0])],
        }


def _segments(q, f):
    """Run-length encoding ``[start, q, f]`` of one system's trajectory."""
    starts = np.flatnonzero(np.r_[True, (q[1:] != q[:-1]) | (f[1:] != f[:-1])])
    return [[int(k), int(q[k]), float(f[k])] for k in starts]


@dataclass(frozen=True)
class AnomalyEffect:
    dry_shift: float = 0.0
    viscous_shift: float = 0.0
    fss_support_override: tuple = ()  # per system: replacement supports or None

    def __post_init__(self):
        object.__setattr__(
            self,
            "fss_support_override",
            tuple(None if s is None else tuple(tuple(map(float, iv)) for iv in s) for s in self.fss_support_override),
        )

    def apply(self, model: RwaModel, status: AnomalyStatus) -> RwaModel:
        """The model as seen by a wheel with anomaly status ``status``."""
        if len(status.theta_s) != model.n_s:
            raise ValidationError("anomaly status does not match the number of switching systems")
        fss = list(model.fss)
        for s, active in enumerate(status.theta_s):
            if not active:
                continue
            override = self.fss_support_override[s] if s < len(self.fss_support_override) else None
            if override is None:
                raise ValidationError(f"no friction override defined for switching system {s + 1}")
            fss[s] = fss[s].with_support(override)
            problems = validate_fss_spec(fss[s])
            if problems:
                raise ValidationError(f"override for system {s + 1} is invalid: " + "; ".join(problems))
        return RwaModel(
            f_bar_d=model.f_bar_d + (self.dry_shift if status.theta_d else 0.0),
            f_v=model.f_v + (self.viscous_shift if status.theta_v else 0.0),
            sigma_v=model.sigma_v,
            fss=fss,
        )

    def to_dict(self) -> dict:
        return {
            "dry_shift": self.dry_shift,
            "viscous_shift": self.viscous_shift,
            "fss_support_override": [None if s is None else [list(iv) for iv in s] for s in self.fss_support_override],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyEffect":
        return cls(
            float(d.get("dry_shift", 0.0)),
            float(d.get("viscous_shift", 0.0)),
            tuple(d.get("fss_support_override", ())),
        )


@dataclass(frozen=True)
class SpinProfile:
    """Spin rate generator: constant, piecewise-linear knots, or triangle sweep.

    ``knots`` are ``(fraction of window, omega)`` pairs; ``triangle`` sweeps
    between ``lo`` and ``hi`` with the given period in steps.
    """

    kind: str = "triangle"
    value: float = 1.0
    lo: float = 0.5
    hi: float = 1.5
    period: float | None = None
    knots: tuple = ()

    def sample(self, n: int) -> np.ndarray:
        k = np.arange(n, dtype=float)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "triangle":
            period = float(self.period) if self.period else 2.0 * max(n - 1, 1)
            phase = (k / period) % 1.0
            tri = 1.0 - np.abs(2.0 * phase - 1.0)  # 0 -> 1 -> 0
            return self.lo + (self.hi - self.lo) * tri
        if self.kind == "piecewise":
            if len(self.knots) < 2:
                raise ValidationError("piecewise spin profile needs at least two knots")
            xs, ys = zip(*self.knots)
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValidationError("spin profile knots must be increasing")
            return np.interp(k / max(n - 1, 1), xs, ys)
        raise ValidationError(f"unknown spin profile kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "triangle":
            d.update(lo=self.lo, hi=self.hi, period=self.period)
        else:
            d["knots"] = [list(x) for x in self.knots]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpinProfile":
        d = dict(d)
        if "knots" in d:
            d["knots"] = tuple(tuple(x) for x in d["knots"])
        return cls(**d)


# ---------------------------------------------------------------------------
# switching-system dynamics

def draw_friction(spec: FssSpec, q: int, rng) -> float:
    lo, hi = spec.support[q - 1]
    return float(rng.uniform(lo, hi))


def draw_next_config(spec: FssSpec, q: int, rng) -> int:
    probs = spec.q_transition[q - 1]
    return int(rng.choice(spec.q_max, p=probs / probs.sum())) + 1


def step_fss(state: FssState, spec: FssSpec, rng) -> FssState:
    """Advance one step: jump with probability ``h(q, tau)``, else age by one."""
    rng = make_rng(rng)
    if rng.random() < spec.hazard(state.q, state.tau):
        q_new = draw_next_config(spec, state.q, rng)
        return FssState(q_new, draw_friction(spec, q_new, rng), 0)
    return FssState(state.q, state.f, state.tau + 1)


class _DwellSampler:
    """Samples the step at which a system leaves its configuration.

    Uses the cumulative log-survival of the hazard table, so one draw replaces
    a run of single-step Bernoulli trials with identical distribution.
    """

    def __init__(self, spec: FssSpec):
        tab = spec.hazard.table
        self.cap = spec.hazard.tau_cap
        logs = log1m(tab)  # (q_max, cap+1)
        # L[q, t] = -sum_{tau < t} log(1 - h): cumulative hazard, non-decreasing
        self.cum = np.concatenate([np.zeros((tab.shape[0], 1)), np.cumsum(-logs, axis=1)], axis=1)
        self.tail = tab[:, -1]

    def jump_tau(self, q: int, tau: int, rng) -> float:
        """``tau`` value of the step whose decision is a jump (inf if never)."""
        e = rng.exponential()
        row = self.cum[q - 1]
        tau = int(tau)
        if tau <= self.cap:
            target = row[tau] + e
            # first t >= tau with row[t + 1] >= target
            t = int(np.searchsorted(row, target, side="left")) - 1
            if t <= self.cap:
                return float(max(t, tau))
            e = target - row[self.cap + 1]
            tau = self.cap + 1
        h = self.tail[q - 1]
        if h <= 0.0:
            return np.inf
        if h >= 1.0:
            return float(tau)
        # geometric tail: first success among trials tau, tau+1, ...
        return float(tau + np.floor(e / -np.log1p(-h)))


def simulate_fss(spec: FssSpec, n_steps: int, rng, initial: FssState | None = None):
    """Trajectory ``(q, f)`` arrays and jump list ``[(k, q_old, q_new)]`` of one system."""
    rng = make_rng(rng)
    if initial is None:
        q0 = int(rng.integers(1, spec.q_max + 1))
        initial = FssState(q0, draw_friction(spec, q0, rng), 0)
    sampler = _DwellSampler(spec)
    q = np.empty(n_steps, dtype=np.int64)
    f = np.empty(n_steps)
    jumps = []
    k, state = 0, initial
    while k < n_steps:
        t_jump = sampler.jump_tau(state.q, state.tau, rng)
        k_next = k + (t_jump - state.tau) + 1  # first step in the new configuration
        stop = int(min(k_next, n_steps))
        q[k:stop] = state.q
        f[k:stop] = state.f
        if k_next >= n_steps:
            break
        k_next = int(k_next)
        q_new = draw_next_config(spec, state.q, rng)
        jumps.append((k_next, state.q, q_new))
        state = FssState(q_new, draw_friction(spec, q_new, rng), 0)
        k = k_next
    return q, f, jumps


def simulate_run(
    model: RwaModel,
    effects: AnomalyEffect | None = None,
    status: AnomalyStatus | None = None,
    n_steps: int = 20000,
    spin_profile: SpinProfile | None = None,
    seed=None,
    noise: bool = True,
):
    """One telemetry window plus ground truth.

    ``f_hat = (f_bar_d + sum_s f_s) * sign(omega) + f_v * omega + v``.
    """
    model.validate()
    if n_steps < 2:
        raise ValidationError("n_steps must be at least 2")
    status = status or AnomalyStatus.nominal(model.n_s)
    effective = (effects or AnomalyEffect()).apply(model, status)
    omega = (spin_profile or SpinProfile()).sample(n_steps)
    if not np.all(np.isfinite(omega)):
        raise ValidationError("spin profile produced non-finite values")
    rng = make_rng(seed)
    qs, fs, cps = [], [], []
    for s, spec in enumerate(effective.fss, start=1):
        q, f, jumps = simulate_fss(spec, n_steps, rng)
        qs.append(q)
        fs.append(f)
        cps.extend((k, s, a, b) for k, a, b in jumps)
    cps.sort()
    f_dry = effective.f_bar_d + np.sum(fs, axis=0)
    f_hat = f_dry * sign(omega) + effective.f_v * omega
    if noise:
        f_hat = f_hat + rng.normal(0.0, effective.sigma_v, n_steps)
    truth = GroundTruth(
        changepoints=tuple(_changepoint(*c) for c in cps),
        q=np.array(qs),
        f=np.array(fs),
        base_dry=effective.f_bar_d,
        viscous=effective.f_v,
    )
    return TelemetryWindow(omega, f_hat), truth


def _changepoint(k, s, a, b):
    return Changepoint(int(k), int(s), int(a), int(b))


def friction_from_raw(raw: RawTelemetry) -> TelemetryWindow:
    """Central-difference friction estimate; the two endpoints are dropped."""
    if raw.t.size < 3:
        raise ValidationError("need at least 3 raw samples")
    domega = raw.omega[2:] - raw.omega[:-2]
    dt = raw.t[2:] - raw.t[:-2]
    f_hat = raw.J * domega / dt - raw.K_T * raw.I[1:-1]
    return TelemetryWindow(raw.omega[1:-1], f_hat)


# ---------------------------------------------------------------------------
# datasets

@dataclass(frozen=True)
class Scenario:
    """How many windows of each anomaly class to simulate."""

    nominal: int = 100
    dry: int = 25
    viscous: int = 25
    fss: tuple = (25, 25)
    n_steps: int = 20000
    spin_profile: SpinProfile = field(default_factory=SpinProfile)

    def statuses(self, n_s: int) -> list[AnomalyStatus]:
        if len(self.fss) != n_s:
            raise ValidationError("scenario fss counts do not match the model")
        out = [AnomalyStatus.nominal(n_s)] * self.nominal
        out += [AnomalyStatus(True, False, (False,) * n_s)] * self.dry
        out += [AnomalyStatus(False, True, (False,) * n_s)] * self.viscous
        for s, count in enumerate(self.fss):
            flags = tuple(i == s for i in range(n_s))
            out += [AnomalyStatus(False, False, flags)] * count
        return out

    def to_dict(self) -> dict:
        return {
            "nominal": self.nominal,
            "dry": self.dry,
            "viscous": self.viscous,
            "fss": list(self.fss),
            "n_steps": self.n_steps,
            "spin_profile": self.spin_profile.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        if "spin_profile" in d:
            d["spin_profile"] = SpinProfile.from_dict(d["spin_profile"])
        if "fss" in d:
            d["fss"] = tuple(d["fss"])
        return cls(**d)


def make_dataset(scenario: Scenario, model: RwaModel, effects: AnomalyEffect, seed=0) -> LabeledDataset:
    """Simulate every requested window; entry ``i`` uses child seed ``i``."""
    statuses = scenario.statuses(model.n_s)
    if not statuses:
        raise ValidationError("scenario requests no windows")
    entries, truths = [], []
    for status, child in zip(statuses, spawn_seeds(seed, len(statuses))):
        window, truth = simulate_run(model, effects, status, scenario.n_steps, scenario.spin_profile, child)
        entries.append((window, status))
        truths.append(truth)
    log.debug("simulated %d windows", len(entries))
    return LabeledDataset(entries, truths)
