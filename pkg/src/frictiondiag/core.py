"""Shared domain types for reaction-wheel friction telemetry.

Configurations are 1-based throughout (``1..q_max``); array storage is
0-based, so ``table[q - 1]`` holds the row of configuration ``q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Invalid model, configuration or input data."""


class UnidentifiableError(ValueError):
    """The viscous coefficient cannot be separated from the dry terms."""


def sign(x):
    """Sign with ``sign(0) = +1`` (no dead band at zero spin rate)."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def make_rng(seed) -> np.random.Generator:
    """Deterministic random source. Accepts an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, stable for a given master seed.

    A ``SeedSequence`` argument is not advanced: repeated calls with the same
    object return the same children.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    else:
        ss = np.random.SeedSequence(seed)
    return ss.spawn(n)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TelemetryWindow:
    omega: np.ndarray
    f_hat: np.ndarray

    def __post_init__(self):
        omega = _frozen(self.omega)
        f_hat = _frozen(self.f_hat)
        if omega.ndim != 1 or omega.shape != f_hat.shape:
            raise ValidationError("omega and f_hat must be 1-D sequences of equal length")
        if omega.size < 2:
            raise ValidationError("a telemetry window needs at least 2 samples")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(f_hat))):
            raise ValidationError("telemetry contains non-finite values")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "f_hat", f_hat)

    def __len__(self):
        return self.omega.size

    @property
    def n(self) -> int:
        return self.omega.size


@dataclass(frozen=True)
class RawTelemetry:
    """Motor-side measurements; ``V`` is carried along but never used."""

    t: np.ndarray
    omega: np.ndarray
    I: np.ndarray
    V: np.ndarray
    J: float
    K_T: float

    def __post_init__(self):
        arrays = {name: _frozen(getattr(self, name)) for name in ("t", "omega", "I", "V")}
        n = arrays["t"].size
        if any(a.ndim != 1 or a.size != n for a in arrays.values()):
            raise ValidationError("raw telemetry sequences must have equal length")
        if not np.all(np.diff(arrays["t"]) > 0):
            raise ValidationError("timestamps must be strictly increasing")
        if not (self.J > 0 and self.K_T > 0):
            raise ValidationError("J and K_T must be positive")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)


# ---------------------------------------------------------------------------
# hazards

@dataclass(frozen=True)
class HazardTable:
    """Per-step jump probability ``h(q, tau)``.

    ``table`` has shape ``(q_max, tau_cap + 1)``; for ``tau > tau_cap`` the
    value at ``tau_cap`` is reused.
    """

    table: np.ndarray
    kind: str = "table"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        tab = _frozen(np.atleast_2d(self.table))
        object.__setattr__(self, "table", tab)

    @property
    def q_max(self) -> int:
        return self.table.shape[0]

    @property
    def tau_cap(self) -> int:
        return self.table.shape[1] - 1

    def __call__(self, q: int, tau):
        tau = np.minimum(np.asarray(tau, dtype=np.int64), self.tau_cap)
        return self.table[q - 1, tau]

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "rows": self.table.tolist()}
        return {"kind": self.kind, **self.params}


def countdown_hazard(horizon: Sequence[float], onset: Sequence[float] | None = None) -> HazardTable:
    """``h = 1/(T_q - tau)`` once ``tau > onset_q``, zero before; 1 from ``T_q - 1`` on."""
    horizon = [int(t) for t in horizon]
    onset = [-1] * len(horizon) if onset is None else [int(o) for o in onset]
    if len(onset) != len(horizon):
        raise ValidationError("countdown hazard: onset and horizon lengths differ")
    cap = max(horizon) - 1
    tau = np.arange(cap + 1)
    rows = []
    for T, o in zip(horizon, onset):
        with np.errstate(divide="ignore"):
            h = np.where(tau >= T - 1, 1.0, 1.0 / np.maximum(T - tau, 1))
        rows.append(np.where(tau > o, h, 0.0))
    return HazardTable(np.array(rows), "countdown", {"horizon": horizon, "onset": onset})


def constant_hazard(p: Sequence[float]) -> HazardTable:
    p = [float(x) for x in p]
    return HazardTable(np.array(p)[:, None], "constant", {"p": p})


def table_hazard(rows) -> HazardTable:
    return HazardTable(np.array(rows, dtype=float), "table")


HAZARD_KINDS: dict[str, Callable[..., HazardTable]] = {
    "countdown": lambda d: countdown_hazard(d["horizon"], d.get("onset")),
    "constant": lambda d: constant_hazard(d["p"]),
    "table": lambda d: table_hazard(d["rows"]),
}


def register_hazard(kind: str, builder: Callable[[dict], HazardTable]) -> None:
    HAZARD_KINDS[kind] = builder


def hazard_from_dict(d: dict) -> HazardTable:
    try:
        builder = HAZARD_KINDS[d["kind"]]
    except KeyError as exc:
        raise ValidationError(f"unknown hazard kind {d.get('kind')!r}") from exc
    return builder(d)


# ---------------------------------------------------------------------------
# switching systems and the full model

@dataclass(frozen=True)
class FssSpec:
    """One friction switching system.

    Friction of configuration ``q`` is uniform on ``support[q - 1]``.
    """

    q_max: int
    hazard: HazardTable
    q_transition: np.ndarray
    support: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "q_transition", _frozen(self.q_transition))
        object.__setattr__(self, "support", tuple((float(lo), float(hi)) for lo, hi in self.support))

    @property
    def tau_cap(self) -> int:
        return self.hazard.tau_cap

    def with_support(self, support) -> "FssSpec":
        return FssSpec(self.q_max, self.hazard, self.q_transition, support, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "q_max": self.q_max,
            "hazard": self.hazard.to_dict(),
            "q_transition": self.q_transition.tolist(),
            "support": [list(s) for s in self.support],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FssSpec":
        return cls(
            q_max=int(d["q_max"]),
            hazard=hazard_from_dict(d["hazard"]),
            q_transition=np.array(d["q_transition"], dtype=float),
            support=d["support"],
            name=d.get("name", ""),
        )


def validate_fss_spec(spec: FssSpec) -> list[str]:
    """Every violated invariant of ``spec``; an empty list means valid."""
    problems = []
    if spec.q_max < 2:
        problems.append("q_max must be at least 2")
    P = np.asarray(spec.q_transition)
    if P.shape != (spec.q_max, spec.q_max):
        problems.append(f"transition matrix shape {P.shape} does not match q_max={spec.q_max}")
    else:
        if np.any(P < 0) or np.any(P > 1):
            problems.append("transition probabilities outside [0, 1]")
        idx = np.arange(spec.q_max)
        far = np.abs(idx[:, None] - idx[None, :]) > 1
        if np.any(P[far] != 0):
            problems.append("non-adjacent transition")
        if not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
            problems.append("transition rows must sum to 1")
    if spec.hazard.q_max != spec.q_max:
        problems.append("hazard table rows do not match q_max")
    tab = spec.hazard.table
    if not np.all(np.isfinite(tab)) or np.any(tab < 0) or np.any(tab > 1):
        problems.append("hazard values outside [0, 1]")
    if len(spec.support) != spec.q_max:
        problems.append("need one friction support per configuration")
    else:
        for q, (lo, hi) in enumerate(spec.support, start=1):
            if not lo < hi:
                problems.append(f"empty friction support for configuration {q}")
        for q in range(len(spec.support) - 1):
            lo_next = spec.support[q + 1][0]
            hi_here = spec.support[q][1]
            if lo_next <= hi_here:
                if spec.support[q + 1][1] > spec.support[q][0] and lo_next < hi_here:
                    problems.append("overlapping friction supports")
                else:
                    problems.append("friction supports not increasing with configuration")
    return problems


@dataclass(frozen=True)
class RwaModel:
    f_bar_d: float
    f_v: float
    sigma_v: float
    fss: tuple

    def __post_init__(self):
        object.__setattr__(self, "fss", tuple(self.fss))
        if not self.sigma_v > 0:
            raise ValidationError("sigma_v must be positive")
        if len(self.fss) < 1:
            raise ValidationError("a model needs at least one switching system")

    @property
    def n_s(self) -> int:
        return len(self.fss)

    def validate(self) -> None:
        for s, spec in enumerate(self.fss, start=1):
            problems = validate_fss_spec(spec)
            if problems:
                raise ValidationError(f"switching system {s}: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "f_bar_d": self.f_bar_d,
            "f_v": self.f_v,
            "sigma_v": self.sigma_v,
            "fss": [s.to_dict() for s in self.fss],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RwaModel":
        return cls(
            f_bar_d=float(d["f_bar_d"]),
            f_v=float(d["f_v"]),
            sigma_v=float(d["sigma_v"]),
            fss=[FssSpec.from_dict(s) for s in d["fss"]],
        )


@dataclass(frozen=True)
class AnomalyStatus:
    theta_d: bool
    theta_v: bool
    theta_s: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta_d", bool(self.theta_d))
        object.__setattr__(self, "theta_v", bool(self.theta_v))
        object.__setattr__(self, "theta_s", tuple(bool(x) for x in self.theta_s))

    @classmethod
    def nominal(cls, n_s: int) -> "AnomalyStatus":
        return cls(False, False, (False,) * n_s)

    @classmethod
    def from_vector(cls, theta) -> "AnomalyStatus":
        theta = [bool(x) for x in theta]
        if len(theta) < 3:
            raise ValidationError("anomaly vector needs 2 + N_s entries")
        return cls(theta[0], theta[1], tuple(theta[2:]))

    def to_vector(self) -> list[int]:
        return [int(self.theta_d), int(self.theta_v), *map(int, self.theta_s)]

    def __len__(self):
        return 2 + len(self.theta_s)

    @property
    def label(self) -> str:
        """Short class name: ``nominal``, ``dry``, ``viscous``, ``fss<s>`` or ``multi``."""
        active = [i for i, x in enumerate(self.to_vector()) if x]
        if not active:
            return "nominal"
        if len(active) > 1:
            return "multi"
        return anomaly_names(len(self.theta_s))[active[0]]


def anomaly_names(n_s: int) -> list[str]:
    return ["dry", "viscous", *(f"fss{s}" for s in range(1, n_s + 1))]


@dataclass(frozen=True)
class LabeledDataset:
    entries: tuple
    ground_truth: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        if not self.entries:
            raise ValidationError("dataset is empty")
        sizes = {len(status.theta_s) for _, status in self.entries}
        if len(sizes) != 1:
            raise ValidationError("dataset entries disagree on the number of switching systems")

    def __len__(self):
        return len(self.entries)

    @property
    def n_s(self) -> int:
        return len(self.entries[0][1].theta_s)


def log1m(p):
    """``log(1 - p)`` with ``-inf`` at ``p == 1``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log1p(-p)


def safe_log(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(p)


def isclose_or_inf(a: float, b: float, tol: float = 1e-12) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
