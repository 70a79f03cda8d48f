"""Per-anomaly linear SVM classifiers.

Dry and viscous anomalies use the scalar coefficient as a 1-D feature. Each
switching system uses a normalized histogram of its recovered friction
values. Every anomaly has its own model, trained independently.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import AnomalyStatus, ValidationError, anomaly_names, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HistogramConfig:
    n_bins: int = 40
    r_min: float = 0.0
    r_max: float = 1.0
    config_filter: frozenset | None = None

    def __post_init__(self):
        if int(self.n_bins) < 1:
            raise ValidationError("n_bins must be at least 1")
        if not self.r_min < self.r_max:
            raise ValidationError("need r_min < r_max")
        if self.config_filter is not None:
            object.__setattr__(self, "config_filter", frozenset(int(q) for q in self.config_filter))

    def to_dict(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "config_filter": None if self.config_filter is None else sorted(self.config_filter),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistogramConfig":
        return cls(int(d.get("n_bins", 40)), float(d.get("r_min", 0.0)), float(d.get("r_max", 1.0)),
                   d.get("config_filter"))


def histogram_features(F_s: Sequence[float], Q_s: Sequence[int] | None, cfg: HistogramConfig) -> np.ndarray:
    """Fraction of friction values per bin; out-of-range values go to the edge bins."""
    f = np.asarray(F_s, dtype=float)
    if cfg.config_filter is not None and f.size:
        if Q_s is None or len(Q_s) != f.size:
            raise ValidationError("config_filter needs one configuration per friction value")
        keep = np.isin(np.asarray(Q_s, dtype=int), sorted(cfg.config_filter))
        f = f[keep]
    z = np.zeros(cfg.n_bins)
    if f.size == 0:
        return z
    idx = np.floor((f - cfg.r_min) / (cfg.r_max - cfg.r_min) * cfg.n_bins).astype(np.int64)
    idx = np.clip(idx, 0, cfg.n_bins - 1)
    np.add.at(z, idx, 1.0)
    return z / f.size


@dataclass(frozen=True)
class LinearSvmModel:
    w: np.ndarray
    b: float
    feature_dim: int = field(default=-1)

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if self.feature_dim == -1:
            object.__setattr__(self, "feature_dim", w.size)
        if w.size != self.feature_dim:
            raise ValidationError("len(w) must equal feature_dim")

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.feature_dim:
            raise ValidationError(f"dimension mismatch: expected {self.feature_dim}, got {X.shape[1]}")
        return X @ self.w + self.b

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "feature_dim": self.feature_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSvmModel":
        return cls(np.asarray(d["w"], dtype=float), float(d["b"]), int(d["feature_dim"]))


def classify(z, model: LinearSvmModel) -> bool:
    """True iff ``w . z + b > 0``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != model.feature_dim:
        raise ValidationError(f"dimension mismatch: expected {model.feature_dim}, got {z.size}")
    return bool(float(z @ model.w) + model.b > 0)


def hinge_loss(model: LinearSvmModel, X, y) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.maximum(0.0, 1.0 - y * model.decision(X))))


def svm_objective(model: LinearSvmModel, X, y, reg: float) -> float:
    """``reg/2 |w|^2 + mean hinge loss``."""
    return 0.5 * reg * float(model.w @ model.w) + hinge_loss(model, X, y)


def _best_bias(s: np.ndarray, y: np.ndarray, fallback: float) -> float:
    """Minimizer over ``b`` of ``sum max(0, 1 - y (s + b))`` (closest to ``fallback`` on ties)."""
    c = y - s  # a positive example is active for b < c, a negative one for b > c
    pos = np.sort(c[y > 0])
    neg = np.sort(c[y < 0])
    cand = np.unique(c)
    pos_cum = np.r_[0.0, np.cumsum(pos)]
    neg_cum = np.r_[0.0, np.cumsum(neg)]
    i_pos = np.searchsorted(pos, cand, side="right")  # positives with c <= b are inactive
    n_pos_act = pos.size - i_pos
    pos_term = (pos_cum[-1] - pos_cum[i_pos]) - n_pos_act * cand
    i_neg = np.searchsorted(neg, cand, side="left")  # negatives with c < b are active
    neg_term = i_neg * cand - neg_cum[i_neg]
    f = pos_term + neg_term
    best = np.flatnonzero(f <= f.min() + 1e-12 * max(1.0, abs(f.min())))
    lo, hi = cand[best[0]], cand[best[-1]]
    return float(min(max(fallback, lo), hi))


def train_svm(features, labels, reg: float = 1e-2, epochs: int = 300, seed=0, batch: int = 16,
              standardize: bool = True) -> LinearSvmModel:
    """Regularized hinge-loss minimization by mini-batch subgradient descent.

    Step size ``1/(reg t)``, sample order reshuffled every epoch from ``seed``,
    and the returned weights are the average of the second half of the
    iterates. After each step ``(w, b)`` is projected onto the ball of radius
    ``1/sqrt(reg)``, which contains the optimal ``w`` and keeps the large
    early steps bounded. The bias is finally set to its exact minimizer given
    the averaged weights. The
    objective is taken on standardized features; the model is mapped back to
    raw feature units.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("need a non-empty 2-D feature matrix")
    y = np.asarray(labels, dtype=float).ravel()
    if y.size != X.shape[0] or not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("labels must be +1/-1, one per example")
    if np.all(y == y[0]):
        raise ValidationError("single-class input")
    if not reg > 0:
        raise ValidationError("reg must be positive")
    n, d = X.shape
    if standardize:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd <= 1e-12] = 1.0
    else:
        mu, sd = np.zeros(d), np.ones(d)
    Z = (X - mu) / sd
    rng = make_rng(seed)
    batch = max(1, min(batch, n))
    w = np.zeros(d)
    b = 0.0
    steps_per_epoch = -(-n // batch)
    total = epochs * steps_per_epoch
    start_avg = total // 2
    w_sum = np.zeros(d)
    b_sum = 0.0
    n_avg = 0
    t = 0
    radius = 1.0 / np.sqrt(reg)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for j in range(0, n, batch):
            t += 1
            idx = perm[j:j + batch]
            zb, yb = Z[idx], y[idx]
            eta = 1.0 / (reg * t)
            active = yb * (zb @ w + b) < 1.0
            gw = reg * w - (yb[active] @ zb[active]) / idx.size
            gb = -yb[active].sum() / idx.size
            w = w - eta * gw
            b = b - eta * gb
            norm = float(np.sqrt(w @ w + b * b))
            if norm > radius:
                w *= radius / norm
                b *= radius / norm
            if t > start_avg:
                w_sum += w
                b_sum += b
                n_avg += 1
    w_bar = w_sum / n_avg
    b_bar = _best_bias(Z @ w_bar, y, b_sum / n_avg)
    return LinearSvmModel(w_bar / sd, b_bar - float(w_bar @ (mu / sd)), d)


# ---------------------------------------------------------------------------
# processed datasets and per-anomaly training

@dataclass(frozen=True)
class ProcessedEntry:
    f_bar_d: float
    f_v: float
    per_fss: tuple  # ((Q_s, F_s), ...)
    status: AnomalyStatus

    def to_dict(self) -> dict:
        return {
            "f_bar_d": self.f_bar_d,
            "f_v": self.f_v,
            "per_fss": [{"Q": list(Q), "F": list(F)} for Q, F in self.per_fss],
            "status": self.status.to_vector(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessedEntry":
        return cls(float(d["f_bar_d"]), float(d["f_v"]),
                   tuple((tuple(int(q) for q in p["Q"]), tuple(float(f) for f in p["F"])) for p in d["per_fss"]),
                   AnomalyStatus.from_vector(d["status"]))


@dataclass(frozen=True)
class ProcessedDataset:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.entries and len({len(e.per_fss) for e in self.entries}) != 1:
            raise ValidationError("every entry must have the same number of switching systems")

    def __len__(self):
        return len(self.entries)

    @property
    def n_s(self) -> int:
        return len(self.entries[0].per_fss)


@dataclass(frozen=True)
class ClassifierConfig:
    """Histogram SVMs train on raw bin fractions with ``reg``; the scalar dry and
    viscous SVMs train on standardized values with ``scalar_reg``."""

    n_bins: int = 40
    reg: float = 5e-4
    epochs: int = 300
    pad: float = 0.1
    config_filters: tuple = ()  # per-system configuration filter (None = all)
    scalar_reg: float = 1e-2

    def to_dict(self) -> dict:
        return {"n_bins": self.n_bins, "reg": self.reg, "epochs": self.epochs, "pad": self.pad,
                "config_filters": [None if f is None else sorted(f) for f in self.config_filters],
                "scalar_reg": self.scalar_reg}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        return cls(int(d.get("n_bins", 40)), float(d.get("reg", 5e-4)), int(d.get("epochs", 300)),
                   float(d.get("pad", 0.1)), tuple(d.get("config_filters", ())),
                   float(d.get("scalar_reg", 1e-2)))


@dataclass(frozen=True)
class AnomalyModels:
    """One SVM per anomaly plus the histogram settings used for each system."""

    dry: LinearSvmModel
    viscous: LinearSvmModel
    fss: tuple
    histograms: tuple

    @property
    def n_s(self) -> int:
        return len(self.fss)

    def predict(self, f_bar_d: float, f_v: float, per_fss) -> AnomalyStatus:
        if len(per_fss) != self.n_s:
            raise ValidationError("switching-system count differs from the trained models")
        theta_s = tuple(
            classify(histogram_features(F, Q, h), m)
            for (Q, F), h, m in zip(per_fss, self.histograms, self.fss)
        )
        return AnomalyStatus(classify([f_bar_d], self.dry), classify([f_v], self.viscous), theta_s)

    def to_dict(self) -> dict:
        return {
            "dry": self.dry.to_dict(),
            "viscous": self.viscous.to_dict(),
            "fss": [m.to_dict() for m in self.fss],
            "histograms": [h.to_dict() for h in self.histograms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyModels":
        return cls(LinearSvmModel.from_dict(d["dry"]), LinearSvmModel.from_dict(d["viscous"]),
                   tuple(LinearSvmModel.from_dict(m) for m in d["fss"]),
                   tuple(HistogramConfig.from_dict(h) for h in d["histograms"]))


def _filter_for(cfg: ClassifierConfig, s: int):
    return cfg.config_filters[s] if s < len(cfg.config_filters) else None


def histogram_range(entries, s: int, pad: float = 0.1) -> tuple[float, float]:
    """Observed friction range of system ``s`` padded by ``pad`` of its width on both sides."""
    vals = [f for e in entries for f in e.per_fss[s][1]]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    width = hi - lo if hi > lo else max(abs(hi), 1.0)
    return lo - pad * width, hi + pad * width


def anomaly_features(entries, anomaly: int, hist: HistogramConfig | None = None) -> np.ndarray:
    """Feature matrix for anomaly index ``anomaly`` (0 dry, 1 viscous, 2+s system s)."""
    if anomaly == 0:
        return np.array([[e.f_bar_d] for e in entries])
    if anomaly == 1:
        return np.array([[e.f_v] for e in entries])
    s = anomaly - 2
    return np.array([histogram_features(e.per_fss[s][1], e.per_fss[s][0], hist) for e in entries])


def anomaly_labels(entries, anomaly: int) -> np.ndarray:
    return np.array([1.0 if e.status.to_vector()[anomaly] else -1.0 for e in entries])


def fit_models(entries, cfg: ClassifierConfig = ClassifierConfig(), seed=0) -> AnomalyModels:
    entries = list(entries)
    if not entries:
        raise ValidationError("empty dataset")
    n_s = len(entries[0].per_fss)
    seeds = np.random.SeedSequence(seed if not isinstance(seed, np.random.SeedSequence) else seed.entropy)
    child = seeds.spawn(2 + n_s)
    models = []
    hists = []
    for a in range(2 + n_s):
        hist = None
        if a >= 2:
            lo, hi = histogram_range(entries, a - 2, cfg.pad)
            hist = HistogramConfig(cfg.n_bins, lo, hi, _filter_for(cfg, a - 2))
            hists.append(hist)
        X = anomaly_features(entries, a, hist)
        y = anomaly_labels(entries, a)
        if a < 2:
            models.append(train_svm(X, y, cfg.scalar_reg, cfg.epochs, child[a]))
        else:
            models.append(train_svm(X, y, cfg.reg, cfg.epochs, child[a], standardize=False))
    return AnomalyModels(models[0], models[1], tuple(models[2:]), tuple(hists))


def class_names(n_s: int) -> list[str]:
    return ["nominal", "dry", "viscous"] + [f"fss{s + 1}" for s in range(n_s)]


@dataclass(frozen=True)
class AccuracyReport:
    """Detection probabilities: rows are true classes, columns detected anomalies."""

    rows: tuple
    cols: tuple
    min: np.ndarray
    mean: np.ndarray
    max: np.ndarray
    n_repeats: int

    def detection(self) -> dict:
        """Mean probability of detecting each anomaly when it is the true class."""
        return {c: float(self.mean[self.rows.index(c), j]) for j, c in enumerate(self.cols) if c in self.rows}

    def cross_detection(self) -> float:
        """Largest mean detection probability in any cell whose row is not its own anomaly."""
        worst = 0.0
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.cols):
                if r != c:
                    worst = max(worst, float(self.mean[i, j]))
        return worst

    def to_rows(self):
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.cols):
                yield r, c, float(self.min[i, j]), float(self.mean[i, j]), float(self.max[i, j])

    def to_dict(self) -> dict:
        return {
            "rows": list(self.rows), "cols": list(self.cols), "n_repeats": self.n_repeats,
            "min": self.min.tolist(), "mean": self.mean.tolist(), "max": self.max.tolist(),
        }


def _split(n, frac, rng):
    perm = rng.permutation(n)
    k = max(1, int(round(frac * n)))
    return np.sort(perm[:k]), np.sort(perm[k:])


def _has_both_classes(entries, n_anom):
    for a in range(n_anom):
        y = anomaly_labels(entries, a)
        if np.all(y == y[0]):
            return False
    return True


def train_all(processed: ProcessedDataset, split: float = 0.2, n_repeats: int = 30, seed=0,
              cfg: ClassifierConfig = ClassifierConfig(), max_retries: int = 20):
    """Train on random ``split`` fractions and score on the rest, ``n_repeats`` times.

    Returns ``(models trained on the first split, AccuracyReport)``. Entries
    with several simultaneous anomalies are used for training but not
    reported as a row.
    """
    entries = list(processed.entries)
    if not entries:
        raise ValidationError("empty dataset")
    n_s = processed.n_s
    n_anom = 2 + n_s
    if not _has_both_classes(entries, n_anom):
        raise ValidationError("single-class input")
    names = class_names(n_s)
    cols = tuple(anomaly_names(n_s))
    rng = make_rng(seed)
    cells = []
    first_models = None
    for rep in range(n_repeats):
        for _ in range(max_retries):
            tr, va = _split(len(entries), split, rng)
            train = [entries[i] for i in tr]
            if _has_both_classes(train, n_anom):
                break
        else:
            raise ValidationError("a class is absent from every training split tried")
        models = fit_models(train, cfg, seed=int(rng.integers(2 ** 63)))
        if first_models is None:
            first_models = models
        counts = np.zeros((len(names), n_anom))
        totals = np.zeros(len(names))
        for i in va:
            e = entries[i]
            label = e.status.label
            if label not in names:
                continue
            r = names.index(label)
            pred = models.predict(e.f_bar_d, e.f_v, e.per_fss).to_vector()
            counts[r] += pred
            totals[r] += 1
        with np.errstate(invalid="ignore"):
            cells.append(counts / totals[:, None])
    stack = np.array(cells)
    present = ~np.all(np.isnan(stack[:, :, 0]), axis=0)
    rows = tuple(n for n, p in zip(names, present) if p)
    stack = stack[:, present, :]
    report = AccuracyReport(rows, cols, np.nanmin(stack, axis=0), np.nanmean(stack, axis=0),
                            np.nanmax(stack, axis=0), n_repeats)
    return first_models, report


def bin_sweep(processed: ProcessedDataset, s: int, bins: Sequence[int], split: float = 0.2, seed=0,
              cfg: ClassifierConfig = ClassifierConfig()) -> list[tuple[int, float, float]]:
    """Train and validation hinge loss of system ``s``'s classifier for each bin count, on one fixed split."""
    entries = list(processed.entries)
    rng = make_rng(seed)
    a = 2 + s
    for _ in range(20):
        tr, va = _split(len(entries), split, rng)
        train = [entries[i] for i in tr]
        y_tr = anomaly_labels(train, a)
        if not np.all(y_tr == y_tr[0]):
            break
    else:
        raise ValidationError("single-class input")
    valid = [entries[i] for i in va]
    lo, hi = histogram_range(train, s, cfg.pad)
    y_va = anomaly_labels(valid, a)
    out = []
    for nb in bins:
        h = HistogramConfig(int(nb), lo, hi, _filter_for(cfg, s))
        X_tr = anomaly_features(train, a, h)
        model = train_svm(X_tr, y_tr, cfg.reg, cfg.epochs, seed, standardize=False)
        out.append((int(nb), hinge_loss(model, X_tr, y_tr),
                    hinge_loss(model, anomaly_features(valid, a, h), y_va)))
    return out
