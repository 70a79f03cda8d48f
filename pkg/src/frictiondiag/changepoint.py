"""Windowed generalized likelihood ratio (wGLR) changepoint detection.

Around a candidate index ``k`` the window is split into ``A = [k-w, k)`` and
``B = [k, k+w)``. The jump hypothesis fits one dry coefficient per half and a
shared viscous coefficient; the no-jump hypothesis fits a single dry
coefficient. Both carry the viscous prior ``-W_b (f_v - f_tilde_v)^2`` and the
Gaussian log-likelihood ``-SSE / (2 sigma_v^2)``, so under the null
``2 * wGLR`` is chi-square with one degree of freedom.

Writing ``x = |omega|`` and ``y = sign(omega) * f_hat`` turns the dry term into
an intercept. With centred co-moments ``C`` of each half, the jump fit minimises
``c - 2 b v + a v^2`` with ``a = Cxx_A + Cxx_B + P``, ``b = Cxy_A + Cxy_B + P
f_tilde``, ``P = 2 sigma_v^2 W_b``; the no-jump fit adds the between-half terms
``(w/2) dx^2``, ``(w/2) dx dy``, ``(w/2) dy^2`` of the pooled moments.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .core import TelemetryWindow, UnidentifiableError, ValidationError, make_rng, sign, spawn_seeds


@dataclass(frozen=True)
class DetectorConfig:
    w: int = 50
    W_b: float = 1e-4
    f_tilde_v: float = 1.0
    glr_thr: float = 18.7
    sigma_v: float = 0.02

    def __post_init__(self):
        if self.w < 2:
            raise ValidationError("window half-size w must be at least 2")
        if not self.glr_thr > 0:
            raise ValidationError("glr_thr must be positive")
        if not self.sigma_v > 0:
            raise ValidationError("sigma_v must be positive")
        if self.W_b < 0:
            raise ValidationError("W_b must be non-negative")

    def to_dict(self) -> dict:
        return {"w": self.w, "W_b": self.W_b, "f_tilde_v": self.f_tilde_v, "glr_thr": self.glr_thr, "sigma_v": self.sigma_v}


@dataclass(frozen=True)
class ChangepointList:
    indices: tuple
    scores: tuple

    def __len__(self):
        return len(self.indices)

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "scores": list(self.scores)}


def _transformed(window: TelemetryWindow):
    s = sign(window.omega)
    return np.abs(window.omega), s * window.f_hat


def _glr_from_moments(nA, nB, mxA, myA, mxB, myB, CxxA, CxyA, CxxB, CxyB, P, f_tilde, sigma_v, w_total):
    a1 = CxxA + CxxB + P
    b1 = CxyA + CxyB + P * f_tilde
    h = nA * nB / (nA + nB)
    dx = mxA - mxB
    dy = myA - myB
    dxx, dxy, dyy = h * dx * dx, h * dx * dy, h * dy * dy
    scale = w_total * np.maximum((nA * mxA**2 + nB * mxB**2) / w_total, 1.0)
    if np.any(a1 <= 1e-13 * scale):
        raise UnidentifiableError("unidentifiable viscous coefficient")
    # (Q_nojump - Q_jump), arranged to avoid cancelling the residual sums
    bracket = (a1 * (2.0 * b1 * dxy + dxy * dxy) - b1 * b1 * dxx) / (a1 * (a1 + dxx))
    return (dyy - bracket) / (2.0 * sigma_v**2)


def _moments(x, y):
    n = x.size
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    return n, mx, my, float(dx @ dx), float(dx @ dy)


def wglr_at(window: TelemetryWindow, k: int, cfg: DetectorConfig) -> float:
    """wGLR at a single index, computed directly from the window slice."""
    w = cfg.w
    if not w <= k <= window.n - w:
        raise ValidationError(f"index {k} outside [{w}, {window.n - w}]")
    x, y = _transformed(window)
    nA, mxA, myA, CxxA, CxyA = _moments(x[k - w:k], y[k - w:k])
    nB, mxB, myB, CxxB, CxyB = _moments(x[k:k + w], y[k:k + w])
    P = 2.0 * cfg.sigma_v**2 * cfg.W_b
    return float(_glr_from_moments(nA, nB, mxA, myA, mxB, myB, CxxA, CxyA, CxxB, CxyB, P, cfg.f_tilde_v, cfg.sigma_v, 2 * w))


def sliding_moments(x: np.ndarray, y: np.ndarray, w: int):
    """Means and centred co-moments of every length-``w`` window ``[a, a+w)``.

    Sums are accumulated inside blocks of ``w`` samples around a block-local
    reference and merged with the pairwise (Chan) update, so the cost is
    O(N) without the cancellation of global prefix sums.
    Returns ``(mx, my, Cxx, Cxy)`` indexed by window start ``a``.
    """
    n = x.size
    nb = -(-n // w) + 1
    pad = nb * w - n
    xp = np.concatenate([x, np.zeros(pad)]).reshape(nb, w)
    yp = np.concatenate([y, np.zeros(pad)]).reshape(nb, w)
    cx = xp[:, :1].copy()
    cy = yp[:, :1].copy()
    dx = xp - cx
    dy = yp - cy

    def prefix(v):
        return np.concatenate([np.zeros((nb, 1)), np.cumsum(v, axis=1)], axis=1)

    PX, PY, PXX, PXY = prefix(dx), prefix(dy), prefix(dx * dx), prefix(dx * dy)
    a = np.arange(n - w + 1)
    j, off = a // w, a % w
    n1 = (w - off).astype(float)
    n2 = off.astype(float)

    def part(block, lo, hi, cnt):
        sx = PX[block, hi] - PX[block, lo]
        sy = PY[block, hi] - PY[block, lo]
        sxx = PXX[block, hi] - PXX[block, lo]
        sxy = PXY[block, hi] - PXY[block, lo]
        safe = np.maximum(cnt, 1.0)
        mx, my = sx / safe, sy / safe
        return mx, my, sxx - sx * mx, sxy - sx * my

    m1x, m1y, M1xx, M1xy = part(j, off, np.full_like(off, w), n1)
    m2x, m2y, M2xx, M2xy = part(j + 1, np.zeros_like(off), off, n2)
    cx1, cx2 = cx[j, 0], cx[j + 1, 0]
    cy1, cy2 = cy[j, 0], cy[j + 1, 0]
    dmx = (cx1 - cx2) + (m1x - m2x)
    dmy = (cy1 - cy2) + (m1y - m2y)
    hh = n1 * n2 / w
    Cxx = M1xx + M2xx + hh * dmx * dmx
    Cxy = M1xy + M2xy + hh * dmx * dmy
    mx = cx1 + m1x - (n2 / w) * dmx
    my = cy1 + m1y - (n2 / w) * dmy
    return mx, my, Cxx, Cxy


def wglr_profile(window: TelemetryWindow, cfg: DetectorConfig) -> np.ndarray:
    """wGLR at every index; entries without a full window on both sides are NaN."""
    w, n = cfg.w, window.n
    if n < 2 * w + 1:
        raise ValidationError(f"window too short: {n} samples, need at least {2 * w + 1}")
    x, y = _transformed(window)
    mx, my, Cxx, Cxy = sliding_moments(x, y, w)
    k = np.arange(w, n - w + 1)
    A, B = k - w, k
    P = 2.0 * cfg.sigma_v**2 * cfg.W_b
    glr = _glr_from_moments(
        w, w, mx[A], my[A], mx[B], my[B], Cxx[A], Cxy[A], Cxx[B], Cxy[B], P, cfg.f_tilde_v, cfg.sigma_v, 2 * w
    )
    out = np.full(n, np.nan)
    out[k] = glr
    return out


def detect(profile: np.ndarray, cfg: DetectorConfig) -> ChangepointList:
    """One changepoint per maximal run of scores at or above the threshold."""
    profile = np.asarray(profile, dtype=float)
    above = np.nan_to_num(profile, nan=-np.inf) >= cfg.glr_thr
    if not above.any():
        return ChangepointList((), ())
    edges = np.diff(np.r_[0, above.astype(np.int8), 0])
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    idx = [int(a + np.argmax(profile[a:b])) for a, b in zip(starts, stops)]
    return ChangepointList(tuple(idx), tuple(float(profile[i]) for i in idx))


def calibrate_threshold(sigma_v: float, alpha: float) -> float:
    """Threshold with per-point null exceedance ``alpha``.

    The statistic is already normalised by ``sigma_v``, so the result only
    depends on ``alpha``; ``sigma_v`` is checked for consistency.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    if not sigma_v > 0:
        raise ValidationError("sigma_v must be positive")
    return float(stats.chi2.isf(alpha, df=1) / 2.0)


def step_noncentrality(omega: np.ndarray, delta_f: float, cfg: DetectorConfig, f_v: float | None = None) -> float:
    """``2 * wGLR`` of a noiseless step of size ``delta_f`` at the centre of ``omega``.

    ``omega`` must hold exactly ``2w`` samples. This is the noncentrality of
    the statistic at the true step when the prior centre is correct.
    """
    omega = np.asarray(omega, dtype=float)
    w = cfg.w
    if omega.size != 2 * w:
        raise ValidationError("omega must hold 2w samples")
    f_v = cfg.f_tilde_v if f_v is None else f_v
    step = np.r_[np.zeros(w), np.full(w, delta_f)]
    f = (1.0 + step) * sign(omega) + f_v * omega
    return 2.0 * wglr_at(TelemetryWindow(omega, f), w, cfg)


def mdr_threshold(noncentrality: float, mdr: float) -> float:
    """Largest threshold that still detects a step with probability ``1 - mdr``."""
    if not 0.0 < mdr < 1.0:
        raise ValidationError("mdr must lie in (0, 1)")
    return float(stats.ncx2.ppf(mdr, df=1, nc=noncentrality) / 2.0)


@dataclass(frozen=True)
class BenchSignal:
    """Signal generator shared by the MDR and ARL estimates.

    The spin rate is a slow ramp ``omega0 + slope * k`` (restarting per
    window), which is what makes the viscous prior matter for short windows.
    """

    omega0: float = 1.0
    slope: float = 1e-6
    f_d: float = 1.0
    f_v: float = 1.0

    def omega(self, n: int) -> np.ndarray:
        return self.omega0 + self.slope * np.arange(n)


def estimate_mdr(cfg: DetectorConfig, delta_f: float, n_trials: int, seed, signal: BenchSignal | None = None) -> float:
    """Fraction of single-step windows where no detection lands within ``w`` of the step.

    Trial ``i`` draws its noise outward from the step (one stream to the
    right, one to the left), so the same seed gives every ``w`` the same noise
    near the change and estimates for different window sizes are paired.
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be positive")
    signal = signal or BenchSignal()
    w = cfg.w
    n = 4 * w + 1
    k0 = 2 * w
    omega = signal.omega(n)
    base = (signal.f_d + delta_f * (np.arange(n) >= k0)) * sign(omega) + signal.f_v * omega
    misses = 0
    for child in spawn_seeds(seed, n_trials):
        right, left = (make_rng(s) for s in child.spawn(2))
        noise = np.r_[left.normal(0.0, cfg.sigma_v, k0)[::-1], right.normal(0.0, cfg.sigma_v, n - k0)]
        f_hat = base + noise
        cps = detect(wglr_profile(TelemetryWindow(omega, f_hat), cfg), cfg)
        if not any(abs(i - k0) <= w for i in cps.indices):
            misses += 1
    return misses / n_trials


def count_false_alarms(cfg: DetectorConfig, n_points: int, seed, signal: BenchSignal | None = None) -> tuple[int, int]:
    """``(alarms, scored points)`` on one null window of ``n_points`` samples."""
    signal = signal or BenchSignal()
    rng = make_rng(seed)
    omega = signal.omega(n_points)
    f_hat = signal.f_d * sign(omega) + signal.f_v * omega + rng.normal(0.0, cfg.sigma_v, n_points)
    profile = wglr_profile(TelemetryWindow(omega, f_hat), cfg)
    return len(detect(profile, cfg)), int(np.count_nonzero(~np.isnan(profile)))


def estimate_arl(cfg: DetectorConfig, n_trials: int, seed, n_points: int = 100_000, signal: BenchSignal | None = None) -> float:
    """Exposure-weighted average run length: scored null points per false alarm.

    Returns ``inf`` when no alarm occurs within the budget (censored).
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be positive")
    alarms = points = 0
    for child in spawn_seeds(seed, n_trials):
        a, p = count_false_alarms(cfg, n_points, child, signal)
        alarms += a
        points += p
    return points / alarms if alarms else float("inf")


def with_threshold(cfg: DetectorConfig, thr: float) -> DetectorConfig:
    return replace(cfg, glr_thr=thr)
