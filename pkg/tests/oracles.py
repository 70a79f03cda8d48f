"""Independent reference implementations used to check the package.

Nothing here imports the computational code under test; each oracle works
from first principles (direct summation, explicit least squares, bisection).
"""
from __future__ import annotations

import functools
import itertools
import math

import numpy as np

NEG_INF = -math.inf


def chi2_1_cdf(x: float) -> float:
    return math.erf(math.sqrt(max(x, 0.0) / 2.0))


def chi2_1_isf(alpha: float) -> float:
    """Upper-tail quantile of chi-squared with 1 dof by bisection."""
    lo, hi = 0.0, 200.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 1.0 - chi2_1_cdf(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def wglr_lstsq(omega, f_hat, k, w, W_b, f_tilde_v, sigma_v) -> float:
    """wGLR at ``k`` from two explicit penalized least-squares fits.

    The prior adds the pseudo-observation ``sqrt(P) * (f_v - f_tilde_v)``
    with ``P = 2 sigma_v^2 W_b`` to both hypotheses.
    """
    om = np.asarray(omega[k - w:k + w], float)
    y = np.sign(np.where(om == 0, 1.0, om)) * np.asarray(f_hat[k - w:k + w], float)
    x = np.abs(om)
    P = 2.0 * sigma_v**2 * W_b
    n = 2 * w

    def sse(design):
        A = np.vstack([design, np.r_[np.zeros(design.shape[1] - 1), math.sqrt(P)]])
        b = np.r_[y, math.sqrt(P) * f_tilde_v]
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
        r = A @ coef - b
        return float(r @ r)

    ones = np.ones(n)
    step = np.r_[np.zeros(w), np.ones(w)]
    h0 = np.column_stack([ones, x])
    h1 = np.column_stack([ones - step, step, x])
    return (sse(h0) - sse(h1)) / (2.0 * sigma_v**2)


def segmented_lstsq(omega, f_hat, intervals):
    """Dry coefficient per interval and shared viscous coefficient by dense least squares."""
    omega = np.asarray(omega, float)
    f_hat = np.asarray(f_hat, float)
    rows, ys = [], []
    m = len(intervals)
    for i, (a, b) in enumerate(intervals):
        for k in range(a, b + 1):
            s = 1.0 if omega[k] >= 0 else -1.0
            r = np.zeros(m + 1)
            r[i] = s
            r[m] = omega[k]
            rows.append(r)
            ys.append(f_hat[k])
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(ys), rcond=None)
    return coef[:m], float(coef[m])


# ---------------------------------------------------------------------------
# assignment likelihood by direct summation

class DirectModel:
    """Per-step hazard lookups with the table clamp, no prefix sums."""

    def __init__(self, specs, sigma_v, tau_max, allow_reject=True):
        self.tabs = [np.asarray(s.hazard.table, float) for s in specs]
        self.P = [np.asarray(s.q_transition, float) for s in specs]
        self.q_max = [s.q_max for s in specs]
        self.sigma_v = sigma_v
        self.tau_max = tau_max
        self.allow_reject = allow_reject
        self.n_s = len(specs)

    def h(self, s, q, tau):
        tab = self.tabs[s]
        return float(tab[q - 1, min(tau, tab.shape[1] - 1)])

    @functools.lru_cache(maxsize=None)
    def survive(self, s, q, t0, n):
        """log of surviving ``n`` decisions at dwell times ``t0 .. t0 + n - 1``."""
        total = 0.0
        for tau in range(t0, t0 + n):
            p = 1.0 - self.h(s, q, tau)
            if p <= 0.0:
                return NEG_INF
            total += math.log(p)
        return total

    def jump(self, s, q, t0, dt, sgn):
        q2 = q + sgn
        if not 1 <= q2 <= self.q_max[s]:
            return NEG_INF, q2
        pq = self.P[s][q - 1, q2 - 1]
        hz = self.h(s, q, t0 + dt - 1)
        if pq <= 0.0 or hz <= 0.0:
            return NEG_INF, q2
        sv = self.survive(s, q, t0, dt - 1)
        return sv + math.log(hz) + math.log(pq), q2

    def stage(self, q, t, ev, u):
        dt = ev.delta_tau
        if u == 0:
            if not self.allow_reject:
                return NEG_INF, q, tuple(x + dt for x in t)
            total = -ev.rjct_cost / (2.0 * self.sigma_v**2)
            q2 = q
        else:
            total, qn = self.jump(u - 1, q[u - 1], t[u - 1], dt, ev.delta_f_sign)
            q2 = q[:u - 1] + (qn,) + q[u:]
        for s in range(self.n_s):
            if s != u - 1:
                total += self.survive(s, q[s], t[s], dt)
        t2 = tuple(0 if s == u - 1 else x + dt for s, x in enumerate(t))
        return total, q2, t2

    @functools.lru_cache(maxsize=None)
    def first_stage_tau(self, s, q, ev, jumper):
        best, arg = NEG_INF, 0
        for t0 in range(self.tau_max + 1):
            if jumper:
                v, _ = self.jump(s, q, t0, ev.delta_tau, ev.delta_f_sign)
                # the configuration move term does not depend on t0
            else:
                v = self.survive(s, q, t0, ev.delta_tau)
            if v > best:
                best, arg = v, t0
        return arg

    def path_score(self, q0, events, u):
        t0 = tuple(self.first_stage_tau(s, q0[s], events[0], u[0] == s + 1) for s in range(self.n_s))
        q, t, total = tuple(q0), t0, 0.0
        for ev, ui in zip(events, u):
            g, q, t = self.stage(q, t, ev, ui)
            if g == NEG_INF:
                return NEG_INF
            total += g
        return total


def enumerate_best(events, specs, sigma_v=1.0, tau_max=60, allow_reject=True):
    """``(best score, sorted optimal labellings)`` over every q0 and every labelling."""
    m = DirectModel(specs, sigma_v, tau_max, allow_reject)
    combos = list(itertools.product(*[range(1, qm + 1) for qm in m.q_max]))
    best, arg = NEG_INF, []
    for u in itertools.product(range(m.n_s + 1), repeat=len(events)):
        sc = max(m.path_score(q0, events, u) for q0 in combos)
        if sc == NEG_INF:
            continue
        if sc > best:
            best, arg = sc, [u]
        elif sc == best:
            arg.append(u)
    return best, sorted(arg)
