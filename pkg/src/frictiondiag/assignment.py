"""Maximum-likelihood assignment of changepoints to switching systems.

Each changepoint is either produced by exactly one switching system (which
moves one configuration up or down, following the sign of the friction
change) or rejected as a false detection. The best labelling maximizes the
sum of per-stage log-likelihoods. The search is best-first over
``(stage, q_vec, tau_vec)`` states with an admissible heuristic computed by a
backward pass over configuration vectors only, and states are merged when
they cannot be told apart by any future stage.

Timing convention: a stage spans ``delta_tau`` steps. A system that does not
jump survives ``delta_tau`` decisions at dwell times ``tau .. tau + delta_tau - 1``.
The jumping system survives ``delta_tau - 1`` decisions and jumps at dwell
time ``tau + delta_tau - 1``; its dwell time then restarts at 0.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import FssSpec, ValidationError, log1m, safe_log

log = logging.getLogger(__name__)

NEG_INF = -math.inf


class NoFeasibleAssignment(RuntimeError):
    """Every complete labelling has log-likelihood ``-inf``."""


@dataclass(frozen=True)
class ChangepointEvent:
    delta_tau: int
    delta_f_sign: int
    rjct_cost: float = 0.0

    def __post_init__(self):
        if int(self.delta_tau) < 1:
            raise ValidationError("delta_tau must be at least 1")
        if self.delta_f_sign not in (-1, 1):
            raise ValidationError("delta_f_sign must be -1 or +1")
        if not self.rjct_cost >= 0:
            raise ValidationError("rjct_cost must be non-negative")
        object.__setattr__(self, "delta_tau", int(self.delta_tau))
        object.__setattr__(self, "rjct_cost", float(self.rjct_cost))

    def to_dict(self) -> dict:
        return {"delta_tau": self.delta_tau, "delta_f_sign": self.delta_f_sign, "rjct_cost": self.rjct_cost}


def events_from_fit(changepoints: Sequence[int], F_hat, rjct_costs) -> list[ChangepointEvent]:
    """Events for changepoints at sample indices ``changepoints`` (the first counted from 0)."""
    cps = [int(k) for k in changepoints]
    F_hat = np.asarray(F_hat, dtype=float)
    if len(F_hat) != len(cps) + 1 or len(rjct_costs) != len(cps):
        raise ValidationError("need one dry coefficient per interval and one cost per changepoint")
    out = []
    prev = 0
    for i, k in enumerate(cps):
        d = F_hat[i + 1] - F_hat[i]
        out.append(ChangepointEvent(max(k - prev, 1), 1 if d >= 0 else -1, float(rjct_costs[i])))
        prev = k
    return out


@dataclass(frozen=True)
class SearchState:
    q_vec: tuple
    tau_vec: tuple
    score: float = 0.0
    stage: int = 0
    parent: "SearchState | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.q_vec) != len(self.tau_vec):
            raise ValidationError("q_vec and tau_vec lengths differ")
        if any(t < 0 for t in self.tau_vec):
            raise ValidationError("negative dwell time")


class SurvivalTable:
    """Prefix sums of ``log(1 - h(q, tau))`` for one switching system.

    Sums are split into a finite part and a count of certain jumps
    (``h == 1``), so ranges containing a certain jump give exactly ``-inf``.
    Dwell times beyond the hazard table reuse its last column.
    """

    def __init__(self, spec: FssSpec, tau_max: int | None = None, hazard_eps: float = 0.0):
        tab = np.asarray(spec.hazard.table, dtype=float)
        if hazard_eps > 0:
            tab = np.clip(tab, hazard_eps, 1.0 - hazard_eps)
        self.q_max = spec.q_max
        self.cap = tab.shape[1] - 1
        self.tau_max = int(tau_max) if tau_max is not None else self.cap
        l1m = log1m(tab)
        certain = np.isneginf(l1m)
        fin = np.where(certain, 0.0, l1m)
        z = np.zeros((tab.shape[0], 1))
        self._fin = np.hstack([z, np.cumsum(fin, axis=1)])
        self._cnt = np.hstack([z, np.cumsum(certain, axis=1)]).astype(np.int64)
        self._tail_fin = fin[:, -1].copy()
        self._tail_cnt = certain[:, -1].astype(np.int64)
        self.log_h = safe_log(tab)
        # python lists make scalar lookups in the search loop cheap
        self._fin_l = [r.tolist() for r in self._fin]
        self._cnt_l = [r.tolist() for r in self._cnt]
        self._lh_l = [r.tolist() for r in self.log_h]
        self._tf_l = self._tail_fin.tolist()
        self._tc_l = self._tail_cnt.tolist()

    def _prefix(self, q: int, t: int):
        """Sum over ``tau < t`` as ``(finite, count)``."""
        r = q - 1
        top = self.cap + 1
        if t <= top:
            return self._fin_l[r][t], self._cnt_l[r][t]
        extra = t - top
        return self._fin_l[r][top] + extra * self._tf_l[r], self._cnt_l[r][top] + extra * self._tc_l[r]

    def survival(self, q: int, k1: int, k2: int) -> float:
        """``sum_{tau=k1..k2} log(1 - h(q, tau))``; 0 for an empty range."""
        if k2 < k1:
            return 0.0
        f2, c2 = self._prefix(q, k2 + 1)
        f1, c1 = self._prefix(q, k1)
        if c2 - c1 > 0:
            return NEG_INF
        return f2 - f1

    def log_hazard(self, q: int, tau: int) -> float:
        return self._lh_l[q - 1][min(tau, self.cap)]

    # vectorized forms over an array of start dwell times
    def _prefix_vec(self, q: int, t: np.ndarray):
        r = q - 1
        top = self.cap + 1
        tt = np.minimum(t, top)
        extra = np.maximum(t - top, 0)
        return self._fin[r, tt] + extra * self._tail_fin[r], self._cnt[r, tt] + extra * self._tail_cnt[r]

    def survival_vec(self, q: int, k1: np.ndarray, length: int) -> np.ndarray:
        """Survival over ``k1 .. k1 + length - 1`` for each start in ``k1``."""
        if length <= 0:
            return np.zeros(k1.shape)
        f2, c2 = self._prefix_vec(q, k1 + length)
        f1, c1 = self._prefix_vec(q, k1)
        return np.where(c2 - c1 > 0, NEG_INF, f2 - f1)

    def log_hazard_vec(self, q: int, tau: np.ndarray) -> np.ndarray:
        return self.log_h[q - 1, np.minimum(tau, self.cap)]


def precompute_survival(spec: FssSpec, tau_max: int | None = None, hazard_eps: float = 0.0) -> SurvivalTable:
    return SurvivalTable(spec, tau_max, hazard_eps)


class AssignmentProblem:
    """Immutable precomputed data shared by every search over the same model."""

    def __init__(self, specs: Sequence[FssSpec], sigma_v: float = 1.0, tau_max: int = 160000,
                 hazard_eps: float = 0.0, allow_reject: bool = True):
        if not specs:
            raise ValidationError("need at least one switching system")
        if not sigma_v > 0:
            raise ValidationError("sigma_v must be positive")
        self.specs = tuple(specs)
        self.n_s = len(self.specs)
        self.q_max = tuple(s.q_max for s in self.specs)
        self.tables = tuple(SurvivalTable(s, tau_max, hazard_eps) for s in self.specs)
        self.log_pq = tuple(safe_log(s.q_transition).tolist() for s in self.specs)
        self.sigma_v = float(sigma_v)
        self.tau_max = int(tau_max)
        self.allow_reject = bool(allow_reject)
        # dwell times at or beyond the table cap are indistinguishable
        self.caps = tuple(t.cap for t in self.tables)

    def move(self, s: int, q: int, sgn: int) -> tuple[int, float]:
        """Target configuration and its log transition probability (``-inf`` if impossible)."""
        q_new = q + sgn
        if not 1 <= q_new <= self.q_max[s]:
            return q_new, NEG_INF
        return q_new, self.log_pq[s][q - 1][q_new - 1]


def _as_problem(p, sigma_v=1.0) -> AssignmentProblem:
    return p if isinstance(p, AssignmentProblem) else AssignmentProblem(p, sigma_v=sigma_v)


def _stage(prob: AssignmentProblem, q_vec, tau_vec, ev: ChangepointEvent, u: int) -> float:
    dt = ev.delta_tau
    if u == 0:
        if not prob.allow_reject:
            return NEG_INF
        total = -ev.rjct_cost / (2.0 * prob.sigma_v ** 2)
    else:
        s = u - 1
        q = q_vec[s]
        _, lp = prob.move(s, q, ev.delta_f_sign)
        if lp == NEG_INF:
            return NEG_INF
        tab = prob.tables[s]
        tau = tau_vec[s]
        total = tab.survival(q, tau, tau + dt - 2) + tab.log_hazard(q, tau + dt - 1) + lp
        if total == NEG_INF:
            return NEG_INF
    for s in range(prob.n_s):
        if s == u - 1:
            continue
        tau = tau_vec[s]
        total += prob.tables[s].survival(q_vec[s], tau, tau + dt - 1)
        if total == NEG_INF:
            return NEG_INF
    return total


def stage_cost(state: SearchState, event: ChangepointEvent, u: int, specs, sigma_v: float = 1.0) -> float:
    """Log-likelihood of ``event`` from ``state`` under input ``u`` (0 rejects)."""
    prob = _as_problem(specs, sigma_v)
    if not 0 <= u <= prob.n_s:
        raise ValidationError(f"input {u} outside 0..{prob.n_s}")
    return _stage(prob, state.q_vec, state.tau_vec, event, u)


def _advance(prob, q_vec, tau_vec, ev, u):
    dt = ev.delta_tau
    if u == 0:
        return q_vec, tuple(t + dt for t in tau_vec)
    s = u - 1
    q_new, _ = prob.move(s, q_vec[s], ev.delta_f_sign)
    q2 = q_vec[:s] + (q_new,) + q_vec[s + 1:]
    t2 = tuple(0 if i == s else t + dt for i, t in enumerate(tau_vec))
    return q2, t2


def transition(state: SearchState, event: ChangepointEvent, u: int, specs, sigma_v: float = 1.0) -> SearchState:
    prob = _as_problem(specs, sigma_v)
    g = _stage(prob, state.q_vec, state.tau_vec, event, u)
    q2, t2 = _advance(prob, state.q_vec, state.tau_vec, event, u)
    return SearchState(q2, t2, state.score + g, state.stage + 1, state)


def _first_stage_terms(prob: AssignmentProblem, s: int, q: int, ev: ChangepointEvent, jumper: bool) -> np.ndarray:
    tab = prob.tables[s]
    tau0 = np.arange(prob.tau_max + 1)
    if jumper:
        return tab.survival_vec(q, tau0, ev.delta_tau - 1) + tab.log_hazard_vec(q, tau0 + ev.delta_tau - 1)
    return tab.survival_vec(q, tau0, ev.delta_tau)


def initial_taus(prob, q_vec, event: ChangepointEvent, u: int) -> tuple:
    """Optimistic initial dwell times: per system, the smallest ``tau0`` in
    ``[0, tau_max]`` maximizing its own first-stage term under input ``u``."""
    prob = _as_problem(prob)
    out = []
    for s in range(prob.n_s):
        vals = _first_stage_terms(prob, s, q_vec[s], event, jumper=(u == s + 1))
        out.append(int(np.argmax(vals)))
    return tuple(out)


class _InitCache:
    def __init__(self, prob, ev):
        self.prob, self.ev, self.cache = prob, ev, {}

    def tau0(self, s, q, jumper):
        key = (s, q, jumper)
        if key not in self.cache:
            vals = _first_stage_terms(self.prob, s, q, self.ev, jumper)
            self.cache[key] = int(np.argmax(vals))
        return self.cache[key]

    def taus(self, q_vec, u):
        return tuple(self.tau0(s, q_vec[s], u == s + 1) for s in range(self.prob.n_s))


def _stage_bounds(prob: AssignmentProblem, ev: ChangepointEvent):
    """Per system and configuration: best survival and best jump term over all dwell times."""
    smax, jmax = [], []
    for s, tab in enumerate(prob.tables):
        tau = np.arange(tab.cap + 2)
        srow, jrow = [], []
        for q in range(1, tab.q_max + 1):
            srow.append(float(np.max(tab.survival_vec(q, tau, ev.delta_tau))))
            j = tab.survival_vec(q, tau, ev.delta_tau - 1) + tab.log_hazard_vec(q, tau + ev.delta_tau - 1)
            jrow.append(float(np.max(j)))
        smax.append(srow)
        jmax.append(jrow)
    return smax, jmax


def _heuristic(prob: AssignmentProblem, events: Sequence[ChangepointEvent]):
    """``H[i][q_vec]``: upper bound on the score of stages ``i..N-1`` from configurations ``q_vec``."""
    n = len(events)
    combos = list(itertools.product(*[range(1, m + 1) for m in prob.q_max]))
    H = [None] * (n + 1)
    H[n] = {qv: 0.0 for qv in combos}
    cache = {}
    for i in range(n - 1, -1, -1):
        ev = events[i]
        if ev.delta_tau not in cache:
            cache[ev.delta_tau] = _stage_bounds(prob, ev)
        smax, jmax = cache[ev.delta_tau]
        nxt = H[i + 1]
        cur = {}
        for qv in combos:
            surv = [smax[s][qv[s] - 1] for s in range(prob.n_s)]
            best = NEG_INF
            if prob.allow_reject:
                b = -ev.rjct_cost / (2.0 * prob.sigma_v ** 2) + sum(surv)
                best = max(best, b + nxt[qv])
            for s in range(prob.n_s):
                q_new, lp = prob.move(s, qv[s], ev.delta_f_sign)
                if lp == NEG_INF:
                    continue
                b = jmax[s][qv[s] - 1] + lp + sum(surv[:s]) + sum(surv[s + 1:])
                qv2 = qv[:s] + (q_new,) + qv[s + 1:]
                best = max(best, b + nxt[qv2])
            cur[qv] = best
        H[i] = cur
    return H


def _slack(h: float) -> float:
    # guards admissibility against rounding in the bound arithmetic
    return h + 1e-9 * (1.0 + abs(h)) if h != NEG_INF else h


@dataclass(frozen=True)
class AssignmentResult:
    u: tuple
    f_bar_d: float
    f_v: float
    per_fss: tuple  # ((Q_s, F_s), ...)
    score: float
    iterations: int
    q_path: tuple = ()  # configuration vector before the first and after each changepoint
    tau0: tuple = ()
    residuals: tuple = ()  # per-interval reconstruction residual (non-zero only after rejections)
    exact: bool = True

    @property
    def rejections(self) -> int:
        return sum(1 for x in self.u if x == 0)

    def fss_values_by_interval(self) -> np.ndarray:
        """``(N_s, N_cp + 1)`` friction contribution of each system in each interval."""
        n_int = len(self.u) + 1
        out = np.zeros((len(self.per_fss), n_int))
        for s, (_, F_s) in enumerate(self.per_fss):
            j = 0
            for i in range(n_int):
                if i > 0 and self.u[i - 1] == s + 1:
                    j += 1
                out[s, i] = F_s[j] if F_s else 0.0
        return out

    def reconstruct(self) -> np.ndarray:
        return self.f_bar_d + self.fss_values_by_interval().sum(axis=0) + np.asarray(self.residuals)

    def to_dict(self) -> dict:
        return {
            "u": list(self.u),
            "f_bar_d": self.f_bar_d,
            "f_v": self.f_v,
            "per_fss": [{"Q": list(Q), "F": list(F)} for Q, F in self.per_fss],
            "score": self.score,
            "iterations": self.iterations,
            "rejections": self.rejections,
            "q_path": [list(q) for q in self.q_path],
            "tau0": list(self.tau0),
            "residuals": list(self.residuals),
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssignmentResult":
        return cls(
            tuple(d["u"]), float(d["f_bar_d"]), float(d["f_v"]),
            tuple((tuple(p["Q"]), tuple(p["F"])) for p in d["per_fss"]),
            float(d["score"]), int(d["iterations"]),
            tuple(tuple(q) for q in d.get("q_path", ())), tuple(d.get("tau0", ())),
            tuple(d.get("residuals", ())), bool(d.get("exact", True)),
        )


def q_path_from(prob, q0, events, u) -> list[tuple]:
    prob = _as_problem(prob)
    path = [tuple(q0)]
    for ev, ui in zip(events, u):
        if ui == 0:
            path.append(path[-1])
        else:
            s = ui - 1
            q = list(path[-1])
            q[s] += ev.delta_f_sign
            path.append(tuple(q))
    return path


def path_score(prob, events, q0, u) -> tuple[float, tuple]:
    """Total score of labelling ``u`` from configurations ``q0``, with the optimistic ``tau0``."""
    prob = _as_problem(prob)
    if not events:
        return 0.0, tuple(0 for _ in range(prob.n_s))
    taus0 = initial_taus(prob, q0, events[0], u[0])
    q, t = tuple(q0), taus0
    score = 0.0
    for ev, ui in zip(events, u):
        g = _stage(prob, q, t, ev, ui)
        if g == NEG_INF:
            return NEG_INF, taus0
        score += g
        q, t = _advance(prob, q, t, ev, ui)
    return score, taus0


def _search(prob: AssignmentProblem, events, max_expansions: int):
    n = len(events)
    H = _heuristic(prob, events)
    combos = list(itertools.product(*[range(1, m + 1) for m in prob.q_max]))
    init = _InitCache(prob, events[0])
    heap = []
    best = {}
    counter = itertools.count()
    caps = prob.caps

    def key_of(stage, q, t):
        return (stage, q, tuple(min(x, c) for x, c in zip(t, caps)))

    def push(stage, q, t, score, upath, q0, t0):
        h = H[stage][q]
        if h == NEG_INF:
            return
        k = key_of(stage, q, t)
        old = best.get(k)
        if old is not None and (old[0] > score or (old[0] == score and old[1] <= (upath, q0))):
            return
        best[k] = (score, (upath, q0))
        heapq.heappush(heap, (-(score + _slack(h)), upath, q0, next(counter), score, stage, q, t, t0))

    for q0 in combos:
        for u1 in range(prob.n_s + 1):
            t0 = init.taus(q0, u1)
            g = _stage(prob, q0, t0, events[0], u1)
            if g == NEG_INF:
                continue
            q1, t1 = _advance(prob, q0, t0, events[0], u1)
            push(1, q1, t1, g, (u1,), q0, t0)

    expansions = 0
    while heap:
        _, upath, q0, _, score, stage, q, t, t0 = heapq.heappop(heap)
        k = key_of(stage, q, t)
        if best.get(k, (None, None))[1] != (upath, q0):
            continue  # superseded
        if stage == n:
            return upath, q0, t0, score, expansions, True
        expansions += 1
        if expansions > max_expansions:
            return None
        ev = events[stage]
        for u in range(prob.n_s + 1):
            g = _stage(prob, q, t, ev, u)
            if g == NEG_INF:
                continue
            q2, t2 = _advance(prob, q, t, ev, u)
            push(stage + 1, q2, t2, score + g, upath + (u,), q0, t0)
    raise NoFeasibleAssignment("no feasible assignment")


def _beam(prob: AssignmentProblem, events, width: int):
    """Approximate fallback: stage-wise beam over merged states."""
    combos = list(itertools.product(*[range(1, m + 1) for m in prob.q_max]))
    init = _InitCache(prob, events[0])
    caps = prob.caps
    layer = {}
    for q0 in combos:
        for u1 in range(prob.n_s + 1):
            t0 = init.taus(q0, u1)
            g = _stage(prob, q0, t0, events[0], u1)
            if g == NEG_INF:
                continue
            q1, t1 = _advance(prob, q0, t0, events[0], u1)
            k = (q1, tuple(min(x, c) for x, c in zip(t1, caps)))
            cand = (g, (u1,), q0, t0, q1, t1)
            if k not in layer or (layer[k][0], ) < (g, ):
                layer[k] = cand
    expansions = 0
    for ev in events[1:]:
        items = sorted(layer.values(), key=lambda c: (-c[0], c[1]))[:width]
        layer = {}
        for score, upath, q0, t0, q, t in items:
            expansions += 1
            for u in range(prob.n_s + 1):
                g = _stage(prob, q, t, ev, u)
                if g == NEG_INF:
                    continue
                q2, t2 = _advance(prob, q, t, ev, u)
                k = (q2, tuple(min(x, c) for x, c in zip(t2, caps)))
                cand = (score + g, upath + (u,), q0, t0, q2, t2)
                if k not in layer or layer[k][0] < cand[0]:
                    layer[k] = cand
    if not layer:
        raise NoFeasibleAssignment("no feasible assignment")
    score, upath, q0, t0, _, _ = min(layer.values(), key=lambda c: (-c[0], c[1]))
    return upath, q0, t0, score, expansions, False


def decompose(F_hat, u, q_path, n_s: int | None = None):
    """Split interval dry coefficients into a base value and per-system contributions.

    Each system starts at 0 and accumulates the coefficient change at its own
    jumps; each sequence is then shifted so its minimum is 0 and the base
    absorbs the shifts. Changes at rejected changepoints belong to no system
    and stay in the per-interval residual.

    Returns ``(f_bar_d, per_fss, residuals)``.
    """
    F_hat = np.asarray(F_hat, dtype=float)
    u = list(u)
    if len(F_hat) != len(u) + 1:
        raise ValidationError("need len(F_hat) == len(u) + 1")
    if n_s is None:
        n_s = len(q_path[0]) if q_path else max(u, default=0)
    raw = [[0.0] for _ in range(n_s)]
    Q = [[q_path[0][s]] if q_path else [] for s in range(n_s)]
    residual = [0.0]
    for i, ui in enumerate(u):
        d = F_hat[i + 1] - F_hat[i]
        if ui == 0:
            residual.append(residual[-1] + d)
            continue
        residual.append(residual[-1])
        s = ui - 1
        raw[s].append(raw[s][-1] + d)
        if q_path:
            Q[s].append(q_path[i + 1][s])
    mins = [min(r) for r in raw]
    per_fss = tuple(
        (tuple(int(q) for q in Q[s]) if q_path else tuple(range(len(raw[s]))),
         tuple(float(x - mins[s]) for x in raw[s]))
        for s in range(n_s)
    )
    f_bar_d = float(F_hat[0] + sum(mins))
    # residual relative to what the base + contributions reproduce
    recon = np.zeros(len(F_hat))
    idx = [0] * n_s
    for i in range(len(F_hat)):
        if i > 0 and u[i - 1] != 0:
            idx[u[i - 1] - 1] += 1
        recon[i] = f_bar_d + sum(per_fss[s][1][idx[s]] for s in range(n_s))
    residuals = tuple(float(x) for x in F_hat - recon)
    return f_bar_d, per_fss, residuals


def assign(events: Sequence[ChangepointEvent], specs, *, sigma_v: float = 1.0, F_hat=None,
           f_v: float = float("nan"), tau_max: int = 160000, hazard_eps: float = 0.0,
           allow_reject: bool = True, max_expansions: int = 200000, beam_width: int = 256,
           problem: AssignmentProblem | None = None) -> AssignmentResult:
    """Most likely labelling of ``events``; ties go to the lexicographically smallest ``u``.

    If the exact search expands more than ``max_expansions`` states it falls
    back to a beam search and the result is flagged ``exact=False``.
    """
    prob = problem or AssignmentProblem(specs, sigma_v, tau_max, hazard_eps, allow_reject)
    events = list(events)
    if not events:
        q0 = tuple(1 for _ in range(prob.n_s))
        upath, t0, score, iters, exact = (), tuple(0 for _ in range(prob.n_s)), 0.0, 0, True
    else:
        out = _search(prob, events, max_expansions)
        if out is None:
            log.warning("assignment search exceeded %d expansions; using beam search", max_expansions)
            out = _beam(prob, events, beam_width)
        upath, q0, t0, score, iters, exact = out
    qp = q_path_from(prob, q0, events, upath)
    if F_hat is None:
        per_fss = tuple((tuple(q[s] for q in [qp[0]] + [qp[i + 1] for i, x in enumerate(upath) if x == s + 1]), ())
                        for s in range(prob.n_s))
        f_bar_d, residuals = float("nan"), ()
    else:
        f_bar_d, per_fss, residuals = decompose(F_hat, upath, qp, prob.n_s)
    return AssignmentResult(tuple(upath), f_bar_d, float(f_v), per_fss, float(score), int(iters),
                            tuple(qp), tuple(t0), residuals, exact)


def brute_force(events: Sequence[ChangepointEvent], specs, sigma_v: float = 1.0, tau_max: int = 160000,
                allow_reject: bool = True):
    """Exhaustive maximum over all ``q0`` and labellings; returns ``(score, [optimal u ...])``.

    Every complete labelling is scored (shared prefixes are scored once).
    """
    prob = AssignmentProblem(specs, sigma_v, tau_max, allow_reject=allow_reject)
    events = list(events)
    if not events:
        return 0.0, [()]
    combos = list(itertools.product(*[range(1, m + 1) for m in prob.q_max]))
    init = _InitCache(prob, events[0])
    scores: dict = {}
    n = len(events)

    def rec(stage, q, t, score, upath):
        if stage == n:
            if score > scores.get(upath, NEG_INF):
                scores[upath] = score
            return
        for u in range(prob.n_s + 1):
            g = _stage(prob, q, t, events[stage], u)
            if g == NEG_INF:
                continue
            q2, t2 = _advance(prob, q, t, events[stage], u)
            rec(stage + 1, q2, t2, score + g, upath + (u,))

    for q0 in combos:
        for u1 in range(prob.n_s + 1):
            t0 = init.taus(q0, u1)
            g = _stage(prob, q0, t0, events[0], u1)
            if g == NEG_INF:
                continue
            q1, t1 = _advance(prob, q0, t0, events[0], u1)
            rec(1, q1, t1, g, (u1,))
    if not scores:
        return NEG_INF, []
    best = max(scores.values())
    return best, sorted(u for u, v in scores.items() if v == best)
