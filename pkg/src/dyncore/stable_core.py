"""Stable core: verification, fixed points of aggregate maps, the induced game u_x.

A sequence is eps-stable when, at every time ``h``, no coalition gains more
than ``eps`` by leaving and playing its own dynamic.  A deviation at ``h``
keeps the period-``h`` allocation and replaces everything after it by the
best history of ``S`` started from ``V(S; x_h)``.  ``h = 0`` is the split
before period 1, where ``S`` plays ``v_1^S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .aggregate import AggregateDynamic, MonotoneMap
from .dynamics import (DEFAULT_RESOLUTION, DIVERGENCE_FACTOR, AllocationSequence, DiscountSpec, DynamicSpec,
                       ValueOracle, allocation_grid, discounted_tails, restrict, simulate)
from .errors import DivergenceError, InputError, PreconditionError, SearchExhaustedError
from .game import TOL_FEAS, Game, coalition_sums, format_coalition, least_core, members, membership_matrix

TOL_FP = 1e-8
MAX_ITER = 1_000_000


# -- fixed points of monotone maps --------------------------------------------

def _as_aggregate(obj) -> AggregateDynamic:
    if isinstance(obj, AggregateDynamic):
        return obj
    if isinstance(obj, DynamicSpec) and obj.aggregate is not None:
        return obj.aggregate
    raise PreconditionError("this operation needs an aggregate-dependent dynamic")


def _cap(ad: AggregateDynamic) -> float:
    return DIVERGENCE_FACTOR * max(1.0, abs(ad.initial.grand_worth))


def _vector_map(U: Callable) -> Callable[[np.ndarray], np.ndarray]:
    probe = np.array([0.0, 1.0])
    try:
        out = np.asarray(U(probe), dtype=float)
        if out.shape == probe.shape:
            return lambda c: np.asarray(U(c), dtype=float)
    except Exception:
        pass
    vec = np.vectorize(lambda c: float(U(c)), otypes=[float])
    return vec


def iterate_U(ad, T: int, c: float, t: int) -> float:
    """``U_T`` composed ``t`` times, evaluated at ``c``."""
    ad = _as_aggregate(ad)
    if t < 1:
        raise InputError("t must be at least 1")
    if c < 0:
        raise InputError("c must be nonnegative")
    cap = _cap(ad)
    U = ad.maps[T]
    w = float(c)
    for _ in range(t):
        w = float(U(w))
        if not math.isfinite(w) or abs(w) > cap:
            raise DivergenceError(f"orbit of {format_coalition(T)} from {c:g} exceeds {cap:g}")
    return w


def _limits(U: Callable, c: np.ndarray, cap: float, tol: float = TOL_FP * 1e-2,
            max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Limits of the orbits from every entry of ``c`` and the iteration count of each."""
    w = np.array(c, dtype=float)
    iters = np.zeros(w.shape, dtype=int)
    active = np.ones(w.shape, dtype=bool)
    for k in range(1, max_iter + 1):
        nxt = U(w[active])
        if not np.all(np.isfinite(nxt)) or np.abs(nxt).max(initial=0) > cap:
            raise DivergenceError(f"orbit exceeds the divergence cap {cap:g}")
        step = np.abs(nxt - w[active])
        w[active] = nxt
        iters[active] = k
        idx = np.flatnonzero(active)
        active[idx[step <= tol]] = False
        if not active.any():
            return w, iters
    raise DivergenceError(f"no convergence within {max_iter} iterations")


@dataclass(frozen=True)
class FixedPointReport:
    coalition: int
    entry: float
    limit: float
    iterations: int
    certified_m: int
    eps: float
    residual: float

    def to_json(self) -> dict:
        return {"coalition": format_coalition(self.coalition), "entry": self.entry, "limit": self.limit,
                "iterations": self.iterations, "certified_m": self.certified_m, "eps": self.eps,
                "residual": self.residual}


def evaluation_grid(ad: AggregateDynamic, points: int = 101) -> np.ndarray:
    return np.linspace(0.0, ad.initial.grand_worth, points)


def certified_time(U: Callable, grid: np.ndarray, limits: np.ndarray, eps: float, cap: float,
                   max_iter: int = MAX_ITER) -> int:
    """First ``m`` with ``|f(c) - U^t(c)| < eps`` for every grid ``c`` and every ``t >= m``.

    The distance to the limit is nonincreasing along a monotone orbit, so the
    first time it drops below ``eps`` everywhere is the certificate.
    """
    w = np.array(grid, dtype=float)
    for t in range(1, max_iter + 1):
        w = U(w)
        if not np.all(np.isfinite(w)) or np.abs(w).max(initial=0) > cap:
            raise DivergenceError(f"orbit exceeds the divergence cap {cap:g}")
        if np.abs(limits - w).max(initial=0.0) < eps:
            return t
    raise DivergenceError(f"no uniform convergence within {max_iter} iterations")


def fixed_point(ad, T: int, c: float, eps: float, grid: np.ndarray | None = None) -> FixedPointReport:
    """Limit ``f_T(c)`` of the orbit of ``c`` under ``U_T``, with a uniform convergence time on the grid."""
    ad = _as_aggregate(ad)
    if eps <= 0:
        raise InputError("eps must be positive")
    if c < 0:
        raise InputError("c must be nonnegative")
    ad.check_monotone(max(ad.initial.grand_worth, c))
    U = _vector_map(ad.maps[T])
    cap = _cap(ad)
    grid = evaluation_grid(ad) if grid is None else np.asarray(grid, dtype=float)
    lim, iters = _limits(U, np.array([c]), cap)
    glim, _ = _limits(U, grid, cap)
    m = certified_time(U, grid, glim, eps, cap)
    f = float(lim[0])
    return FixedPointReport(T, float(c), f, int(iters[0]), m, eps, float(abs(float(U(np.array([f]))[0]) - f)))


class LimitTable:
    """Cache of ``f_T(c)`` keyed by coalition and rounded entry."""

    def __init__(self, ad: AggregateDynamic):
        self.ad = ad
        self.cap = _cap(ad)
        self.cache: dict[tuple[int, float], float] = {}
        self.maps = {T: _vector_map(U) for T, U in ad.maps.items()}

    def __call__(self, T: int, c) -> np.ndarray:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        keys = np.round(c, 12)
        todo = sorted({float(k) for k in keys if (T, float(k)) not in self.cache})
        if todo:
            try:
                lim, _ = _limits(self.maps[T], np.array(todo), self.cap)
            except DivergenceError as exc:
                raise DivergenceError(f"coalition {format_coalition(T)}: {exc}") from None
            for k, v in zip(todo, lim):
                self.cache[(T, k)] = float(v)
        return np.array([self.cache[(T, float(k))] for k in keys])


@dataclass(frozen=True, eq=False)
class InducedGame:
    x: np.ndarray
    game: Game


def induced_game(ad, x, limits: LimitTable | None = None) -> InducedGame:
    """``u_x(T) = f_T(x(T))`` for every coalition ``T``."""
    ad = _as_aggregate(ad)
    x = np.asarray(x, dtype=float)
    if x.shape != (ad.n,):
        raise InputError(f"x must have {ad.n} entries")
    limits = LimitTable(ad) if limits is None else limits
    sums = coalition_sums(x)
    table = np.zeros(1 << ad.n)
    for T in range(1, 1 << ad.n):
        table[T] = limits(T, sums[T])[0]
    return InducedGame(x, Game(tuple(range(ad.n)), table))


# -- stable core membership ---------------------------------------------------

@dataclass(frozen=True)
class StableCoreReport:
    """Slack ``planned - deviation`` for every coalition (columns) and deviation time (rows, from 0)."""

    slack: np.ndarray
    planned: np.ndarray
    deviation: np.ndarray
    eps: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.slack.min() >= -self.eps - self.tolerance)

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    @property
    def worst(self) -> tuple[int, int]:
        """``(coalition, h)`` with the smallest slack."""
        h, j = np.unravel_index(int(np.argmin(self.slack)), self.slack.shape)
        return int(j) + 1, int(h)

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self, rows: int | None = None) -> dict:
        S, h = self.worst
        cut = self.slack if rows is None else self.slack[:rows]
        return {"verdict": self.passed, "eps": self.eps, "min_slack": self.min_slack,
                "worst": {"coalition": format_coalition(S), "h": h}, "tolerance": self.tolerance,
                "coalitions": [format_coalition(T) for T in range(1, self.slack.shape[1] + 1)],
                "slack": cut.tolist()}


def stable_core_membership(spec: DynamicSpec, seq, ds: DiscountSpec, eps: float = 0.0,
                           h_check: int | None = None, resolution: float = DEFAULT_RESOLUTION,
                           oracle: ValueOracle | None = None) -> StableCoreReport:
    """Check ``x^h_*(S) >= v^h_*(S) - eps`` for all ``S`` and ``h = 0..h_check``."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    H = ds.horizon if h_check is None else h_check
    oracle = ValueOracle(spec, ds, resolution) if oracle is None else oracle
    traj = simulate(spec, seq, length=H + ds.horizon)
    if len(set(traj.coalitions)) != 1:
        raise InputError("stable-core checks need a sequence without deviations")
    X = np.stack(traj.allocations)
    shares = np.stack([coalition_sums(x) for x in X])[:, 1:]
    tails = discounted_tails(shares, ds.delta)
    k = shares.shape[1]
    planned = np.empty((H + 1, k))
    deviation = np.empty((H + 1, k))
    planned[0] = tails[0]
    deviation[0] = [oracle(T, None).value for T in range(1, k + 1)]
    full = spec.grand
    d = ds.delta
    for h in range(1, H + 1):
        x = X[h - 1]
        planned[h] = tails[h - 1]
        deviation[h] = [(1 - d) * shares[h - 1, T - 1] + d * oracle(T, restrict(x, full, T)).value
                        for T in range(1, k + 1)]
    peak = max(float(np.abs(shares).max()), 1.0)
    tol = TOL_FEAS + 2 * ds.delta ** ds.horizon * peak
    return StableCoreReport(planned - deviation, planned, deviation, eps, tol)


# -- periodic grid search ---------------------------------------------------

@dataclass(frozen=True)
class StableSearchResult:
    best: AllocationSequence
    min_slack: float
    candidates: int

    def found(self, eps: float) -> bool:
        return self.min_slack >= -eps - TOL_FEAS

    def to_json(self) -> dict:
        return {"best_cycle": [c.tolist() for c in self.best.cycle], "min_slack": self.min_slack,
                "candidates": self.candidates}


def search_stable_sequences(spec: DynamicSpec, ds: DiscountSpec, resolution: float = DEFAULT_RESOLUTION,
                            max_period: int = 2, oracle: ValueOracle | None = None,
                            chunk: int = 256) -> StableSearchResult:
    """Best minimum stability slack over stationary and period-2 grid sequences.

    Needs a constant grand worth ``d = v_1(N) = V(N; y)(N)``, so every grid
    point of ``Delta(d)`` is feasible in every period.  Slacks are evaluated in
    closed form; the winner can be re-checked with :func:`stable_core_membership`.
    """
    if max_period not in (1, 2):
        raise InputError("max_period must be 1 or 2")
    d = spec.initial.grand_worth
    G = allocation_grid(spec.n, d, spec.floor, resolution)
    for y in G[:: max(1, len(G) // 7)]:
        w = spec.next_game(spec.grand, y).grand_worth
        if abs(w - d) > 1e-9 * max(1.0, abs(d)):
            raise PreconditionError("periodic search needs V(N; y)(N) = v_1(N) on the grid")
    oracle = ValueOracle(spec, ds, resolution) if oracle is None else oracle
    delta = ds.delta
    full = spec.grand
    k = (1 << spec.n) - 1
    Y = np.stack([coalition_sums(y) for y in G])[:, 1:]
    vstar = np.array([oracle(T, None).value for T in range(1, k + 1)])
    opt = np.array([[oracle(T, restrict(y, full, T)).value for T in range(1, k + 1)] for y in G])
    dev = (1 - delta) * Y + delta * opt  # deviation value after a period paying y
    stat = np.minimum(Y - vstar, Y - dev).min(axis=1)
    best_i = int(np.argmax(stat))
    best = (float(stat[best_i]), (best_i,))
    count = len(G)
    if max_period == 2:
        for start in range(0, len(G), chunk):
            I = np.arange(start, min(start + chunk, len(G)))
            odd = (Y[I, None, :] + delta * Y[None, :, :]) / (1 + delta)
            even = (Y[None, :, :] + delta * Y[I, None, :]) / (1 + delta)
            s = np.minimum(np.minimum(odd - vstar, odd - dev[I, None, :]), even - dev[None, :, :]).min(axis=2)
            count += s.size
            i, j = np.unravel_index(int(np.argmax(s)), s.shape)
            if s[i, j] > best[0] + 1e-12:
                best = (float(s[i, j]), (int(I[i]), int(j)))
    cycle = tuple(G[list(best[1])])
    return StableSearchResult(AllocationSequence(cycle=cycle), best[0], count)


# -- window finder ----------------------------------------------------------

def window_find(a, delta: float, a_acc: float, gamma: float) -> int:
    """First ``h`` (1-based) with ``a_h > a_acc - gamma`` and tail average from ``h`` below ``a_acc + gamma``.

    Only times whose truncated tail is accurate to ``gamma / 10`` are examined.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise InputError("a must be a nonempty 1-d sequence")
    if not 0 < delta < 1 or gamma <= 0:
        raise InputError("need 0 < delta < 1 and gamma > 0")
    M = max(float(np.abs(a).max()), 1e-12)
    keep = int(math.ceil(math.log(gamma / (10 * M)) / math.log(delta))) if gamma < 10 * M else 0
    last = a.size - keep
    if last < 1:
        raise SearchExhaustedError(f"sequence too short: need more than {keep} terms")
    tails = discounted_tails(a[:, None], delta)[:, 0]
    ok = (a[:last] > a_acc - gamma) & (tails[:last] < a_acc + gamma)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise SearchExhaustedError(f"no window within the first {last} terms")
    return int(hits[0]) + 1


# -- limit-game experiment and the constant-worth criterion ------------------------

@dataclass(frozen=True)
class Theorem2Verdict:
    eps: float
    a_gap: float
    a_witness: np.ndarray
    b_slack: float
    b_sequence: AllocationSequence
    b_confirmed: bool
    scale: float
    slack_factor: float = 5.0

    @property
    def a(self) -> bool:
        return self.a_gap <= self.eps + TOL_FEAS

    @property
    def b(self) -> bool:
        return self.b_slack >= -self.eps - TOL_FEAS

    @property
    def consistent(self) -> bool:
        c = self.slack_factor * self.eps + TOL_FEAS
        return (not self.b or self.a_gap <= c) and (not self.a or -self.b_slack <= c)

    def to_json(self) -> dict:
        return {"eps": self.eps, "A": self.a, "B": self.b, "consistent": self.consistent,
                "a_gap": self.a_gap, "a_witness": self.a_witness.tolist(), "b_slack": self.b_slack,
                "b_cycle": [c.tolist() for c in self.b_sequence.cycle], "b_confirmed": self.b_confirmed,
                "scale": self.scale, "slack_factor": self.slack_factor}


def theorem2_experiment(ad, ds: DiscountSpec, eps: float, resolution: float = DEFAULT_RESOLUTION,
                        max_period: int = 2) -> Theorem2Verdict:
    """Compare (A) some grid ``x`` with eps-core of ``u_x`` nonempty and (B) an eps-stable periodic grid sequence."""
    ad = _as_aggregate(ad)
    if eps <= 0:
        raise InputError("eps must be positive")
    ad, scale = ad.rescaled()
    ad.check_monotone()
    grand = ad.grand
    if abs(float(ad.U(grand, 1.0)) - 1.0) > 1e-9:
        raise PreconditionError("the grand coalition's map must keep a full share: U_N(1) = 1")
    spec = ad.to_spec()
    limits = LimitTable(ad)
    G = allocation_grid(ad.n, 1.0, ad.floor, resolution)
    seen: dict[tuple, float] = {}
    best = (math.inf, G[0])
    for x in G:
        u = induced_game(ad, x, limits).game
        key = tuple(np.round(u.worth, 10))
        if key not in seen:
            seen[key] = least_core(u, ad.floor).epsilon_star
        if seen[key] < best[0]:
            best = (seen[key], x)
            if best[0] <= 0:
                break
    oracle = ValueOracle(spec, ds, resolution)
    found = search_stable_sequences(spec, ds, resolution, max_period, oracle)
    check = stable_core_membership(spec, found.best, ds, eps, oracle=oracle)
    confirmed = abs(check.min_slack - found.min_slack) <= 1e-6 + check.tolerance
    return Theorem2Verdict(eps, float(best[0]), best[1], found.min_slack, found.best, confirmed, scale)


@dataclass(frozen=True)
class ConstantWorthVerdict:
    optimal_game: Game
    epsilon_star: float
    witness: np.ndarray
    eps: float

    @property
    def predicted_nonempty(self) -> bool:
        return self.epsilon_star <= self.eps + TOL_FEAS

    def to_json(self) -> dict:
        return {"verdict": self.predicted_nonempty, "epsilon_star": self.epsilon_star, "eps": self.eps,
                "witness": self.witness.tolist(), "optimal_game": self.optimal_game.to_json()}


def optimal_value_game(spec: DynamicSpec, ds: DiscountSpec, resolution: float = DEFAULT_RESOLUTION,
                       oracle: ValueOracle | None = None) -> Game:
    """The game ``S -> v_*(S)``."""
    oracle = ValueOracle(spec, ds, resolution) if oracle is None else oracle
    table = np.zeros(1 << spec.n)
    for T in range(1, 1 << spec.n):
        table[T] = oracle(T, None).value
    return Game(tuple(range(spec.n)), np.maximum(table, 0.0))


def constant_worth_criterion(spec: DynamicSpec, ds: DiscountSpec, eps: float = 0.0,
                             resolution: float = DEFAULT_RESOLUTION) -> ConstantWorthVerdict:
    """Least core of ``v_*``; with constant grand worth, eps-stable sequences exist iff its eps-core is nonempty."""
    d = spec.initial.grand_worth
    G = allocation_grid(spec.n, d, spec.floor, resolution)
    gw = np.array([spec.next_game(spec.grand, y).grand_worth for y in G])
    if np.ptp(gw) > 1e-9 * max(1.0, abs(gw).max()):
        raise PreconditionError("V(N; .)(N) is not constant on the grid")
    vstar = optimal_value_game(spec, ds, resolution)
    rep = least_core(vstar, spec.floor)
    return ConstantWorthVerdict(vstar, rep.epsilon_star, rep.witness, eps)


__all__ = [
    "AggregateDynamic", "ConstantWorthVerdict", "FixedPointReport", "InducedGame", "LimitTable", "MonotoneMap",
    "StableCoreReport", "StableSearchResult", "Theorem2Verdict", "certified_time", "constant_worth_criterion",
    "evaluation_grid", "fixed_point", "induced_game", "iterate_U", "optimal_value_game",
    "search_stable_sequences", "stable_core_membership", "theorem2_experiment", "window_find",
]
