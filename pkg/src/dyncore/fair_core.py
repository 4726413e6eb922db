"""Fair core: verification, efficiency, convexification certificates and sequence synthesis.

A sequence of ``N``-allocations is eps-fair when every coalition's discounted
share is at least its discounted stage worth minus ``eps``.  When the grand
worth is a constant ``d``, non-emptiness is decided by a static certificate:
an allocation ``x`` and a split ``x = sum_j alpha_j y_j`` such that ``x`` lies
in the core of ``sum_j alpha_j V(N; y_j)``.  A certificate becomes a fair
sequence by playing ``y_j`` on a set of periods whose discounted weight is
``alpha_j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import (DEFAULT_RESOLUTION, AllocationSequence, DiscountSpec, DynamicSpec, Trajectory,
                       allocation_grid, efficient_value, simulate)
from .errors import BudgetError, ConfigurationError, InputError, PreconditionError
from .game import TOL_FEAS, Game, coalition_sums, convex_combine, core_membership, format_coalition
from .simplex import InfeasibleError, feasible_point, linprog

CONSTANT_TOL = 1e-9


# -- verification -----------------------------------------------------------

@dataclass(frozen=True)
class CoalitionSlack:
    coalition: int
    share: float
    worth: float
    slack: float

    def to_json(self) -> dict:
        return {"coalition": format_coalition(self.coalition), "share": self.share,
                "worth": self.worth, "slack": self.slack}


@dataclass(frozen=True)
class FairCoreReport:
    """Discounted shares against discounted stage worths, one row per coalition."""

    rows: tuple[CoalitionSlack, ...]
    eps: float
    tail_bound: float
    average: np.ndarray

    @property
    def passed(self) -> bool:
        return all(r.slack >= -self.eps - TOL_FEAS for r in self.rows)

    @property
    def min_slack(self) -> float:
        return min(r.slack for r in self.rows)

    @property
    def worst(self) -> CoalitionSlack:
        return min(self.rows, key=lambda r: r.slack)

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {"verdict": self.passed, "eps": self.eps, "min_slack": self.min_slack,
                "tail_bound": self.tail_bound, "discounted_average": self.average.tolist(),
                "coalitions": [r.to_json() for r in self.rows]}


def stage_tables(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-period coalition shares and stage worths for an ``N``-only trajectory."""
    if len(set(traj.coalitions)) != 1:
        raise InputError("fair-core checks need a trajectory without deviations")
    X = np.stack(traj.allocations)
    shares = np.stack([coalition_sums(x) for x in X])
    worths = np.stack([g.worth for g in traj.games])
    return shares, worths


def fair_core_membership(spec: DynamicSpec, seq, ds: DiscountSpec, eps: float = 0.0) -> FairCoreReport:
    """Check ``x_*(S) >= (discounted worth of S along the realized stage games) - eps`` for all ``S``."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    traj = simulate(spec, seq, ds)
    shares, worths = stage_tables(traj)
    w = ds.weights(len(traj))
    pv_share, pv_worth = w @ shares, w @ worths
    rows = tuple(CoalitionSlack(T, float(pv_share[T]), float(pv_worth[T]), float(pv_share[T] - pv_worth[T]))
                 for T in range(1, 1 << spec.n))
    peak = max(float(np.abs(worths).max()), float(np.abs(shares).max()))
    return FairCoreReport(rows, eps, ds.delta ** ds.horizon * peak, w @ np.stack(traj.allocations))


def discounted_average(spec: DynamicSpec, seq, ds: DiscountSpec) -> np.ndarray:
    traj = simulate(spec, seq, ds)
    return ds.weights(len(traj)) @ np.stack(traj.allocations)


@dataclass(frozen=True)
class EfficiencyReport:
    achieved: float
    optimum: float
    error: float

    @property
    def efficient(self) -> bool:
        return self.achieved >= self.optimum - self.error - TOL_FEAS

    def __bool__(self) -> bool:
        return self.efficient

    def to_json(self) -> dict:
        return {"verdict": self.efficient, "achieved": self.achieved, "optimum": self.optimum,
                "error": self.error}


def efficiency_check(spec: DynamicSpec, seq, ds: DiscountSpec,
                     resolution: float = DEFAULT_RESOLUTION) -> EfficiencyReport:
    """Does the grand coalition's discounted total reach ``v_*(N)``?"""
    traj = simulate(spec, seq, ds)
    achieved = float(ds.weights(len(traj)) @ np.array([x.sum() for x in traj.allocations]))
    best = efficient_value(spec, ds, resolution)
    return EfficiencyReport(achieved, best.value, best.error)


# -- splits and certificates ------------------------------------------------

@dataclass(frozen=True, eq=False)
class Split:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.size or w.size == 0:
            raise InputError("a split needs one weight per point")
        if np.any(w < -1e-9) or abs(w.sum() - 1) > 1e-7:
            raise InputError("split weights must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def __len__(self) -> int:
        return self.weights.size

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class ConvexCertificate:
    """Allocation ``x``, a split of it and the combined game ``v`` (``x`` in the core of ``v``, up to ``gamma``)."""

    x: np.ndarray
    split: Split
    v: Game
    gamma: float = 0.0

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "split": self.split.to_json(), "game": self.v.to_json(),
                "gamma": self.gamma}


class _GridTables:
    """Grid allocations of ``Delta(d)`` with the stage game ``V(N; y)`` at each point."""

    def __init__(self, spec: DynamicSpec, resolution: float, worth: float | None = None):
        d = spec.initial.grand_worth if worth is None else worth
        self.spec, self.d = spec, d
        self.points = allocation_grid(spec.n, d, spec.floor, resolution)
        self.games = [spec.next_game(spec.grand, y) for y in self.points]
        self.worths = np.stack([g.worth for g in self.games])

    def grand_worths(self) -> np.ndarray:
        return self.worths[:, -1]

    def order_from_centre(self) -> np.ndarray:
        centre = np.full(self.spec.n, self.d / self.spec.n)
        dist = np.round(np.abs(self.points - centre).sum(axis=1), 9)
        return np.lexsort((np.arange(len(dist)), dist))


def _constant_grand_worth(tables: _GridTables) -> float:
    gw = tables.grand_worths()
    if np.ptp(gw) > CONSTANT_TOL * max(1.0, abs(gw).max()):
        raise PreconditionError(
            f"grand worth V(N; y)(N) varies on the grid (from {gw.min():.6g} to {gw.max():.6g})")
    d = float(gw[0])
    if abs(d - tables.d) > CONSTANT_TOL * max(1.0, abs(d)):
        raise PreconditionError(f"V(N; .)(N) = {d:.6g} differs from v_1(N) = {tables.d:.6g}")
    return d


def _split_lp(points: np.ndarray, worths: np.ndarray, x: np.ndarray, rhs_game=None,
              core_of: np.ndarray | None = None, slack: float = 0.0):
    """Weights ``alpha`` on ``points`` with ``alpha @ points = x`` and either
    ``alpha @ worths = rhs_game`` (equalities) or ``alpha @ worths <= core_of + slack``."""
    m, n = points.shape
    A_eq = [np.ones(m)] + [points[:, i] for i in range(n - 1)]
    b_eq = [1.0] + list(x[:n - 1])
    A_ub, b_ub = None, None
    inner = np.arange(1, worths.shape[1] - 1)
    if rhs_game is not None:
        A_eq += [worths[:, T] for T in range(1, worths.shape[1])]
        b_eq += list(rhs_game[1:])
    else:
        A_ub = worths[:, inner].T
        b_ub = core_of[inner] + slack
    return feasible_point(A_ub, b_ub, np.array(A_eq), np.array(b_eq), nvar=m)


def _small_support(points, worths, x, k_max, budget, **kw):
    """Exhaustive search for a split with at most ``k_max`` points."""
    tried = 0
    for k in range(1, k_max + 1):
        for idx in itertools.combinations(range(len(points)), k):
            tried += 1
            if tried > budget:
                raise BudgetError(f"small-support split search exceeded {budget} supports", tried)
            sel = list(idx)
            alpha = _split_lp(points[sel], worths[sel], x, **kw)
            if alpha is not None:
                return sel, alpha
    return None


def _make_split(points, alpha, idx=None, tol=1e-10) -> Split:
    keep = np.flatnonzero(alpha > tol)
    w = alpha[keep] / alpha[keep].sum()
    sel = keep if idx is None else np.asarray(idx)[keep]
    return Split(points[sel], w)


def convexification_contains(spec: DynamicSpec, x, v: Game, k_max: int | None = None,
                             resolution: float = DEFAULT_RESOLUTION, budget: int = 200_000) -> Split | None:
    """A split of ``x`` (on the grid, at most ``k_max`` points) with ``sum alpha_j V(N; y_j) = v``."""
    if k_max is not None and k_max < 1:
        raise InputError("k_max must be at least 1")
    x = np.asarray(x, dtype=float)
    if v.players != spec.initial.players:
        raise InputError("v must be a game over N")
    if x.shape != (spec.n,):
        raise InputError(f"x must have {spec.n} entries")
    if spec.next_game(spec.grand, x).allclose(v, atol=1e-9):
        return Split(x[None, :], [1.0])
    tables = _GridTables(spec, resolution, float(x.sum()))
    alpha = _split_lp(tables.points, tables.worths, x, rhs_game=v.worth)
    if alpha is None:
        return None
    split = _make_split(tables.points, alpha)
    if k_max is None or len(split) <= k_max:
        return split
    found = _small_support(tables.points, tables.worths, x, k_max, budget, rhs_game=v.worth)
    return None if found is None else _make_split(tables.points[found[0]], found[1])


def _certificate_search(spec, tables, support, x_candidates, gamma, k_max, budget):
    pts, W = tables.points[support], tables.worths[support]
    for i in x_candidates:
        x = tables.points[i]
        target = coalition_sums(x)
        alpha = _split_lp(pts, W, x, core_of=target, slack=gamma)
        if alpha is None:
            continue
        split = _make_split(pts, alpha)
        if k_max is not None and len(split) > k_max:
            found = _small_support(pts, W, x, k_max, budget, core_of=target, slack=gamma)
            if found is None:
                continue
            split = _make_split(pts[found[0]], found[1])
        games = [spec.next_game(spec.grand, y) for y in split.points]
        v = convex_combine(games, split.weights)
        return ConvexCertificate(x.copy(), split, v, gamma)
    return None


def theorem1_certificate_search(spec: DynamicSpec, resolution: float = DEFAULT_RESOLUTION,
                                k_max: int | None = None, budget: int = 200_000) -> ConvexCertificate | None:
    """Grid search for ``x`` in ``Delta(d)`` and ``v`` in conv V(N; x) with ``x`` in the core of ``v``.

    Outer loop over grid ``x`` from the equal split outward; for each ``x`` one
    feasibility LP over split weights on the whole grid.
    """
    if k_max is not None and k_max < 1:
        raise InputError("k_max must be at least 1")
    tables = _GridTables(spec, resolution)
    _constant_grand_worth(tables)
    support = np.arange(len(tables.points))
    return _certificate_search(spec, tables, support, tables.order_from_centre(), 0.0, k_max, budget)


def efficient_fair_certificate_search(spec: DynamicSpec, gamma: float, resolution: float = DEFAULT_RESOLUTION,
                                      k_max: int | None = None, budget: int = 200_000) -> ConvexCertificate | None:
    """As the exact search, with split points restricted to the near-efficient set and ``x`` in the gamma-core.

    The near-efficient set holds the grid allocations ``y`` whose next grand
    worth exceeds the grid maximum minus ``gamma``.
    """
    if gamma <= 0:
        raise InputError("gamma must be positive")
    tables = _GridTables(spec, resolution)
    gw = tables.grand_worths()
    support = np.flatnonzero(gw > gw.max() - gamma)
    if support.size == 0:
        raise ConfigurationError("no grid allocation is near-efficient; use a smaller grid step")
    # x must lie in the convex hull of the support; the LP enforces that
    return _certificate_search(spec, tables, support, tables.order_from_centre(), gamma, k_max, budget)


# -- period partition and synthesis -----------------------------------------

def period_partition(weights, delta: float, length: int) -> np.ndarray:
    """Assign periods ``1..length`` to classes so class ``j`` collects discounted weight ``weights[j]``.

    Greedy: each period goes to the class with the largest remaining deficit
    (lowest index on ties).  A period whose weight exceeds every deficit would
    overshoot; that happens only when delta is too small for the split.
    """
    alpha = np.asarray(weights, dtype=float)
    if np.any(alpha < -1e-12) or abs(alpha.sum() - 1) > 1e-9:
        raise InputError("split weights must be nonnegative and sum to 1")
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    deficit = alpha.copy()
    classes = np.empty(length, dtype=int)
    w = 1 - delta
    for t in range(length):
        j = int(np.argmax(deficit))
        if w > deficit[j] + 1e-12:
            k = int(np.count_nonzero(alpha > 0))
            raise ConfigurationError(
                f"period {t + 1} (weight {w:.3g}) overshoots every class; a partition needs a larger delta, "
                f"e.g. delta >= {1 - 1 / max(k, 1):.4g}")
        deficit[j] -= w
        classes[t] = j
        w *= delta
    return classes


def synthesize_fair_sequence(cert: ConvexCertificate, ds: DiscountSpec, length: int | None = None) -> AllocationSequence:
    """Play ``y_j`` on the periods of class ``j``; the discounted average is the certificate's ``x``."""
    length = ds.horizon if length is None else length
    classes = period_partition(cert.split.weights, ds.delta, length)
    return AllocationSequence(prefix=tuple(cert.split.points[classes]))


# -- search over periodic grid sequences --------------------------------------

@dataclass(frozen=True)
class FairSearchResult:
    sequence: AllocationSequence | None
    proof: str
    explored: int
    relaxation_bound: float

    @property
    def found(self) -> bool:
        return self.sequence is not None

    def to_json(self) -> dict:
        seq = None if self.sequence is None else [c.tolist() for c in self.sequence.cycle]
        return {"found": self.found, "cycle": seq, "proof": self.proof, "explored": self.explored,
                "relaxation_bound": self.relaxation_bound}


def _best_mix(phi: np.ndarray, fixed: np.ndarray, mass: float) -> tuple[float, np.ndarray]:
    """``max_mu min_S fixed_S + mass * (mu @ phi)_S`` over distributions ``mu`` on the rows of ``phi``."""
    m, k = phi.shape
    # shift tau to keep every variable nonnegative
    shift = float(np.abs(fixed).max() + mass * np.abs(phi).max() + 1.0)
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-mass * phi.T, np.ones((k, 1))])
    b_ub = fixed + shift
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    res = linprog(c, A_ub, b_ub, A_eq, [1.0])
    return float(res.x[-1] - shift), res.x[:m]


def search_fair_sequences(spec: DynamicSpec, ds: DiscountSpec, eps: float, max_period: int,
                          resolution: float = DEFAULT_RESOLUTION, budget: int = 100_000) -> FairSearchResult:
    """Exhaustive branch-and-bound over periodic grid sequences with period at most ``max_period``.

    With period ``p`` and position weights ``w_j``, coalition ``S``'s fair-core
    slack is ``sum_j w_j phi(y_j, S) - (1 - delta) v_1(S)`` where
    ``phi(y, S) = y(S) - delta * V(N; y)(S)``.  Replacing the undecided
    positions by one distribution over the grid gives an LP upper bound on
    the best achievable minimum slack; nodes whose bound is below ``-eps``
    are pruned.  At the root this bound covers every sequence, periodic or not.
    """
    if max_period < 1:
        raise InputError("max_period must be at least 1")
    tables = _GridTables(spec, resolution)
    _constant_grand_worth(tables)
    delta = ds.delta
    shares = np.stack([coalition_sums(y) for y in tables.points])
    phi = (shares - delta * tables.worths)[:, 1:]
    base = -(1 - delta) * spec.initial.worth[1:]
    root, mu = _best_mix(phi, base, 1.0)
    if root < -eps - 1e-9:
        return FairSearchResult(None, "relaxation", 1, root)
    order = np.argsort(-mu, kind="stable")
    explored = 0

    for p in range(1, max_period + 1):
        w = (1 - delta) * delta ** np.arange(p) / (1 - delta ** p)
        tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])

        def dfs(prefix, fixed):
            nonlocal explored
            explored += 1
            if explored > budget:
                raise BudgetError(f"fair sequence search exceeded {budget} nodes", explored)
            m = len(prefix)
            if m == p:
                if fixed.min() >= -eps - 1e-9:
                    seq = AllocationSequence(cycle=tuple(tables.points[prefix]))
                    if fair_core_membership(spec, seq, ds, eps).passed:
                        return prefix
                return None
            bound, mix = _best_mix(phi, fixed, tail[m])
            if bound < -eps - 1e-9:
                return None
            for i in np.argsort(-mix, kind="stable"):
                hit = dfs(prefix + [int(i)], fixed + w[m] * phi[i])
                if hit is not None:
                    return hit
            return None

        # the first position is tried in the root relaxation's order
        for i in order:
            hit = dfs([int(i)], base + w[0] * phi[i])
            if hit is not None:
                return FairSearchResult(AllocationSequence(cycle=tuple(tables.points[hit])),
                                        "found", explored, root)
    return FairSearchResult(None, "exhaustive", explored, root)


__all__ = [
    "CoalitionSlack", "ConvexCertificate", "EfficiencyReport", "FairCoreReport", "FairSearchResult", "Split",
    "convexification_contains", "discounted_average", "efficiency_check", "efficient_fair_certificate_search",
    "fair_core_membership", "period_partition", "search_fair_sequences", "synthesize_fair_sequence",
    "theorem1_certificate_search",
]
