"""Markov dynamic cooperative games.

A :class:`DynamicSpec` holds the initial game ``v_1`` over ``N`` and the
transition ``V(S; x)``: the stage game played by coalition ``S`` after a
stage in which ``S``'s members received ``x``.  Coalitions only ever shrink.

Discounting is normalized at the first period of the stream being valued:
``(1 - delta) * sum_k delta**k * stream[h + k]``.  Every membership test
compares two streams that start at the same period, so this agrees with the
``delta**(t-1)`` convention up to a common positive factor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np

from .errors import BudgetError, DivergenceError, InputError, SimulationError
from .game import TOL_FEAS, Game, coalition, format_coalition, members, size, unanimity_game

DEFAULT_RESOLUTION = 1 / 20
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class DiscountSpec:
    """Common discount factor plus the truncation horizon used for infinite sums."""

    delta: float
    horizon: int
    max_worth: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.horizon < 1:
            raise InputError("horizon must be at least 1")

    @classmethod
    def from_precision(cls, delta: float, precision: float = 1e-4, max_worth: float = 1.0) -> "DiscountSpec":
        """Smallest horizon whose tail ``delta**T * max_worth`` is below ``precision``."""
        if not 0.0 < delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {delta}")
        ratio = precision / max(max_worth, precision)
        horizon = max(1, math.ceil(math.log(ratio) / math.log(delta)))
        return cls(delta, horizon, max_worth)

    @property
    def tail_bound(self) -> float:
        return self.delta ** self.horizon * self.max_worth

    def weights(self, length: int | None = None) -> np.ndarray:
        """``(1 - delta) * delta**k`` for ``k = 0..length-1``."""
        length = self.horizon if length is None else length
        return (1 - self.delta) * self.delta ** np.arange(length)


@dataclass(frozen=True, eq=False)
class State:
    coalition: int
    allocation: np.ndarray
    aux: Any = None

    def key(self) -> tuple:
        return (self.coalition, allocation_key(self.allocation), self.aux)


def allocation_key(x) -> tuple:
    if isinstance(x, np.ndarray):
        x = x.tolist()
    return tuple(round(float(v), 9) + 0.0 for v in x)


@dataclass(frozen=True, eq=False)
class DynamicSpec:
    """Initial game plus Markov transition ``V(S; x^S)``.

    ``grand_map(S)`` may return a callable ``c -> V(S; x)(S)`` for coalitions
    whose own worth depends on the previous allocation only through ``x(S)``;
    the optimal value of such a coalition is then the deterministic orbit of
    that map.  ``stateful`` replaces ``transition`` for dynamics that carry
    extra state (the market family's production scales).
    """

    n: int
    initial: Game
    transition: Callable[[int, np.ndarray], Game] | None = None
    floor: float = 0.0
    name: str = "custom"
    grand_map: Callable[[int], Callable[[float], float] | None] | None = None
    initial_sub: Callable[[int], Game] | None = None
    same_initial: bool = False
    stateful: Callable[[int, np.ndarray, Any], tuple[Game, Any]] | None = None
    initial_aux: Any = None
    aggregate: Any = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.initial.players != tuple(range(self.n)):
            raise InputError("initial game must be over players 0..n-1")
        if (self.transition is None) == (self.stateful is None):
            raise InputError("give exactly one of transition / stateful")

    @property
    def grand(self) -> int:
        return (1 << self.n) - 1

    def step(self, S: int, x, aux: Any = None) -> tuple[Game, Any]:
        """Stage game ``V(S; x)`` and the next auxiliary state."""
        x = np.asarray(x, dtype=float)
        if x.shape != (size(S),):
            raise InputError(f"allocation for {format_coalition(S)} must have {size(S)} entries")
        if self.stateful is not None:
            game, aux = self.stateful(S, x, aux)
        else:
            game = self.transition(S, x)
        if game.grand != S:
            raise InputError(f"transition returned a game over {format_coalition(game.grand)}, expected {format_coalition(S)}")
        return game, aux

    def next_game(self, S: int, x) -> Game:
        return self.step(S, x, None)[0]

    def initial_game(self, S: int | None = None) -> Game:
        """``v_1^S``: the game a coalition faces if it splits off before period 1."""
        if S is None or S == self.grand:
            return self.initial
        if self.same_initial:
            return self.initial.restrict(S)
        if self.initial_sub is not None:
            return self.initial_sub(S)
        # distinct default: the transition evaluated at the uniform split of v_1(N)
        pre = np.full(self.n, self.initial.grand_worth / self.n)
        return self.step(S, restrict(pre, self.grand, S), self.initial_aux)[0]

    def orbit_map(self, S: int) -> Callable[[float], float] | None:
        return None if self.grand_map is None else self.grand_map(S)


def restrict(x, S: int, T: int) -> np.ndarray:
    """Sub-vector of the allocation ``x`` (indexed by ``S``'s members) on ``T``."""
    x = np.asarray(x, dtype=float)
    if T & ~S:
        raise InputError(f"{format_coalition(T)} is not a subset of {format_coalition(S)}")
    if x.shape != (size(S),):
        raise InputError(f"allocation has {x.shape[0] if x.ndim else 0} entries, {format_coalition(S)} has {size(S)} members")
    return x[_restriction_index(S, T)]


@lru_cache(maxsize=1 << 16)
def _restriction_index(S: int, T: int) -> list[int]:
    return [j for j, p in enumerate(members(S)) if T >> p & 1]


def present_value(stream, ds: DiscountSpec, h: int = 1) -> float:
    """``(1 - delta) * sum_{t >= h} delta**(t-h) * stream_t`` with 1-based ``t``."""
    stream = np.asarray(stream, dtype=float)
    if stream.size == 0:
        raise InputError("empty stream")
    if h < 1 or h > stream.size:
        raise InputError(f"start time {h} outside 1..{stream.size}")
    tail = stream[h - 1:]
    return float(ds.weights(tail.size) @ tail)


def discounted_tails(values: np.ndarray, delta: float) -> np.ndarray:
    """Row ``h`` holds ``(1 - delta) * sum_{t >= h} delta**(t-h) * values[t]`` (0-based rows)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    acc = np.zeros(values.shape[1:])
    for t in range(values.shape[0] - 1, -1, -1):
        acc = (1 - delta) * values[t] + delta * acc
        out[t] = acc
    return out


# -- allocation grids -------------------------------------------------------

@lru_cache(maxsize=None)
def simplex_lattice(k: int, steps: int) -> np.ndarray:
    """All points of the unit simplex in R^k with coordinates in ``{0, 1/steps, ..., 1}``."""
    if k == 1:
        return np.ones((1, 1))
    pts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], steps, k)
    arr = np.array(pts, dtype=float) / steps
    arr.setflags(write=False)
    return arr


def allocation_grid(k: int, worth: float, floor: float = 0.0, resolution: float = DEFAULT_RESOLUTION,
                    include_uniform: bool = True) -> np.ndarray:
    """Grid allocations of a ``k``-player game with grand worth ``worth``.

    Points are ``floor + (worth - k*floor) * p`` with ``p`` on the simplex lattice
    of step ``resolution``; the equal split is appended when it is not already
    a lattice point.
    """
    if resolution <= 0:
        raise InputError("grid resolution must be positive")
    room = worth - k * floor
    if room < -TOL_FEAS * max(1.0, abs(worth)):
        raise InputError(f"no allocation of worth {worth} respects floor {floor} for {k} players")
    room = max(room, 0.0)
    steps = max(1, round(1 / resolution))
    lattice = simplex_lattice(k, steps)
    if include_uniform and steps % k:
        lattice = np.vstack([lattice, np.full((1, k), 1.0 / k)])
    return floor + room * lattice


# -- schedules and simulation -----------------------------------------------

@dataclass(frozen=True, eq=False)
class AllocationSequence:
    """Eventually periodic allocation sequence: ``prefix`` then ``cycle`` forever."""

    prefix: tuple = ()
    cycle: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(np.asarray(p, dtype=float) for p in self.prefix))
        object.__setattr__(self, "cycle", tuple(np.asarray(p, dtype=float) for p in self.cycle))
        if not self.prefix and not self.cycle:
            raise InputError("empty allocation sequence")

    def at(self, t: int) -> np.ndarray:
        if t < 1:
            raise InputError("periods start at 1")
        if t <= len(self.prefix):
            return self.prefix[t - 1]
        if not self.cycle:
            raise SimulationError(t, f"sequence has only {len(self.prefix)} allocations")
        return self.cycle[(t - 1 - len(self.prefix)) % len(self.cycle)]

    def __call__(self, t: int, game: Game, previous) -> np.ndarray:
        return self.at(t)

    @property
    def period(self) -> int:
        return len(self.cycle)


def uniform_schedule(t: int, game: Game, previous) -> np.ndarray:
    """Equal split of whatever stage game is being played."""
    return np.full(game.n, game.grand_worth / game.n)


def as_schedule(seq) -> Callable:
    if isinstance(seq, AllocationSequence) or callable(seq):
        return seq
    arr = np.asarray(seq, dtype=float)
    if arr.ndim != 2:
        raise InputError("an allocation sequence must be a callable, AllocationSequence or 2-d array")
    return AllocationSequence(prefix=tuple(arr))


@dataclass(frozen=True, eq=False)
class Trajectory:
    coalitions: tuple[int, ...]
    games: tuple[Game, ...]
    allocations: tuple[np.ndarray, ...]
    aux: tuple = ()

    def __len__(self) -> int:
        return len(self.games)

    def shares(self, T: int) -> np.ndarray:
        """``x_t(T)`` per period; NaN where ``T`` is not inside the current coalition."""
        out = np.full(len(self), np.nan)
        for t, (S, x) in enumerate(zip(self.coalitions, self.allocations)):
            if not T & ~S:
                out[t] = restrict(x, S, T).sum()
        return out

    def worths(self, T: int) -> np.ndarray:
        out = np.full(len(self), np.nan)
        for t, (S, g) in enumerate(zip(self.coalitions, self.games)):
            if not T & ~S:
                out[t] = g.value(T)
        return out

    def allocation_matrix(self) -> np.ndarray:
        """``(T, n)`` matrix of allocations padded with NaN outside the coalition."""
        n = max(max(members(S)) for S in self.coalitions) + 1
        out = np.full((len(self), n), np.nan)
        for t, (S, x) in enumerate(zip(self.coalitions, self.allocations)):
            out[t, list(members(S))] = x
        return out

    def to_csv(self, path, include_worths: bool = False) -> None:
        """Columns: t, coalition, one per player, optionally the stage worth of every coalition."""
        X = self.allocation_matrix()
        n = X.shape[1]
        subsets = list(range(1, 1 << n))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t", "coalition"] + [f"x{i}" for i in range(n)]
            if include_worths:
                header += [f"v{format_coalition(T)}" for T in subsets]
            w.writerow(header)
            for t in range(len(self)):
                row = [t + 1, format_coalition(self.coalitions[t])]
                row += ["" if np.isnan(v) else repr(float(v)) for v in X[t]]
                if include_worths:
                    S, g = self.coalitions[t], self.games[t]
                    row += [repr(g.value(T)) if not T & ~S else "" for T in subsets]
                w.writerow(row)


def simulate(spec: DynamicSpec, schedule, ds: DiscountSpec | None = None, length: int | None = None,
             deviations: dict[int, int] | None = None, start: State | None = None) -> Trajectory:
    """Play ``schedule`` forward from period 1 (or from ``start``).

    ``schedule(t, game, previous_allocation)`` returns the period-``t``
    allocation of the realized stage game.  ``deviations`` maps a period ``t``
    to the coalition that splits off at ``t``; it must be a subset of the
    coalition in place at ``t - 1``.
    """
    schedule = as_schedule(schedule)
    if length is None:
        if ds is None:
            raise InputError("give a DiscountSpec or an explicit length")
        length = ds.horizon
    deviations = dict(deviations or {})
    coalitions, games, allocations, auxes = [], [], [], []
    if start is None:
        S, prev, aux = spec.grand, None, spec.initial_aux
    else:
        S, prev, aux = start.coalition, np.asarray(start.allocation, dtype=float), start.aux
    for t in range(1, length + 1):
        if t in deviations:
            new = deviations[t]
            if not new or new & ~S:
                raise SimulationError(t, f"deviating coalition {format_coalition(new)} is not inside {format_coalition(S)}")
            if prev is not None:
                prev = restrict(prev, S, new)
            S = new
        if prev is None:
            game = spec.initial_game(S)
        else:
            game, aux = spec.step(S, prev, aux)
        x = np.asarray(schedule(t, game, prev), dtype=float)
        _check_step(t, game, x, spec.floor)
        coalitions.append(S)
        games.append(game)
        allocations.append(x)
        auxes.append(aux)
        prev = x
    return Trajectory(tuple(coalitions), tuple(games), tuple(allocations), tuple(auxes))


def _check_step(t: int, game: Game, x: np.ndarray, floor: float, error=SimulationError) -> None:
    if x.shape != (game.n,):
        raise error(t, f"allocation has shape {x.shape}, stage game has {game.n} players")
    scale = max(1.0, abs(game.grand_worth))
    if abs(x.sum() - game.grand_worth) > 1e-7 * scale:
        raise error(t, f"allocation sums to {x.sum():.10g} but the stage game's grand worth is {game.grand_worth:.10g}")
    if np.any(x < floor - 1e-9 * scale):
        raise error(t, f"allocation {np.round(x, 6)} violates the floor {floor}")


# -- optimal values -----------------------------------------------------------

@dataclass(frozen=True)
class ValueEstimate:
    """Discounted value with its error budget (truncation tail plus grid term)."""

    value: float
    error: float
    method: str

    def __float__(self) -> float:
        return self.value


def orbit_value(g: Callable[[float], float], first: float, ds: DiscountSpec, cap: float) -> tuple[float, float]:
    """Value of the stream ``first, g(first), g(g(first)), ...`` and its largest term."""
    w = float(first)
    total = 0.0
    peak = abs(w)
    weight = 1 - ds.delta
    for k in range(ds.horizon):
        if not math.isfinite(w) or abs(w) > cap:
            raise DivergenceError(f"orbit left [-{cap:g}, {cap:g}]")
        total += weight * w
        weight *= ds.delta
        peak = max(peak, abs(w))
        nxt = float(g(w))
        if nxt == w:
            # fixed point reached: the rest of the truncated sum is geometric
            remaining = ds.horizon - k - 1
            total += w * weight * (1 - ds.delta ** remaining) / (1 - ds.delta)
            break
        w = nxt
    return total, peak


def optimal_value(spec: DynamicSpec, S: int, entry, ds: DiscountSpec,
                  resolution: float = DEFAULT_RESOLUTION, aux: Any = None,
                  node_cap: int = 20_000) -> ValueEstimate:
    """Best discounted total of ``S`` over grid-feasible ``S``-histories.

    With ``entry=None`` the history starts with ``v_1^S``; otherwise ``entry``
    is the allocation ``S`` received in the period before and the first stage
    game is ``V(S; entry)``.  The value is normalized at that first stage.

    Coalitions with an orbit map are valued exactly along the orbit.  Other
    coalitions use backward induction over worth levels: ``S``'s per-period
    total is the grand worth of its stage game, and the grid of next
    allocations depends only on that worth, so the state collapses to
    ``(worth, aux)``.
    """
    if not S or S & ~spec.grand:
        raise InputError(f"bad coalition {format_coalition(S)}")
    cap = DIVERGENCE_FACTOR * max(1.0, abs(spec.initial.grand_worth))
    if entry is None:
        first_game = spec.initial_game(S)
        aux = spec.initial_aux if aux is None else aux
    else:
        first_game, aux = spec.step(S, entry, spec.initial_aux if aux is None else aux)
    g = spec.orbit_map(S)
    if g is not None:
        value, peak = orbit_value(g, first_game.grand_worth, ds, cap)
        return ValueEstimate(value, ds.delta ** ds.horizon * peak, "orbit")
    return _worth_level_dp(spec, S, first_game.grand_worth, aux, ds, resolution, cap, node_cap)


def _level_key(w: float, aux: Any) -> tuple:
    return (round(w, 10) + 0.0, _aux_key(aux))


def _aux_key(aux):
    if aux is None:
        return None
    if isinstance(aux, np.ndarray):
        return allocation_key(aux)
    if isinstance(aux, tuple):
        return tuple(_aux_key(a) for a in aux)
    return aux


def _worth_level_dp(spec, S, w0, aux0, ds, resolution, cap, node_cap) -> ValueEstimate:
    k = size(S)
    nodes: dict[tuple, int] = {}
    worth: list[float] = []
    aux_of: list[Any] = []
    succ: list[list[int]] = []

    def add(w, aux):
        if not math.isfinite(w) or abs(w) > cap:
            raise DivergenceError(f"stage worth {w!r} of {format_coalition(S)} exceeds the divergence cap")
        key = _level_key(w, aux)
        if key not in nodes:
            if len(nodes) >= node_cap:
                raise BudgetError(f"worth-level DP for {format_coalition(S)} exceeded {node_cap} nodes", len(nodes))
            nodes[key] = len(worth)
            worth.append(w)
            aux_of.append(aux)
            succ.append(None)
        return nodes[key]

    root = add(w0, aux0)
    frontier = [root]
    for _ in range(ds.horizon - 1):
        nxt = []
        for i in frontier:
            if succ[i] is not None:
                continue
            out = set()
            for y in allocation_grid(k, worth[i], spec.floor, resolution):
                game, aux = spec.step(S, y, aux_of[i])
                j = add(game.grand_worth, aux)
                if j not in out:
                    out.add(j)
                    nxt.append(j)
            succ[i] = sorted(out)
        frontier = [j for j in dict.fromkeys(nxt) if succ[j] is None]
        if not frontier:
            break
    W = np.array(worth)
    J = np.zeros(len(W))
    for _ in range(ds.horizon):
        best = np.array([J[s].max() if s else 0.0 for s in succ])
        J = (1 - ds.delta) * W + ds.delta * best
    peak = float(np.abs(W).max())
    err = ds.delta ** ds.horizon * peak + resolution * peak
    return ValueEstimate(float(J[root]), err, "grid")


class ValueOracle:
    """Memoized :func:`optimal_value` for one spec and discount setting.

    Entries are keyed after rounding to 9 decimals.  Aggregate-dependent
    specs skip building the stage game: only ``U_S(x(S))`` is needed.
    """

    def __init__(self, spec: DynamicSpec, ds: DiscountSpec, resolution: float = DEFAULT_RESOLUTION,
                 node_cap: int = 20_000):
        self.spec, self.ds, self.resolution, self.node_cap = spec, ds, resolution, node_cap
        self.cache: dict = {}
        self.cap = DIVERGENCE_FACTOR * max(1.0, abs(spec.initial.grand_worth))

    def __call__(self, S: int, entry=None, aux: Any = None) -> ValueEstimate:
        ad = self.spec.aggregate
        if entry is not None and ad is not None and aux is None:
            first = float(ad.U(S, float(np.sum(entry))))
            key = (S, "w", round(first, 12))
            if key not in self.cache:
                value, peak = orbit_value(ad.maps[S], first, self.ds, self.cap)
                self.cache[key] = ValueEstimate(value, self.ds.delta ** self.ds.horizon * peak, "orbit")
            return self.cache[key]
        key = (S, None if entry is None else allocation_key(entry), _aux_key(aux))
        if key not in self.cache:
            self.cache[key] = optimal_value(self.spec, S, entry, self.ds, self.resolution, aux, self.node_cap)
        return self.cache[key]


def efficient_value(spec: DynamicSpec, ds: DiscountSpec, resolution: float = DEFAULT_RESOLUTION) -> ValueEstimate:
    """``v_*(N, delta)``."""
    return optimal_value(spec, spec.grand, None, ds, resolution)


def constant_spec(game: Game, floor: float = 0.0) -> DynamicSpec:
    """Repeated static game: ``V(S; x) = game`` restricted to ``S`` for every ``x``."""
    return DynamicSpec(
        n=game.n, initial=game, transition=lambda S, x: game.restrict(S), floor=floor,
        name="static", grand_map=lambda S: (lambda c, w=game.value(S): w),
    )


def unanimity(n: int, scale: float = 1.0) -> Game:
    return unanimity_game(range(n), scale)


__all__ = [
    "AllocationSequence", "DiscountSpec", "DynamicSpec", "State", "Trajectory", "ValueEstimate",
    "allocation_grid", "as_schedule", "coalition", "constant_spec", "discounted_tails", "efficient_value",
    "optimal_value", "orbit_value", "ValueOracle", "present_value", "restrict", "simplex_lattice", "simulate",
    "uniform_schedule",
]
