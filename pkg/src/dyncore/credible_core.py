"""Allocation policies, continuations, the credible core and one-shot deviations.

A policy maps the current state ``(S, x)`` (coalition and the allocation it
received last period) to an allocation of the next stage game ``V(S; x)``.
The dynamics are Markov, so histories are explored as states: every grid
allocation of every reachable stage game, after at most ``depth`` splits and
``h_check`` periods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import (DEFAULT_RESOLUTION, DiscountSpec, DynamicSpec, State, Trajectory, ValueOracle,
                       _check_step, _restriction_index, allocation_grid, allocation_key, simulate)
from .errors import BudgetError, InputError, PolicyError, SimulationError
from .game import TOL_FEAS, Game, format_coalition, least_core, members, size, submasks


# -- policies ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Policy:
    """``rule(S, entry, game)`` returns an allocation of ``game``; ``entry`` is ``None`` in period 1."""

    name: str
    rule: Callable[[int, np.ndarray | None, Game], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, S: int, entry, game: Game) -> np.ndarray:
        return np.asarray(self.rule(S, entry, game), dtype=float)

    def to_json(self) -> dict:
        return {"name": self.name, **self.params}


def uniform_policy() -> Policy:
    return Policy("uniform", lambda S, entry, game: np.full(game.n, game.grand_worth / game.n))


def constant_policy(weights) -> Policy:
    """Split every stage worth in proportion to fixed per-player weights."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise InputError("policy weights must be nonnegative with positive sum")

    def rule(S, entry, game):
        sub = w[list(members(S))]
        if sub.sum() <= 0:
            return np.full(game.n, game.grand_worth / game.n)
        return game.grand_worth * sub / sub.sum()

    return Policy("constant", rule, {"weights": w.tolist()})


def cyclic_policy() -> Policy:
    """Rotate last period's shares one seat to the right, rescaled to the new worth."""
    def rule(S, entry, game):
        if entry is None or np.sum(entry) <= 0:
            return np.full(game.n, game.grand_worth / game.n)
        e = np.asarray(entry, dtype=float)
        return game.grand_worth * np.roll(e / e.sum(), 1)

    return Policy("cyclic", rule)


def greedy_core_policy(floor: float = 0.0) -> Policy:
    """Least-core witness of each stage game."""
    return Policy("greedy-core", lambda S, entry, game: least_core(game, floor).witness, {"floor": floor})


POLICIES = {"uniform": uniform_policy, "constant": constant_policy, "cyclic": cyclic_policy,
            "greedy-core": greedy_core_policy}


def policy_from_json(data: dict | str) -> Policy:
    if isinstance(data, str):
        data = {"name": data}
    data = dict(data)
    name = data.pop("name", None)
    if name not in POLICIES:
        raise InputError(f"unknown policy {name!r}; known: {', '.join(POLICIES)}")
    try:
        return POLICIES[name](**data)
    except TypeError as exc:
        raise InputError(f"bad parameters for policy {name!r}: {exc}") from None


# -- continuations ----------------------------------------------------------

def continuation(spec: DynamicSpec, policy: Policy, state: State, ds: DiscountSpec,
                 length: int | None = None) -> Trajectory:
    """Stream generated by the policy from ``state``; the coalition stays ``state.coalition``."""
    S = state.coalition

    def schedule(t, game, prev):
        return policy(S, prev, game)

    try:
        return simulate(spec, schedule, length=ds.horizon if length is None else length, start=state)
    except PolicyError:
        raise
    except SimulationError as exc:
        raise PolicyError(exc.step, f"policy {policy.name}: {exc.reason}") from None


# -- state-space analysis -----------------------------------------------------

ROOT = ("root",)


@dataclass(frozen=True)
class DeviationReport:
    history: tuple
    coalition: int
    gain: float
    deviation_allocation: np.ndarray
    eps: float

    @property
    def profitable(self) -> bool:
        return self.gain > self.eps

    def to_json(self) -> dict:
        return {"history": _history_json(self.history), "coalition": format_coalition(self.coalition),
                "gain": self.gain, "deviation_allocation": self.deviation_allocation.tolist(),
                "profitable": self.profitable, "eps": self.eps}


def _history_json(history) -> list:
    return [{"coalition": format_coalition(S), "allocation": list(x)} for S, x in history]


class PolicyAnalyzer:
    """Memoized continuation values, next-period games and optimal values for one policy.

    Allocations are handled internally through their rounded keys (see
    :func:`allocation_key`); ``None`` stands for the empty history.
    """

    def __init__(self, spec: DynamicSpec, policy: Policy, ds: DiscountSpec,
                 resolution: float = DEFAULT_RESOLUTION):
        if spec.stateful is not None:
            raise InputError("policy analysis needs a dynamic without hidden state")
        self.spec, self.policy, self.ds, self.resolution = spec, policy, ds, resolution
        self.oracle = ValueOracle(spec, ds, resolution)
        self._vec: dict = {}
        self._games: dict = {}
        self._moves: dict = {}
        self._pv: dict = {}
        self._grids: dict = {}
        self._parent: dict = {}

    # keys
    def key(self, x) -> tuple | None:
        if x is None:
            return None
        k = allocation_key(x)
        if k not in self._vec:
            self._vec[k] = np.asarray(x, dtype=float)
        return k

    def vec(self, k) -> np.ndarray | None:
        if k is None:
            return None
        v = self._vec.get(k)
        return np.array(k) if v is None else v

    @staticmethod
    def sub(k, S: int, T: int):
        """Restriction of a key from ``S`` to ``T``."""
        if k is None:
            return None
        return tuple(k[j] for j in _restriction_index(S, T))

    # games and policy moves
    def game_after(self, S: int, k) -> Game:
        """``V(S; entry)``, or ``v_1^S`` for the empty history."""
        g = self._games.get((S, k))
        if g is None:
            g = self.spec.initial_game(S) if k is None else self.spec.next_game(S, self.vec(k))
            self._games[(S, k)] = g
        return g

    def move(self, S: int, k) -> tuple:
        y = self._moves.get((S, k))
        if y is None:
            game = self.game_after(S, k)
            out = self.policy(S, self.vec(k), game)
            try:
                _check_step(0, game, out, self.spec.floor, PolicyError)
            except PolicyError as exc:
                raise PolicyError(0, f"policy {self.policy.name} at {format_coalition(S)}: {exc.reason}") from None
            y = self._moves[(S, k)] = self.key(out)
        return y

    def grid(self, S: int, k) -> list:
        """Grid allocations of ``V(S; entry)`` plus the policy's own move, as keys."""
        pts = self._grids.get((S, k))
        if pts is None:
            W = self.game_after(S, k).grand_worth
            pts = [self.key(p) for p in allocation_grid(size(S), W, self.spec.floor, self.resolution)]
            m = self.move(S, k)
            if m not in pts:
                pts.append(m)
            self._grids[(S, k)] = pts
        return pts

    # continuation values
    def pv(self, S: int, k) -> np.ndarray:
        """Discounted value (per member of ``S``) of the policy stream after ``(S, entry)``.

        Memo entries carry the number of periods they look ahead (``inf`` once a
        cycle closes the stream exactly), so truncated chains are reused
        whenever they still reach the horizon.
        """
        if size(S) == 1:
            # a lone player's stream is forced, so its value is the optimal one
            return np.array([self.oracle(S, self.vec(k)).value])
        horizon = self.ds.horizon
        hit = self._pv.get((S, k))
        if hit is not None and hit[1] >= horizon:
            return hit[0]
        d = self.ds.delta
        chain, pays, index = [], [], {}
        cur = k
        tail, tail_depth = None, 0
        while True:
            if chain:
                hit = self._pv.get((S, cur))
                if hit is not None and hit[1] >= horizon - len(chain):
                    tail, tail_depth = hit
                    break
            if cur in index or len(chain) >= horizon:
                break
            index[cur] = len(chain)
            chain.append(cur)
            cur = self.move(S, cur)
            pays.append(self.vec(cur))
        L = len(chain)
        if tail is None and cur in index:
            c = index[cur]
            part = np.zeros_like(pays[0])
            for j in range(L - 1, c - 1, -1):
                part = (1 - d) * pays[j] + d * part
            tail, tail_depth = part / (1 - d ** (L - c)), np.inf
        elif tail is None:
            tail = np.zeros_like(pays[0])
        val = tail
        for j in range(L - 1, -1, -1):
            val = (1 - d) * pays[j] + d * val
            depth = tail_depth + (L - j)
            old = self._pv.get((S, chain[j]))
            if old is None or old[1] < depth:
                self._pv[(S, chain[j])] = (val, depth)
        return self._pv[(S, k)][0]

    def share(self, S: int, k, T: int) -> float:
        return float(self.pv(S, k)[_restriction_index(S, T)].sum())

    def deviation_value(self, T: int, z) -> float:
        """``T`` plays ``z`` next period, then the policy continues inside ``T``."""
        return (1 - self.ds.delta) * sum(z) + self.ds.delta * float(self.pv(T, z).sum())

    def one_step(self, S: int, k, T: int) -> tuple[float, tuple]:
        """Best single deviation of ``T`` after state ``(S, entry)`` and its gain."""
        planned = self.share(S, k, T)
        best, arg = -np.inf, None
        for z in self.grid(T, self.sub(k, S, T)):
            v = self.deviation_value(T, z)
            if v > best + 1e-15:
                best, arg = v, z
        return best - planned, arg

    def multi_step_value(self, T: int, z, stages: int, memo: dict) -> float:
        """Value to ``T`` after paying ``z`` when it may keep deviating for ``stages`` more periods."""
        mk = (T, z, stages)
        best = memo.get(mk)
        if best is not None:
            return best
        best = float(self.pv(T, z).sum())
        if stages > 0 and size(T) > 1:
            d = self.ds.delta
            for w in self.grid(T, z):
                best = max(best, (1 - d) * sum(w) + d * self.multi_step_value(T, w, stages - 1, memo))
        memo[mk] = best
        return best

    def multi_step(self, S: int, k, T: int, L: int, memo: dict) -> tuple[float, tuple]:
        """Best deviation of ``T`` lasting at most ``L`` periods before the policy resumes."""
        planned = self.share(S, k, T)
        d = self.ds.delta
        best, arg = -np.inf, None
        for z in self.grid(T, self.sub(k, S, T)):
            v = (1 - d) * sum(z) + d * self.multi_step_value(T, z, L - 1, memo)
            if v > best + 1e-15:
                best, arg = v, z
        return best - planned, arg

    # histories
    def explore(self, depth: int, h_check: int, max_states: int = 200_000) -> list:
        """Breadth-first list of reachable states ``(S, key, splits)`` with parent links.

        Level 0 is the empty history.  Every grid allocation of every reachable
        stage game is a successor, together with the policy's own move.
        Singleton states are skipped: their continuation is forced and optimal.
        """
        full = self.spec.grand
        order = [(full, None, 0)]
        parent = {(full, None): None}
        frontier = order[:]
        for level in range(1, h_check + 1):
            nxt = []
            for S, k, splits in frontier:
                subs = [S] + (list(submasks(S, proper=True)) if splits < depth else [])
                for T in subs:
                    if size(T) == 1:
                        continue  # a lone player has one allocation and nobody to deviate
                    for y in self.grid(T, self.sub(k, S, T)):
                        if (T, y) in parent:
                            continue
                        if len(parent) >= max_states:
                            raise BudgetError(f"history exploration exceeded {max_states} states "
                                              f"(reached level {level})", len(parent))
                        parent[(T, y)] = (S, k)
                        item = (T, y, splits + (T != S))
                        order.append(item)
                        nxt.append(item)
            frontier = nxt
            if not frontier:
                break
        self._parent = parent
        return order

    def history(self, S: int, k) -> tuple:
        """``(coalition, allocation)`` pairs leading to the state, oldest first."""
        out = []
        node = (S, k)
        while self._parent.get(node) is not None:
            out.append((node[0], tuple(float(v) for v in self.vec(node[1]))))
            node = self._parent[node]
        return tuple(reversed(out))


# -- credible core ------------------------------------------------------------

@dataclass(frozen=True)
class CredibleVerdict:
    passed: bool
    eps: float
    explored: int
    worst_slack: float
    counterexample: dict | None
    tolerance: float = TOL_FEAS

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {"verdict": self.passed, "eps": self.eps, "explored": self.explored,
                "worst_slack": self.worst_slack, "tolerance": self.tolerance,
                "counterexample": self.counterexample}


def truncation_tolerance(spec: DynamicSpec, ds: DiscountSpec) -> float:
    """Slack allowed for comparing a closed-cycle policy value with a horizon-truncated optimum."""
    return TOL_FEAS + 2 * ds.delta ** ds.horizon * max(1.0, float(np.abs(spec.initial.worth).max()))


def credible_core_check(spec: DynamicSpec, policy: Policy, ds: DiscountSpec, eps: float = 0.0,
                        depth: int | None = None, h_check: int | None = None,
                        resolution: float = DEFAULT_RESOLUTION, max_states: int = 200_000,
                        analyzer: PolicyAnalyzer | None = None) -> CredibleVerdict:
    """After every explored history, is the policy's continuation eps-stable for the current coalition?

    The dynamics are Markov, so the continuation from a state is stable iff at
    its first period no ``T`` inside the coalition can beat its planned share by
    more than ``eps`` with the best ``T``-history; later periods are states
    of their own and are checked there.
    """
    depth = spec.n - 1 if depth is None else depth
    h_check = ds.horizon if h_check is None else h_check
    an = PolicyAnalyzer(spec, policy, ds, resolution) if analyzer is None else analyzer
    states = an.explore(depth, h_check, max_states)
    tol = truncation_tolerance(spec, ds)
    worst = (np.inf, None)
    for S, k, _ in states:
        for T in submasks(S):
            slack = an.share(S, k, T) - an.oracle(T, an.vec(an.sub(k, S, T))).value
            if slack < worst[0]:
                worst = (slack, (S, k, T))
            if slack < -eps - tol:
                cx = {"history": _history_json(an.history(S, k)), "coalition": format_coalition(T),
                      "h": 0, "slack": slack}
                return CredibleVerdict(False, eps, len(states), slack, cx, tol)
    return CredibleVerdict(True, eps, len(states), float(worst[0]), None, tol)


def one_deviation_check(spec: DynamicSpec, policy: Policy, history_state: State | None, S: int,
                        ds: DiscountSpec, eps: float = 0.0, resolution: float = DEFAULT_RESOLUTION,
                        analyzer: PolicyAnalyzer | None = None) -> DeviationReport:
    """Best one-period deviation of ``S`` (a proper subset of the current coalition) from the policy.

    ``history_state=None`` is the empty history: ``S`` splits off before period 1.
    """
    an = PolicyAnalyzer(spec, policy, ds, resolution) if analyzer is None else analyzer
    cur, entry = (spec.grand, None) if history_state is None else (history_state.coalition,
                                                                   np.asarray(history_state.allocation, dtype=float))
    if not S or S & ~cur or S == cur:
        raise InputError(f"{format_coalition(S)} must be a nonempty proper subset of {format_coalition(cur)}")
    gain, z = an.one_step(cur, an.key(entry), S)
    hist = () if entry is None else ((cur, tuple(float(v) for v in entry)),)
    return DeviationReport(hist, S, float(gain), an.vec(z), eps)


@dataclass(frozen=True)
class Theorem3Verdict:
    eps: float
    stages: int
    a_max_gain: float
    b_max_gain: float
    a_first: dict | None
    b_first: dict | None
    explored: int

    @property
    def a_profitable(self) -> bool:
        return self.a_max_gain > self.eps

    @property
    def b_profitable(self) -> bool:
        return self.b_max_gain > self.eps

    @property
    def agree(self) -> bool:
        if self.a_profitable == self.b_profitable:
            return True
        # one-shot gains below eps everywhere bound an L-stage gain by L * eps
        return not self.a_profitable and self.b_max_gain <= self.stages * self.eps + TOL_FEAS

    @property
    def same_first(self) -> bool:
        if self.a_first is None or self.b_first is None:
            return self.a_first is None and self.b_first is None
        return self.a_first["index"] == self.b_first["index"]

    def to_json(self) -> dict:
        return {"eps": self.eps, "stages": self.stages, "A_profitable": self.a_profitable,
                "B_profitable": self.b_profitable, "agree": self.agree, "same_first": self.same_first,
                "a_max_gain": self.a_max_gain, "b_max_gain": self.b_max_gain,
                "a_first": self.a_first, "b_first": self.b_first, "explored": self.explored}


def theorem3_equivalence(spec: DynamicSpec, policy: Policy, ds: DiscountSpec, eps: float = 0.0,
                         depth: int | None = None, h_check: int | None = None, stages: int = 3,
                         resolution: float = DEFAULT_RESOLUTION, max_states: int = 200_000) -> Theorem3Verdict:
    """(A) one-period deviations versus (B) deviations lasting up to ``stages`` periods, on every explored history."""
    if stages < 1:
        raise InputError("stages must be at least 1")
    depth = spec.n - 1 if depth is None else depth
    h_check = ds.horizon if h_check is None else h_check
    an = PolicyAnalyzer(spec, policy, ds, resolution)
    states = an.explore(depth, h_check, max_states)
    memo: dict = {}
    a_max = b_max = -np.inf
    a_first = b_first = None
    for idx, (S, k, _) in enumerate(states):
        for T in submasks(S, proper=True):
            ga, za = an.one_step(S, k, T)
            gb, zb = an.multi_step(S, k, T, stages, memo)
            a_max, b_max = max(a_max, ga), max(b_max, gb)
            if a_first is None and ga > eps:
                a_first = _first(an, idx, S, k, T, ga, za)
            if b_first is None and gb > eps:
                b_first = _first(an, idx, S, k, T, gb, zb)
    a_max = 0.0 if a_max == -np.inf else a_max
    b_max = 0.0 if b_max == -np.inf else b_max
    return Theorem3Verdict(eps, stages, float(a_max), float(b_max), a_first, b_first, len(states))


def _first(an, idx, S, k, T, gain, z) -> dict:
    return {"index": idx, "history": _history_json(an.history(S, k)), "coalition": format_coalition(T),
            "gain": float(gain), "deviation_allocation": an.vec(z).tolist()}


__all__ = [
    "CredibleVerdict", "DeviationReport", "POLICIES", "Policy", "PolicyAnalyzer", "Theorem3Verdict",
    "constant_policy", "continuation", "credible_core_check", "cyclic_policy", "greedy_core_policy",
    "one_deviation_check", "policy_from_json", "theorem3_equivalence", "truncation_tolerance", "uniform_policy",
]
