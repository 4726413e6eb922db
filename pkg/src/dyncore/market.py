"""A market with externalities as a dynamic game.

Firms pool their factor endowments inside a consortium and split the pooled
basket to maximize total output.  Each firm's productivity scale then moves
by ``e(k) * gamma ** (1 / (1 + x_i))``, where ``k`` is the consortium size
and ``x_i`` the firm's last allocation: firms that were paid more become more
efficient, and larger consortia enjoy a larger externality.

Utilities are minima of affine functions with nonnegative coefficients, so
each coalition's worth is an exact linear program.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .aggregate import AggregateDynamic
from .dynamics import DynamicSpec
from .errors import InputError, SolverError
from .game import Game, format_coalition, members, size, submasks
from .simplex import linprog

log = logging.getLogger(__name__)

AUDIT_EVERY = 100
AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class Utility:
    """``u(y) = min_j (slopes[j] @ y + intercepts[j])``: concave and nondecreasing."""

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if a.shape[0] != b.shape[0] or a.shape[0] == 0:
            raise InputError("utility needs one intercept per affine piece")
        if np.any(a < 0) or np.any(b < 0):
            raise InputError("utility pieces need nonnegative slopes and intercepts")
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", b)

    @property
    def factors(self) -> int:
        return self.slopes.shape[1]

    def __call__(self, y) -> float:
        return float(np.min(self.slopes @ np.asarray(y, dtype=float) + self.intercepts))

    @classmethod
    def linear(cls, weights) -> "Utility":
        w = np.asarray(weights, dtype=float)
        return cls(w[None, :], np.zeros(1))

    @classmethod
    def from_breakpoints(cls, xs, ys) -> "Utility":
        """Single-factor utility through ``(xs, ys)``, flat after the last point.

        The points must describe a concave nondecreasing function starting at ``xs[0] = 0``.
        """
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2 or xs[0] != 0 or np.any(np.diff(xs) <= 0):
            raise InputError("breakpoints need increasing xs starting at 0, one y per x")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(slopes < -1e-12) or np.any(np.diff(slopes) > 1e-12):
            raise InputError("breakpoints must describe a concave nondecreasing function")
        slopes = np.append(np.maximum(slopes, 0.0), 0.0)
        intercepts = np.append(ys[:-1] - slopes[:-1] * xs[:-1], ys[-1])
        return cls(slopes[:, None], intercepts)

    def to_json(self) -> dict:
        return {"slopes": self.slopes.tolist(), "intercepts": self.intercepts.tolist()}


@dataclass(frozen=True, eq=False)
class MarketSpec:
    endowments: np.ndarray
    utilities: tuple[Utility, ...]
    gamma: float = 0.8
    eta: float = 0.1
    floor: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.endowments, dtype=float))
        if np.any(y < 0):
            raise InputError("endowments must be nonnegative")
        if len(self.utilities) != y.shape[0]:
            raise InputError("one utility per firm")
        if any(u.factors != y.shape[1] for u in self.utilities):
            raise InputError("utilities and endowments disagree on the number of factors")
        if not 0 < self.gamma < 1:
            raise InputError("gamma must lie in (0, 1)")
        if self.eta <= 0:
            raise InputError("the externality must increase strictly with consortium size (eta > 0)")
        y.setflags(write=False)
        object.__setattr__(self, "endowments", y)
        object.__setattr__(self, "utilities", tuple(self.utilities))

    @property
    def n(self) -> int:
        return self.endowments.shape[0]

    @property
    def factors(self) -> int:
        return self.endowments.shape[1]

    def externality(self, k: int) -> float:
        """``e(k) = 1 + eta * (k - 1)``."""
        return 1.0 + self.eta * (k - 1)

    def growth(self, k: int, x) -> np.ndarray:
        """Scale multipliers ``e(k) * gamma ** (1 / (1 + x_i))``."""
        x = np.asarray(x, dtype=float)
        return self.externality(k) * self.gamma ** (1.0 / (1.0 + x))

    def to_json(self) -> dict:
        return {"endowments": self.endowments.tolist(), "utilities": [u.to_json() for u in self.utilities],
                "gamma": self.gamma, "eta": self.eta, "floor": self.floor}


def market_spec_from_json(data: dict) -> MarketSpec:
    data = dict(data)
    try:
        utils = []
        for u in data.pop("utilities"):
            if "breakpoints" in u:
                xs, ys = u["breakpoints"]
                utils.append(Utility.from_breakpoints(xs, ys))
            else:
                utils.append(Utility(u["slopes"], u["intercepts"]))
        return MarketSpec(np.asarray(data.pop("endowments"), dtype=float), tuple(utils), **data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad market spec: {exc}") from None


def random_market(seed: int, n: int = 3, factors: int = 2, pieces: int = 3, gamma: float = 0.8,
                  eta: float = 0.1) -> MarketSpec:
    """Seeded instance: slopes and intercepts in ``[0, 1]``, endowments in ``[0, 2]``."""
    rng = np.random.default_rng(seed)
    utils = tuple(Utility(rng.uniform(0, 1, (pieces, factors)), rng.uniform(0, 1, pieces)) for _ in range(n))
    endow = rng.uniform(0, 2, (n, factors))
    return MarketSpec(endow, utils, gamma, eta, params={"seed": seed})


# -- stage games ----------------------------------------------------------------

def coalition_output(ms: MarketSpec, scales, T: int) -> float:
    """Best total scaled output of ``T`` from its pooled endowment."""
    firms = members(T)
    if not firms:
        return 0.0
    scales = np.asarray(scales, dtype=float)
    if len(firms) == 1:
        i = firms[0]
        return float(scales[i] * ms.utilities[i](ms.endowments[i]))
    l = ms.factors
    m = len(firms)
    pooled = ms.endowments[list(firms)].sum(axis=0)
    nz = m * l
    # variables: z (firm-major, l per firm) then output levels t (one per firm)
    c = np.concatenate([np.zeros(nz), -scales[list(firms)]])
    rows, rhs = [], []
    for j, i in enumerate(firms):
        u = ms.utilities[i]
        for a, b in zip(u.slopes, u.intercepts):
            row = np.zeros(nz + m)
            row[j * l:(j + 1) * l] = -a
            row[nz + j] = 1.0
            rows.append(row)
            rhs.append(b)
    A_eq = np.zeros((l, nz + m))
    for j in range(m):
        A_eq[:, j * l:(j + 1) * l] = np.eye(l)
    try:
        res = linprog(c, np.array(rows), np.array(rhs), A_eq, pooled)
    except SolverError as exc:
        raise SolverError(f"market LP for coalition {format_coalition(T)} failed: {exc}") from None
    return max(0.0, -res.fun)


def stage_market_game(ms: MarketSpec, scales, S: int) -> Game:
    """Stage game of consortium ``S`` when firms produce at the given scales."""
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (ms.n,) or np.any(scales <= 0) or not np.all(np.isfinite(scales)):
        raise InputError("scales must be one positive finite number per firm")
    firms = members(S)
    return Game.from_function(firms, lambda T: coalition_output(ms, scales, T))


# -- dynamics ---------------------------------------------------------------------

@dataclass(frozen=True)
class FirmState:
    """Production scales, kept both directly and as logs for the periodic audit."""

    scales: tuple[float, ...]
    logs: tuple[float, ...]
    steps: int = 0

    @classmethod
    def initial(cls, n: int) -> "FirmState":
        return cls((1.0,) * n, (0.0,) * n, 0)

    def advance(self, ms: MarketSpec, S: int, x) -> "FirmState":
        firms = list(members(S))
        factor = ms.growth(size(S), x)
        scales = np.array(self.scales)
        logs = np.array(self.logs)
        scales[firms] *= factor
        logs[firms] += np.log(factor)
        steps = self.steps + 1
        if steps % AUDIT_EVERY == 0:
            exact = np.exp(logs)
            err = np.max(np.abs(scales - exact) / exact)
            if err > AUDIT_TOL:
                log.warning("scale drift %.2e after %d steps; resynchronized", err, steps)
                scales = exact
        return FirmState(tuple(scales.tolist()), tuple(logs.tolist()), steps)


def market_dynamic(ms: MarketSpec, name: str = "market") -> DynamicSpec:
    """Dynamic whose stage games follow the firms' evolving scales.

    A consortium's size ``k`` is its size in the period being played, so a
    splinter grows with ``e(|S|)``.  Worths depend on individual shares, not
    only on coalition totals, so this dynamic has no aggregate shortcut.
    """
    def stateful(S, x, state):
        state = FirmState.initial(ms.n) if state is None else state
        state = state.advance(ms, S, x)
        return stage_market_game(ms, state.scales, S), state

    start = FirmState.initial(ms.n)
    v1 = stage_market_game(ms, start.scales, (1 << ms.n) - 1)
    return DynamicSpec(ms.n, v1, floor=ms.floor, name=name, same_initial=True, stateful=stateful,
                       initial_aux=start, params={"market": ms.to_json(), **ms.params})


def singleton_map(ms: MarketSpec, i: int):
    """Worth map of a lone firm: its whole output is its allocation, so ``c -> e(1) gamma**(1/(1+c)) c``."""
    def U(c):
        c = np.asarray(c, dtype=float)
        out = ms.growth(1, c) * c
        return float(out) if out.ndim == 0 else out
    return U


def singleton_dynamic(ms: MarketSpec, i: int) -> AggregateDynamic:
    """One-firm aggregate dynamic for the fixed-point tools."""
    v1 = Game((0,), np.array([0.0, ms.utilities[i](ms.endowments[i])]))
    return AggregateDynamic(v1, {1: singleton_map(ms, i)}, name=f"market_firm_{i}")


def is_superadditive(g: Game, tol: float = 1e-9) -> bool:
    w = g.worth
    full = (1 << g.n) - 1
    for A in range(1, full + 1):
        rest = full & ~A
        for B in submasks(rest):
            if B > A and w[A | B] < w[A] + w[B] - tol:
                return False
    return True


__all__ = [
    "FirmState", "MarketSpec", "Utility", "coalition_output", "is_superadditive", "market_dynamic",
    "market_spec_from_json", "random_market", "singleton_dynamic", "singleton_map", "stage_market_game",
]
