"""Static TU games: coalitions as bitsets, core membership, least core, game arithmetic.

Players are global indices ``0..n-1``.  A coalition is an ``int`` bitset over
those indices (bit ``i`` set means player ``i`` is a member).  A :class:`Game`
is defined over a grand coalition and stores its characteristic function
densely: ``worth[m]`` is the worth of the coalition whose *local* bitset is
``m``, bit ``j`` of ``m`` standing for ``players[j]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .simplex import linprog

TOL_FEAS = 1e-9
MAX_PLAYERS = 16  # exact enumeration bound for LP work; bitsets themselves go to 24
MAX_BITSET = 24


# -- coalitions -------------------------------------------------------------

def coalition(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        if not 0 <= i < MAX_BITSET:
            raise InputError(f"player index {i} outside 0..{MAX_BITSET - 1}")
        mask |= 1 << i
    return mask


@lru_cache(maxsize=1 << 16)
def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def size(mask: int) -> int:
    return mask.bit_count()


def grand(n: int) -> int:
    return (1 << n) - 1


def submasks(mask: int, *, proper: bool = False, nonempty: bool = True) -> Iterator[int]:
    """Subsets of ``mask`` in increasing bitset order."""
    sub_list = []
    s = mask
    while True:
        sub_list.append(s)
        if s == 0:
            break
        s = (s - 1) & mask
    for s in reversed(sub_list):
        if nonempty and s == 0:
            continue
        if proper and s == mask:
            continue
        yield s


def format_coalition(mask: int) -> str:
    return "{" + ",".join(str(i) for i in members(mask)) + "}"


@lru_cache(maxsize=None)
def membership_matrix(k: int) -> np.ndarray:
    """``(2**k, k)`` 0/1 matrix; row ``m`` is the indicator of local bitset ``m``."""
    idx = np.arange(1 << k)
    return ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


def coalition_sums(x: np.ndarray) -> np.ndarray:
    """``x(T)`` for every local bitset ``T``.  Works on stacked allocations too."""
    x = np.asarray(x, dtype=float)
    return x @ membership_matrix(x.shape[-1]).T


# -- games ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Game:
    """Characteristic function over the grand coalition ``players``."""

    players: tuple[int, ...]
    worth: np.ndarray = field(repr=False)

    def __post_init__(self):
        players = tuple(int(p) for p in self.players)
        if list(players) != sorted(set(players)):
            raise InputError("players must be distinct and increasing")
        if len(players) > MAX_BITSET:
            raise InputError(f"at most {MAX_BITSET} players are supported")
        worth = np.array(self.worth, dtype=float)
        if worth.shape != (1 << len(players),):
            raise InputError(f"worth table must have length {1 << len(players)}")
        if not np.all(np.isfinite(worth)):
            raise InputError("worths must be finite")
        if abs(worth[0]) > TOL_FEAS:
            raise InputError("worth of the empty coalition must be 0")
        if worth.min(initial=0.0) < -TOL_FEAS:
            raise InputError("worths must be nonnegative")
        worth[0] = 0.0
        worth.setflags(write=False)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "worth", worth)

    # construction helpers
    @classmethod
    def from_function(cls, players: Sequence[int], fn: Callable[[int], float]) -> "Game":
        """Build a game from ``fn(global_mask)``."""
        players = tuple(players)
        table = np.zeros(1 << len(players))
        for m in range(1, 1 << len(players)):
            table[m] = fn(_globalize(players, m))
        return cls(players, table)

    @classmethod
    def additive(cls, weights: Sequence[float], players: Sequence[int] | None = None) -> "Game":
        weights = np.asarray(weights, dtype=float)
        players = tuple(range(weights.size)) if players is None else tuple(players)
        return cls(players, coalition_sums(weights))

    @classmethod
    def zero(cls, players: Sequence[int]) -> "Game":
        return cls(tuple(players), np.zeros(1 << len(players)))

    # queries
    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def grand(self) -> int:
        return coalition(self.players)

    @property
    def grand_worth(self) -> float:
        return float(self.worth[-1])

    def local(self, mask: int) -> int:
        out = 0
        for j, p in enumerate(self.players):
            if mask >> p & 1:
                out |= 1 << j
        if _globalize(self.players, out) != mask:
            raise InputError(f"coalition {format_coalition(mask)} is not inside {format_coalition(self.grand)}")
        return out

    def value(self, mask: int) -> float:
        return float(self.worth[self.local(mask)])

    def __call__(self, mask: int) -> float:
        return self.value(mask)

    def restrict(self, mask: int) -> "Game":
        """The subgame on ``mask`` (worths of subsets of ``mask`` unchanged)."""
        sub = tuple(p for p in self.players if mask >> p & 1)
        if coalition(sub) != mask:
            raise InputError(f"coalition {format_coalition(mask)} is not inside {format_coalition(self.grand)}")
        table = np.zeros(1 << len(sub))
        for m in range(1, 1 << len(sub)):
            table[m] = self.worth[self.local(_globalize(sub, m))]
        return Game(sub, table)

    def scaled(self, factor: float) -> "Game":
        return Game(self.players, factor * self.worth)

    def allclose(self, other: "Game", atol: float = 1e-9) -> bool:
        return self.players == other.players and bool(np.allclose(self.worth, other.worth, atol=atol, rtol=0))

    def items(self) -> Iterator[tuple[int, float]]:
        for m in range(1, 1 << self.n):
            yield _globalize(self.players, m), float(self.worth[m])

    # JSON
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "players": list(self.players),
            "worth": {",".join(map(str, members(T))): w for T, w in self.items() if w != 0.0},
        }


def _globalize(players: Sequence[int], local_mask: int) -> int:
    out = 0
    j = 0
    while local_mask:
        if local_mask & 1:
            out |= 1 << players[j]
        local_mask >>= 1
        j += 1
    return out


def game_from_json(data: dict | str) -> Game:
    """Parse ``{"n": int, "worth": {"0,1": 3.0, ...}}``; absent subsets are 0."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        n = int(data["n"])
        worths = data.get("worth", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed game JSON: {exc}") from None
    players = tuple(data.get("players", range(n)))
    if len(players) != n:
        raise InputError("'players' must list exactly n players")
    table = np.zeros(1 << n)
    probe = Game.zero(players)
    for key, w in worths.items():
        key = key.strip()
        if key in ("", "∅", "{}"):
            if float(w) != 0.0:
                raise InputError("the empty coalition must have worth 0")
            continue
        try:
            mask = coalition(int(tok) for tok in key.strip("{}").split(","))
        except ValueError:
            raise InputError(f"bad coalition key {key!r}") from None
        table[probe.local(mask)] = float(w)
    return Game(players, table)


def majority_game(n: int, quota: int | None = None, scale: float = 1.0) -> Game:
    """Simple majority game: worth ``scale`` iff at least ``quota`` members (default strict majority)."""
    quota = n // 2 + 1 if quota is None else quota
    return Game.from_function(range(n), lambda T: scale if size(T) >= quota else 0.0)


def unanimity_game(players: Sequence[int], scale: float = 1.0) -> Game:
    full = coalition(players)
    return Game.from_function(players, lambda T: scale if T == full else 0.0)


# -- allocations ------------------------------------------------------------

def check_allocation(g: Game, x, floor: float = 0.0, tol: float = TOL_FEAS) -> np.ndarray:
    """Validate that ``x`` is an allocation of ``g`` with floor ``floor``; return it as an array."""
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise InputError(f"allocation has shape {x.shape}, game has {g.n} players")
    scale = max(1.0, abs(g.grand_worth))
    if abs(x.sum() - g.grand_worth) > tol * scale * 10:
        raise InputError(f"allocation sums to {x.sum():.12g}, grand worth is {g.grand_worth:.12g}")
    if np.any(x < floor - tol * scale):
        raise InputError(f"allocation {x} violates the floor {floor}")
    return x


def excesses(g: Game, x) -> np.ndarray:
    """``g(T) - x(T)`` for every local bitset ``T`` (index 0 is the empty set)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise InputError(f"allocation has shape {x.shape}, game has {g.n} players")
    return g.worth - coalition_sums(x)


def core_membership(g: Game, x, eps: float = 0.0, tol: float = TOL_FEAS) -> bool:
    """True iff ``x(T) >= g(T) - eps`` for every nonempty ``T``."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    return bool(excesses(g, x)[1:].max(initial=-np.inf) <= eps + tol)


@dataclass(frozen=True)
class LeastCoreReport:
    epsilon_star: float
    witness: np.ndarray
    binding: tuple[int, ...]
    game: Game = field(repr=False)

    @property
    def core_nonempty(self) -> bool:
        return self.epsilon_star <= TOL_FEAS


def least_core(g: Game, floor: float = 0.0, tol: float = TOL_FEAS) -> LeastCoreReport:
    """Minimal ``eps >= 0`` for which the eps-core (with floor) is nonempty.

    Row generation over the ``2**n - 1`` coalition constraints: the LP starts
    from the singletons and the grand coalition and adds the most violated
    coalition until none is violated.  The grand coalition is among the
    constraints, so ``epsilon_star`` is 0 exactly when the core is nonempty.
    """
    n = g.n
    if n > MAX_PLAYERS:
        raise InputError(f"least_core enumerates coalitions; n={n} exceeds {MAX_PLAYERS}")
    d = g.grand_worth
    if n * floor > d + tol:
        raise ConfigurationError(f"floor {floor} leaves no allocation of grand worth {d}")
    M = membership_matrix(n)
    full = (1 << n) - 1
    active = sorted({1 << i for i in range(n)} | {full})
    # variables: y = x - floor (n of them), then eps
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq = np.ones((1, n + 1))
    A_eq[0, -1] = 0.0
    b_eq = [d - n * floor]
    while True:
        rows = M[active]
        A_ub = -np.hstack([rows, np.ones((len(active), 1))])
        b_ub = -(g.worth[active] - rows.sum(axis=1) * floor)
        res = linprog(c, A_ub, b_ub, A_eq, b_eq)
        x = res.x[:n] + floor
        e = res.x[-1]
        exc = g.worth - M @ x
        exc[0] = -np.inf
        worst = int(np.argmax(exc))
        if exc[worst] <= e + tol or worst in active:
            break
        active.append(worst)
        active.sort()
    exc = g.worth - M @ x
    binding = tuple(_globalize(g.players, m) for m in range(1, 1 << n) if exc[m] >= e - 1e-7)
    return LeastCoreReport(epsilon_star=float(e), witness=x, binding=binding, game=g)


def convex_combine(games: Sequence[Game], weights: Sequence[float], tol: float = 1e-9) -> Game:
    """The game ``sum_j weights[j] * games[j]`` (all over the same grand coalition)."""
    if len(games) == 0 or len(games) != len(weights):
        raise InputError("need one weight per game")
    w = np.asarray(weights, dtype=float)
    if np.any(w < -tol) or abs(w.sum() - 1.0) > tol * max(1, len(w)):
        raise InputError("weights must be nonnegative and sum to 1")
    players = games[0].players
    if any(gm.players != players for gm in games):
        raise InputError("games have different grand coalitions")
    table = np.tensordot(w, np.stack([gm.worth for gm in games]), axes=1)
    return Game(players, table)
