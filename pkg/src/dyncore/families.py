"""Built-in dynamic game families and the JSON dynamic-spec format.

A dynamic spec file is ``{"family": <name>, "params": {...}}``.  A plain game
file (``{"n": ..., "worth": {...}}``) is accepted wherever a spec is expected
and is read as the repeated static game.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .aggregate import AggregateDynamic, MonotoneMap, map_from_json
from .dynamics import DynamicSpec, constant_spec
from .errors import InputError
from .game import Game, coalition, format_coalition, game_from_json, majority_game, members, size, unanimity_game

FAMILIES: dict[str, Callable[..., DynamicSpec]] = {}


def family(name: str):
    def register(fn):
        FAMILIES[name] = fn
        return fn
    return register


def _parse_coalition(key: str) -> int:
    key = key.strip()
    return coalition(int(p) for p in key.split(",")) if key else 0


# -- worked examples ---------------------------------------------------------

def triangle_game(dummy: bool = True) -> Game:
    """Pairs of players 0, 1, 2 are worth 3, the three together 4; player 3 adds nothing.

    With ``dummy=False`` only the listed coalitions (and the grand coalition,
    worth 4) carry worth.
    """
    def worth(T: int) -> float:
        core = T & 0b0111
        if not dummy and T & 0b1000 and T != 0b1111:
            return 0.0
        if T == 0b1111:
            return 4.0
        k = size(core)
        return 3.0 if k == 2 else 4.0 if k == 3 else 0.0
    return Game.from_function(range(4), worth)


def swap_players(g: Game, i: int, j: int) -> Game:
    def perm(T: int) -> int:
        bi, bj = T >> i & 1, T >> j & 1
        T &= ~((1 << i) | (1 << j))
        return T | (bj << i) | (bi << j)
    return Game.from_function(g.players, lambda T: g.value(perm(T)))


@family("alternating_u1u2")
def alternating_u1u2(dummy: bool = True) -> DynamicSpec:
    """Four players; the stage game slides between ``u1`` and its 0-3 swap ``u2``.

    ``V(N; x) = u1 + lam * (u2 - u1)`` with ``lam = clip((x_0 - x_3 + 1) / 2)``,
    so ``(1, 3/2, 3/2, 0)`` leads to ``u2`` and ``(0, 3/2, 3/2, 1)`` back to ``u1``.
    """
    u1 = triangle_game(dummy)
    u2 = swap_players(u1, 0, 3)
    diff = u2.worth - u1.worth

    def transition(S, x):
        sel = dict(zip(members(S), x))
        lam = float(np.clip((sel.get(0, 0.0) - sel.get(3, 0.0) + 1) / 2, 0.0, 1.0))
        return Game(u1.players, u1.worth + lam * diff).restrict(S)

    grand = (1 << 4) - 1
    return DynamicSpec(n=4, initial=u1, transition=transition, name="alternating_u1u2",
                       grand_map=lambda S: (lambda c: 4.0) if S == grand else None,
                       initial_sub=u1.restrict, params={"dummy": dummy})


@family("efficiency_example")
def efficiency_example(n: int = 3) -> DynamicSpec:
    """Unanimity game first; equal splits keep the cake, any other split destroys it."""
    v1 = unanimity_game(range(n))

    def transition(S, x):
        x = np.asarray(x, dtype=float)
        if np.ptp(x) <= 1e-9:
            return unanimity_game(members(S), float(x.sum()))
        return Game.zero(members(S))

    return DynamicSpec(n=n, initial=v1, transition=transition, name="efficiency_example",
                       params={"n": n})


@family("damped_majority")
def damped_majority(k: int = 1, same_initial: bool = False) -> DynamicSpec:
    """``2k+1`` players; majority game scaled by ``x(N)`` inside ``N``.

    A coalition that has split off plays ``V(S; x)(T) = 2**-|T| * x(S) * maj(T)``.
    """
    n = 2 * k + 1
    maj = majority_game(n)
    grand = (1 << n) - 1

    def transition(S, x):
        total = float(np.sum(x))
        if S == grand:
            return maj.scaled(total)
        return Game.from_function(members(S), lambda T: 2.0 ** -size(T) * total * maj.value(T))

    def grand_map(S):
        if S == grand:
            return lambda c: c
        factor = 2.0 ** -size(S) * maj.value(S)
        return lambda c: factor * c

    return DynamicSpec(n=n, initial=maj, transition=transition, name="damped_majority",
                       grand_map=grand_map, same_initial=same_initial,
                       params={"k": k, "same_initial": same_initial})


@family("ei_cycle")
def ei_cycle(threshold: float = 0.8) -> DynamicSpec:
    """Three players; majority game unless one player got more than ``threshold``.

    Past the threshold the game moves linearly toward ``p_{-i}`` (the additive
    game paying 1/2 to each player other than ``i``), reached at ``x = e_i``.
    """
    n = 3
    maj = majority_game(n)
    grand = (1 << n) - 1
    p = [Game.additive([0.0 if j == i else 0.5 for j in range(n)]) for i in range(n)]

    def transition(S, x):
        x = np.asarray(x, dtype=float)
        if S != grand:
            return Game.from_function(members(S), lambda T: float(x.sum()) * maj.value(T))
        i = int(np.argmax(x))
        lam = float(np.clip((x[i] - threshold) / (1 - threshold), 0.0, 1.0))
        return Game(maj.players, (1 - lam) * maj.worth + lam * p[i].worth)

    def grand_map(S):
        if S == grand:
            return lambda c: 1.0
        w = maj.value(S)
        return lambda c: w * c

    return DynamicSpec(n=n, initial=maj, transition=transition, name="ei_cycle",
                       grand_map=grand_map, params={"threshold": threshold})


@family("static")
def static(game: dict | Game, floor: float = 0.0) -> DynamicSpec:
    g = game if isinstance(game, Game) else game_from_json(game)
    spec = constant_spec(g, floor)
    return _renamed(spec, "static", {"game": g.to_json(), "floor": floor})


@family("constant_majority")
def constant_majority(n: int = 3) -> DynamicSpec:
    return _renamed(constant_spec(majority_game(n)), "constant_majority", {"n": n})


@family("worth_destroying")
def worth_destroying(threshold: float = 0.8, residual: float = 0.5) -> DynamicSpec:
    """Majority game whose worth collapses toward ``residual * unanimity`` at lopsided splits.

    Only allocations far from the centre give stage games with a nonempty
    core, and those are exactly the ones that lose worth.
    """
    n = 3
    maj = majority_game(n)
    z = unanimity_game(range(n), residual)
    grand = (1 << n) - 1

    def transition(S, x):
        x = np.asarray(x, dtype=float)
        if S != grand:
            return Game.from_function(members(S), lambda T: float(x.sum()) * maj.value(T))
        lam = float(np.clip((x.max() - threshold) / (1 - threshold), 0.0, 1.0))
        return Game(maj.players, (1 - lam) * maj.worth + lam * z.worth)

    return DynamicSpec(n=n, initial=maj, transition=transition, name="worth_destroying",
                       params={"threshold": threshold, "residual": residual})


# -- aggregate-dependent families ---------------------------------------------

def _maps_from_json(n: int, data: dict, default) -> dict[int, Any]:
    maps = {}
    for key, val in data.items():
        T = _parse_coalition(key)
        if not T or T >> n:
            raise InputError(f"bad coalition key {key!r}")
        maps[T] = map_from_json(val)
    for T in range(1, 1 << n):
        if T not in maps:
            if default is None:
                raise InputError(f"no map for coalition {format_coalition(T)}")
            maps[T] = map_from_json(default)
    return maps


@family("aggregate")
def aggregate(initial: dict, maps: dict, default: Any = None, floor: float = 0.0,
              same_initial: bool = False, name: str = "aggregate") -> DynamicSpec:
    """General aggregate-dependent dynamic from per-coalition map objects."""
    g = game_from_json(initial)
    ad = AggregateDynamic(g, _maps_from_json(g.n, maps, default), floor, name, same_initial,
                          {"initial": initial, "maps": maps, "default": default, "floor": floor,
                           "same_initial": same_initial, "name": name})
    return ad.to_spec()


def random_initial(rng: np.random.Generator, n: int = 3, grand_worth: float = 1.0) -> Game:
    table = rng.uniform(0.0, grand_worth, 1 << n)
    table[0] = 0.0
    table[-1] = grand_worth
    return Game(tuple(range(n)), table)


@family("damped_aggregate")
def damped_aggregate(seed: int = 0, n: int = 3, low: float = 0.2, high: float = 0.8) -> DynamicSpec:
    """Grand coalition keeps its share; every other coalition's worth shrinks by ``rho_T``."""
    rng = np.random.default_rng(seed)
    grand = (1 << n) - 1
    maps = {T: MonotoneMap.identity() if T == grand else MonotoneMap.affine(rng.uniform(low, high))
            for T in range(1, 1 << n)}
    initial = random_initial(rng, n)
    return AggregateDynamic(initial, maps, name="damped_aggregate",
                            params={"seed": seed, "n": n, "low": low, "high": high}).to_spec()


@family("inflating_aggregate")
def inflating_aggregate(seed: int = 0, low: float = 0.3, high: float = 0.7) -> DynamicSpec:
    """Three players; pairs drift toward worth 1 (the whole cake) whatever they received."""
    rng = np.random.default_rng(seed)
    n, grand = 3, 7
    maps = {}
    for T in range(1, 1 << n):
        if T == grand:
            maps[T] = MonotoneMap.identity()
        elif size(T) == 2:
            a = rng.uniform(low, high)
            maps[T] = MonotoneMap.affine(1 - a, a)
        else:
            maps[T] = MonotoneMap.affine(rng.uniform(0.2, 0.8))
    initial = random_initial(rng, n)
    return AggregateDynamic(initial, maps, name="inflating_aggregate",
                            params={"seed": seed, "low": low, "high": high}).to_spec()


@family("inflating_pair")
def inflating_pair(cap: float = 1.2, boost: float = 0.6) -> DynamicSpec:
    """Three players; a pair's next worth is ``min(cap, boost + its share)``.

    Splitting off lets a pair grab an inflated two-player game straight away.
    """
    n, grand = 3, 7
    maps = {}
    for T in range(1, 1 << n):
        if T == grand:
            maps[T] = MonotoneMap.identity()
        elif size(T) == 2:
            maps[T] = MonotoneMap.capped(cap, boost)
        else:
            maps[T] = MonotoneMap.constant(0.0)
    return AggregateDynamic(majority_game(n), maps, name="inflating_pair",
                            params={"cap": cap, "boost": boost}).to_spec()


@family("random_aggregate")
def random_aggregate(seed: int = 0, n: int = 3, max_slope: float = 0.95, max_intercept: float = 0.5) -> DynamicSpec:
    """Seeded affine maps for every coalition except ``N`` (which keeps its share)."""
    rng = np.random.default_rng(seed)
    grand = (1 << n) - 1
    maps = {T: MonotoneMap.identity() if T == grand
            else MonotoneMap.affine(rng.uniform(0, max_slope), rng.uniform(0, max_intercept))
            for T in range(1, 1 << n)}
    return AggregateDynamic(random_initial(rng, n), maps, name="random_aggregate",
                            params={"seed": seed, "n": n, "max_slope": max_slope,
                                    "max_intercept": max_intercept}).to_spec()


@family("constant_worth")
def constant_worth(pair: float, single: float = 0.0, initial_pair: float | None = None,
                   initial_single: float | None = None, n: int = 3) -> DynamicSpec:
    """Three players, grand worth 1; after the first period every coalition's worth is fixed.

    ``initial_*`` set the first-period game, so a split-off coalition may face
    a different (e.g. larger) worth than it had inside ``N``.
    """
    grand = (1 << n) - 1
    initial_pair = pair if initial_pair is None else initial_pair
    initial_single = single if initial_single is None else initial_single

    def level(T, p, s):
        return 1.0 if T == grand else p if size(T) == 2 else s if size(T) == 1 else 0.0

    maps = {T: MonotoneMap.constant(level(T, pair, single)) for T in range(1, 1 << n)}
    v1 = Game.from_function(range(n), lambda T: level(T, initial_pair, initial_single))
    return AggregateDynamic(v1, maps, name="constant_worth",
                            params={"pair": pair, "single": single, "initial_pair": initial_pair,
                                    "initial_single": initial_single, "n": n}).to_spec()


@family("market")
def market(**params) -> DynamicSpec:
    from .market import market_dynamic, market_spec_from_json
    return market_dynamic(market_spec_from_json(params))


@family("random_market")
def random_market_family(seed: int = 0, n: int = 3, factors: int = 2, pieces: int = 3, gamma: float = 0.8,
                         eta: float = 0.1) -> DynamicSpec:
    from .market import market_dynamic, random_market
    return market_dynamic(random_market(seed, n, factors, pieces, gamma, eta), name="random_market")


def _renamed(spec: DynamicSpec, name: str, params: dict) -> DynamicSpec:
    return DynamicSpec(n=spec.n, initial=spec.initial, transition=spec.transition, floor=spec.floor,
                       name=name, grand_map=spec.grand_map, params=params)


# -- JSON -------------------------------------------------------------------

def spec_from_json(data: dict | str) -> DynamicSpec:
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise InputError("a dynamic spec must be a JSON object")
    if "worth" in data:
        return static(data)
    name = data.get("family")
    if name not in FAMILIES:
        raise InputError(f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise InputError("params must be an object")
    try:
        return FAMILIES[name](**params)
    except TypeError as exc:
        raise InputError(f"bad parameters for family {name!r}: {exc}") from None


def spec_to_json(spec: DynamicSpec) -> dict:
    return {"family": spec.name, "params": spec.params}


def bundled_dir() -> Path:
    return Path(str(resources.files("dyncore") / "data"))


def bundled_specs() -> list[Path]:
    return sorted(bundled_dir().rglob("*.json"))


def resolve_spec_path(path: str | Path) -> Path:
    """A path on disk, else a bundled spec with that relative path or basename (``.json`` optional)."""
    p = Path(path)
    if p.exists():
        return p
    if p.suffix != ".json":
        p = p.with_name(p.name + ".json")
    root = bundled_dir()
    for cand in (root / p, root / "examples" / p.name):
        if cand.exists():
            return cand
    matches = [q for q in bundled_specs() if q.name == p.name]
    if matches:
        return matches[0]
    raise FileNotFoundError(f"spec file {path} not found")


def load_json(path: str | Path) -> dict:
    p = resolve_spec_path(path)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON ({exc})") from None


def load_spec(path: str | Path) -> DynamicSpec:
    return spec_from_json(load_json(path))


__all__ = [
    "FAMILIES", "aggregate", "alternating_u1u2", "bundled_specs", "constant_majority", "constant_worth",
    "damped_aggregate", "damped_majority", "efficiency_example", "ei_cycle", "inflating_aggregate",
    "inflating_pair", "load_json", "load_spec", "random_aggregate", "random_initial", "resolve_spec_path",
    "spec_from_json", "spec_to_json", "static", "swap_players", "triangle_game", "worth_destroying",
]
