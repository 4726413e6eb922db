"""Dynamics in which a coalition's next worth depends only on its own aggregate share.

``V(S; x)(T) = U_T(x(T))`` for every ``S`` containing ``T``, with each
``U_T`` continuous and nondecreasing.  Such a dynamic is described by one
scalar map per coalition plus the initial game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .dynamics import DynamicSpec
from .errors import InputError, PreconditionError
from .game import Game, coalition_sums, format_coalition, members, membership_matrix, size


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Continuous nondecreasing map ``[0, inf) -> [0, inf)``.

    kinds: ``affine`` (slope, intercept), ``constant`` (value),
    ``capped`` (``min(cap, intercept + slope * c)``) and ``pwl``
    (breakpoints ``xs``/``ys``, extended linearly with the end slopes).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        p = tuple(self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "affine":
            slope, intercept = p
            ok = slope >= 0 and intercept >= 0
        elif self.kind == "constant":
            (value,) = p
            ok = value >= 0
        elif self.kind == "capped":
            cap, intercept, slope = p
            ok = slope >= 0 and intercept >= 0 and cap >= 0
        elif self.kind == "pwl":
            xs, ys = (np.asarray(v, dtype=float) for v in p)
            object.__setattr__(self, "params", (tuple(xs), tuple(ys)))
            ok = (xs.size >= 2 and xs.size == ys.size and np.all(np.diff(xs) > 0)
                  and np.all(np.diff(ys) >= 0) and ys[0] >= 0 and xs[0] <= 0)
        else:
            raise InputError(f"unknown map kind {self.kind!r}")
        if not ok:
            raise InputError(f"{self.kind} map {p} is not a nonnegative nondecreasing map")

    @classmethod
    def affine(cls, slope: float, intercept: float = 0.0) -> "MonotoneMap":
        return cls("affine", (float(slope), float(intercept)))

    @classmethod
    def constant(cls, value: float) -> "MonotoneMap":
        return cls("constant", (float(value),))

    @classmethod
    def identity(cls) -> "MonotoneMap":
        return cls.affine(1.0, 0.0)

    @classmethod
    def capped(cls, cap: float, intercept: float, slope: float = 1.0) -> "MonotoneMap":
        return cls("capped", (float(cap), float(intercept), float(slope)))

    @classmethod
    def pwl(cls, xs, ys) -> "MonotoneMap":
        return cls("pwl", (xs, ys))

    def __call__(self, c):
        if self.kind == "affine":
            slope, intercept = self.params
            return slope * c + intercept
        if self.kind == "constant":
            return self.params[0] + 0.0 * np.asarray(c) if np.ndim(c) else self.params[0]
        if self.kind == "capped":
            cap, intercept, slope = self.params
            return np.minimum(cap, intercept + slope * c)
        xs, ys = (np.asarray(v) for v in self.params)
        c_arr = np.asarray(c, dtype=float)
        out = np.interp(c_arr, xs, ys)
        right = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(c_arr > xs[-1], ys[-1] + right * (c_arr - xs[-1]), out)
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        if self.kind == "pwl":
            return {"pwl": [list(self.params[0]), list(self.params[1])]}
        return {self.kind: list(self.params)}


def map_from_json(data) -> MonotoneMap:
    if isinstance(data, (int, float)):
        return MonotoneMap.constant(data)
    if not isinstance(data, Mapping) or len(data) != 1:
        raise InputError(f"a map is a one-key object such as {{'affine': [slope, intercept]}}, got {data!r}")
    (kind, params), = data.items()
    if kind == "identity":
        return MonotoneMap.identity()
    if kind == "pwl":
        return MonotoneMap.pwl(*params)
    if not isinstance(params, (list, tuple)):
        params = [params]
    return MonotoneMap(kind, tuple(float(p) for p in params))


@dataclass(frozen=True, eq=False)
class AggregateDynamic:
    """Initial game plus one monotone map ``U_T`` per nonempty coalition ``T``."""

    initial: Game
    maps: Mapping[int, Callable]
    floor: float = 0.0
    name: str = "aggregate"
    same_initial: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.initial.n
        if self.initial.players != tuple(range(n)):
            raise InputError("initial game must be over players 0..n-1")
        missing = [T for T in range(1, 1 << n) if T not in self.maps]
        if missing:
            raise InputError(f"no map for coalition {format_coalition(missing[0])}")
        object.__setattr__(self, "maps", dict(self.maps))

    @property
    def n(self) -> int:
        return self.initial.n

    @property
    def grand(self) -> int:
        return (1 << self.n) - 1

    def U(self, T: int, c):
        return self.maps[T](c)

    def stage_game(self, S: int, x) -> Game:
        """``V(S; x)``: worth ``U_T(x(T))`` for every ``T`` inside ``S``."""
        x = np.asarray(x, dtype=float)
        sums = coalition_sums(x).tolist()
        table = [0.0] + [self.maps[T](sums[m]) for m, T in enumerate(_global_masks(S)) if m]
        return Game(members(S), np.array(table, dtype=float))

    def check_monotone(self, upper: float | None = None, points: int = 201) -> None:
        """Raise if some ``U_T`` decreases on the evaluation grid ``[0, upper]``."""
        upper = self.initial.grand_worth if upper is None else upper
        cs = np.linspace(0.0, max(upper, 1e-12), points)
        for T, U in self.maps.items():
            vals = np.array([U(c) for c in cs])
            if np.any(np.diff(vals) < -1e-12):
                raise PreconditionError(f"map of {format_coalition(T)} is not monotone on [0, {upper:g}]")
            if np.any(vals < -1e-12):
                raise PreconditionError(f"map of {format_coalition(T)} takes negative values")

    def to_spec(self) -> DynamicSpec:
        initial_sub = None if self.same_initial else self._initial_sub
        return DynamicSpec(
            n=self.n, initial=self.initial, transition=self.stage_game, floor=self.floor, name=self.name,
            grand_map=lambda S: self.maps[S], initial_sub=initial_sub, same_initial=self.same_initial,
            aggregate=self, params=self.params,
        )

    def _initial_sub(self, S: int) -> Game:
        # the game S faces when splitting off before period 1: the maps applied
        # to the equal split of v_1(N)
        share = self.initial.grand_worth / self.n
        return self.stage_game(S, np.full(size(S), share))

    def rescaled(self) -> tuple["AggregateDynamic", float]:
        """Copy normalized to ``v_1(N) = 1`` together with the scale factor used."""
        s = self.initial.grand_worth
        if s <= 0:
            raise PreconditionError("grand worth of the initial game must be positive")
        if abs(s - 1.0) <= 1e-12:
            return self, 1.0
        maps = {T: _Rescaled(U, s) for T, U in self.maps.items()}
        return AggregateDynamic(self.initial.scaled(1 / s), maps, self.floor / s, self.name,
                                self.same_initial, self.params), s


@dataclass(frozen=True)
class _Rescaled:
    inner: Callable
    scale: float

    def __call__(self, c):
        return self.inner(np.asarray(c) * self.scale) / self.scale


__all__ = ["AggregateDynamic", "MonotoneMap", "map_from_json"]


@lru_cache(maxsize=None)
def _global_masks(S: int) -> tuple[int, ...]:
    """Global bitset of every local bitset of ``S``, in local order."""
    players = members(S)
    out = []
    for m in range(1 << len(players)):
        out.append(sum(1 << p for j, p in enumerate(players) if m >> j & 1))
    return tuple(out)
