import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncore.errors import ConfigurationError, InputError
from dyncore.game import (Game, coalition, coalition_sums, convex_combine, core_membership, excesses,
                          format_coalition, game_from_json, grand, least_core, majority_game, members, size,
                          submasks, unanimity_game)

from oracles import least_core_by_grid, least_core_by_vertices


def random_game(seed: int, n: int, scale: float = 1.0) -> Game:
    rng = np.random.default_rng(seed)
    worth = rng.uniform(0, scale, 1 << n)
    worth[0] = 0.0
    return Game(tuple(range(n)), worth)


games = st.builds(random_game, st.integers(0, 10_000), st.integers(1, 4), st.floats(0.1, 5.0))


# -- bitsets --------------------------------------------------------------------

def test_coalition_roundtrip():
    assert coalition([0, 2]) == 0b101
    assert members(0b101) == (0, 2)
    assert size(0b1011) == 3
    assert grand(3) == 7
    assert format_coalition(0b110) == "{1,2}"


def test_submasks_enumerates_all_subsets():
    subs = sorted(submasks(0b1011))
    assert subs == sorted(m for m in range(1, 16) if not m & ~0b1011)
    assert 0b1011 not in set(submasks(0b1011, proper=True))
    assert 0 in set(submasks(0b11, nonempty=False))


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_coalition_sums_match_direct_sums(x):
    x = np.array(x)
    sums = coalition_sums(x)
    for m in range(1 << len(x)):
        assert sums[m] == pytest.approx(sum(x[i] for i in members(m)), abs=1e-12)


# -- games ----------------------------------------------------------------------

def test_json_roundtrip():
    g = random_game(3, 3)
    h = game_from_json(g.to_json())
    assert h.allclose(g)


def test_restrict_keeps_global_labels():
    g = majority_game(3)
    sub = g.restrict(0b110)
    assert sub.players == (1, 2)
    assert sub.value(0b110) == 1.0
    assert sub.value(0b010) == 0.0


def test_game_rejects_nonzero_empty_worth():
    with pytest.raises(InputError):
        Game((0, 1), np.array([1.0, 0.0, 0.0, 1.0]))


def test_convex_combine_is_weighted_sum():
    a, b = majority_game(3), Game.additive([0.2, 0.3, 0.5])
    c = convex_combine([a, b], [0.25, 0.75])
    assert np.allclose(c.worth, 0.25 * a.worth + 0.75 * b.worth)


# -- least core -----------------------------------------------------------------

def test_majority_least_core_is_one_third():
    rep = least_core(majority_game(3))
    assert rep.epsilon_star == pytest.approx(1 / 3, abs=1e-9)
    assert np.allclose(rep.witness, 1 / 3)
    assert not rep.core_nonempty


def test_additive_game_has_core():
    rep = least_core(Game.additive([0.2, 0.3, 0.5]))
    assert rep.epsilon_star == pytest.approx(0.0, abs=1e-12)
    assert rep.core_nonempty


def test_unanimity_core_contains_any_split_of_carrier():
    g = unanimity_game([0, 1], scale=2.0)
    full = Game.from_function(range(3), lambda T: 2.0 if not 0b011 & ~T else 0.0)
    assert least_core(full).core_nonempty
    assert core_membership(full, [1.0, 1.0, 0.0])
    assert not core_membership(full, [1.0, 0.5, 0.5])
    assert g.grand_worth == 2.0


def test_floor_beyond_worth_is_rejected():
    with pytest.raises(ConfigurationError):
        least_core(majority_game(3), floor=0.5)


@settings(max_examples=60, deadline=None)
@given(games, st.floats(0.0, 0.2))
def test_least_core_matches_vertex_enumeration(g, floor_frac):
    floor = floor_frac * max(g.grand_worth, 0.0) / g.n
    rep = least_core(g, floor)
    assert rep.epsilon_star == pytest.approx(least_core_by_vertices(g.worth, g.n, floor), abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(games)
def test_witness_lies_in_eps_star_core(g):
    rep = least_core(g)
    x = rep.witness
    assert x.sum() == pytest.approx(g.grand_worth, abs=1e-9)
    assert np.all(x >= -1e-9)
    assert excesses(g, x).max() <= rep.epsilon_star + 1e-8


@settings(max_examples=30, deadline=None)
@given(games, st.floats(0.1, 10.0))
def test_least_core_scales_linearly(g, factor):
    assert least_core(g.scaled(factor)).epsilon_star == pytest.approx(factor * least_core(g).epsilon_star,
                                                                      rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_least_core_against_allocation_grid(seed):
    n = 3 + seed % 2
    g = random_game(seed, n)
    eps = least_core(g).epsilon_star
    grid_eps = least_core_by_grid(g.worth, n, 1 / 200)
    # the grid optimum is an upper bound that is off by at most n/200 times the largest row size
    assert eps <= grid_eps + 1e-9
    assert grid_eps - eps <= n * n / 200


@pytest.mark.parametrize("seed", range(10))
def test_least_core_against_scipy(seed):
    from scipy.optimize import linprog as scipy_linprog

    n = 2 + seed % 3
    g = random_game(seed + 100, n, scale=3.0)
    M = np.array([[(m >> i) & 1 for i in range(n)] for m in range(1, 1 << n)], dtype=float)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = -np.hstack([M, np.ones((M.shape[0], 1))])
    res = scipy_linprog(c, A_ub=A_ub, b_ub=-g.worth[1:], A_eq=[np.append(np.ones(n), 0.0)],
                        b_eq=[g.grand_worth], bounds=[(0, None)] * (n + 1), method="highs")
    assert least_core(g).epsilon_star == pytest.approx(res.fun, abs=1e-8)
