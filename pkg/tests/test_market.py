import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncore.dynamics import simulate, uniform_schedule
from dyncore.errors import InputError
from dyncore.game import Game, members
from dyncore.market import (FirmState, MarketSpec, Utility, coalition_output, is_superadditive, market_dynamic,
                            market_spec_from_json, random_market, singleton_map, stage_market_game)

from oracles import market_output_by_grid, market_output_by_vertices

scipy_optimize = pytest.importorskip("scipy.optimize")


# -- utilities ----------------------------------------------------------------------

def test_breakpoint_utility_interpolates_and_flattens():
    u = Utility.from_breakpoints([0, 1, 3], [0, 2, 3])
    assert [u([y]) for y in (0, 0.5, 1, 2, 3, 10)] == pytest.approx([0, 1, 2, 2.5, 3, 3])


@pytest.mark.parametrize("xs,ys", [([0, 1, 2], [0, 1, 3]), ([0, 1], [1, 0]), ([1, 2], [0, 1]), ([0, 0], [0, 1])])
def test_bad_breakpoints_rejected(xs, ys):
    with pytest.raises(InputError):
        Utility.from_breakpoints(xs, ys)


def test_market_spec_validation():
    u = Utility.linear([1.0])
    with pytest.raises(InputError):
        MarketSpec([[1.0], [1.0]], (u,))
    with pytest.raises(InputError):
        MarketSpec([[1.0]], (u,), gamma=1.0)
    with pytest.raises(InputError):
        MarketSpec([[1.0]], (u,), eta=0.0)
    with pytest.raises(InputError):
        MarketSpec([[-1.0]], (u,))
    with pytest.raises(InputError):
        market_spec_from_json({"endowments": [[1.0]]})


def test_market_json_roundtrip():
    ms = random_market(4)
    back = market_spec_from_json(ms.to_json())
    scales = np.array([1.0, 1.3, 0.7])
    assert coalition_output(back, scales, 7) == pytest.approx(coalition_output(ms, scales, 7), abs=1e-12)


# -- stage games ----------------------------------------------------------------------

def test_identical_linear_utilities_have_no_gains_from_trade():
    w = np.array([0.5, 2.0])
    ms = MarketSpec([[1, 0], [0, 1], [2, 2]], tuple(Utility.linear(w) for _ in range(3)))
    g = stage_market_game(ms, np.full(3, 1.5), 7)
    for T in range(1, 8):
        assert g.value(T) == pytest.approx(1.5 * w @ ms.endowments[list(members(T))].sum(axis=0))


def test_trade_doubles_output_of_capped_firms():
    cap = Utility.from_breakpoints([0, 1], [0, 1])
    ms = MarketSpec([[2.0], [0.0]], (cap, cap))
    g = stage_market_game(ms, np.ones(2), 3)
    assert g.value(3) == pytest.approx(2.0)
    assert g.value(1) + g.value(2) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_coalition_output_matches_grid_search_and_scipy(seed):
    ms = random_market(seed)
    scales = np.random.default_rng(100 + seed).uniform(0.5, 2.0, 3)
    for T in range(1, 8):
        lp = coalition_output(ms, scales, T)
        assert lp == pytest.approx(market_output_by_grid(ms, scales, members(T)), abs=1e-4)
        assert lp == pytest.approx(market_output_by_vertices(ms, scales, members(T)), abs=1e-9)
        firms = list(members(T))
        # same program in scipy: z then t, maximize sum of scaled t
        m, l = len(firms), ms.factors
        c = np.concatenate([np.zeros(m * l), -scales[firms]])
        A, b = [], []
        for j, i in enumerate(firms):
            for a, icpt in zip(ms.utilities[i].slopes, ms.utilities[i].intercepts):
                row = np.zeros(m * l + m)
                row[j * l:(j + 1) * l] = -a
                row[m * l + j] = 1
                A.append(row)
                b.append(icpt)
        A_eq = np.hstack([np.tile(np.eye(l), m), np.zeros((l, m))])
        res = scipy_optimize.linprog(c, A, b, A_eq, ms.endowments[firms].sum(axis=0), method="highs")
        assert lp == pytest.approx(-res.fun, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4))
def test_coalition_output_matches_split_enumeration(seed, n, factors, pieces):
    ms = random_market(seed, n=n, factors=factors, pieces=pieces)
    scales = np.random.default_rng(seed).uniform(0.5, 2.0, n)
    for T in range(1, 1 << n):
        assert coalition_output(ms, scales, T) == pytest.approx(market_output_by_vertices(ms, scales, members(T)),
                                                                abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_stage_games_are_superadditive_and_homogeneous(seed, factor):
    ms = random_market(seed)
    scales = np.random.default_rng(seed).uniform(0.5, 2.0, 3)
    g = stage_market_game(ms, scales, 7)
    assert is_superadditive(g)
    assert stage_market_game(ms, factor * scales, 7).allclose(g.scaled(factor), atol=1e-8)


def test_singleton_worth_is_own_output():
    ms = random_market(1)
    scales = np.array([1.0, 2.0, 0.5])
    for i in range(3):
        assert coalition_output(ms, scales, 1 << i) == pytest.approx(scales[i] * ms.utilities[i](ms.endowments[i]))


def test_stage_game_validates_scales():
    ms = random_market(0)
    with pytest.raises(InputError):
        stage_market_game(ms, np.array([1.0, 0.0, 1.0]), 7)
    with pytest.raises(InputError):
        stage_market_game(ms, np.ones(2), 7)


def test_is_superadditive_detects_violation():
    g = Game((0, 1), np.array([0.0, 1.0, 1.0, 1.5]))
    assert not is_superadditive(g)


# -- scale dynamics -----------------------------------------------------------------------

@given(st.integers(1, 5), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_growth_increases_with_allocation(k, a, b):
    ms = random_market(0, gamma=0.8, eta=0.1)
    lo, hi = min(a, b), max(a, b)
    assert ms.growth(k, lo) <= ms.growth(k, hi) + 1e-15
    assert ms.growth(k, lo) < ms.growth(k + 1, lo)


def test_splinter_grows_slower_than_full_consortium():
    ms = random_market(0, gamma=0.8, eta=0.1)
    x = 0.4
    assert ms.growth(2, x) == pytest.approx(1.1 * 0.8 ** (1 / 1.4))
    assert ms.growth(2, x) < ms.growth(3, x)


def test_firm_state_follows_growth_and_passes_audit():
    ms = random_market(2)
    state = FirmState.initial(3)
    x = np.array([0.2, 0.3, 0.5])
    for _ in range(250):
        state = state.advance(ms, 0b011, x[:2])
    expected = ms.growth(2, x[:2]) ** 250
    assert state.scales[:2] == pytest.approx(expected, rel=1e-10)
    assert state.scales[2] == 1.0
    assert state.steps == 250


def test_degenerate_decay_gives_a_repeated_market():
    ms = random_market(3, gamma=0.9999, eta=1e-12)
    spec = market_dynamic(ms)
    traj = simulate(spec, uniform_schedule, length=5)
    for g in traj.games[1:]:
        assert g.allclose(traj.games[0], atol=1e-3 * max(1.0, traj.games[0].grand_worth))


def test_uniform_play_keeps_symmetric_firms_symmetric():
    u = Utility(np.array([[1.0, 0.5], [0.2, 1.0]]), np.array([0.0, 0.1]))
    ms = MarketSpec(np.ones((3, 2)), (u, u, u))
    traj = simulate(market_dynamic(ms), uniform_schedule, length=6)
    for g in traj.games:
        assert g.value(0b011) == pytest.approx(g.value(0b110)) == pytest.approx(g.value(0b101))
        assert g.value(1) == pytest.approx(g.value(2)) == pytest.approx(g.value(4))


def test_singleton_map_decreases_towards_zero():
    ms = random_market(0, gamma=0.8, eta=0.1)
    U = singleton_map(ms, 0)
    c, orbit = 2.0, [2.0]
    for _ in range(50):
        c = U(c)
        orbit.append(c)
    assert np.all(np.diff(orbit) < 0)
