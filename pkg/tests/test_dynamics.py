import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncore.dynamics import (AllocationSequence, DiscountSpec, State, ValueOracle, allocation_grid,
                              discounted_tails, optimal_value, present_value, restrict, simplex_lattice, simulate,
                              uniform_schedule)
from dyncore.errors import InputError, SimulationError
from dyncore.families import FAMILIES, damped_majority, efficiency_example, worth_destroying
from dyncore.game import majority_game

from oracles import discounted


# -- discounting ------------------------------------------------------------------

@given(st.floats(0.05, 0.995), st.integers(1, 400))
def test_weights_sum_to_one_minus_tail(delta, horizon):
    ds = DiscountSpec(delta, horizon)
    assert ds.weights().sum() == pytest.approx(1 - delta ** horizon, rel=1e-9)


@given(st.floats(0.05, 0.995), st.floats(1e-6, 1e-2), st.floats(0.5, 20.0))
def test_horizon_from_precision_meets_precision(delta, precision, peak):
    ds = DiscountSpec.from_precision(delta, precision, peak)
    assert ds.tail_bound <= precision * (1 + 1e-9)
    if ds.horizon > 1:
        assert delta ** (ds.horizon - 1) * max(peak, precision) > precision * (1 - 1e-9)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 1.5])
def test_bad_delta_rejected(delta):
    with pytest.raises(InputError):
        DiscountSpec(delta, 10)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.floats(0.1, 0.99))
def test_present_value_and_tails_agree_with_loop(values, delta):
    ds = DiscountSpec(delta, len(values))
    assert present_value(values, ds) == pytest.approx(discounted(values, delta), abs=1e-12)
    tails = discounted_tails(np.array(values)[:, None], delta)[:, 0]
    for h in range(len(values)):
        assert tails[h] == pytest.approx(discounted(values[h:], delta), abs=1e-12)


# -- grids --------------------------------------------------------------------------

@pytest.mark.parametrize("k,steps", [(1, 5), (2, 4), (3, 10), (4, 6)])
def test_simplex_lattice_size_and_sums(k, steps):
    pts = simplex_lattice(k, steps)
    assert len(pts) == math.comb(steps + k - 1, k - 1) if k > 1 else len(pts) == 1
    assert np.allclose(pts.sum(axis=1), 1.0)


def test_allocation_grid_respects_floor_and_adds_equal_split():
    G = allocation_grid(3, 2.0, floor=0.1, resolution=0.25)
    assert np.allclose(G.sum(axis=1), 2.0)
    assert np.all(G >= 0.1 - 1e-12)
    assert any(np.allclose(g, 2.0 / 3) for g in G)


def test_allocation_grid_rejects_impossible_floor():
    with pytest.raises(InputError):
        allocation_grid(3, 1.0, floor=0.5)


def test_restrict_picks_members():
    x = np.array([0.1, 0.2, 0.7])
    assert restrict(x, 0b111, 0b101) == pytest.approx([0.1, 0.7])
    assert restrict(restrict(x, 0b111, 0b110), 0b110, 0b100) == pytest.approx([0.7])


# -- sequences and simulation ---------------------------------------------------------

def test_allocation_sequence_prefix_then_cycle():
    seq = AllocationSequence(prefix=([1, 0],), cycle=([0, 1], [0.5, 0.5]))
    assert seq.at(1) == pytest.approx([1, 0])
    assert seq.at(2) == pytest.approx([0, 1])
    assert seq.at(4) == pytest.approx([0, 1])
    assert seq.at(5) == pytest.approx([0.5, 0.5])
    assert seq.period == 2
    with pytest.raises(InputError):
        seq.at(0)


def test_finite_sequence_runs_out():
    seq = AllocationSequence(prefix=([1.0, 0.0, 0.0],))
    with pytest.raises(SimulationError):
        simulate(efficiency_example(), seq, length=3)


def test_simulate_follows_transition():
    spec = damped_majority()
    traj = simulate(spec, uniform_schedule, length=5)
    assert all(g.grand_worth == pytest.approx(1.0) for g in traj.games)
    assert traj.allocations[0] == pytest.approx([1 / 3] * 3)


def test_simulate_deviation_switches_to_sub_dynamic():
    spec = damped_majority()
    traj = simulate(spec, uniform_schedule, length=4, deviations={3: 0b011})
    assert traj.coalitions == (7, 7, 0b011, 0b011)
    # the pair entered with 2/3 and the damped map gives 2**-2 * 2/3
    assert traj.games[2].grand_worth == pytest.approx(2 / 3 / 4)
    with pytest.raises(SimulationError):
        simulate(spec, uniform_schedule, length=4, deviations={2: 0b011, 3: 0b100})


def test_infeasible_allocation_is_rejected():
    spec = damped_majority()
    with pytest.raises(SimulationError):
        simulate(spec, lambda t, g, prev: np.array([1.0, 1.0, 1.0]), length=2)


def test_trajectory_csv(tmp_path):
    spec = damped_majority()
    traj = simulate(spec, uniform_schedule, length=3, deviations={2: 0b011})
    path = tmp_path / "traj.csv"
    traj.to_csv(path, include_worths=True)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 3
    assert rows[1]["coalition"] == "{0,1}"
    assert rows[1]["x2"] == ""
    assert float(rows[0]["v{0,1,2}"]) == pytest.approx(1.0)


def test_start_state_resumes_play():
    spec = damped_majority()
    traj = simulate(spec, uniform_schedule, length=2, start=State(0b011, np.array([0.5, 0.5])))
    assert traj.games[0].grand_worth == pytest.approx(0.25)


# -- optimal values -----------------------------------------------------------------

def brute_force_value(spec, S, entry, delta, horizon, resolution):
    """Enumerate every grid history of ``S`` over ``horizon`` periods."""
    first = spec.initial_game(S) if entry is None else spec.next_game(S, entry)
    best = -np.inf
    k = first.n

    def rec(game, t, stream):
        nonlocal best
        stream = stream + [game.grand_worth]
        if t == horizon:
            best = max(best, discounted(stream, delta))
            return
        for y in allocation_grid(k, game.grand_worth, spec.floor, resolution):
            rec(spec.next_game(S, y), t + 1, stream)

    rec(first, 1, [])
    return best


@pytest.mark.parametrize("name,S,entry", [
    ("worth_destroying", 0b111, None),
    ("worth_destroying", 0b011, np.array([0.5, 0.5])),
    ("efficiency_example", 0b111, None),
    ("inflating_pair", 0b011, None),
])
def test_grid_dp_matches_path_enumeration(name, S, entry):
    spec = FAMILIES[name]()
    ds = DiscountSpec(0.7, 4)
    est = optimal_value(spec, S, entry, ds, resolution=1 / 3)
    assert est.value == pytest.approx(brute_force_value(spec, S, entry, 0.7, 4, 1 / 3), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_orbit_value_matches_iteration(seed):
    spec = FAMILIES["damped_aggregate"](seed=seed)
    ds = DiscountSpec(0.9, 200)
    ad = spec.aggregate
    for S in range(1, 8):
        entry = np.full(bin(S).count("1"), 0.2)
        c = float(ad.U(S, entry.sum()))
        stream = [c]
        for _ in range(ds.horizon - 1):
            stream.append(float(ad.U(S, stream[-1])))
        est = ValueOracle(spec, ds)(S, entry)
        assert est.value == pytest.approx(discounted(stream, 0.9), abs=1e-12)


def test_oracle_is_memoized():
    spec = worth_destroying()
    oracle = ValueOracle(spec, DiscountSpec(0.8, 30), 0.25)
    a = oracle(0b111, None)
    assert oracle(0b111, None) is a


def test_static_game_value_is_its_worth():
    spec = FAMILIES["static"](majority_game(3).to_json())
    est = optimal_value(spec, 0b011, None, DiscountSpec(0.9, 50))
    assert est.value == pytest.approx(1 - 0.9 ** 50)
