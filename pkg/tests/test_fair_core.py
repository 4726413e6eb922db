import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncore.dynamics import AllocationSequence, DiscountSpec, allocation_grid, simulate, uniform_schedule
from dyncore.errors import InputError, PreconditionError
from dyncore.fair_core import (convexification_contains, discounted_average, efficiency_check,
                               efficient_fair_certificate_search, fair_core_membership, period_partition,
                               search_fair_sequences, synthesize_fair_sequence, theorem1_certificate_search)
from dyncore.families import FAMILIES, load_spec
from dyncore.game import convex_combine, core_membership

from oracles import discounted


def ds_for(delta, spec):
    return DiscountSpec.from_precision(delta, 1e-4, max(1.0, float(np.abs(spec.initial.worth).max())))


# -- membership -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_slacks_match_literal_discounted_sums(seed):
    spec = FAMILIES["ei_cycle"]()
    rng = np.random.default_rng(seed)
    G = allocation_grid(3, 1.0, resolution=0.25)
    seq = AllocationSequence(cycle=tuple(G[rng.integers(len(G), size=3)]))
    ds = DiscountSpec(0.9, 120)
    rep = fair_core_membership(spec, seq, ds, 0.0)
    traj = simulate(spec, seq, length=ds.horizon)
    for row in rep.rows:
        share = discounted(traj.shares(row.coalition), 0.9)
        worth = discounted(traj.worths(row.coalition), 0.9)
        assert row.share == pytest.approx(share, abs=1e-12)
        assert row.worth == pytest.approx(worth, abs=1e-12)
        assert row.slack == pytest.approx(share - worth, abs=1e-12)


def test_listed_alternating_sequence_is_fair():
    spec = load_spec("alternating_u1u2_listed.json")
    seq = AllocationSequence(cycle=([1, 1.5, 1.5, 0], [0, 1.5, 1.5, 1]))
    rep = fair_core_membership(spec, seq, ds_for(0.99, spec), 0.05)
    assert rep.passed
    assert rep.average == pytest.approx([0.5, 1.5, 1.5, 0.5], abs=0.01)


def test_alternating_sequence_with_dummy_coalitions_is_short_by_half():
    spec = load_spec("alternating_u1u2.json")
    seq = AllocationSequence(cycle=([1, 1.5, 1.5, 0], [0, 1.5, 1.5, 1]))
    rep = fair_core_membership(spec, seq, ds_for(0.99, spec), 0.05)
    assert not rep.passed
    assert rep.worst.slack == pytest.approx(-0.5, abs=0.01)


def test_first_period_sequence_is_fair_but_inefficient():
    spec = FAMILIES["efficiency_example"]()
    seq = AllocationSequence(prefix=([1, 0, 0],), cycle=([0, 0, 0],))
    ds = ds_for(0.99, spec)
    assert fair_core_membership(spec, seq, ds, 0.0).passed
    assert not efficiency_check(spec, seq, ds).efficient
    assert efficiency_check(spec, uniform_schedule, ds).efficient


def test_discounted_average_of_constant_sequence():
    spec = FAMILIES["static"]({"n": 2, "worth": {"0,1": 1}})
    avg = discounted_average(spec, AllocationSequence(cycle=([0.3, 0.7],)), DiscountSpec(0.5, 60))
    assert avg == pytest.approx([0.3, 0.7], abs=1e-12)


# -- period partition and synthesis --------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.floats(0.9, 0.995))
def test_period_partition_hits_weights(raw, delta):
    w = np.array(raw) / sum(raw)
    length = 4000
    classes = period_partition(w, delta, length)
    mass = np.zeros(len(w))
    for t, j in enumerate(classes):
        mass[j] += (1 - delta) * delta ** t
    assert np.abs(mass - w).max() <= (1 - delta) + delta ** length + 1e-9


def test_period_partition_validates_weights():
    with pytest.raises(InputError):
        period_partition([0.5, 0.6], 0.9, 10)


def test_ei_certificate_is_the_equal_split():
    spec = FAMILIES["ei_cycle"]()
    cert = theorem1_certificate_search(spec, 1 / 3)
    assert cert.x == pytest.approx([1 / 3] * 3)
    assert sorted(map(tuple, cert.split.points)) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert cert.split.weights == pytest.approx([1 / 3] * 3)
    # the combined game is in conv V(N; x) and x is in its core
    games = [spec.next_game(7, y) for y in cert.split.points]
    assert convex_combine(games, cert.split.weights).allclose(cert.v)
    assert core_membership(cert.v, cert.x)
    assert cert.split.mean == pytest.approx(cert.x)


def test_synthesized_sequence_is_fair():
    spec = FAMILIES["ei_cycle"]()
    cert = theorem1_certificate_search(spec, 1 / 3)
    ds = ds_for(0.99, spec)
    seq = synthesize_fair_sequence(cert, ds)
    rep = fair_core_membership(spec, seq, ds, 2 * (1 - ds.delta) + 0.01)
    assert rep.passed
    assert rep.average == pytest.approx(cert.x, abs=2 * (1 - ds.delta) + ds.tail_bound)


def test_constant_majority_has_no_certificate():
    assert theorem1_certificate_search(FAMILIES["constant_majority"]()) is None


def test_certificate_needs_constant_grand_worth():
    with pytest.raises(PreconditionError):
        theorem1_certificate_search(FAMILIES["worth_destroying"]())


def test_small_support_certificate():
    spec = FAMILIES["ei_cycle"]()
    cert = theorem1_certificate_search(spec, 1 / 3, k_max=3)
    assert cert is not None and len(cert.split) <= 3
    assert theorem1_certificate_search(spec, 1 / 3, k_max=1) is None


def test_gamma_certificate_uses_near_efficient_points():
    spec = FAMILIES["ei_cycle"]()
    cert = efficient_fair_certificate_search(spec, 0.05, 1 / 3)
    assert cert is not None
    gw = [spec.next_game(7, y).grand_worth for y in cert.split.points]
    assert min(gw) >= 1.0 - 0.05
    assert core_membership(cert.v, cert.x, eps=0.05)


def test_convexification_membership():
    spec = FAMILIES["ei_cycle"]()
    x = np.full(3, 1 / 3)
    games = [spec.next_game(7, y) for y in np.eye(3)]
    v = convex_combine(games, [1 / 3] * 3)
    split = convexification_contains(spec, x, v, resolution=1 / 3)
    assert split is not None
    assert convex_combine([spec.next_game(7, y) for y in split.points], split.weights).allclose(v, atol=1e-8)
    assert convexification_contains(spec, x, FAMILIES["ei_cycle"]().initial.scaled(2.0), resolution=1 / 3) is None


# -- exhaustive search ------------------------------------------------------------------

def brute_force_fair(spec, ds, eps, max_period, resolution):
    G = allocation_grid(spec.n, spec.initial.grand_worth, spec.floor, resolution)
    for p in range(1, max_period + 1):
        for cyc in itertools.product(range(len(G)), repeat=p):
            if fair_core_membership(spec, AllocationSequence(cycle=tuple(G[list(cyc)])), ds, eps).passed:
                return True
    return False


@pytest.mark.parametrize("name,eps", [("static_pairs", 0.0), ("majority", 0.05), ("majority", 0.34),
                                      ("ei", 0.05), ("damped", 0.1)])
def test_search_agrees_with_enumeration(name, eps):
    spec = {"static_pairs": lambda: load_spec("static_pairs_0.6.json"),
            "majority": lambda: FAMILIES["constant_majority"](),
            "ei": lambda: FAMILIES["ei_cycle"](),
            "damped": lambda: FAMILIES["damped_majority"]()}[name]()
    ds = DiscountSpec(0.9, 200)
    res = search_fair_sequences(spec, ds, eps, 2, resolution=1 / 4)
    assert res.found == brute_force_fair(spec, ds, eps, 2, 1 / 4)
    if res.found:
        assert fair_core_membership(spec, res.sequence, ds, eps).passed


def test_damped_majority_has_no_fair_sequence():
    spec = FAMILIES["damped_majority"]()
    res = search_fair_sequences(spec, ds_for(0.99, spec), 0.1, 4)
    assert not res.found
    assert res.relaxation_bound < -0.1
