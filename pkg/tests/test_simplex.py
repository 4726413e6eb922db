import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog as scipy_linprog

from dyncore.errors import InfeasibleError, UnboundedError
from dyncore.simplex import feasible_point, linprog


def random_lp(seed: int, nvar: int, m_ub: int, m_eq: int):
    """Bounded feasible LP: a known interior point plus a box row keeps it bounded."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.1, 1.0, nvar)
    A_ub = rng.normal(size=(m_ub, nvar))
    b_ub = A_ub @ x0 + rng.uniform(0.0, 1.0, m_ub)
    A_ub = np.vstack([A_ub, np.ones(nvar)])
    b_ub = np.append(b_ub, 10.0 * nvar)
    A_eq = rng.normal(size=(m_eq, nvar))
    b_eq = A_eq @ x0
    c = rng.normal(size=nvar)
    return c, A_ub, b_ub, A_eq, b_eq


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 6), st.integers(0, 6), st.integers(0, 2))
def test_optimum_matches_scipy(seed, nvar, m_ub, m_eq):
    m_eq = min(m_eq, nvar)
    c, A_ub, b_ub, A_eq, b_eq = random_lp(seed, nvar, m_ub, m_eq)
    ours = linprog(c, A_ub, b_ub, A_eq if m_eq else None, b_eq if m_eq else None)
    ref = scipy_linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None,
                        bounds=[(0, None)] * nvar, method="highs")
    assert ref.status == 0
    assert ours.fun == pytest.approx(ref.fun, abs=1e-7 * max(1.0, abs(ref.fun)))
    assert np.all(ours.x >= -1e-9)
    assert np.all(A_ub @ ours.x <= b_ub + 1e-7)
    if m_eq:
        assert np.allclose(A_eq @ ours.x, b_eq, atol=1e-7)


def test_infeasible_is_reported():
    with pytest.raises(InfeasibleError):
        linprog([1.0, 1.0], A_ub=[[1.0, 1.0]], b_ub=[-1.0])


def test_unbounded_is_reported():
    with pytest.raises(UnboundedError):
        linprog([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])


def test_degenerate_problem_terminates():
    # Beale's cycling example for Dantzig's rule
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    res = linprog(c, A, [0.0, 0.0, 1.0])
    assert res.fun == pytest.approx(-0.05, abs=1e-9)


def test_deterministic_vertex():
    c = [-1.0, -1.0]
    A = [[1.0, 1.0]]
    a = linprog(c, A, [1.0]).x
    b = linprog(c, A, [1.0]).x
    assert np.array_equal(a, b)


def test_feasible_point():
    assert feasible_point([[1.0, 1.0]], [-1.0]) is None
    p = feasible_point([[1.0, 1.0]], [1.0], [[1.0, -1.0], [1.0, 1.0]], [0.0, 1.0])
    assert p == pytest.approx([0.5, 0.5])
