"""Dense two-phase tableau simplex.

Solves::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Every variable is nonnegative; callers shift or split free variables
themselves.  Pivoting uses Dantzig's rule and falls back to Bland's rule
after a run of degenerate pivots, so the method terminates.  Ties in the
ratio test go to the lowest basic variable index, which keeps the returned
vertex deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, SolverError, UnboundedError

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
FEAS_TOL = 1e-8


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.iterations += 1

    def optimize(self, ncols: int, max_iter: int) -> None:
        """Run primal simplex on the objective stored in the last row.

        Only the first ``ncols`` columns may enter the basis.
        """
        T = self.T
        degenerate = 0
        bland = False
        while True:
            if self.iterations > max_iter:
                raise SolverError(f"simplex did not terminate in {max_iter} pivots")
            cost = T[-1, :ncols]
            if bland:
                candidates = np.flatnonzero(cost < -COST_TOL)
                if candidates.size == 0:
                    return
                j = int(candidates[0])
            else:
                j = int(np.argmin(cost))
                if cost[j] >= -COST_TOL:
                    return
            column = T[:-1, j]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                raise UnboundedError("objective is unbounded below")
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(tied[np.argmin(self.basis[tied])])
            if T[r, -1] <= FEAS_TOL * 1e-2:
                degenerate += 1
                if degenerate > 50:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j)


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    max_iter: int = 100_000,
) -> LPResult:
    """Minimize ``c @ x`` over the polyhedron, with ``x >= 0``.

    Raises
    ------
    InfeasibleError
        If the constraints admit no nonnegative solution.
    UnboundedError
        If the objective decreases without bound.
    """
    c = np.asarray(c, dtype=float)
    nvar = c.size
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if A_ub.shape != (b_ub.size, nvar) or A_eq.shape != (b_eq.size, nvar):
        raise ValueError("constraint shapes do not match the cost vector")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    # columns: original | slacks | artificials | rhs
    A = np.zeros((m, nvar + m_ub))
    A[:m_ub, :nvar] = A_ub
    A[:m_ub, nvar:] = np.eye(m_ub)
    A[m_ub:, :nvar] = A_eq
    b = np.concatenate([b_ub, b_eq])
    negative = b < 0
    A[negative] *= -1
    b = np.where(negative, -b, b)

    # slack columns can seed the basis on rows that were not flipped
    basis = np.full(m, -1, dtype=int)
    for i in range(m_ub):
        if not negative[i]:
            basis[i] = nvar + i
    need_art = np.flatnonzero(basis < 0)
    n_struct = nvar + m_ub
    n_art = need_art.size
    T = np.zeros((m + 1, n_struct + n_art + 1))
    T[:m, :n_struct] = A
    T[:m, -1] = b
    for k, i in enumerate(need_art):
        T[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    tab = _Tableau(T, basis)

    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, :n_struct] = -T[need_art, :n_struct].sum(axis=0)
        T[-1, -1] = -T[need_art, -1].sum()
        tab.optimize(n_struct + n_art, max_iter)
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if -T[-1, -1] > FEAS_TOL * scale:
            raise InfeasibleError(f"phase 1 residual {-T[-1, -1]:.3g}")
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n_struct:
                row = T[r, :n_struct]
                candidates = np.flatnonzero(np.abs(row) > 1e-9)
                if candidates.size:
                    tab.pivot(r, int(candidates[0]))
                else:
                    keep[r] = False
        T = np.delete(T, np.s_[n_struct:n_struct + n_art], axis=1)[keep]
        tab.T = T
        tab.basis = tab.basis[keep[:-1]]

    cost = np.zeros(n_struct)
    cost[:nvar] = c
    T[-1, :] = 0.0
    T[-1, :n_struct] = cost
    for r, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[r]
    tab.optimize(n_struct, max_iter)

    x_full = np.zeros(n_struct)
    x_full[tab.basis] = T[:-1, -1]
    x = np.maximum(x_full[:nvar], 0.0)
    return LPResult(x=x, fun=float(c @ x), iterations=tab.iterations)


def feasible_point(A_ub=None, b_ub=None, A_eq=None, b_eq=None, nvar: int | None = None):
    """Return a nonnegative point satisfying the constraints, or ``None``."""
    if nvar is None:
        for A in (A_ub, A_eq):
            if A is not None:
                nvar = np.atleast_2d(A).shape[1]
                break
    try:
        return linprog(np.zeros(nvar), A_ub, b_ub, A_eq, b_eq).x
    except InfeasibleError:
        return None
