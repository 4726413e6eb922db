"""Independent reference computations used by the tests.

Nothing here calls the library's LP solver, memo tables or search code; each
oracle recomputes its answer from the definitions by enumeration.
"""

from __future__ import annotations

import itertools

import numpy as np

from dyncore.dynamics import DiscountSpec, State, allocation_grid, simulate


# -- least core ---------------------------------------------------------------

def coalition_rows(n: int) -> np.ndarray:
    """Membership matrix over every coalition mask 0..2**n - 1."""
    return np.array([[(m >> i) & 1 for i in range(n)] for m in range(1 << n)], dtype=float)


def least_core_by_vertices(worth: np.ndarray, n: int, floor: float = 0.0) -> float:
    """Least-core value by enumerating every basic solution of the LP.

    Unknowns ``(x, eps)``; constraints ``x(S) + eps >= v(S)``, ``x_i >= floor``,
    ``eps >= 0`` and ``x(N) = v(N)``.  The optimum sits at a point where ``n``
    inequalities are tight, so trying all such systems finds it.
    """
    M = coalition_rows(n)
    full = (1 << n) - 1
    rows, rhs = [], []
    for m in range(1, full + 1):
        rows.append(np.append(M[m], 1.0))
        rhs.append(worth[m])
    for i in range(n):
        e = np.zeros(n + 1)
        e[i] = 1.0
        rows.append(e)
        rhs.append(floor)
    rows.append(np.append(np.zeros(n), 1.0))
    rhs.append(0.0)
    A, b = np.array(rows), np.array(rhs)
    eq = np.append(np.ones(n), 0.0)
    best = np.inf
    for pick in itertools.combinations(range(len(rows)), n):
        sys_a = np.vstack([A[list(pick)], eq])
        if abs(np.linalg.det(sys_a)) < 1e-12:
            continue
        sol = np.linalg.solve(sys_a, np.append(b[list(pick)], worth[full]))
        if np.all(A @ sol >= b - 1e-9):
            best = min(best, sol[-1])
    return float(best)


def least_core_by_grid(worth: np.ndarray, n: int, step: float = 1 / 200) -> float:
    """Smallest max-excess over the allocation grid (an upper bound within about ``step``)."""
    d = worth[(1 << n) - 1]
    pts = allocation_grid(n, d, 0.0, step, include_uniform=False)
    M = coalition_rows(n)[1:]
    exc = worth[1:][None, :] - pts @ M.T
    return float(max(0.0, exc.max(axis=1).min()))


# -- discounted streams ------------------------------------------------------

def discounted(values, delta: float) -> float:
    """``(1 - delta) * sum_t delta**t * values[t]`` by a plain loop."""
    total, w = 0.0, 1 - delta
    for v in values:
        total += w * v
        w *= delta
    return total


# -- deviations by literal simulation -----------------------------------------

def policy_schedule(policy, S: int):
    return lambda t, game, prev: policy(S, prev, game)


def planned_share(spec, policy, ds: DiscountSpec, S: int, entry, T: int) -> float:
    """``T``'s discounted share of the policy stream of coalition ``S`` after ``entry``."""
    start = None if entry is None else State(S, np.asarray(entry, dtype=float))
    if start is None:
        traj = simulate(spec, policy_schedule(policy, S), length=ds.horizon)
    else:
        traj = simulate(spec, policy_schedule(policy, S), length=ds.horizon, start=start)
    return discounted(traj.shares(T), ds.delta)


def _stage_game(spec, T: int, prev):
    return spec.initial_game(T) if prev is None else spec.next_game(T, prev)


def deviation_streams(spec, policy, ds: DiscountSpec, T: int, entry_T, stages: int, resolution: float):
    """Every value ``T`` can get by choosing its own grid allocations for up to ``stages`` periods.

    After the chosen allocations the policy resumes inside ``T``.  Each branch
    is played out with :func:`simulate` over the full horizon.
    """
    out = []

    def rec(prefix, prev, remaining):
        game = _stage_game(spec, T, prev)
        for z in allocation_grid(game.n, game.grand_worth, spec.floor, resolution):
            path = prefix + [z]
            out.append(_play(spec, policy, ds, T, entry_T, path))
            if remaining > 1 and game.n > 1:
                rec(path, z, remaining - 1)

    rec([], entry_T, stages)
    return out


def _play(spec, policy, ds, T, entry_T, path):
    fixed = list(path)

    def schedule(t, game, prev):
        if t <= len(fixed):
            return fixed[t - 1]
        return policy(T, prev, game)

    if entry_T is None:
        traj = simulate(spec, schedule, length=ds.horizon, deviations={1: T})
    else:
        traj = simulate(spec, schedule, length=ds.horizon, start=State(T, np.asarray(entry_T, dtype=float)))
    return discounted([x.sum() for x in traj.allocations], ds.delta)


# -- market ---------------------------------------------------------------------

def market_output_by_grid(ms, scales, firms, points: int = 5, starts: int = 8, stop: float = 1e-11,
                          max_rounds: int = 50_000, seed: int = 0) -> float:
    """Maximize total scaled output over splits of the pooled endowment by adaptive grid search.

    Free coordinates are the shares of every firm but the last for each
    factor.  Each round lays a randomly rotated grid around the incumbent,
    clipped to the unit box so that candidates reach the boundary faces where
    a firm gets none of a factor.  The radius doubles after an improvement
    and halves otherwise, so the search keeps its pace along the ridges of
    the piecewise-linear objective.  The best of several seeded starts wins.
    """
    firms = list(firms)
    m, l = len(firms), ms.factors
    pooled = ms.endowments[firms].sum(axis=0)
    if m == 1:
        i = firms[0]
        return float(scales[i] * ms.utilities[i](pooled))
    dims = l * (m - 1)

    def value(Z):
        # Z: (k, dims) fractions of each factor given to the first m - 1 firms
        k = Z.shape[0]
        frac = Z.reshape(k, l, m - 1)
        last = 1.0 - frac.sum(axis=2, keepdims=True)
        full = np.concatenate([frac, last], axis=2)
        bad = np.any(full < -1e-12, axis=(1, 2))
        total = np.zeros(k)
        for j, i in enumerate(firms):
            y = np.maximum(full[:, :, j], 0.0) * pooled[None, :]
            u = ms.utilities[i]
            total += scales[i] * np.min(y @ u.slopes.T + u.intercepts[None, :], axis=1)
        total[bad] = -np.inf
        return total

    axes = np.linspace(-1.0, 1.0, points)
    offsets = np.array(list(itertools.product(axes, repeat=dims)))
    rng = np.random.default_rng(seed)
    first = np.full((l, m - 1), 1.0 / m)
    others = rng.dirichlet(np.ones(m), size=(starts - 1, l))[:, :, :-1]
    overall = -np.inf
    for start in [first, *others]:
        centre = start.reshape(dims)
        best = float(value(centre[None, :])[0])
        radius = 1.0
        for _ in range(max_rounds):
            if radius < stop:
                break
            rotation, _ = np.linalg.qr(rng.normal(size=(dims, dims)))
            Z = np.clip(centre[None, :] + radius * offsets @ rotation, 0.0, 1.0)
            vals = value(Z)
            j = int(np.argmax(vals))
            if vals[j] > best + 1e-15:
                best, centre = float(vals[j]), Z[j]
                radius = min(1.0, 2 * radius)
            else:
                radius /= 2
        overall = max(overall, best)
    return overall


def market_output_by_vertices(ms, scales, firms) -> float:
    """Maximize total scaled output by enumerating candidate factor splits.

    With the shares of all firms but the last as coordinates, the objective is
    linear on every cell cut out by the kinks of the utilities and the share
    bounds, so its maximum sits where ``dims`` of those hyperplanes meet.
    Every such intersection is solved for, filtered for feasibility and scored.
    """
    firms = list(firms)
    m, l = len(firms), ms.factors
    pooled = ms.endowments[firms].sum(axis=0)
    if m == 1:
        i = firms[0]
        return float(scales[i] * ms.utilities[i](pooled))
    dims = l * (m - 1)

    def bundle(j):
        """Affine map Z -> factor bundle of firm j, as (matrix, offset)."""
        M = np.zeros((l, dims))
        if j < m - 1:
            for f in range(l):
                M[f, f * (m - 1) + j] = pooled[f]
            return M, np.zeros(l)
        for f in range(l):
            M[f, f * (m - 1):(f + 1) * (m - 1)] = -pooled[f]
        return M, pooled.copy()

    planes = []  # rows (normal, rhs) with normal @ Z = rhs
    for j, i in enumerate(firms):
        M, off = bundle(j)
        u = ms.utilities[i]
        for a, b in itertools.combinations(range(len(u.intercepts)), 2):
            diff = u.slopes[a] - u.slopes[b]
            normal = diff @ M
            if np.abs(normal).max() > 1e-12:
                planes.append((normal, u.intercepts[b] - u.intercepts[a] - diff @ off))
    for k in range(dims):
        e = np.zeros(dims)
        e[k] = 1.0
        planes.append((e, 0.0))
    for f in range(l):
        e = np.zeros(dims)
        e[f * (m - 1):(f + 1) * (m - 1)] = 1.0
        planes.append((e, 1.0))
    normals = np.array([p[0] for p in planes])
    rhs = np.array([p[1] for p in planes])
    combos = np.array(list(itertools.combinations(range(len(planes)), dims)))
    A = normals[combos]
    keep = np.abs(np.linalg.det(A)) > 1e-12
    Z = np.linalg.solve(A[keep], rhs[combos[keep]][..., None])[..., 0]
    frac = Z.reshape(-1, l, m - 1)
    ok = np.all(frac >= -1e-9, axis=(1, 2)) & np.all(frac.sum(axis=2) <= 1 + 1e-9, axis=1)
    Z = np.clip(Z[ok], 0.0, 1.0)
    total = np.zeros(len(Z))
    for j, i in enumerate(firms):
        M, off = bundle(j)
        y = np.maximum(Z @ M.T + off, 0.0)
        u = ms.utilities[i]
        total += scales[i] * np.min(y @ u.slopes.T + u.intercepts[None, :], axis=1)
    return float(total.max())
