"""Reference solutions computed without the package's solvers."""

import itertools

import numpy as np


def qp_active_set_oracle(P, q, A, l, u, max_active=None, tol=1e-9):
    """Brute-force KKT search over active sets of a strictly convex QP.

    Active sets are enumerated by increasing size; every row may be active
    at its lower or upper bound. For each guess the equality-constrained QP
    is solved through its KKT matrix and accepted when it is primal feasible
    and the multipliers have the right signs. With ``P`` positive definite
    the first accepted point is the unique minimizer.

    Returns ``None`` if no KKT point is found with at most ``max_active``
    active rows.
    """
    P = np.asarray(P, dtype=float)
    A = np.asarray(A, dtype=float)
    n, m = P.shape[0], A.shape[0]
    max_active = min(n, m) if max_active is None else max_active
    for k in range(max_active + 1):
        for rows in itertools.combinations(range(m), k):
            sides = [[s for s, b in (("l", l[r]), ("u", u[r])) if np.isfinite(b)]
                     for r in rows]
            for choice in itertools.product(*sides):
                targets = np.array([l[r] if s == "l" else u[r] for r, s in zip(rows, choice)])
                Aw = A[list(rows)]
                K = np.block([[P, Aw.T], [Aw, np.zeros((k, k))]])
                rhs = np.concatenate([-q, targets])
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    continue
                x, y = sol[:n], sol[n:]
                Ax = A @ x
                if np.any(Ax < l - tol) or np.any(Ax > u + tol):
                    continue
                # P x + q + Aw' y = 0: lower-active y <= 0, upper-active y >= 0
                ok = all((y[i] <= tol) if s == "l" else (y[i] >= -tol)
                         for i, s in enumerate(choice) if l[rows[i]] != u[rows[i]])
                if ok:
                    return x
    return None


def random_planted_qp(rng, n, m, k):
    """Strictly convex QP whose minimizer has exactly ``k`` active rows.

    A point ``x*``, an active set with sides and strictly signed multipliers
    are drawn first; ``q`` is then chosen so that ``(x*, y*)`` satisfies the
    KKT conditions. Every row is two-sided; inactive rows keep a slack of at
    least 0.2.
    """
    B = rng.standard_normal((n, n))
    P = B @ B.T + 0.1 * np.eye(n)
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    Ax = A @ x
    k = min(k, m, n)
    rows = rng.choice(m, size=k, replace=False)
    upper = rng.uniform(size=k) < 0.5
    l = Ax - rng.uniform(0.2, 2.0, m)
    u = Ax + rng.uniform(0.2, 2.0, m)
    l[rows[~upper]] = Ax[rows[~upper]]
    u[rows[upper]] = Ax[rows[upper]]
    y = np.zeros(m)
    y[rows] = np.where(upper, 1.0, -1.0) * rng.uniform(0.1, 2.0, k)
    q = -(P @ x + A.T @ y)
    return P, q, A, l, u, x


def best_two_piece_fit_1d(x, y):
    """Exact 2-piece max-affine least squares in d = 1.

    In one dimension the cells of a max-affine function are intervals, so it
    suffices to try every split of the sorted points into a left and a right
    block and fit one line to each.
    """
    order = np.argsort(x)
    x, y = x[order], y[order]
    best = (np.inf, None)
    for s in range(2, len(x) - 1):
        pieces = []
        sse = 0.0
        for xs, ys in ((x[:s], y[:s]), (x[s:], y[s:])):
            Z = np.column_stack([xs, np.ones_like(xs)])
            coef = np.linalg.lstsq(Z, ys, rcond=None)[0]
            pieces.append(coef)
            sse += float(np.sum((Z @ coef - ys) ** 2))
        if sse < best[0]:
            best = (sse, pieces)
    return best


def three_point_projection(Y, x=(0.0, 0.5, 1.0)):
    """Projection of ``Y`` onto convex sequences on three points.

    Two cases: the data are already convex, or the middle convexity
    constraint is active and the fit is the projection onto the plane
    ``y2 = w1 y1 + w3 y3``.
    """
    Y = np.asarray(Y, dtype=float)
    w1 = (x[2] - x[1]) / (x[2] - x[0])
    w3 = 1.0 - w1
    if Y[1] <= w1 * Y[0] + w3 * Y[2]:
        return Y.copy()
    a = np.array([w1, -1.0, w3])
    return Y - (a @ Y) / (a @ a) * a
