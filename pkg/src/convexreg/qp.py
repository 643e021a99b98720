"""Sparse convex quadratic programming by operator splitting.

Problems are posed as::

    minimize    1/2 x' P x + q' x
    subject to  l <= A x <= u

and solved with an ADMM iteration on the pair (x, z = A x). The x-update
uses a cached factorization of ``P + sigma I + A' diag(rho) A``; the step
parameter ``rho`` is rebalanced whenever the scaled primal and dual
residuals drift more than a factor 10 apart. When the iteration converges
an active-set polish step is attempted, which usually recovers the solution
to near machine precision.

A dense dual active-set method (Goldfarb-Idnani) is provided as well. It is
the better choice for problems with a few thousand variables and many
nearly redundant constraints, where the splitting iteration converges
slowly.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

logger = logging.getLogger(__name__)

INF = np.inf
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_FACTOR = 1e3
# static regularization of every linear system we factor
KKT_REG = 1e-8
# regularizations tried in turn by the active-set method
REG_LADDER = (1e-9, 1e-11, 1e-7)
DENSE_LIMIT = 4000


class QpError(RuntimeError):
    """Raised when a QP cannot be set up or its linear systems are singular."""


class QpStatus(str, enum.Enum):
    SOLVED = "Solved"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


class QpProblem:
    """Convex QP in standard form.

    Parameters
    ----------
    P : sparse or dense (N, N)
        Positive semidefinite cost matrix. Symmetrized on construction.
    q : array-like (N,)
    A : sparse or dense (M, N)
    l, u : array-like (M,)
        Bounds; ``-inf`` / ``inf`` allowed.
    """

    def __init__(self, P, q, A, l, u):
        q = np.asarray(q, dtype=float).ravel()
        n = q.shape[0]
        P = sp.csc_matrix(P, dtype=float)
        if P.shape != (n, n):
            raise ValueError(f"P has shape {P.shape}, expected {(n, n)}")
        A = sp.csc_matrix(A, dtype=float)
        if A.ndim != 2 or (A.shape[0] > 0 and A.shape[1] != n):
            raise ValueError(f"A has shape {A.shape}, expected (M, {n})")
        if A.shape[0] == 0:
            A = sp.csc_matrix((0, n))
        l = np.asarray(l, dtype=float).ravel()
        u = np.asarray(u, dtype=float).ravel()
        m = A.shape[0]
        if l.shape != (m,) or u.shape != (m,):
            raise ValueError("l and u must have one entry per row of A")
        if np.any(l > u):
            raise ValueError("infeasible bounds: l > u for some rows")
        if np.any(np.isnan(q)) or np.any(np.isnan(l)) or np.any(np.isnan(u)):
            raise ValueError("NaN in problem data")
        self.P = ((P + P.T) * 0.5).tocsc()
        self.q = q
        self.A = A
        self.l = l
        self.u = u

    @classmethod
    def from_triplets(cls, n, P_triplets, q, m, A_triplets, l, u):
        """Build from ``(rows, cols, vals)`` triplets. Duplicates are summed."""
        Pr, Pc, Pv = (np.asarray(t) for t in P_triplets)
        Ar, Ac, Av = (np.asarray(t) for t in A_triplets)
        P = sp.coo_matrix((Pv, (Pr, Pc)), shape=(n, n))
        A = sp.coo_matrix((Av, (Ar, Ac)), shape=(m, n))
        return cls(P, q, A, l, u)

    @property
    def n_variables(self):
        return self.q.shape[0]

    @property
    def n_constraints(self):
        return self.A.shape[0]

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.P @ x)) + float(self.q @ x)

    def residuals(self, x, y):
        """Unscaled KKT residuals ``(primal, dual)`` in the infinity norm.

        The primal residual is the distance of ``A x`` from the box
        ``[l, u]``; the dual residual is ``|P x + q + A' y|``.
        """
        Ax = self.A @ x
        prim = np.max(np.maximum(self.l - Ax, 0) + np.maximum(Ax - self.u, 0),
                      initial=0.0)
        dual = np.max(np.abs(self.P @ x + self.q + self.A.T @ y), initial=0.0)
        return float(prim), float(dual)


@dataclass
class QpSolution:
    x: np.ndarray
    status: QpStatus
    primal_residual: float
    dual_residual: float
    iterations: int
    objective: float
    y: np.ndarray = field(repr=False, default=None)
    polished: bool = False
    rho_updates: int = 0

    def summary(self):
        return {
            "status": self.status.value,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "iterations": self.iterations,
            "objective": self.objective,
            "polished": self.polished,
            "rho_updates": self.rho_updates,
        }


class _Factor:
    """Cholesky (dense) or LU (sparse) of a symmetric positive definite matrix."""

    def __init__(self, K):
        n = K.shape[0]
        try:
            if n <= DENSE_LIMIT:
                self._dense = True
                self._f = la.cho_factor(K.toarray(), lower=True,
                                        check_finite=False)
            else:
                self._dense = False
                self._f = spla.splu(sp.csc_matrix(K))
        except (la.LinAlgError, RuntimeError) as exc:
            raise QpError(f"KKT system is numerically singular: {exc}") from exc

    def solve(self, b):
        if self._dense:
            out = la.cho_solve(self._f, b, check_finite=False)
        else:
            out = self._f.solve(b)
        if not np.all(np.isfinite(out)):
            raise QpError("KKT solve produced non-finite values")
        return out


def _ruiz_scaling(P, A, n_iter):
    """Ruiz equilibration of the KKT matrix [[P, A'], [A, 0]] (inf-norm)."""
    n, m = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Ps, As = P.copy(), A.copy()
    for _ in range(n_iter):
        col_P = np.asarray(abs(Ps).max(axis=0).todense()).ravel() if n else np.zeros(0)
        col_A = (np.asarray(abs(As).max(axis=0).todense()).ravel()
                 if m else np.zeros(n))
        d = np.maximum(col_P, col_A)
        e = (np.asarray(abs(As).max(axis=1).todense()).ravel()
             if m else np.zeros(0))
        d = np.where(d < 1e-4, 1.0, d)
        e = np.where(e < 1e-4, 1.0, e)
        d = 1.0 / np.sqrt(np.clip(d, 1e-4, 1e4))
        e = 1.0 / np.sqrt(np.clip(e, 1e-4, 1e4))
        Dd, Ee = sp.diags(d), sp.diags(e)
        Ps = (Dd @ Ps @ Dd).tocsc()
        As = (Ee @ As @ Dd).tocsc()
        D *= d
        E *= e
    return D, E, Ps, As


def solve_qp(problem, tol=1e-6, max_iter=200_000, *, method="admm", **kwargs):
    """Solve a :class:`QpProblem`.

    Parameters
    ----------
    problem : QpProblem
    tol : float
        Absolute tolerance on both the primal and the dual residual
        (infinity norm, unscaled).
    max_iter : int
    method : {"admm", "active-set", "auto"}
        ``"admm"`` runs the operator-splitting iteration (keyword options are
        passed to :func:`solve_admm`). ``"active-set"`` runs a dense dual
        active-set method on ``P + reg I``, which is exact up to rounding but
        needs O(N^2) memory; it is retried with the values of ``reg`` in
        ``REG_LADDER`` until the tolerance is met. ``"auto"`` picks the
        active-set method when ``N <= 3000``.

    Returns
    -------
    QpSolution
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "active-set" if problem.n_variables <= 3000 else "admm"
    if method == "admm":
        return solve_admm(problem, tol, max_iter, **kwargs)
    if method != "active-set":
        raise ValueError(f"unknown method {method!r}")
    # The diagonal regularization leaves a dual residual of order reg |x|
    # when the refinement step cannot remove it (degenerate active sets), so
    # retry with other values before giving up.
    ladder = kwargs.pop("reg_ladder", REG_LADDER)
    total = 0
    for reg in ladder:
        x, y, status, it = _dual_active_set(problem, reg=reg, max_iter=max_iter, **kwargs)
        total += it
        if status is QpStatus.INFEASIBLE:
            return QpSolution(x, status, np.inf, np.inf, total, problem.objective(x),
                              y=np.zeros(problem.n_constraints))
        prim, dual = problem.residuals(x, y)
        if status is QpStatus.SOLVED and max(prim, dual) <= tol:
            break
        logger.debug("active-set reg=%g: residuals %.2e %.2e", reg, prim, dual)
    if status is QpStatus.SOLVED and max(prim, dual) > tol:
        status = QpStatus.MAX_ITER
    return QpSolution(x, status, prim, dual, total, problem.objective(x), y=y)



qp_solve = solve_qp

def solve_admm(problem, tol=1e-6, max_iter=200_000, *, rho=0.1, sigma=KKT_REG,
               alpha=1.6, scaling=10, polish=True, check_every=25,
               infeasibility_tol=1e-7, x0=None):
    """ADMM iteration with adaptive ``rho`` and an optional polish step.

    Parameters
    ----------
    problem : QpProblem
    tol : float
    max_iter : int
    rho : float
        Initial step parameter; adapted during the run.
    sigma : float
        Proximal regularization on x (also keeps the linear system definite).
    alpha : float
        Over-relaxation parameter in (0, 2).
    scaling : int
        Number of Ruiz equilibration passes (0 disables scaling).
    polish : bool
        Attempt an active-set refinement once the iteration converged.
    x0 : array-like, optional
        Initial primal iterate.

    Returns
    -------
    QpSolution
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, m = problem.n_variables, problem.n_constraints

    if scaling:
        D, E, P, A = _ruiz_scaling(problem.P, problem.A, scaling)
    else:
        D, E, P, A = np.ones(n), np.ones(m), problem.P, problem.A
    # cost scaling
    c = 1.0
    if scaling:
        qn = np.max(np.abs(D * problem.q), initial=0.0)
        pn = np.mean(np.asarray(abs(P).max(axis=0).todense()).ravel()) if n else 0.0
        c = 1.0 / np.clip(max(qn, pn, 1e-4), 1e-4, 1e4)
    P = (P * c).tocsc()
    q = c * D * problem.q
    l = E * problem.l
    u = E * problem.u
    At = A.T.tocsc()

    eq = np.isfinite(l) & np.isfinite(u) & (u - l < 1e-10)
    free = ~np.isfinite(l) & ~np.isfinite(u)

    def rho_vector(r):
        rv = np.full(m, r)
        rv[eq] = r * RHO_EQ_FACTOR
        rv[free] = RHO_MIN
        return rv

    def factor(rv):
        K = P + sigma * sp.eye(n, format="csc") + (At @ sp.diags(rv) @ A)
        return _Factor(K.tocsc())

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float) / D
    z = np.clip(A @ x, l, u)
    y = np.zeros(m)
    rv = rho_vector(rho)
    kkt = factor(rv)
    rho_updates = 0

    def unscaled(xs, ys):
        return D * xs, E * ys / c

    status = QpStatus.MAX_ITER
    prim = dual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        y_prev = y
        rhs = sigma * x - q + At @ (rv * z - y)
        xt = kkt.solve(rhs)
        zt = A @ xt
        x = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        z = np.clip(zr + y / rv, l, u)
        y = y + rv * (zr - z)

        if it % check_every and it != max_iter:
            continue

        Ax = A @ x
        Px = P @ x
        Aty = At @ y
        prim = float(np.max(np.abs((Ax - z) / E), initial=0.0))
        dual = float(np.max(np.abs((Px + q + Aty) / D), initial=0.0)) / c
        if prim <= tol and dual <= tol:
            status = QpStatus.SOLVED
            break

        if m and _primal_infeasible(y - y_prev, At, l, u, D, E,
                                    infeasibility_tol):
            status = QpStatus.INFEASIBLE
            break

        # rebalance rho on scaled residuals
        prim_s = np.max(np.abs(Ax - z), initial=0.0)
        dual_s = np.max(np.abs(Px + q + Aty), initial=0.0)
        prim_n = max(np.max(np.abs(Ax), initial=0.0),
                     np.max(np.abs(z), initial=0.0), 1e-10)
        dual_n = max(np.max(np.abs(Px), initial=0.0),
                     np.max(np.abs(Aty), initial=0.0),
                     np.max(np.abs(q), initial=0.0), 1e-10)
        ratio = np.sqrt((prim_s / prim_n) / max(dual_s / dual_n, 1e-30))
        new_rho = float(np.clip(rho * ratio, RHO_MIN, RHO_MAX))
        if m and (new_rho > 10 * rho or new_rho < rho / 10):
            rho = new_rho
            rv = rho_vector(rho)
            kkt = factor(rv)
            rho_updates += 1

    xu, yu = unscaled(x, y)
    polished = False
    if status is QpStatus.INFEASIBLE:
        logger.debug("primal infeasibility detected after %d iterations", it)
        return QpSolution(xu, status, prim, dual, it, problem.objective(xu),
                          y=yu, rho_updates=rho_updates)

    prim, dual = problem.residuals(xu, yu)
    if polish and m:
        zu = np.clip(problem.A @ xu, problem.l, problem.u)
        candidate = _polish(problem, xu, yu, zu)
        if candidate is not None:
            xp, yp = candidate
            pp, dp = problem.residuals(xp, yp)
            if max(pp, dp) <= max(prim, dual, tol):
                xu, yu, prim, dual = xp, yp, pp, dp
                polished = True
    if prim <= tol and dual <= tol:
        status = QpStatus.SOLVED
    elif status is QpStatus.SOLVED:
        # the scaled check passed but the unscaled recomputation did not
        status = QpStatus.MAX_ITER
    return QpSolution(xu, status, prim, dual, it, problem.objective(xu), y=yu,
                      polished=polished, rho_updates=rho_updates)


def _primal_infeasible(dy, At, l, u, D, E, eps):
    norm_dy = np.max(np.abs(E * dy), initial=0.0)
    if norm_dy < 1e-12:
        return False
    if np.max(np.abs((At @ dy) / D), initial=0.0) > eps * norm_dy:
        return False
    pos, neg = np.maximum(dy, 0), np.minimum(dy, 0)
    if np.any((pos > eps * norm_dy) & ~np.isfinite(u)):
        return False
    if np.any((neg < -eps * norm_dy) & ~np.isfinite(l)):
        return False
    support = (np.sum(np.where(np.isfinite(u), u, 0) * pos)
               + np.sum(np.where(np.isfinite(l), l, 0) * neg))
    return support < -eps * norm_dy


def _polish(problem, x, y, z, delta=1e-7, refine=25):
    """Solve the equality-constrained QP on the active set guessed from (x, y).

    Returns ``(x, y)`` or ``None`` when the guess is inconsistent.
    """
    A, P, q = problem.A, problem.P, problem.q
    l, u = problem.l, problem.u
    n = problem.n_variables
    low = (z - l < -y) & np.isfinite(l)
    upp = (u - z < y) & np.isfinite(u) & ~low
    act = np.flatnonzero(low | upp)
    b = np.where(low, l, u)[act]
    Aa = A[act].tocsc()
    # eliminate the (regularized) multiplier block:
    # (P + delta I + Aa' Aa / delta) x = -q + Aa' b / delta
    K = (P + delta * sp.eye(n) + (Aa.T @ Aa) / delta).tocsc()
    try:
        f = _Factor(K)
    except QpError:
        return None
    xp = np.zeros(n)
    ya = np.zeros(act.size)
    for _ in range(refine):
        # residuals of the unregularized KKT system
        r1 = -q - P @ xp - Aa.T @ ya
        r2 = b - Aa @ xp
        dx = f.solve(r1 + Aa.T @ r2 / delta)
        dy = (Aa @ dx - r2) / delta
        xp = xp + dx
        ya = ya + dy
        if max(np.max(np.abs(dx), initial=0.0), np.max(np.abs(dy), initial=0.0)) < 1e-14:
            break
    if not np.all(np.isfinite(xp)):
        return None
    yp = np.zeros(problem.n_constraints)
    yp[act] = ya
    # multipliers must carry the sign of the bound they sit on
    tol_sign = 1e-7 * max(1.0, np.max(np.abs(ya), initial=0.0))
    if np.any(yp[low] > tol_sign) or np.any(yp[upp] < -tol_sign):
        logger.debug("polish rejected: wrong-sign multipliers (max %.3g)",
                     max(np.max(yp[low], initial=0), -np.min(yp[upp], initial=0)))
        return None
    return xp, yp


@njit(cache=True)
def _givens_drop(R, J, k, q):
    """Delete active column ``k`` and restore triangularity of ``R[:q-1]``."""
    n = J.shape[0]
    for c in range(k, q - 1):
        for i in range(q):
            R[i, c] = R[i, c + 1]
    for i in range(q):
        R[i, q - 1] = 0.0
    for j in range(k, q - 1):
        a = R[j, j]
        b = R[j + 1, j]
        h = np.hypot(a, b)
        if h == 0.0:
            continue
        c_ = a / h
        s_ = b / h
        for col in range(j, q - 1):
            rj = R[j, col]
            rj1 = R[j + 1, col]
            R[j, col] = c_ * rj + s_ * rj1
            R[j + 1, col] = -s_ * rj + c_ * rj1
        R[j + 1, j] = 0.0
        for i in range(n):
            a_ = J[i, j]
            b_ = J[i, j + 1]
            J[i, j] = c_ * a_ + s_ * b_
            J[i, j + 1] = -s_ * a_ + c_ * b_
    for col in range(q):
        R[q - 1, col] = 0.0


def _dual_active_set(problem, reg=KKT_REG, max_iter=None, viol_tol=1e-11):
    """Goldfarb-Idnani dual active-set method on ``P + reg I``.

    Starts at the unconstrained minimizer and adds the most violated
    constraint until none is left, dropping constraints whose multipliers
    would turn negative. The working set is kept linearly independent, so
    redundant rows are never added. Returns ``(x, y, status, iterations)``.
    """
    n, m = problem.n_variables, problem.n_constraints
    A = problem.A.tocsr()
    l, u = problem.l, problem.u
    eq_rows = np.flatnonzero(np.isfinite(l) & (l == u))
    lo_rows = np.flatnonzero(np.isfinite(l) & (l != u))
    up_rows = np.flatnonzero(np.isfinite(u) & (l != u))
    # one-sided constraints  C x >= b ; sign maps multipliers back to y
    C = sp.vstack([A[eq_rows], A[lo_rows], -A[up_rows]]).tocsr()
    b = np.concatenate([l[eq_rows], l[lo_rows], -u[up_rows]])
    origin = np.concatenate([eq_rows, lo_rows, up_rows])
    sign = np.concatenate([-np.ones(eq_rows.size), -np.ones(lo_rows.size),
                           np.ones(up_rows.size)])
    n_eq = eq_rows.size
    row_norm = np.sqrt(np.asarray(C.multiply(C).sum(axis=1)).ravel())
    row_norm[row_norm == 0] = 1.0
    if max_iter is None:
        max_iter = 50 * (n + C.shape[0]) + 1000

    G = problem.P.toarray() + reg * np.eye(n)
    try:
        Lc = la.cholesky(G, lower=True)
    except la.LinAlgError as exc:
        raise QpError(f"KKT system is numerically singular: {exc}") from exc
    J = np.asfortranarray(la.solve_triangular(Lc, np.eye(n), lower=True).T)
    x = -la.cho_solve((Lc, True), problem.q)
    R = np.zeros((n, n))
    active = []
    mult = []
    q = 0
    it = 0

    def add(p, d):
        nonlocal q
        v = d[q:].copy()
        nv = np.linalg.norm(v)
        alpha = -np.copysign(nv, v[0]) if v[0] != 0 else -nv
        v[0] -= alpha
        vv = v @ v
        if vv > 0:
            J2 = J[:, q:]
            J2 -= np.outer(J2 @ v, v * (2.0 / vv))
        R[:q, q] = d[:q]
        R[q, q] = alpha
        active.append(p)
        q += 1

    def drop(k):
        nonlocal q
        _givens_drop(R, J, k, q)
        del active[k]
        del mult[k]
        q -= 1

    def step_direction(normal):
        d = J.T @ normal
        z = J[:, q:] @ d[q:]
        r = (la.solve_triangular(R[:q, :q], d[:q], check_finite=False)
             if q else np.zeros(0))
        return d, z, r

    def dependent(d):
        return np.linalg.norm(d[q:]) <= 1e-10 * max(np.linalg.norm(d), 1e-300)

    # equality constraints: full steps, multipliers unrestricted
    for p in range(n_eq):
        normal = C[p].toarray().ravel()
        d, z, r = step_direction(normal)
        s_p = normal @ x - b[p]
        if q >= n or dependent(d):
            if abs(s_p) > 1e-9 * (1 + abs(b[p])):
                return x, None, QpStatus.INFEASIBLE, it
            continue
        t = -s_p / (z @ normal)
        x = x + t * z
        for j in range(q):
            mult[j] -= t * r[j]
        add(p, d)
        mult.append(t)
        it += 1

    status = QpStatus.SOLVED
    while True:
        if it >= max_iter:
            status = QpStatus.MAX_ITER
            break
        if C.shape[0] == n_eq:
            break
        slack = (C @ x - b) / row_norm
        slack[:n_eq] = 0.0
        if active:
            slack[active] = 0.0
        p = int(np.argmin(slack))
        if slack[p] >= -viol_tol * (1.0 + abs(b[p]) / row_norm[p]):
            break
        normal = C[p].toarray().ravel()
        u_plus = 0.0
        while True:
            it += 1
            d, z, r = step_direction(normal)
            # largest dual step keeping inequality multipliers nonnegative
            t1, k = np.inf, -1
            if q:
                cand = np.flatnonzero((np.asarray(active) >= n_eq) & (r > 1e-14))
                if cand.size:
                    ratios = np.asarray(mult)[cand] / r[cand]
                    j = int(np.argmin(ratios))
                    t1, k = float(ratios[j]), int(cand[j])
            zn = z @ normal
            if dependent(d) or zn <= 0:
                t2 = np.inf
            else:
                t2 = -(normal @ x - b[p]) / zn
            t = min(t1, t2)
            if not np.isfinite(t):
                return x, None, QpStatus.INFEASIBLE, it
            if np.isfinite(t2):
                x = x + t * z
            if q:
                mult[:] = list(np.asarray(mult) - t * r)
            u_plus += t
            if t2 <= t1:
                add(p, d)
                mult.append(u_plus)
                break
            drop(k)
            if it >= max_iter:
                break

    y = np.zeros(m)
    for j, c in enumerate(active):
        y[origin[c]] += sign[c] * mult[j]
    if status is QpStatus.SOLVED and active:
        rows = origin[active]
        refined = _refine_on_rows(problem, x, y, rows, b[active] * -sign[active])
        if refined is not None:
            x, y = refined
    return x, y, status, it


def _refine_on_rows(problem, x, y, rows, targets, delta=1e-7, steps=10):
    """Iterative refinement of a KKT point on a fixed set of active rows.

    Removes the footprint of the diagonal regularization: the returned pair
    satisfies ``P x + q + A' y = 0`` with ``A[rows] x = targets`` to rounding.
    Returns ``None`` if the result is worse or has wrong-sign multipliers.
    """
    A, P, q = problem.A, problem.P, problem.q
    Aw = A[rows].tocsr()
    yw = y[rows].copy()
    before = max(problem.residuals(x, y))
    K = (P + delta * sp.eye(problem.n_variables) + (Aw.T @ Aw) / delta).tocsc()
    try:
        f = _Factor(K)
    except QpError:
        return None
    xr = x.copy()
    for _ in range(steps):
        r1 = -q - P @ xr - Aw.T @ yw
        r2 = targets - Aw @ xr
        dx = f.solve(r1 + Aw.T @ r2 / delta)
        dy = (Aw @ dx - r2) / delta
        xr += dx
        yw += dy
        if max(np.max(np.abs(dx)), np.max(np.abs(dy))) < 1e-15:
            break
    yr = np.zeros_like(y)
    yr[rows] = yw
    lower = targets == problem.l[rows]
    slack = 1e-9 * max(1.0, np.max(np.abs(yw)))
    if np.any(yw[lower & (problem.l[rows] != problem.u[rows])] > slack):
        return None
    if np.any(yw[~lower] < -slack):
        return None
    if max(problem.residuals(xr, yr)) > before:
        return None
    return xr, yr


def write_triplets(problem, path):
    """Dump ``(P, q, A, l, u)`` as plain-text triplets.

    Layout: a header line ``N M``, then ``P nnz`` followed by ``i j v`` lines
    (upper triangle), ``q`` values one per line, ``A nnz`` with ``i j v``
    lines, and ``l u`` pairs one per row. Infinite bounds print as ``inf``.
    """
    P = sp.triu(problem.P).tocoo()
    A = problem.A.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{problem.n_variables} {problem.n_constraints}\n")
        fh.write(f"P {P.nnz}\n")
        for i, j, v in zip(P.row, P.col, P.data):
            fh.write(f"{i} {j} {float(v):.17g}\n")
        fh.write("q\n")
        for v in problem.q:
            fh.write(f"{float(v):.17g}\n")
        fh.write(f"A {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {float(v):.17g}\n")
        fh.write("bounds\n")
        for lo, hi in zip(problem.l, problem.u):
            fh.write(f"{float(lo):.17g} {float(hi):.17g}\n")


def read_triplets(path):
    """Inverse of :func:`write_triplets`."""
    with open(path) as fh:
        lines = iter(fh.read().split("\n"))
    n, m = (int(t) for t in next(lines).split())
    nnz_p = int(next(lines).split()[1])
    pr, pc, pv = [], [], []
    for _ in range(nnz_p):
        i, j, v = next(lines).split()
        pr.append(int(i)), pc.append(int(j)), pv.append(float(v))
    next(lines)
    q = [float(next(lines)) for _ in range(n)]
    nnz_a = int(next(lines).split()[1])
    ar, ac, av = [], [], []
    for _ in range(nnz_a):
        i, j, v = next(lines).split()
        ar.append(int(i)), ac.append(int(j)), av.append(float(v))
    next(lines)
    lo, hi = [], []
    for _ in range(m):
        a, b = next(lines).split()
        lo.append(float(a)), hi.append(float(b))
    P = sp.coo_matrix((pv, (pr, pc)), shape=(n, n)).tocsc()
    P = P + sp.triu(P, k=1).T
    A = sp.coo_matrix((av, (ar, ac)), shape=(m, n))
    return QpProblem(P, q, A, lo, hi)
