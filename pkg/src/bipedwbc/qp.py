"""Dense convex quadratic programming via the Goldfarb-Idnani dual active-set
method.

    minimize    0.5 x' H x + f' x
    subject to  A_eq x  = b_eq
                A_in x <= b_in

H must be symmetric positive definite (the whole-body control QP always is:
its Hessian is block-diagonal with strictly positive weights). The method
starts from the unconstrained minimizer, which is dual feasible, and adds the
most violated constraint one at a time, dropping active inequalities whose
multipliers would turn negative. Active constraints are satisfied to solver
precision, so KKT residuals come out near machine accuracy. Identical inputs
produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class QpInfeasibleError(Exception):
    """The constraint set is empty (or numerically indistinguishable from it)."""


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    iterations: int
    active_set: list
    residuals: dict = field(default_factory=dict)


def _kkt_residuals(H, f, A_eq, b_eq, A_in, b_in, x, nu, lam):
    r = {}
    g = H @ x + f
    if A_eq is not None and A_eq.size:
        g = g + A_eq.T @ nu
        r["eq"] = float(np.max(np.abs(A_eq @ x - b_eq)))
    else:
        r["eq"] = 0.0
    if A_in is not None and A_in.size:
        g = g + A_in.T @ lam
        slack = A_in @ x - b_in
        r["ineq"] = float(max(0.0, np.max(slack)))
        r["comp"] = float(np.max(np.abs(lam * slack))) if lam.size else 0.0
        r["dual"] = float(max(0.0, -np.min(lam))) if lam.size else 0.0
    else:
        r["ineq"] = 0.0
        r["comp"] = 0.0
        r["dual"] = 0.0
    r["stationarity"] = float(np.max(np.abs(g)))
    return r


def solve_dense_qp(H, f, A_eq=None, b_eq=None, A_in=None, b_in=None,
                   max_iter=None, feas_tol=1e-10):
    """Solve the QP; raises QpInfeasibleError when no point satisfies the
    constraints and ValueError when H is not positive definite."""
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if H.shape != (n, n):
        raise ValueError("H/f dimension mismatch")
    if np.max(np.abs(H - H.T)) > 1e-8 * max(1.0, np.max(np.abs(H))):
        raise ValueError("H must be symmetric")
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ValueError("H must be positive definite") from None

    meq = 0 if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float)).shape[0]
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
    min_ = 0 if A_in is None else np.atleast_2d(np.asarray(A_in, dtype=float)).shape[0]
    if A_in is not None:
        A_in = np.atleast_2d(np.asarray(A_in, dtype=float))
        b_in = np.atleast_1d(np.asarray(b_in, dtype=float))

    # internal form: normals[:, i]' x >= bvec[i]; first meq rows are equalities
    m = meq + min_
    normals = np.zeros((n, m))
    bvec = np.zeros(m)
    if meq:
        normals[:, :meq] = A_eq.T
        bvec[:meq] = b_eq
    if min_:
        normals[:, meq:] = -A_in.T
        bvec[meq:] = -b_in
    flip = np.ones(m)

    scale = max(1.0, float(np.max(np.abs(bvec))) if m else 1.0,
                float(np.max(np.abs(normals))) if m else 1.0)
    tol = feas_tol * scale
    if max_iter is None:
        max_iter = 100 * (n + m + 1)

    x = np.linalg.solve(H, -f)
    act: list = []
    u: list = []
    iters = 0

    def directions(n_p):
        hin = np.linalg.solve(H, n_p)
        if not act:
            return np.zeros(0), hin
        N = normals[:, act]
        HiN = np.linalg.solve(H, N)
        B = N.T @ HiN
        rhs = N.T @ hin
        try:
            r = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            r = np.linalg.lstsq(B, rhs, rcond=None)[0]
        return r, hin - HiN @ r

    def make_active(p):
        nonlocal x, iters
        u_plus = 0.0
        while True:
            iters_check()
            n_p = normals[:, p]
            s_p = n_p @ x - bvec[p]
            r, z = directions(n_p)
            ztn = z @ n_p
            t1, k1 = np.inf, -1
            for j, cidx in enumerate(act):
                if cidx >= meq and r[j] > 1e-12:
                    tv = u[j] / r[j]
                    if tv < t1:
                        t1, k1 = tv, j
            if abs(ztn) <= 1e-12 * max(1.0, float(np.linalg.norm(n_p))):
                t2 = np.inf
            else:
                t2 = -s_p / ztn
            if t1 == np.inf and t2 == np.inf:
                raise QpInfeasibleError(
                    f"constraint {p} cannot be satisfied (dual unbounded)")
            if t2 == np.inf:
                # dual-only step: drop the blocking constraint and retry
                step = t1
                for j in range(len(act)):
                    u[j] -= step * r[j]
                u_plus += step
                act.pop(k1)
                u.pop(k1)
                continue
            t = min(t1, t2)
            x = x + t * z
            for j in range(len(act)):
                u[j] -= t * r[j]
            u_plus += t
            if t2 <= t1:
                act.append(p)
                u.append(u_plus)
                return
            act.pop(k1)
            u.pop(k1)

    def iters_check():
        nonlocal iters
        iters += 1
        if iters > max_iter:
            raise RuntimeError("active-set iteration limit exceeded")

    # equalities first, in order
    for p in range(meq):
        s_p = normals[:, p] @ x - bvec[p]
        if s_p > tol:
            normals[:, p] = -normals[:, p]
            bvec[p] = -bvec[p]
            flip[p] = -1.0
        elif abs(s_p) <= tol:
            _, z = directions(normals[:, p])
            if abs(z @ normals[:, p]) <= 1e-12:
                continue  # dependent but consistent: redundant
        else:
            pass
        try:
            make_active(p)
        except QpInfeasibleError:
            if abs(normals[:, p] @ x - bvec[p]) <= 1e-7 * scale:
                continue
            raise QpInfeasibleError("equality constraints are inconsistent") from None

    # inequalities: repeatedly add the most violated
    while True:
        s = normals.T @ x - bvec if m else np.zeros(0)
        worst, worst_val = -1, -tol
        for p in range(meq, m):
            if p in act:
                continue
            if s[p] < worst_val:
                worst, worst_val = p, s[p]
        if worst < 0:
            break
        make_active(worst)

    nu = np.zeros(meq)
    lam = np.zeros(min_)
    for j, cidx in enumerate(act):
        if cidx < meq:
            nu[cidx] = -flip[cidx] * u[j]
        else:
            lam[cidx - meq] = u[j]
    obj = float(0.5 * x @ H @ x + f @ x)
    res = _kkt_residuals(H, f, A_eq, b_eq, A_in, b_in, x, nu, lam)
    return QpResult(x=x, objective=obj, eq_duals=nu, ineq_duals=lam,
                    iterations=iters, active_set=sorted(act), residuals=res)
