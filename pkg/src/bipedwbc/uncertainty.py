"""Two-step Lyapunov uncertainty analysis of the velocity-reversal planner.

With bounded CoM estimation error (||delta|| <= delta_M, a (position,
velocity) pair per axis) and bounded foot landing error (|eta| <= eta_M), one
step of the closed loop is

    x+ = A x + B (p + eta),   p = K (x + delta)

Over two steps, with A_c = A + B K and A_cc = A_c^2,

    x'' = A_cc x + zeta
    zeta = A_c B K delta + B K delta' + A_c B eta + B eta'

and the Lyapunov difference Delta V = x''^T P x'' - x^T P x is bounded by the
quadratic -a ||x||^2 + 2 b ||x|| + c whose coefficients collect worst-case
norms of the zeta terms. States with norm above the positive root

    r = (b + sqrt(b^2 + a c)) / a

are guaranteed to contract over two steps; inside the ball nothing is
guaranteed. P solves the discrete Lyapunov equation A_cc' P A_cc - P = -I,
which makes a = 1 exactly whenever the two-step map is stable.

Norms mix meters and meters/second deliberately; the phase plane is treated
as a plain Euclidean space (see README).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .planner import LipParams, PlannerParams, closed_loop


@dataclass
class UncertaintyBounds:
    delta_m: float   # CoM state estimation error bound (2-norm of (m, m/s) pair)
    eta_m: float     # foot landing error bound (m)

    def __post_init__(self):
        if self.delta_m < 0 or self.eta_m < 0:
            raise ValueError("uncertainty bounds must be non-negative")


@dataclass
class BallReport:
    P: np.ndarray
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    A_c: np.ndarray
    A_cc: np.ndarray
    a: float
    b: float
    c: float
    D: float
    E: float
    F: float
    radius: float
    bounds: UncertaintyBounds

    def max_policy_output(self):
        """max |K x| over the ball boundary, r * ||K||_2 (Cauchy-Schwarz)."""
        return self.radius * float(np.linalg.norm(self.K, 2))

    def contained_in_wedge(self, p_max=0.5):
        return self.max_policy_output() <= p_max


class UnstableLoopError(Exception):
    """The closed-loop map is not a contraction; the analysis does not apply."""


def lyapunov_P(A_cc):
    """Solve A_cc' P A_cc - P = -I for the 2x2 SPD P (vectorized Stein solve)."""
    A_cc = np.asarray(A_cc, dtype=float)
    rho = np.max(np.abs(np.linalg.eigvals(A_cc)))
    if rho >= 1.0:
        raise UnstableLoopError(f"two-step map spectral radius {rho:.4f} >= 1")
    n = A_cc.shape[0]
    # vec(A' P A) = (A' (x) A') vec(P) with column-major vec; kron matches
    M = np.eye(n * n) - np.kron(A_cc.T, A_cc.T)
    vecP = np.linalg.solve(M, np.eye(n).flatten(order="F"))
    P = vecP.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise UnstableLoopError("Lyapunov solution is not positive definite")
    return P


def _n2(M):
    return float(np.linalg.norm(M, 2))


def ball_coefficients(A, B, K, P, bounds: UncertaintyBounds):
    """Quadratic-bound coefficients (a, b, c) and the c-expansion terms
    (D, E, F); c = delta_m^2 D + 2 delta_m eta_m E + eta_m^2 F."""
    B = np.asarray(B, dtype=float).reshape(2, 1)
    K = np.asarray(K, dtype=float).reshape(1, 2)
    A_c = A + B @ K
    A_cc = A_c @ A_c
    a = -float(np.max(np.linalg.eigvalsh(A_cc.T @ P @ A_cc - P)))
    dm, em = bounds.delta_m, bounds.eta_m
    BK = B @ K
    AcB = A_c @ B
    AcBK = A_c @ BK
    b = (dm * (_n2(A_cc.T @ P @ AcBK) + _n2(A_cc.T @ P @ BK))
         + em * (_n2(A_cc.T @ P @ AcB) + _n2(A_cc.T @ P @ B)))
    D = _n2(AcBK.T @ P @ AcBK) + 2.0 * _n2(AcBK.T @ P @ BK) + _n2(BK.T @ P @ BK)
    E = (_n2(AcBK.T @ P @ AcB) + _n2(AcBK.T @ P @ B)
         + _n2(AcB.T @ P @ BK) + _n2(B.T @ P @ BK))
    F = _n2(AcB.T @ P @ AcB) + 2.0 * _n2(B.T @ P @ AcB) + _n2(B.T @ P @ B)
    c = dm * dm * D + 2.0 * dm * em * E + em * em * F
    return a, b, c, D, E, F


def ball_radius(a, b, c):
    """r = (b + sqrt(b^2 + a c)) / a, the positive root of -a r^2 + 2 b r + c."""
    if a <= 0:
        raise UnstableLoopError("a <= 0: closed loop is not a two-step contraction")
    if b < 0 or c < 0:
        raise ValueError("b and c must be non-negative")
    return float((b + np.sqrt(b * b + a * c)) / a)


def analyze(lip: LipParams, params: PlannerParams, bounds: UncertaintyBounds,
            axis=0) -> BallReport:
    """Full pipeline: closed loop -> P -> coefficients -> ball radius."""
    A, B = lip.step_matrices()
    K, A_c, _ = closed_loop(lip, params, axis)
    A_cc = A_c @ A_c
    P = lyapunov_P(A_cc)
    a, b, c, D, E, F = ball_coefficients(A, B, K, P, bounds)
    r = ball_radius(a, b, c)
    return BallReport(P=P, A=A, B=B, K=K, A_c=A_c, A_cc=A_cc,
                      a=a, b=b, c=c, D=D, E=E, F=F, radius=r, bounds=bounds)


def feasible_wedge_contains(x, K, p_max=0.5):
    """True iff the policy output for state x respects the step-length limit."""
    v = np.asarray([x.x, x.xd] if hasattr(x, "xd") else x, dtype=float)
    return bool(abs(float(np.asarray(K).ravel() @ v)) <= p_max)


@dataclass
class McReport:
    n_samples: int
    bound_violations: int
    ball_violations: int
    max_dv_outside: float
    max_bound_gap: float          # max (Delta V - quadratic bound), <= 0 when sound
    worst_sample: np.ndarray = None
    shell: tuple = None


_CHUNK = 4096


def _chunk_uniforms(seed, chunk_idx, count):
    rng = np.random.default_rng([int(seed), int(chunk_idx)])
    return rng.random((count, 8))


def monte_carlo_two_step(lip: LipParams, params: PlannerParams,
                         bounds: UncertaintyBounds, n_samples, seed,
                         shell=None, axis=0):
    """Sample the two-step error dynamics and check the quadratic bound.

    States are drawn on the shell ||x|| in (r, 3r] (or (0, 1] when r = 0),
    estimation errors uniformly in the delta_m disc, landing errors uniformly
    in [-eta_m, eta_m]. Sampling is chunked with per-chunk seeds derived from
    (seed, chunk index), so the merged report does not depend on how chunks
    are distributed over workers.
    """
    n_samples = int(n_samples)
    rep = analyze(lip, params, bounds, axis)
    a, b, c, r = rep.a, rep.b, rep.c, rep.radius
    A, B, K, P = rep.A, rep.B.ravel(), rep.K.ravel(), rep.P
    if shell is None:
        shell = (r, 3.0 * r) if r > 0 else (0.0, 1.0)
    r_lo, r_hi = shell
    slack = 1e-12 * max(1.0, abs(c) + abs(b) + 1.0)

    bound_viol = 0
    ball_viol = 0
    max_dv_outside = -np.inf
    max_gap = -np.inf
    worst = None

    n_chunks = (n_samples + _CHUNK - 1) // _CHUNK
    for ci in range(n_chunks):
        cnt = min(_CHUNK, n_samples - ci * _CHUNK)
        u = _chunk_uniforms(seed, ci, cnt)
        ang = 2.0 * np.pi * u[:, 0]
        rad = r_lo + (r_hi - r_lo) * (1.0 - u[:, 1])   # (r_lo, r_hi]
        x = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        d_ang = 2.0 * np.pi * u[:, 2:4]
        d_rad = bounds.delta_m * np.sqrt(u[:, 4:6])
        delta = np.stack([d_rad * np.cos(d_ang), d_rad * np.sin(d_ang)], axis=-1)
        eta = bounds.eta_m * (2.0 * u[:, 6:8] - 1.0)

        p1 = (x + delta[:, 0, :]) @ K
        x1 = x @ A.T + np.outer(p1 + eta[:, 0], B)
        p2 = (x1 + delta[:, 1, :]) @ K
        x2 = x1 @ A.T + np.outer(p2 + eta[:, 1], B)
        dv = np.einsum("ij,jk,ik->i", x2, P, x2) - np.einsum("ij,jk,ik->i", x, P, x)
        norms = np.linalg.norm(x, axis=1)
        qbound = -a * norms ** 2 + 2.0 * b * norms + c

        gap = dv - qbound
        over = gap > slack
        bound_viol += int(np.count_nonzero(over))
        outside = norms > r
        bad_ball = outside & (dv > slack)
        ball_viol += int(np.count_nonzero(bad_ball))
        if np.any(outside):
            m = float(np.max(dv[outside]))
            if m > max_dv_outside:
                max_dv_outside = m
        gm = float(np.max(gap))
        if gm > max_gap:
            max_gap = gm
            worst = x[int(np.argmax(gap))].copy()

    return McReport(n_samples=n_samples, bound_violations=bound_viol,
                    ball_violations=ball_viol,
                    max_dv_outside=float(max_dv_outside),
                    max_bound_gap=float(max_gap), worst_sample=worst,
                    shell=(float(r_lo), float(r_hi)))
