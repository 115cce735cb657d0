"""Linear-inverted-pendulum step dynamics and foot-placement policies.

The horizontal CoM of a passive-ankle biped at constant height h obeys
xdd = (g/h)(x - p) about the stance point p. Over one step of duration T the
state x = (x, xd) maps linearly:

    x+ = A x + B p
    A = [[cosh(wT), sinh(wT)/w], [w sinh(wT), cosh(wT)]],  w = sqrt(g/h)
    B = [1 - cosh(wT), -w sinh(wT)]

The velocity-reversal policy places the stance point so the CoM velocity
crosses zero a fixed time t' after the step, plus a steering bias kappa
toward the origin:

    p = (1 + kappa) x + coth(w t') / w * xd = K x

Axes are decoupled: x and y run the same machinery with their own (t',
kappa). Everything here is origin-relative; steering moves the reference
origin, not the planner.

Comparison policies (hopper, capture point, velocity-integral stepping) all
reduce to the same p = k_p x + k_d xd form; ``unified_gains`` returns the
(k_p, k_d) pair for each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81

# Repo-default LIP parameters: CoM height is not a published robot constant
# (assumed 0.8 m, close to the shipped model's standing CoM), and the step
# time is the swing duration of the gait table.
DEFAULT_COM_HEIGHT = 0.8
DEFAULT_STEP_TIME = 0.33


@dataclass
class LipParams:
    """Constant-height pendulum constants; omega is derived from h."""

    h: float = DEFAULT_COM_HEIGHT
    T: float = DEFAULT_STEP_TIME
    g: float = GRAVITY

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("CoM height must be positive")
        if self.T < 0:
            raise ValueError("step time must be non-negative")
        self.omega = float(np.sqrt(self.g / self.h))
        assert abs(self.omega - np.sqrt(self.g / self.h)) <= 1e-12

    def step_matrices(self, T=None):
        """A, B of the discrete step map for duration T (default self.T)."""
        T = self.T if T is None else T
        wT = self.omega * T
        ch, sh = np.cosh(wT), np.sinh(wT)
        A = np.array([[ch, sh / self.omega], [self.omega * sh, ch]])
        B = np.array([1.0 - ch, -self.omega * sh])
        return A, B


@dataclass
class LipState:
    """Per-axis CoM state relative to the reference origin."""

    x: float
    xd: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.xd)):
            raise ValueError("LIP state must be finite")

    def as_array(self):
        return np.array([self.x, self.xd])


@dataclass
class PlannerParams:
    """Velocity-reversal policy parameters and kinematic step limits."""

    t_prime: tuple = (0.2, 0.2)
    kappa: tuple = (0.16, 0.16)
    max_step: float = 0.5
    min_lateral: float = 0.10

    def __post_init__(self):
        if any(t <= 0 for t in self.t_prime):
            raise ValueError("t' must be positive (coth singularity at 0)")
        if any(k < 0 for k in self.kappa):
            raise ValueError("kappa must be non-negative")
        if self.max_step <= 0 or self.min_lateral < 0:
            raise ValueError("bad kinematic limits")

    def check_against(self, lip: LipParams):
        if any(t >= lip.T for t in self.t_prime):
            raise ValueError("t' must be smaller than the step time T")


def lip_step_map(x, p, params: LipParams, T=None):
    """Propagate the per-axis state (x, xd) for one step over stance p."""
    A, B = params.step_matrices(T)
    v = np.asarray([x.x, x.xd] if isinstance(x, LipState) else x, dtype=float)
    out = A @ v + B * p
    return LipState(out[0], out[1]) if isinstance(x, LipState) else out


def tvr_gains(params: PlannerParams, lip: LipParams, axis=0):
    """K = [(1 + kappa), coth(w t') / w] for one axis."""
    tp = params.t_prime[axis]
    if tp <= 0:
        raise ValueError("t' must be positive")
    w = lip.omega
    return np.array([1.0 + params.kappa[axis], (1.0 / w) / np.tanh(w * tp)])


def tvr_footstep(x, params: PlannerParams, lip: LipParams, axis=0):
    """Stance location reversing the CoM velocity t' after the step."""
    K = tvr_gains(params, lip, axis)
    v = np.asarray([x.x, x.xd] if isinstance(x, LipState) else x, dtype=float)
    return float(K @ v)


def closed_loop(lip: LipParams, params: PlannerParams, axis=0):
    """Gain row K, closed-loop matrix A + B K, eigenvalue magnitudes sorted
    descending."""
    A, B = lip.step_matrices()
    K = tvr_gains(params, lip, axis)
    Acl = A + np.outer(B, K)
    mags = np.sort(np.abs(np.linalg.eigvals(Acl)))[::-1]
    return K, Acl, mags


def spectral_radius(lip: LipParams, t_prime, kappa):
    p = PlannerParams(t_prime=(t_prime, t_prime), kappa=(kappa, kappa))
    _, _, mags = closed_loop(lip, p)
    return float(mags[0])


def tune_kappa(target_radius, t_prime, lip: LipParams, bracket=(0.0, 2.0),
               sweep=2001, tol=1e-9):
    """Find the smallest kappa in the bracket whose closed-loop spectral
    radius equals target_radius.

    radius(kappa) is continuous but not monotone (radius 1 at kappa = 0, a
    minimum mid-bracket), so the bracket is swept densely first and bisection
    runs inside the first sign-change interval.
    """
    if not 0.0 < target_radius < 1.0:
        raise ValueError("target spectral radius must be in (0, 1)")
    lo, hi = bracket
    ks = np.linspace(lo, hi, sweep)
    vals = np.array([spectral_radius(lip, t_prime, k) - target_radius for k in ks])
    if abs(vals[0]) <= tol:
        return float(ks[0])
    idx = None
    for i in range(len(ks) - 1):
        if vals[i] == 0.0:
            return float(ks[i])
        if vals[i] * vals[i + 1] < 0:
            idx = i
            break
    if idx is None:
        raise ValueError(
            f"target radius {target_radius} unreachable for kappa in {bracket}")
    a, b = ks[idx], ks[idx + 1]
    fa = vals[idx]
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = spectral_radius(lip, t_prime, mid) - target_radius
        if abs(fm) <= tol or (b - a) < 1e-14:
            return float(mid)
        if fa * fm < 0:
            b = mid
        else:
            a, fa = mid, fm
    return float(0.5 * (a + b))


# -- comparison policies --------------------------------------------------------


def raibert_footstep(x, xd, K, K_p, K_v, T_st):
    """Hopper-style placement p = K K_p x + (K (K_v + 1) + T_st / 2) xd."""
    return K * K_p * x + (K * (K_v + 1.0) + 0.5 * T_st) * xd


def capture_point(x, xd, h, g=GRAVITY):
    """Point where the LIP CoM comes to rest: x + sqrt(h/g) xd."""
    if h <= 0:
        raise ValueError("CoM height must be positive")
    return x + np.sqrt(h / g) * xd


def atrias_footstep(xd, xd_prev, x, K_P, K_D, K_I):
    """Velocity + velocity-difference + position stepping rule."""
    return K_P * xd + K_D * (xd - xd_prev) + K_I * x


def unified_gains(policy, **kw):
    """(k_p, k_d) of the common form p = k_p x + k_d xd for each policy.

    The velocity-difference term of 'atrias' vanishes in steady state
    (xd_prev = xd), which is the reduction used here.
    """
    if policy == "tvr":
        K = tvr_gains(kw["params"], kw["lip"], kw.get("axis", 0))
        return float(K[0]), float(K[1])
    if policy == "capture_point":
        return 1.0, float(np.sqrt(kw["lip"].h / kw["lip"].g))
    if policy == "raibert":
        return (kw["K"] * kw["K_p"],
                kw["K"] * (kw["K_v"] + 1.0) + 0.5 * kw["T_st"])
    if policy == "atrias":
        return kw["K_I"], kw["K_P"]
    raise ValueError(f"unknown policy '{policy}'")


def clamp_footstep(p_raw, stance_foot, stance_side, max_step=0.5, min_lateral=0.10):
    """Kinematic clamp: no axis farther than max_step from the stance foot,
    and at least min_lateral away on the swing side (self-collision)."""
    if stance_side not in ("left", "right"):
        raise ValueError("stance_side must be 'left' or 'right'")
    p = np.asarray(p_raw, dtype=float).copy()
    s = np.asarray(stance_foot, dtype=float)
    p = np.clip(p, s - max_step, s + max_step)
    if stance_side == "left":
        # swing foot is the right one: stay at least min_lateral to the right
        p[1] = min(p[1], s[1] - min_lateral)
    else:
        p[1] = max(p[1], s[1] + min_lateral)
    return p
