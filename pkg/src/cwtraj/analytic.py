"""Closed-form propagation of Hill states under constant-magnitude thrust.

The out-of-plane channel is a harmonic oscillator with constant forcing
a*sin(beta) and has the textbook solution. The in-plane channel is driven
at the steering frequency k:

    x'' - 3 n^2 x - 2 n y' = A cos(alpha0 + k t),   A = a cos(beta)
    y'' + 2 n x'           = A sin(alpha0 + k t)

Because k differs from both natural frequencies of the system (0 and n),
there is a unique particular solution oscillating at k:

    x_p(t) = P cos(alpha0 + k t)        P = A (k - 2n) / (k (n^2 - k^2))
    y_p(t) = S sin(alpha0 + k t)        S = A (k^2 - 2nk + 3n^2) / (k^2 (n^2 - k^2))

and the full solution is the homogeneous Clohessy-Wiltshire transition
applied to (state - particular(0)) plus particular(t). The closed form is
exact; it degenerates only when k is near 0 or +/-n, where callers must
fall back to numeric integration (see ResonantSteeringRate).

All functions broadcast over numpy arrays; the public wrappers accept and
return plain floats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResonantSteeringRate
from .hill import ControlLaw, HillState

# Relative half-width of the guard band around the singular rates k = 0, +/-n.
RESONANCE_REL_BAND = 1e-6


def is_resonant(a: float, k: float, n: float) -> bool:
    """True when the in-plane closed form must not be evaluated.

    Coasting segments (a == 0) never resonate: the particular solution
    vanishes and only the homogeneous transition remains.
    """
    if a == 0.0:
        return False
    eps = RESONANCE_REL_BAND * n
    return abs(k) < eps or abs(k - n) < eps or abs(k + n) < eps


def cw_stm(n: float, t: float) -> np.ndarray:
    """Homogeneous Clohessy-Wiltshire state-transition matrix.

    State ordering is (x, y, z, vx, vy, vz). Phi(n, 0) is the identity and
    det(Phi) = 1 for all t (the flow is volume preserving).

    Args:
        n: Mean motion (rad/s, > 0).
        t: Propagation time (s).
    """
    if n <= 0.0:
        raise ValueError(f"mean motion must be positive, got {n}")
    nt = n * t
    c, s = np.cos(nt), np.sin(nt)
    return np.array([
        [4 - 3 * c, 0.0, 0.0, s / n, 2 * (1 - c) / n, 0.0],
        [6 * (s - nt), 1.0, 0.0, 2 * (c - 1) / n, (4 * s - 3 * nt) / n, 0.0],
        [0.0, 0.0, c, 0.0, 0.0, s / n],
        [3 * n * s, 0.0, 0.0, c, 2 * s, 0.0],
        [6 * n * (c - 1), 0.0, 0.0, -2 * s, 4 * c - 3, 0.0],
        [0.0, 0.0, -n * s, 0.0, 0.0, c],
    ])


def out_of_plane_arrays(z0, vz0, a, beta, n, t):
    """Vectorized out-of-plane solution; returns (z, vz)."""
    c, s = np.cos(n * t), np.sin(n * t)
    force = a * np.sin(beta)
    z = z0 * c + vz0 * s / n + force * (1.0 - c) / (n * n)
    vz = vz0 * c - n * z0 * s + force * s / n
    return z, vz


def in_plane_arrays(x0, y0, vx0, vy0, a, alpha0, k, beta, n, t):
    """Vectorized in-plane solution; returns (x, y, vx, vy).

    Elements inside the resonance band produce non-finite garbage that the
    caller is expected to mask and replace (the batch chain evaluator
    substitutes numeric integration there). Coast elements (a == 0) are
    exact regardless of k.
    """
    nt = n * t
    c, s = np.cos(nt), np.sin(nt)

    amp = a * np.cos(beta)
    active = np.asarray(amp != 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        den1 = k * (n * n - k * k)
        den2 = k * den1
        P = np.where(active, amp * (k - 2.0 * n) / np.where(active, den1, 1.0), 0.0)
        S = np.where(active, amp * (k * k - 2.0 * n * k + 3.0 * n * n)
                     / np.where(active, den2, 1.0), 0.0)

    th0 = alpha0
    tht = alpha0 + k * t
    c0, s0 = np.cos(th0), np.sin(th0)
    ct, st = np.cos(tht), np.sin(tht)

    # deviation from the particular solution at t = 0
    dx = x0 - P * c0
    dy = y0 - S * s0
    dvx = vx0 + P * k * s0
    dvy = vy0 - S * k * c0

    x = (4 - 3 * c) * dx + (s / n) * dvx + (2 * (1 - c) / n) * dvy + P * ct
    y = 6 * (s - nt) * dx + dy + (2 * (c - 1) / n) * dvx + ((4 * s - 3 * nt) / n) * dvy + S * st
    vx = 3 * n * s * dx + c * dvx + 2 * s * dvy - P * k * st
    vy = 6 * n * (c - 1) * dx - 2 * s * dvx + (4 * c - 3) * dvy + S * k * ct
    return x, y, vx, vy


def propagate_out_of_plane(z0: float, vz0: float, a: float, beta: float,
                           n: float, t: float) -> tuple[float, float]:
    """Closed-form cross-track state after time t.

    Args:
        z0, vz0: Initial cross-track position (km) and rate (km/s).
        a: Thrust-acceleration magnitude (km/s^2).
        beta: Out-of-plane steering angle (rad).
        n: Mean motion (rad/s, > 0).
        t: Propagation time (s, >= 0).

    Returns:
        (z, vz) at time t.
    """
    if n <= 0.0:
        raise ValueError(f"mean motion must be positive, got {n}")
    if t < 0.0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    z, vz = out_of_plane_arrays(z0, vz0, a, beta, n, t)
    return float(z), float(vz)


def propagate_in_plane(x0: float, vx0: float, y0: float, vy0: float,
                       law: ControlLaw, n: float, t: float) -> tuple[float, float, float, float]:
    """Closed-form in-plane state after time t.

    Args:
        x0, vx0: Initial radial position (km) and rate (km/s).
        y0, vy0: Initial along-track position (km) and rate (km/s).
        law: Thrust law over the segment.
        n: Mean motion (rad/s, > 0).
        t: Propagation time (s, >= 0).

    Returns:
        (x, vx, y, vy) at time t.

    Raises:
        ResonantSteeringRate: If law.a > 0 and law.k falls inside the
            guard band around 0 or +/-n; callers should integrate the
            segment numerically instead.
    """
    if n <= 0.0:
        raise ValueError(f"mean motion must be positive, got {n}")
    if t < 0.0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    if is_resonant(law.a, law.k, n):
        raise ResonantSteeringRate(
            f"steering rate k={law.k} within {RESONANCE_REL_BAND:g}*n of a "
            f"singular rate for n={n}; use numeric propagation")
    x, y, vx, vy = in_plane_arrays(x0, y0, vx0, vy0, law.a, law.alpha0,
                                   law.k, law.beta, n, t)
    return float(x), float(vx), float(y), float(vy)


def propagate_segment(state: HillState, law: ControlLaw, n: float, dt: float) -> HillState:
    """Propagate a full Hill state over one thrust segment in closed form.

    With law.a = 0 this reduces to the homogeneous transition
    cw_stm(n, dt) applied to the state. dt = 0 returns the input
    unchanged.

    Raises:
        ResonantSteeringRate: Propagated from the in-plane solution.
    """
    if dt == 0.0:
        return state
    x, vx, y, vy = propagate_in_plane(state.x, state.vx, state.y, state.vy, law, n, dt)
    z, vz = propagate_out_of_plane(state.z, state.vz, law.a, law.beta, n, dt)
    return HillState(x, y, z, vx, vy, vz)


@dataclass(frozen=True)
class SegmentPropagation:
    """Record of one closed-form segment propagation."""
    initial: HillState
    law: ControlLaw
    n: float
    dt: float
    final: HillState

    @classmethod
    def run(cls, initial: HillState, law: ControlLaw, n: float, dt: float) -> "SegmentPropagation":
        if dt < 0.0:
            raise ValueError(f"segment duration must be >= 0, got {dt}")
        return cls(initial, law, n, dt, propagate_segment(initial, law, n, dt))
