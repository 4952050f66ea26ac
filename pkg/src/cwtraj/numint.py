"""Fixed-step Runge-Kutta integrators used as the brute-force truth source.

Two integrators live here: classic RK4 on the thrust-forced
Clohessy-Wiltshire equations (the oracle the closed form is validated
against, and the fallback inside the resonance guard band), and RK4 on
the full nonlinear two-body problem with an arbitrary time-indexed
acceleration (end-to-end verification of built trajectories).

Fixed steps rather than adaptive control keep oracle values reproducible
bit-for-bit across runs and platforms. The default resolution is 100
steps per reference-orbit revolution.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import SingularRadius
from .hill import ControlLaw, HillState, cw_derivative, thrust_components

_STEPS_PER_REV = 100.0

# The default TBB threading layer is version-sensitive; workqueue is
# always available and the kernels are embarrassingly parallel anyway.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    from numba import njit, prange
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class IntegrationSettings:
    """Step-count policy for the fixed-step integrators.

    Exactly one of ``steps`` (total RK4 steps) or ``max_step`` (seconds)
    may be given; with neither, the per-revolution default applies.
    """
    steps: int | None = None
    max_step: float | None = None

    def __post_init__(self):
        if self.steps is not None and self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.max_step is not None and self.max_step <= 0.0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if self.steps is not None and self.max_step is not None:
            raise ValueError("give either steps or max_step, not both")

    def step_count(self, dt: float, n: float) -> int:
        """Number of RK4 steps for a span dt at mean motion n."""
        if dt <= 0.0:
            return 0
        if self.steps is not None:
            return self.steps
        if self.max_step is not None:
            return max(1, math.ceil(dt / self.max_step))
        return max(1, math.ceil(_STEPS_PER_REV * dt * n / (2.0 * math.pi)))


DEFAULT_SETTINGS = IntegrationSettings()


def _rk4_cw_python(y0, a, alpha0, k, beta, n, dt, steps):
    """Pure-numpy fallback for the batched CW kernel (broadcast over axis 0)."""
    y = y0.astype(float, copy=True)
    amp = a * np.cos(beta)
    force = a * np.sin(beta)
    h = dt / steps
    n2 = n * n

    def rhs(t_frac, s):
        th = alpha0 + k * (t_frac * h)
        ax = amp * np.cos(th)
        ay = amp * np.sin(th)
        d = np.empty_like(s)
        d[:, 0] = s[:, 3]
        d[:, 1] = s[:, 4]
        d[:, 2] = s[:, 5]
        d[:, 3] = 3.0 * n2 * s[:, 0] + 2.0 * n * s[:, 4] + ax
        d[:, 4] = -2.0 * n * s[:, 3] + ay
        d[:, 5] = -n2 * s[:, 2] + force
        return d

    hcol = h[:, None]
    for i in range(steps):
        k1 = rhs(float(i), y)
        k2 = rhs(i + 0.5, y + 0.5 * hcol * k1)
        k3 = rhs(i + 0.5, y + 0.5 * hcol * k2)
        k4 = rhs(i + 1.0, y + hcol * k3)
        y = y + hcol / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _rk4_cw_kernel(y0, a, alpha0, k, beta, n, dt, steps):  # pragma: no cover - jitted
        B = y0.shape[0]
        out = np.empty_like(y0)
        for b in prange(B):
            x, y, z = y0[b, 0], y0[b, 1], y0[b, 2]
            vx, vy, vz = y0[b, 3], y0[b, 4], y0[b, 5]
            amp = a[b] * math.cos(beta[b])
            force = a[b] * math.sin(beta[b])
            nb = n[b]
            n2 = nb * nb
            kb = k[b]
            al = alpha0[b]
            h = dt[b] / steps
            for i in range(steps):
                t0 = i * h
                th1 = al + kb * t0
                th2 = al + kb * (t0 + 0.5 * h)
                th3 = al + kb * (t0 + h)
                ax1, ay1 = amp * math.cos(th1), amp * math.sin(th1)
                ax2, ay2 = amp * math.cos(th2), amp * math.sin(th2)
                ax3, ay3 = amp * math.cos(th3), amp * math.sin(th3)

                k1x, k1y, k1z = vx, vy, vz
                k1vx = 3.0 * n2 * x + 2.0 * nb * vy + ax1
                k1vy = -2.0 * nb * vx + ay1
                k1vz = -n2 * z + force

                x2 = x + 0.5 * h * k1x
                z2 = z + 0.5 * h * k1z
                vx2 = vx + 0.5 * h * k1vx
                vy2 = vy + 0.5 * h * k1vy
                vz2 = vz + 0.5 * h * k1vz
                k2x, k2y, k2z = vx2, vy2, vz2
                k2vx = 3.0 * n2 * x2 + 2.0 * nb * vy2 + ax2
                k2vy = -2.0 * nb * vx2 + ay2
                k2vz = -n2 * z2 + force

                x3 = x + 0.5 * h * k2x
                z3 = z + 0.5 * h * k2z
                vx3 = vx + 0.5 * h * k2vx
                vy3 = vy + 0.5 * h * k2vy
                vz3 = vz + 0.5 * h * k2vz
                k3x, k3y, k3z = vx3, vy3, vz3
                k3vx = 3.0 * n2 * x3 + 2.0 * nb * vy3 + ax2
                k3vy = -2.0 * nb * vx3 + ay2
                k3vz = -n2 * z3 + force

                x4 = x + h * k3x
                z4 = z + h * k3z
                vx4 = vx + h * k3vx
                vy4 = vy + h * k3vy
                vz4 = vz + h * k3vz
                k4x, k4y, k4z = vx4, vy4, vz4
                k4vx = 3.0 * n2 * x4 + 2.0 * nb * vy4 + ax3
                k4vy = -2.0 * nb * vx4 + ay3
                k4vz = -n2 * z4 + force

                x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
                vx += h / 6.0 * (k1vx + 2.0 * k2vx + 2.0 * k3vx + k4vx)
                vy += h / 6.0 * (k1vy + 2.0 * k2vy + 2.0 * k3vy + k4vy)
                vz += h / 6.0 * (k1vz + 2.0 * k2vz + 2.0 * k3vz + k4vz)
            out[b, 0], out[b, 1], out[b, 2] = x, y, z
            out[b, 3], out[b, 4], out[b, 5] = vx, vy, vz
        return out


def integrate_cw_batch(states: np.ndarray, a, alpha0, k, beta, n, dt,
                       steps: int) -> np.ndarray:
    """RK4-propagate a batch of Hill states under per-element thrust laws.

    Args:
        states: (B, 6) array of (x, y, z, vx, vy, vz).
        a, alpha0, k, beta, n, dt: (B,) arrays of law/orbit parameters.
        steps: Common step count (each element uses h = dt_i / steps).

    Returns:
        (B, 6) array of propagated states.
    """
    states = np.ascontiguousarray(states, dtype=float)
    if steps <= 0:
        return states.copy()
    args = [np.ascontiguousarray(np.broadcast_to(v, states.shape[:1]), dtype=float)
            for v in (a, alpha0, k, beta, n, dt)]
    if _HAVE_NUMBA:
        return _rk4_cw_kernel(states, *args, steps)
    return _rk4_cw_python(states, *args, steps)


def integrate_numeric(state: HillState, law: ControlLaw, n: float, dt: float,
                      settings: IntegrationSettings = DEFAULT_SETTINGS) -> HillState:
    """RK4 integration of the thrust-forced Clohessy-Wiltshire equations.

    Deterministic for fixed inputs; exact dynamics are those of
    cw_derivative driven by thrust_components evaluated at the stage
    times.

    Args:
        state: Initial Hill state.
        law: Thrust law over the span.
        n: Mean motion (rad/s, > 0).
        dt: Span to integrate (s, >= 0).
        settings: Step policy; defaults to 100 steps per revolution.
    """
    if n <= 0.0:
        raise ValueError(f"mean motion must be positive, got {n}")
    if dt < 0.0:
        raise ValueError(f"integration span must be >= 0, got {dt}")
    steps = settings.step_count(dt, n)
    if steps == 0:
        return state
    out = integrate_cw_batch(state.as_array()[None, :],
                             law.a, law.alpha0, law.k, law.beta, n, dt, steps)
    return HillState.from_array(out[0])


def _two_body_rhs(t, pos, vel, mu, accel_fn):
    r = math.sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2])
    if r < 1.0:
        raise SingularRadius(f"radius fell to {r:.6f} km during integration")
    g = -mu / (r * r * r)
    acc = g * pos
    if accel_fn is not None:
        acc = acc + np.asarray(accel_fn(t), dtype=float)
    return vel, acc


def integrate_two_body(pos, vel, accel_fn, mu: float, dt: float,
                       settings: IntegrationSettings = DEFAULT_SETTINGS):
    """RK4 integration of r'' = -mu r / |r|^3 + accel_fn(t).

    Args:
        pos: Initial position (km triple).
        vel: Initial velocity (km/s triple).
        accel_fn: Callable t -> inertial acceleration triple (km/s^2), or
            None for ballistic motion.
        mu: Gravitational parameter (km^3/s^2).
        dt: Span to integrate (s, >= 0).
        settings: Step policy; the default derives the count from the
            circular-orbit mean motion at the initial radius.

    Returns:
        (pos, vel) numpy triples at time dt.

    Raises:
        SingularRadius: If the radius falls below 1 km at any RK4 stage.
    """
    pos = np.asarray(pos, dtype=float).copy()
    vel = np.asarray(vel, dtype=float).copy()
    r0 = float(np.linalg.norm(pos))
    if r0 <= 0.0:
        raise SingularRadius("initial radius is zero")
    if dt < 0.0:
        raise ValueError(f"integration span must be >= 0, got {dt}")
    n0 = math.sqrt(mu / r0**3)
    steps = settings.step_count(dt, n0)
    if steps == 0:
        return pos, vel
    h = dt / steps
    t = 0.0
    for _ in range(steps):
        k1p, k1v = _two_body_rhs(t, pos, vel, mu, accel_fn)
        k2p, k2v = _two_body_rhs(t + 0.5 * h, pos + 0.5 * h * k1p, vel + 0.5 * h * k1v, mu, accel_fn)
        k3p, k3v = _two_body_rhs(t + 0.5 * h, pos + 0.5 * h * k2p, vel + 0.5 * h * k2v, mu, accel_fn)
        k4p, k4v = _two_body_rhs(t + h, pos + h * k3p, vel + h * k3v, mu, accel_fn)
        pos = pos + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        vel = vel + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t += h
    return pos, vel
