"""End-to-end verification helpers.

Two independent checks of a built trajectory live here: re-propagation
of a solved control history through the full nonlinear two-body
dynamics, and the randomized closed-form-vs-oracle validation sweep.

Replay semantics: the control history carries per-segment steering
angles, not inertial vectors, so each segment's thrust frame is
re-anchored on the re-propagated state at the segment boundary (radial,
along-track, cross-track of the current position and velocity) and then
rotates at that segment's circular rate. Within a segment the thrust
direction is a pure function of time, matching the assumptions under
which the segment's parameters were solved; re-anchoring at boundaries
keeps the prescribed steering meaningful even as small model errors
accumulate over many revolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import RESONANCE_REL_BAND, in_plane_arrays, out_of_plane_arrays
from .builder import TrajectorySolution
from .hill import ControlLaw
from .numint import IntegrationSettings, integrate_cw_batch, integrate_two_body
from .orbits import InertialState


@dataclass(frozen=True)
class ControlStep:
    """One entry of a replayable control schedule."""
    dt: float
    law: ControlLaw


def schedule_from_solution(solution: TrajectorySolution) -> list[ControlStep]:
    return [ControlStep(rec.dt, rec.law) for rec in solution.segments]


def replay_schedule(start: InertialState, mu: float, schedule: list[ControlStep],
                    settings: IntegrationSettings | None = None) -> InertialState:
    """Re-propagate a control schedule through two-body dynamics.

    Args:
        start: Inertial state at the first segment's start.
        mu: Gravitational parameter (km^3/s^2).
        schedule: Per-segment durations and thrust laws.
        settings: RK4 step policy per segment; the default gives 100
            steps per revolution with a floor of 20 steps per segment.

    Returns:
        Final inertial state with epoch equal to the schedule duration.
    """
    pos = np.asarray(start.pos, dtype=float).copy()
    vel = np.asarray(start.vel, dtype=float).copy()
    t = 0.0
    for step in schedule:
        if step.dt <= 0.0:
            continue
        law = step.law
        r = float(np.linalg.norm(pos))
        rhat0 = pos / r
        h = np.cross(pos, vel)
        nhat = h / np.linalg.norm(h)
        that0 = np.cross(nhat, rhat0)
        n_seg = math.sqrt(mu / r**3)
        cb, sb = math.cos(law.beta), math.sin(law.beta)

        def accel(tau, law=law, rhat0=rhat0, that0=that0, nhat=nhat,
                  n_seg=n_seg, cb=cb, sb=sb):
            alpha = law.alpha0 + law.k * tau
            c, s = math.cos(n_seg * tau), math.sin(n_seg * tau)
            rhat = c * rhat0 + s * that0
            that = -s * rhat0 + c * that0
            return law.a * (cb * math.cos(alpha) * rhat
                            + cb * math.sin(alpha) * that + sb * nhat)

        if settings is None:
            steps = max(20, IntegrationSettings().step_count(step.dt, n_seg))
            seg_settings = IntegrationSettings(steps=steps)
        else:
            seg_settings = settings
        pos, vel = integrate_two_body(pos, vel, accel, mu, step.dt, seg_settings)
        t += step.dt
    return InertialState(pos, vel, epoch=t)


def replay_solution(solution: TrajectorySolution,
                    settings: IntegrationSettings | None = None) -> InertialState:
    """Re-propagate a solved trajectory's control history (the end-state check)."""
    return replay_schedule(solution.scenario.start_state(), solution.scenario.mu,
                           schedule_from_solution(solution), settings)


def propagator_validation(samples: int = 1000, oracle_steps: int = 100000,
                          seed: int = 20240720) -> dict:
    """Randomized sweep of the closed form against the RK4 oracle.

    Draws segments with n*t <= 2*pi, steering rates outside the
    resonance band, and states/thrust scaled to realistic fractions of
    the reference radius, then compares the closed-form propagation with
    a high-resolution RK4 integration in the scaled norm (positions over
    R, velocities over n*R).

    Returns:
        dict with keys samples, oracle_steps, max_scaled_error,
        threshold, passed.
    """
    rng = np.random.default_rng(seed)
    B = samples
    n = 10.0 ** rng.uniform(-7.0, -3.0, B)
    t = rng.uniform(0.05, 2.0 * math.pi, B) / n
    k = n * rng.uniform(0.05, 3.0, B) * rng.choice([-1.0, 1.0], B)
    guard = 10.0 * RESONANCE_REL_BAND
    bad = (np.abs(k) < guard * n) | (np.abs(np.abs(k) - n) < guard * n)
    k[bad] = 0.5 * n[bad]
    R = 10.0 ** rng.uniform(3.5, 8.2, B)
    x0, y0, z0 = (rng.uniform(-1e-3, 1e-3, B) * R for _ in range(3))
    vx0, vy0, vz0 = (rng.uniform(-1e-3, 1e-3, B) * R * n for _ in range(3))
    a = rng.uniform(0.0, 1e-4, B) * R * n * n
    alpha0 = rng.uniform(-math.pi, math.pi, B)
    beta = rng.uniform(-math.pi / 2, math.pi / 2, B)

    xa, ya, vxa, vya = in_plane_arrays(x0, y0, vx0, vy0, a, alpha0, k, beta, n, t)
    za, vza = out_of_plane_arrays(z0, vz0, a, beta, n, t)

    states = np.stack([x0, y0, z0, vx0, vy0, vz0], axis=1)
    num = integrate_cw_batch(states, a, alpha0, k, beta, n, t, oracle_steps)

    err = np.max(np.stack([
        np.abs(xa - num[:, 0]) / R,
        np.abs(ya - num[:, 1]) / R,
        np.abs(za - num[:, 2]) / R,
        np.abs(vxa - num[:, 3]) / (n * R),
        np.abs(vya - num[:, 4]) / (n * R),
        np.abs(vza - num[:, 5]) / (n * R),
    ]))
    threshold = 1e-8
    return {
        "samples": int(B),
        "oracle_steps": int(oracle_steps),
        "max_scaled_error": float(err),
        "threshold": threshold,
        "passed": bool(err <= threshold),
    }
