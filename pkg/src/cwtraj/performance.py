"""Propellant, delta-V, and revolution-count accounting.

The propulsion model holds thrust acceleration constant: with T = m*a
and mdot = -T / (isp * g0), the mass history is the closed form
m(t) = m0 * exp(-a*t / (isp * g0)) and delta-V accrues as a*t. The two
are rocket-equation consistent by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSampling

G0_KM_S2 = 9.80665e-3  # standard gravity, km/s^2


@dataclass(frozen=True)
class SpacecraftParams:
    """Spacecraft mass and propulsion parameters.

    Exactly one of thrust_n (N) or accel0_km_s2 (km/s^2) must be given;
    the other is derived via accel0 = thrust / m0.
    """
    m0_kg: float
    isp_s: float
    thrust_n: float | None = None
    accel0_km_s2: float | None = None

    def __post_init__(self):
        if self.m0_kg <= 0.0:
            raise ValueError(f"m0_kg must be positive, got {self.m0_kg}")
        if self.isp_s <= 0.0:
            raise ValueError(f"isp_s must be positive, got {self.isp_s}")
        if (self.thrust_n is None) == (self.accel0_km_s2 is None):
            raise ValueError("give exactly one of thrust_n or accel0_km_s2")
        if self.thrust_n is None:
            # N = kg m / s^2; acceleration in km/s^2 needs the 1e3 factor
            object.__setattr__(self, "thrust_n", self.accel0_km_s2 * self.m0_kg * 1e3)
        else:
            object.__setattr__(self, "accel0_km_s2", self.thrust_n / self.m0_kg / 1e3)
        if self.accel0_km_s2 < 0.0:
            raise ValueError("thrust must be nonnegative")


def mass_at(params: SpacecraftParams, burn_time: float) -> float:
    """Spacecraft mass (kg) after burning continuously for burn_time seconds.

    m(t) = m0 * exp(-a t / (isp g0)); monotone nonincreasing and positive
    for all finite t.
    """
    if burn_time < 0.0:
        raise ValueError(f"burn_time must be >= 0, got {burn_time}")
    return params.m0_kg * math.exp(-params.accel0_km_s2 * burn_time / (params.isp_s * G0_KM_S2))


def delta_v(accel: float, burn_time: float) -> float:
    """Delta-V (km/s) of a constant-acceleration always-on burn."""
    if burn_time < 0.0:
        raise ValueError(f"burn_time must be >= 0, got {burn_time}")
    return accel * burn_time


def count_revolutions(trajectory) -> float:
    """Net revolutions swept by a sequence of inertial positions.

    Positions are projected onto the average orbit plane (normal along
    the mean of successive cross products) and the polar angle is
    unwrapped; the count is the accumulated angle over 2*pi.

    Args:
        trajectory: Either an (N, 3) array of inertial positions
            (N >= 2) or any object with a ``positions`` attribute of
            that shape (e.g. a TrajectorySolution).

    Raises:
        InsufficientSampling: If any consecutive pair is more than a
            quarter revolution apart (the unwrap would be ambiguous).
    """
    positions = getattr(trajectory, "positions", trajectory)
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != 3 or positions.shape[0] < 2:
        raise ValueError("positions must be an (N >= 2, 3) array")
    crosses = np.cross(positions[:-1], positions[1:])
    normal = crosses.sum(axis=0)
    nn = np.linalg.norm(normal)
    if nn == 0.0:
        raise InsufficientSampling("samples do not define an orbit plane")
    normal = normal / nn
    e1 = positions[0] - np.dot(positions[0], normal) * normal
    e1n = np.linalg.norm(e1)
    if e1n == 0.0:
        raise InsufficientSampling("first sample is normal to the orbit plane")
    e1 = e1 / e1n
    e2 = np.cross(normal, e1)
    angles = np.arctan2(positions @ e2, positions @ e1)
    steps = np.diff(angles)
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if np.any(np.abs(steps) > np.pi / 2.0):
        raise InsufficientSampling(
            "consecutive samples are more than a quarter revolution apart")
    return float(steps.sum() / (2.0 * np.pi))
