"""Core state/control types and thrust-forced Clohessy-Wiltshire dynamics.

The relative-motion frame is the rotating Hill frame of a circular
reference orbit: x radial, y along-track, z cross-track. The forced
equations of motion are

    x'' - 3 n^2 x - 2 n y' = ax
    y'' + 2 n x'           = ay
    z'' + n^2 z            = az

with n the mean motion of the reference orbit. Thrust acceleration has
constant magnitude a and direction set by an in-plane angle that varies
linearly in time, alpha(t) = alpha0 + k*t, and a constant out-of-plane
angle beta:

    ax = a cos(beta) cos(alpha(t))
    ay = a cos(beta) sin(alpha(t))
    az = a sin(beta)

Units are km, km/s, km/s^2, rad, s throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.fmod(theta + math.pi, _TWO_PI)
    if w <= 0.0:
        w += _TWO_PI
    return w - math.pi


@dataclass(frozen=True)
class HillState:
    """Relative state in the rotating Hill frame (km, km/s)."""
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vz: float

    def __post_init__(self):
        for name in ("x", "y", "z", "vx", "vy", "vz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"HillState.{name} must be finite, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy, self.vz])

    @classmethod
    def from_array(cls, arr) -> "HillState":
        x, y, z, vx, vy, vz = (float(v) for v in arr)
        return cls(x, y, z, vx, vy, vz)


ZERO_STATE = HillState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ControlLaw:
    """Constant-magnitude thrust acceleration with linear in-plane steering.

    Attributes:
        a: Thrust-acceleration magnitude (km/s^2, >= 0).
        alpha0: In-plane steering angle at segment start (rad), stored
            normalized to (-pi, pi].
        k: In-plane steering rate (rad/s); alpha(t) = alpha0 + k*t.
        beta: Out-of-plane steering angle (rad), constant over the
            segment, restricted to [-pi/2, pi/2].
    """
    a: float
    alpha0: float
    k: float
    beta: float

    def __post_init__(self):
        if self.a < 0.0:
            raise ValueError(f"thrust acceleration must be >= 0, got {self.a}")
        if not -math.pi / 2 <= self.beta <= math.pi / 2:
            raise ValueError(f"beta must lie in [-pi/2, pi/2], got {self.beta}")
        object.__setattr__(self, "alpha0", wrap_angle(self.alpha0))

    def alpha(self, t: float) -> float:
        """In-plane steering angle at time t into the segment (not wrapped)."""
        return self.alpha0 + self.k * t

    def shifted(self, t: float) -> "ControlLaw":
        """Equivalent law restarted at time t into this segment."""
        return ControlLaw(self.a, self.alpha(t), self.k, self.beta)


COAST = ControlLaw(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ReferenceOrbit:
    """Circular reference orbit defining a Hill frame.

    The orientation triad fixes the orbit plane and the reference point's
    angular position at the segment epoch: ``radial`` points from the
    central body to the reference point, ``along`` is the velocity
    direction, ``normal = radial x along`` is the orbit normal. The mean
    motion is always recomputed from mu and radius.
    """
    mu: float
    radius: float
    radial: tuple[float, float, float]
    along: tuple[float, float, float]
    normal: tuple[float, float, float]

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        triad = np.array([self.radial, self.along, self.normal])
        if not np.allclose(triad @ triad.T, np.eye(3), rtol=0.0, atol=1e-12):
            raise ValueError("orientation triad is not orthonormal to 1e-12")
        if np.dot(np.cross(triad[0], triad[1]), triad[2]) < 0.0:
            raise ValueError("orientation triad is not right-handed")

    @property
    def n(self) -> float:
        """Mean motion sqrt(mu / radius^3) (rad/s)."""
        return math.sqrt(self.mu / self.radius**3)

    @property
    def period(self) -> float:
        return _TWO_PI / self.n

    def triad(self) -> np.ndarray:
        """Rows are (radial, along, normal) at the epoch."""
        return np.array([self.radial, self.along, self.normal])


def thrust_components(law: ControlLaw, t: float) -> tuple[float, float, float]:
    """Hill-frame thrust acceleration components at time t into a segment.

    The Euclidean norm of the returned triple equals law.a exactly up to
    rounding; the parameterization covers the full sphere.
    """
    alpha = law.alpha(t)
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(law.beta), math.sin(law.beta)
    return (law.a * cb * ca, law.a * cb * sa, law.a * sb)


def cw_derivative(state: HillState, accel: tuple[float, float, float], n: float) -> HillState:
    """Time derivative of a Hill state under the given acceleration.

    Args:
        state: Relative state.
        accel: (ax, ay, az) Hill-frame acceleration (km/s^2).
        n: Mean motion of the reference orbit (rad/s, > 0).

    Returns:
        HillState holding (vx, vy, vz, ax_tot, ay_tot, az_tot).
    """
    if n <= 0.0:
        raise ValueError(f"mean motion must be positive, got {n}")
    ax, ay, az = accel
    return HillState(
        state.vx,
        state.vy,
        state.vz,
        3.0 * n * n * state.x + 2.0 * n * state.vy + ax,
        -2.0 * n * state.vx + ay,
        -n * n * state.z + az,
    )
