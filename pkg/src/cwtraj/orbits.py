"""Conversions between Hill, inertial, and Keplerian representations.

Includes the Kepler's-equation solver and the re-centering operation
that starts every trajectory segment: given an arbitrary inertial state,
build the circular reference orbit through the current position (plane
normal along the orbital angular momentum) so the relative state has
exactly zero position and a purely in-plane relative velocity.

Internal units are km, km/s, rad, s. Functions with an ``_arrays``
suffix broadcast over a leading batch axis and are used by the chain
evaluator; the dataclass-based wrappers are the public API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateOrbit, NonConvergence
from .hill import HillState, ReferenceOrbit, wrap_angle

# Below this inclination the ascending node is ill-defined; the node
# direction falls back to the inertial x axis.
_EQUATORIAL_INC = 1e-8
# Below this eccentricity the periapsis direction is ill-defined; the
# argument of periapsis falls back to the node direction.
_CIRCULAR_ECC = 1e-11


@dataclass(frozen=True)
class KeplerianElements:
    """Classical elliptic orbital elements (km, rad).

    Angles are stored normalized to (-pi, pi]. Only the elliptic domain
    0 <= ecc < 1 is representable.
    """
    sma: float
    ecc: float
    inc: float
    raan: float
    argp: float
    nu: float

    def __post_init__(self):
        if self.sma <= 0.0:
            raise ValueError(f"sma must be positive, got {self.sma}")
        if not 0.0 <= self.ecc < 1.0:
            raise ValueError(f"ecc must lie in [0, 1), got {self.ecc}")
        for name in ("inc", "raan", "argp", "nu"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    @classmethod
    def with_lon_peri(cls, sma: float, ecc: float, inc: float, raan: float,
                      lon_peri: float, nu: float) -> "KeplerianElements":
        """Build elements from a longitude of perihelion (argp = lon_peri - raan)."""
        return cls(sma, ecc, inc, raan, lon_peri - raan, nu)

    def mean_motion(self, mu: float) -> float:
        return math.sqrt(mu / self.sma**3)

    def period(self, mu: float) -> float:
        return 2.0 * math.pi / self.mean_motion(mu)


@dataclass(frozen=True)
class InertialState:
    """Cartesian state in the inertial frame; epoch is seconds past scenario start."""
    pos: np.ndarray
    vel: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.pos, dtype=float)
        vel = np.asarray(self.vel, dtype=float)
        if pos.shape != (3,) or vel.shape != (3,):
            raise ValueError("pos and vel must be length-3 vectors")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("pos and vel must be finite")
        if np.linalg.norm(pos) <= 0.0:
            raise ValueError("position vector must be nonzero")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "vel", vel)

    def at_epoch(self, epoch: float) -> "InertialState":
        return replace(self, epoch=epoch)


def elements_to_state(el: KeplerianElements, mu: float) -> InertialState:
    """Convert elliptic elements to an inertial Cartesian state.

    The resulting specific orbital energy equals -mu / (2 sma) up to
    rounding.
    """
    p = el.sma * (1.0 - el.ecc**2)
    cnu, snu = math.cos(el.nu), math.sin(el.nu)
    r = p / (1.0 + el.ecc * cnu)
    pos_pf = np.array([r * cnu, r * snu, 0.0])
    vfac = math.sqrt(mu / p)
    vel_pf = np.array([-vfac * snu, vfac * (el.ecc + cnu), 0.0])
    rot = _perifocal_rotation(el.inc, el.raan, el.argp)
    return InertialState(rot @ pos_pf, rot @ vel_pf)


def _perifocal_rotation(inc: float, raan: float, argp: float) -> np.ndarray:
    co, so = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array([
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ])


def _signed_angle(u: np.ndarray, w: np.ndarray, normal: np.ndarray) -> float:
    return math.atan2(float(np.dot(np.cross(u, w), normal)), float(np.dot(u, w)))


def state_to_elements(s: InertialState, mu: float) -> KeplerianElements:
    """Convert an inertial state to classical elements.

    Near-degenerate geometries use fixed conventions: below an
    inclination of 1e-8 rad the node direction is the x axis, and below
    an eccentricity of 1e-11 the argument of periapsis is zero with the
    true anomaly measured from the node direction.

    Raises:
        DegenerateOrbit: For rectilinear states or ecc >= 1 - 1e-9.
    """
    r = np.asarray(s.pos, dtype=float)
    v = np.asarray(s.vel, dtype=float)
    rn = float(np.linalg.norm(r))
    vn = float(np.linalg.norm(v))
    h = np.cross(r, v)
    hn = float(np.linalg.norm(h))
    if hn <= 1e-9 * rn * vn or hn == 0.0:
        raise DegenerateOrbit("angular momentum is (near) zero: rectilinear state")

    evec = ((vn * vn - mu / rn) * r - float(np.dot(r, v)) * v) / mu
    ecc = float(np.linalg.norm(evec))
    if ecc >= 1.0 - 1e-9:
        raise DegenerateOrbit(f"eccentricity {ecc} is outside the elliptic domain")
    energy = 0.5 * vn * vn - mu / rn
    sma = -mu / (2.0 * energy)

    hhat = h / hn
    inc = math.acos(max(-1.0, min(1.0, h[2] / hn)))
    if inc < _EQUATORIAL_INC:
        node = np.array([1.0, 0.0, 0.0])
        raan = 0.0
    else:
        node = np.array([-h[1], h[0], 0.0])
        node = node / np.linalg.norm(node)
        raan = math.atan2(node[1], node[0])

    if ecc < _CIRCULAR_ECC:
        argp = 0.0
        nu = _signed_angle(node, r, hhat)
    else:
        ehat = evec / ecc
        argp = _signed_angle(node, ehat, hhat)
        nu = _signed_angle(ehat, r, hhat)

    return KeplerianElements(sma, ecc, inc, raan, argp, nu)


def solve_kepler(M: float, ecc: float) -> float:
    """Solve Kepler's equation E - ecc*sin(E) = M for E.

    Newton iteration with a bisection safeguard on the bracket
    [Mr - ecc, Mr + ecc] (Mr the principal value of M); converges to
    |E - ecc*sin(E) - M| <= 1e-12 for any 0 <= ecc < 1. Full turns in M
    are preserved in the returned E.

    Raises:
        NonConvergence: After 100 iterations (unreachable in practice).
    """
    if not 0.0 <= ecc < 1.0:
        raise ValueError(f"ecc must lie in [0, 1), got {ecc}")
    two_pi = 2.0 * math.pi
    cycles = math.floor((M + math.pi) / two_pi)
    Mr = M - two_pi * cycles
    lo, hi = Mr - ecc, Mr + ecc
    E = Mr + ecc * math.sin(Mr)
    for _ in range(100):
        f = E - ecc * math.sin(E) - Mr
        if abs(f) <= 1e-12:
            return E + two_pi * cycles
        if f > 0.0:
            hi = E
        else:
            lo = E
        step = f / (1.0 - ecc * math.cos(E))
        E_next = E - step
        if not lo < E_next < hi:
            E_next = 0.5 * (lo + hi)
        E = E_next
    raise NonConvergence(f"Kepler iteration stalled at M={M}, ecc={ecc}")


def solve_kepler_arrays(M: np.ndarray, ecc: float) -> np.ndarray:
    """Vectorized Newton solve of Kepler's equation (residual <= 1e-12)."""
    M = np.asarray(M, dtype=float)
    two_pi = 2.0 * math.pi
    cycles = np.floor((M + math.pi) / two_pi)
    Mr = M - two_pi * cycles
    E = Mr + ecc * np.sin(Mr)
    for _ in range(60):
        f = E - ecc * np.sin(E) - Mr
        if np.max(np.abs(f)) <= 1e-13:
            break
        E = E - f / (1.0 - ecc * np.cos(E))
    return E + two_pi * cycles


def true_to_mean_anomaly(nu: float, ecc: float) -> float:
    """Mean anomaly corresponding to a true anomaly."""
    E = 2.0 * math.atan2(math.sqrt(1.0 - ecc) * math.sin(nu / 2.0),
                         math.sqrt(1.0 + ecc) * math.cos(nu / 2.0))
    return E - ecc * math.sin(E)


def mean_to_true_anomaly(M: float, ecc: float) -> float:
    """True anomaly corresponding to a mean anomaly."""
    E = solve_kepler(M, ecc)
    return 2.0 * math.atan2(math.sqrt(1.0 + ecc) * math.sin(E / 2.0),
                            math.sqrt(1.0 - ecc) * math.cos(E / 2.0))


def propagate_target(el: KeplerianElements, mu: float, dt: float) -> InertialState:
    """Two-body propagate elements by dt and return the inertial state.

    The returned epoch equals dt.
    """
    M = true_to_mean_anomaly(el.nu, el.ecc) + el.mean_motion(mu) * dt
    nu = mean_to_true_anomaly(M, el.ecc)
    return elements_to_state(replace(el, nu=wrap_angle(nu)), mu).at_epoch(dt)


def propagate_target_arrays(el: KeplerianElements, mu: float, dt: np.ndarray):
    """Vectorized propagate_target over an array of time offsets.

    Returns:
        (pos, vel) arrays of shape (B, 3).
    """
    dt = np.asarray(dt, dtype=float)
    M = true_to_mean_anomaly(el.nu, el.ecc) + el.mean_motion(mu) * dt
    E = solve_kepler_arrays(M, el.ecc)
    nu = 2.0 * np.arctan2(np.sqrt(1.0 + el.ecc) * np.sin(E / 2.0),
                          np.sqrt(1.0 - el.ecc) * np.cos(E / 2.0))
    p = el.sma * (1.0 - el.ecc**2)
    cnu, snu = np.cos(nu), np.sin(nu)
    r = p / (1.0 + el.ecc * cnu)
    vfac = math.sqrt(mu / p)
    pos_pf = np.stack([r * cnu, r * snu, np.zeros_like(r)], axis=-1)
    vel_pf = np.stack([-vfac * snu, vfac * (el.ecc + cnu), np.zeros_like(r)], axis=-1)
    rot = _perifocal_rotation(el.inc, el.raan, el.argp)
    return pos_pf @ rot.T, vel_pf @ rot.T


def hill_to_inertial(h: HillState, ref: ReferenceOrbit, t: float) -> InertialState:
    """Map a Hill state to the inertial frame at time t past the reference epoch.

    The zero Hill state maps to the reference point itself, moving at
    circular speed sqrt(mu / radius). Velocity includes the frame
    transport term omega x r with omega = n * normal.
    """
    pos, vel = hill_to_inertial_arrays(
        *(np.asarray([v]) for v in (h.x, h.y, h.z, h.vx, h.vy, h.vz)),
        ref.radius, ref.n,
        np.asarray([ref.radial]), np.asarray([ref.along]), np.asarray([ref.normal]), t)
    return InertialState(pos[0], vel[0], epoch=t)


def hill_to_inertial_arrays(x, y, z, vx, vy, vz, radius, n, rhat, that, nhat, t):
    """Vectorized Hill-to-inertial map; basis rows rotate by n*t in-plane."""
    c, s = np.cos(n * t), np.sin(n * t)
    c, s = np.asarray(c), np.asarray(s)
    rhat_t = c[..., None] * rhat + s[..., None] * that
    that_t = -s[..., None] * rhat + c[..., None] * that
    pos = (radius + x)[..., None] * rhat_t + y[..., None] * that_t + z[..., None] * nhat
    vel = ((vx - n * y)[..., None] * rhat_t
           + (vy + n * (radius + x))[..., None] * that_t
           + vz[..., None] * nhat)
    return pos, vel


def inertial_to_hill(s: InertialState, ref: ReferenceOrbit, t: float) -> HillState:
    """Exact inverse of hill_to_inertial at the same frame time t."""
    c, sn = math.cos(ref.n * t), math.sin(ref.n * t)
    triad = ref.triad()
    rhat_t = c * triad[0] + sn * triad[1]
    that_t = -sn * triad[0] + c * triad[1]
    nhat = triad[2]
    x = float(np.dot(s.pos, rhat_t)) - ref.radius
    y = float(np.dot(s.pos, that_t))
    z = float(np.dot(s.pos, nhat))
    vx = float(np.dot(s.vel, rhat_t)) + ref.n * y
    vy = float(np.dot(s.vel, that_t)) - ref.n * (ref.radius + x)
    vz = float(np.dot(s.vel, nhat))
    return HillState(x, y, z, vx, vy, vz)


def recenter_reference(s: InertialState, mu: float) -> tuple[ReferenceOrbit, HillState]:
    """Re-center the Hill frame on the circular orbit through the current position.

    The returned reference orbit has radius |pos|, plane normal along
    pos x vel, and its reference point at pos, so the returned Hill state
    has exactly zero position; its velocity is the spacecraft velocity
    minus the local circular velocity, expressed in the new triad.

    Raises:
        DegenerateOrbit: For (near-)rectilinear states.
    """
    r, n, rhat, that, nhat, vx, vy, vz = recenter_arrays(
        np.asarray([s.pos], dtype=float), np.asarray([s.vel], dtype=float), mu)
    ref = ReferenceOrbit(mu, float(r[0]), tuple(rhat[0]), tuple(that[0]), tuple(nhat[0]))
    return ref, HillState(0.0, 0.0, 0.0, float(vx[0]), float(vy[0]), float(vz[0]))


def recenter_arrays(pos: np.ndarray, vel: np.ndarray, mu: float, strict: bool = True):
    """Vectorized re-centering; returns (r, n, rhat, that, nhat, vx, vy, vz).

    With strict=False, degenerate elements yield NaN components instead
    of raising (batch evaluators mask or reject them downstream).
    """
    r = np.linalg.norm(pos, axis=-1)
    h = np.cross(pos, vel)
    hn = np.linalg.norm(h, axis=-1)
    vn = np.linalg.norm(vel, axis=-1)
    bad = (hn <= 1e-9 * r * vn) | ~np.isfinite(hn) | ~np.isfinite(r) | (r <= 0.0)
    if np.any(bad):
        if strict:
            raise DegenerateOrbit("pos x vel is (near) zero: cannot define an orbit plane")
        hn = np.where(bad, np.nan, hn)
    rhat = pos / r[..., None]
    nhat = h / hn[..., None]
    that = np.cross(nhat, rhat)
    n = np.sqrt(mu / r**3)
    vx = np.einsum("...i,...i->...", vel, rhat)
    vy = np.einsum("...i,...i->...", vel, that) - n * r
    vz = np.einsum("...i,...i->...", vel, nhat)
    return r, n, rhat, that, nhat, vx, vy, vz
