"""Walker-delta shell generation and J2-secular circular propagation.

Angles are stored in radians; degrees appear only on configuration
fields. Positions are km, velocities km/s, times seconds since epoch.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

TWO_PI = 2.0 * math.pi

_ID_PATTERN = re.compile(r"^s(\d{2,})(\d{3})$")


@dataclass(frozen=True)
class ConstellationConfig:
    """Walker shell plus the physical constants used to propagate it."""

    altitude_km: float = 550.0
    num_planes: int = 72
    sats_per_plane: int = 22
    inclination_deg: float = 53.0
    phasing_offset_deg: float = 0.0
    earth_radius_km: float = 6371.0
    mu_km3s2: float = 398600.4418
    j2: float = 1.08263e-3

    def __post_init__(self):
        if not self.altitude_km > 0:
            raise ConfigurationError("altitude_km", f"must be > 0, got {self.altitude_km}")
        for name in ("num_planes", "sats_per_plane"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigurationError(name, f"must be a positive integer, got {value}")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigurationError(
                "inclination_deg", f"must lie in [0, 180], got {self.inclination_deg}"
            )
        if not self.earth_radius_km > 0:
            raise ConfigurationError("earth_radius_km", "must be > 0")
        if not self.mu_km3s2 > 0:
            raise ConfigurationError("mu_km3s2", "must be > 0")
        if not math.isfinite(self.phasing_offset_deg):
            raise ConfigurationError("phasing_offset_deg", "must be finite")

    @property
    def semi_major_axis_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def total_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True, order=True)
class SatelliteId:
    """Plane/slot pair, both 1-based. Text form is ``sXXYYY``."""

    plane: int
    slot: int

    def __post_init__(self):
        if self.plane < 1 or self.slot < 1:
            raise ValueError(f"plane and slot are 1-based, got ({self.plane}, {self.slot})")
        if self.slot > 999:
            raise ValueError(f"slot {self.slot} does not fit the three-digit field")

    def __str__(self):
        return f"s{self.plane:02d}{self.slot:03d}"

    @classmethod
    def parse(cls, text: str) -> SatelliteId:
        match = _ID_PATTERN.match(text.strip())
        if match is None:
            raise ValueError(f"not a satellite identifier: {text!r}")
        return cls(int(match.group(1)), int(match.group(2)))

    def index(self, config: ConstellationConfig) -> int:
        """Row of this satellite in plane-major constellation arrays."""
        if self.plane > config.num_planes or self.slot > config.sats_per_plane:
            raise ValueError(
                f"{self} is outside a {config.num_planes}x{config.sats_per_plane} shell"
            )
        return (self.plane - 1) * config.sats_per_plane + (self.slot - 1)

    @classmethod
    def from_index(cls, index: int, config: ConstellationConfig) -> SatelliteId:
        plane, slot = divmod(int(index), config.sats_per_plane)
        return cls(plane + 1, slot + 1)


@dataclass(frozen=True)
class OrbitalElements:
    """Circular-orbit elements at epoch (eccentricity is always zero)."""

    semi_major_axis_km: float
    inclination_rad: float
    raan_rad: float
    arg_latitude_rad: float


@dataclass(frozen=True)
class EciState:
    position_km: np.ndarray
    velocity_kms: np.ndarray
    epoch_s: float


def all_satellite_ids(config: ConstellationConfig) -> list[SatelliteId]:
    return [
        SatelliteId(p, s)
        for p in range(1, config.num_planes + 1)
        for s in range(1, config.sats_per_plane + 1)
    ]


def generate_walker(config: ConstellationConfig) -> list[tuple[SatelliteId, OrbitalElements]]:
    """Lay out the shell: evenly spaced planes, evenly spaced slots.

    Plane ``p`` sits at RAAN ``(p-1)*360/P`` and slot ``k`` at argument of
    latitude ``(k-1)*360/S + (p-1)*phasing_offset`` (degrees), so s01001
    starts at ``[a, 0, 0]``.
    """
    a = config.semi_major_axis_km
    inc = math.radians(config.inclination_deg)
    out = []
    for sat in all_satellite_ids(config):
        raan = math.radians((sat.plane - 1) * 360.0 / config.num_planes)
        u = math.radians(
            (sat.slot - 1) * 360.0 / config.sats_per_plane
            + (sat.plane - 1) * config.phasing_offset_deg
        )
        out.append((sat, OrbitalElements(a, inc, raan % TWO_PI, u % TWO_PI)))
    return out


def element_arrays(config: ConstellationConfig) -> tuple[np.ndarray, np.ndarray]:
    """RAAN and argument of latitude (rad) for every satellite, plane-major."""
    planes = np.repeat(np.arange(config.num_planes), config.sats_per_plane)
    slots = np.tile(np.arange(config.sats_per_plane), config.num_planes)
    raan = np.radians(planes * 360.0 / config.num_planes) % TWO_PI
    u = np.radians(slots * 360.0 / config.sats_per_plane
                   + planes * config.phasing_offset_deg) % TWO_PI
    return raan, u


def mean_motion(config: ConstellationConfig, semi_major_axis_km: float | None = None) -> float:
    """Two-body mean motion sqrt(mu / a^3) in rad/s."""
    a = config.semi_major_axis_km if semi_major_axis_km is None else semi_major_axis_km
    if not a > 0:
        raise ValueError("semi-major axis must be positive")
    return math.sqrt(config.mu_km3s2 / a**3)


def orbital_period(config: ConstellationConfig) -> float:
    return TWO_PI / mean_motion(config)


def j2_secular_rates(elements: OrbitalElements, config: ConstellationConfig) -> tuple[float, float]:
    """First-order secular J2 drift for a circular orbit.

    Returns ``(raan_rate, arg_latitude_rate)`` in rad/s. The latitude rate
    is the Keplerian mean motion plus the J2 corrections to the argument
    of perigee and the mean anomaly.
    """
    a = elements.semi_major_axis_km
    n = mean_motion(config, a)
    k = 1.5 * config.j2 * (config.earth_radius_km / a) ** 2 * n
    cos_i = math.cos(elements.inclination_rad)
    sin2_i = math.sin(elements.inclination_rad) ** 2
    raan_rate = -k * cos_i
    # d(omega)/dt = k (2 - 5/2 sin^2 i), d(M)/dt - n = k (1 - 3/2 sin^2 i)
    arg_latitude_rate = n + k * (3.0 - 4.0 * sin2_i)
    return raan_rate, arg_latitude_rate


def _circular_state(a, inc, raan, u, u_rate):
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_i, sin_i = np.cos(inc), np.sin(inc)
    pos = a * np.stack([
        cos_o * cos_u - sin_o * sin_u * cos_i,
        sin_o * cos_u + cos_o * sin_u * cos_i,
        sin_u * sin_i,
    ], axis=-1)
    vel = (a * u_rate) * np.stack([
        -cos_o * sin_u - sin_o * cos_u * cos_i,
        -sin_o * sin_u + cos_o * cos_u * cos_i,
        cos_u * sin_i,
    ], axis=-1)
    return pos, vel


def propagate(elements: OrbitalElements, t: float, config: ConstellationConfig) -> EciState:
    """Inertial state of one satellite ``t`` seconds after epoch."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    raan_rate, u_rate = j2_secular_rates(elements, config)
    pos, vel = _circular_state(
        elements.semi_major_axis_km,
        elements.inclination_rad,
        elements.raan_rad + raan_rate * t,
        elements.arg_latitude_rad + u_rate * t,
        u_rate,
    )
    return EciState(pos, vel, float(t))


class ShellPropagator:
    """Vectorised propagation of the whole shell.

    Every satellite shares ``a`` and ``i``, hence the same drift rates, so
    one evaluation per epoch covers the constellation.
    """

    def __init__(self, config: ConstellationConfig):
        self.config = config
        self.raan0, self.u0 = element_arrays(config)
        ref = OrbitalElements(config.semi_major_axis_km,
                              math.radians(config.inclination_deg), 0.0, 0.0)
        self.raan_rate, self.u_rate = j2_secular_rates(ref, config)

    def __call__(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Positions (km) and velocities (km/s), shape ``(N, 3)`` each."""
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        return _circular_state(
            self.config.semi_major_axis_km,
            math.radians(self.config.inclination_deg),
            self.raan0 + self.raan_rate * t,
            self.u0 + self.u_rate * t,
            self.u_rate,
        )


def write_ephemeris(path, config: ConstellationConfig, times) -> None:
    """Write ``sat_id,t_s,x_km,...,vz_kms`` rows for every satellite and time."""
    prop = ShellPropagator(config)
    names = [str(s) for s in all_satellite_ids(config)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sat_id,t_s,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms\n")
        for t in times:
            pos, vel = prop(t)
            ts = f"{t:.9g}"
            fh.write("".join(
                f"{name},{ts},{p[0]:.12g},{p[1]:.12g},{p[2]:.12g},"
                f"{v[0]:.12g},{v[1]:.12g},{v[2]:.12g}\n"
                for name, p, v in zip(names, pos.tolist(), vel.tolist())
            ))
