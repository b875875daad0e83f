"""Ground-station catalog, Earth rotation and slant-range visibility.

The Earth is a sphere of radius ``earth_radius_km`` throughout. ECI and
ECEF coincide at t = 0 and ECEF turns eastward at a constant rate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import StationCatalogError

EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s
DEFAULT_MIN_ELEVATION_DEG = 40.0

CATALOG_COLUMNS = ["name", "lat_deg", "lon_deg", "alt_m", "min_elev_deg"]


@dataclass(frozen=True)
class GroundStation:
    name: str
    latitude_deg: float
    longitude_deg: float
    altitude_m: float = 0.0
    min_elevation_deg: float = DEFAULT_MIN_ELEVATION_DEG

    def __post_init__(self):
        if not self.name:
            raise ValueError("station name must be non-empty")
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(f"{self.name}: latitude {self.latitude_deg} outside [-90, 90]")
        if not -180.0 < self.longitude_deg <= 180.0:
            raise ValueError(f"{self.name}: longitude {self.longitude_deg} outside (-180, 180]")
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ValueError(
                f"{self.name}: min elevation {self.min_elevation_deg} outside [0, 90)"
            )


def default_catalog_path() -> Path:
    return Path(str(resources.files("starlink_crb") / "data" / "ground_stations.csv"))


def load_stations(path=None) -> list[GroundStation]:
    """Read a station catalog CSV (bundled catalog when ``path`` is None).

    Lines starting with ``#`` are skipped. Empty ``alt_m`` and
    ``min_elev_deg`` cells take the defaults 0 m and 40 deg.
    """
    path = default_catalog_path() if path is None else Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        numbered = [(i, line) for i, line in enumerate(fh, start=1)
                    if line.strip() and not line.lstrip().startswith("#")]
    if not numbered:
        raise StationCatalogError("missing header row")
    header_line, header = numbered[0]
    if next(csv.reader([header])) != CATALOG_COLUMNS:
        raise StationCatalogError(
            f"header must be {','.join(CATALOG_COLUMNS)}", line=header_line
        )

    stations: list[GroundStation] = []
    seen: set[str] = set()
    for lineno, line in numbered[1:]:
        row = next(csv.reader([line]))
        if len(row) != len(CATALOG_COLUMNS):
            raise StationCatalogError(
                f"expected {len(CATALOG_COLUMNS)} fields, got {len(row)}", line=lineno
            )
        name, lat, lon, alt, elev = (cell.strip() for cell in row)
        try:
            station = GroundStation(
                name=name,
                latitude_deg=float(lat),
                longitude_deg=float(lon),
                altitude_m=float(alt) if alt else 0.0,
                min_elevation_deg=float(elev) if elev else DEFAULT_MIN_ELEVATION_DEG,
            )
        except ValueError as exc:
            raise StationCatalogError(str(exc), line=lineno) from exc
        if station.name in seen:
            raise StationCatalogError(f"duplicate station name {station.name!r}", line=lineno)
        seen.add(station.name)
        stations.append(station)
    return stations


def station_to_ecef(station: GroundStation, earth_radius_km: float = 6371.0) -> np.ndarray:
    """Spherical-Earth ECEF position of a station, km."""
    r = earth_radius_km + station.altitude_m / 1000.0
    lat = math.radians(station.latitude_deg)
    lon = math.radians(station.longitude_deg)
    return r * np.array([math.cos(lat) * math.cos(lon),
                         math.cos(lat) * math.sin(lon),
                         math.sin(lat)])


def stations_to_ecef(stations, earth_radius_km: float = 6371.0) -> np.ndarray:
    if not stations:
        return np.zeros((0, 3))
    return np.stack([station_to_ecef(s, earth_radius_km) for s in stations])


def earth_rotation_angle(t: float) -> float:
    return EARTH_ROTATION_RATE * t


def _rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def eci_to_ecef(position_km, t: float) -> np.ndarray:
    """Rotate inertial vectors (``(..., 3)``) into the Earth-fixed frame at ``t``.

    Accepts a bare array or anything with a ``position_km`` attribute.
    """
    position_km = getattr(position_km, "position_km", position_km)
    return np.asarray(position_km, dtype=float) @ _rot_z(earth_rotation_angle(t))


def ecef_to_eci(position_km, t: float) -> np.ndarray:
    return np.asarray(position_km, dtype=float) @ _rot_z(-earth_rotation_angle(t))


def max_slant_range(altitude_km: float, elevation_deg: float,
                    earth_radius_km: float = 6371.0) -> float:
    """Largest station-satellite distance with the satellite at or above ``elevation_deg``.

    d = R [sqrt(((a + R)/R)^2 - cos^2 e) - sin e]
    """
    if not altitude_km > 0:
        raise ValueError("altitude must be positive")
    if not 0.0 <= elevation_deg <= 90.0:
        raise ValueError("elevation must lie in [0, 90]")
    eps = math.radians(elevation_deg)
    ratio = (altitude_km + earth_radius_km) / earth_radius_km
    return earth_radius_km * (math.sqrt(ratio**2 - math.cos(eps) ** 2) - math.sin(eps))


def visible(sat_ecef, station: GroundStation, config) -> bool:
    """Slant-distance visibility test against the shell altitude in ``config``.

    Inclusive at the mask boundary.
    """
    r_e = config.earth_radius_km
    d = np.linalg.norm(np.asarray(sat_ecef, dtype=float) - station_to_ecef(station, r_e))
    return bool(d <= max_slant_range(config.altitude_km, station.min_elevation_deg, r_e))


def visibility_ranges(stations, altitude_km: float, earth_radius_km: float = 6371.0) -> np.ndarray:
    return np.array([max_slant_range(altitude_km, s.min_elevation_deg, earth_radius_km)
                     for s in stations], dtype=float)


def ground_track(position_km, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Spherical latitude and longitude (degrees) of the sub-satellite point.

    Longitude is wrapped to (-180, 180]. Works elementwise on ``(..., 3)``.
    """
    ecef = eci_to_ecef(position_km, t)
    x, y, z = ecef[..., 0], ecef[..., 1], ecef[..., 2]
    lat = np.degrees(np.arctan2(z, np.hypot(x, y)))
    lon = np.degrees(np.arctan2(y, x))
    lon = np.where(lon <= -180.0, lon + 360.0, lon)
    return lat, lon
