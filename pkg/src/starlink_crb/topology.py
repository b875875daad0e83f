"""+grid inter-satellite links, line-of-sight pruning and ground links."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import ConstellationConfig, SatelliteId
from .exceptions import ConfigurationError
from .groundnet import eci_to_ecef


@dataclass(frozen=True)
class LinkConstraints:
    ionosphere_height_km: float = 80.0
    max_links_per_sat: int = 4
    earth_radius_km: float = 6371.0

    def __post_init__(self):
        if self.ionosphere_height_km < 0:
            raise ConfigurationError("ionosphere_height_km", "must be >= 0")
        if self.max_links_per_sat != 4:
            raise ConfigurationError(
                "max_links_per_sat", "the +grid topology fixes four links per satellite"
            )

    @property
    def blocking_radius_km(self) -> float:
        return self.earth_radius_km + self.ionosphere_height_km

    def los_max_range_km(self, shell_radius_km: float) -> float:
        """Longest unobstructed chord between two satellites at ``shell_radius_km``."""
        rb = self.blocking_radius_km
        if shell_radius_km <= rb:
            return 0.0
        return 2.0 * math.sqrt(shell_radius_km**2 - rb**2)


@dataclass
class TopologySnapshot:
    epoch_s: float
    sat_links: set[frozenset[SatelliteId]] = field(default_factory=set)
    ground_links: set[tuple[SatelliteId, str]] = field(default_factory=set)


def plus_grid_neighbors(sat: SatelliteId, config: ConstellationConfig) -> list[SatelliteId]:
    """In-plane slot +/- 1 and same slot in planes +/- 1, with wrap-around."""
    P, S = config.num_planes, config.sats_per_plane
    p, s = sat.plane - 1, sat.slot - 1
    return [
        SatelliteId(sat.plane, (s - 1) % S + 1),
        SatelliteId(sat.plane, (s + 1) % S + 1),
        SatelliteId((p - 1) % P + 1, sat.slot),
        SatelliteId((p + 1) % P + 1, sat.slot),
    ]


def plus_grid_neighbor_indices(config: ConstellationConfig) -> np.ndarray:
    """``(N, 4)`` neighbour rows in plane-major order: prev slot, next slot, prev plane, next plane."""
    P, S = config.num_planes, config.sats_per_plane
    grid = np.arange(P * S).reshape(P, S)
    return np.stack([
        np.roll(grid, 1, axis=1), np.roll(grid, -1, axis=1),
        np.roll(grid, 1, axis=0), np.roll(grid, -1, axis=0),
    ], axis=-1).reshape(P * S, 4)


def plus_grid_edges(config: ConstellationConfig) -> np.ndarray:
    """Distinct undirected +grid edges as sorted ``(i, j)`` index pairs, ``i < j``.

    Degenerate shells (fewer than three planes or slots) collapse duplicate
    neighbours and self-pairs, so the edge count can be below ``2N``.
    """
    nbrs = plus_grid_neighbor_indices(config)
    rows = np.repeat(np.arange(nbrs.shape[0]), 4)
    cols = nbrs.ravel()
    keep = rows != cols
    pairs = np.sort(np.stack([rows[keep], cols[keep]], axis=1), axis=1)
    return np.unique(pairs, axis=0)


def _segment_clearance(p1, p2):
    """Distance from the origin to the closest point of each segment p1-p2."""
    d = p2 - p1
    dd = np.einsum("...i,...i->...", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, -np.einsum("...i,...i->...", p1, d) / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    closest = p1 + s[..., None] * d
    return np.linalg.norm(closest, axis=-1)


def los_clear(p1, p2, constraints: LinkConstraints) -> bool:
    """True when the segment p1-p2 (km) stays outside Earth plus ionosphere.

    Grazing segments count as clear. Symmetric in its arguments.
    """
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    # order the endpoints so swapping arguments gives the identical float path
    if tuple(b) < tuple(a):
        a, b = b, a
    return bool(_segment_clearance(a, b) >= constraints.blocking_radius_km * (1 - 1e-12))


def los_clear_many(p1, p2, constraints: LinkConstraints) -> np.ndarray:
    return _segment_clearance(np.asarray(p1, float), np.asarray(p2, float)) \
        >= constraints.blocking_radius_km * (1 - 1e-12)


def ground_visibility(sat_eci_km, station_ecef_km, ranges_km, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Station-to-satellite slant distances and visibility mask, both ``(N, M)``."""
    sat_ecef = eci_to_ecef(sat_eci_km, t)
    diff = sat_ecef[:, None, :] - station_ecef_km[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return dist, dist <= ranges_km[None, :]


def build_snapshot(states, stations, constraints: LinkConstraints,
                   config: ConstellationConfig) -> TopologySnapshot:
    """Active links at one epoch.

    ``states`` holds one ``EciState`` per satellite in plane-major order.
    """
    from .groundnet import stations_to_ecef, visibility_ranges

    states = list(states)
    if len(states) != config.total_satellites:
        raise ValueError(
            f"expected {config.total_satellites} states, got {len(states)}"
        )
    epochs = {float(s.epoch_s) for s in states}
    if len(epochs) != 1:
        raise ValueError(f"states span several epochs: {sorted(epochs)[:3]}...")
    t = epochs.pop()
    pos = np.stack([np.asarray(s.position_km, float) for s in states])
    ids = [SatelliteId.from_index(i, config) for i in range(len(states))]

    snap = TopologySnapshot(epoch_s=t)
    edges = plus_grid_edges(config)
    if len(edges):
        ok = los_clear_many(pos[edges[:, 0]], pos[edges[:, 1]], constraints)
        for (i, j), keep in zip(edges.tolist(), ok.tolist()):
            if keep:
                snap.sat_links.add(frozenset((ids[i], ids[j])))

    if stations:
        ecef = stations_to_ecef(stations, config.earth_radius_km)
        ranges = visibility_ranges(stations, config.altitude_km, config.earth_radius_km)
        _, mask = ground_visibility(pos, ecef, ranges, t)
        for i, k in zip(*np.nonzero(mask)):
            snap.ground_links.add((ids[i], stations[k].name))
    return snap


def count_los_candidates(sat: SatelliteId, positions_km, constraints: LinkConstraints,
                         config: ConstellationConfig) -> int:
    """Number of other satellites with a clear line of sight to ``sat``."""
    pos = np.asarray(positions_km, dtype=float)
    i = sat.index(config)
    others = np.delete(np.arange(len(pos)), i)
    ok = los_clear_many(np.broadcast_to(pos[i], (len(others), 3)), pos[others], constraints)
    return int(ok.sum())


def write_topology(fh, t: float, sat_names, positions_km, edges, edge_ok,
                   station_names, ground_dist_km, ground_mask) -> None:
    """Append ``t_s,kind,end_a,end_b,range_km`` rows for one epoch."""
    ts = f"{t:.9g}"
    lines = []
    for (i, j), keep in zip(edges.tolist(), edge_ok.tolist()):
        if keep:
            rng = float(np.linalg.norm(positions_km[i] - positions_km[j]))
            lines.append(f"{ts},sat,{sat_names[i]},{sat_names[j]},{rng:.9g}\n")
    for i, k in zip(*np.nonzero(ground_mask)):
        lines.append(f"{ts},ground,{sat_names[i]},{station_names[k]},"
                     f"{ground_dist_km[i, k]:.9g}\n")
    fh.write("".join(lines))
