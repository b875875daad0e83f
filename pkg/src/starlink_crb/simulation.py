"""Time loop: propagate, link, bound, summarise, export."""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .constellation import (
    ConstellationConfig,
    SatelliteId,
    ShellPropagator,
    all_satellite_ids,
    write_ephemeris,
)
from .crb import (
    DEFAULT_GAMMA,
    ChannelModel,
    Mode,
    anchorless_fim_network,
    anchorless_rcrb_network,
    batch_rcrb,
)
from .exceptions import ConfigurationError, SummaryError
from .groundnet import (
    ecef_to_eci,
    ground_track,
    load_stations,
    stations_to_ecef,
    visibility_ranges,
)
from .topology import (
    LinkConstraints,
    ground_visibility,
    los_clear_many,
    plus_grid_edges,
    plus_grid_neighbor_indices,
    write_topology,
)

log = logging.getLogger(__name__)

MODE_CHOICES = ("anchored", "anchorless_per_sat", "anchorless_network", "both")


def _fmt(x) -> str:
    return f"{x:.9g}"


@dataclass(frozen=True)
class SimulationConfig:
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    channel: ChannelModel = field(default_factory=lambda: ChannelModel.from_gamma(DEFAULT_GAMMA))
    links: LinkConstraints = field(default_factory=LinkConstraints)
    duration_s: float = 5730.0
    time_step_s: float = 10.0
    mode: str = "both"
    station_file: Path | None = None
    min_elevation_deg: float | None = None
    satellites: tuple[SatelliteId, ...] | None = None
    output_dir: Path | None = None
    write_ephemeris: bool = False
    write_topology: bool = False

    def __post_init__(self):
        if self.mode not in MODE_CHOICES:
            raise ConfigurationError("simulation.mode", f"must be one of {', '.join(MODE_CHOICES)}")
        if not self.time_step_s > 0:
            raise ConfigurationError("simulation.time_step_s", "must be > 0")
        if not self.duration_s > 0:
            raise ConfigurationError("simulation.duration_s", "must be > 0")
        steps = self.duration_s / self.time_step_s
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigurationError(
                "simulation.time_step_s",
                f"duration {self.duration_s} s is not a whole number of {self.time_step_s} s steps",
            )
        if self.links.earth_radius_km != self.constellation.earth_radius_km:
            raise ConfigurationError("links.earth_radius_km", "must match constellation.earth_radius_km")
        if self.min_elevation_deg is not None and not 0.0 <= self.min_elevation_deg < 90.0:
            raise ConfigurationError("stations.min_elevation_deg", "must lie in [0, 90)")
        if self.satellites is not None:
            for sat in self.satellites:
                if sat.plane > self.constellation.num_planes or \
                        sat.slot > self.constellation.sats_per_plane:
                    raise ConfigurationError("simulation.satellites", f"{sat} is not in the shell")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.time_step_s))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.time_step_s

    @property
    def modes(self) -> tuple[Mode, ...]:
        if self.mode == "both":
            return (Mode.ANCHORED, Mode.ANCHORLESS_PER_SAT)
        return (Mode(self.mode),)

    def selected(self) -> list[SatelliteId]:
        if not self.satellites:
            return all_satellite_ids(self.constellation)
        return sorted(set(self.satellites))


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    min: float
    max: float


@dataclass
class RunSummary:
    mode: Mode
    mean_rcrb_m: float
    max_rcrb_m: float
    min_rcrb_m: float
    degenerate_count: int
    total_count: int
    per_step_mean: np.ndarray
    per_step_max: np.ndarray
    per_step_min: np.ndarray
    per_satellite_stats: dict[str, BoxStats]


@dataclass
class GroundPass:
    start_s: float
    end_s: float
    pre_pass_rcrb_m: float | None
    entry_rcrb_m: float
    min_rcrb_m: float

    @property
    def entry_ratio(self) -> float | None:
        """First in-pass value over the last pre-pass value."""
        if self.pre_pass_rcrb_m is None:
            return None
        return self.entry_rcrb_m / self.pre_pass_rcrb_m

    @property
    def ratio(self) -> float | None:
        """In-pass minimum over the last pre-pass value."""
        if self.pre_pass_rcrb_m is None:
            return None
        return self.min_rcrb_m / self.pre_pass_rcrb_m


@dataclass
class RunResult:
    config: SimulationConfig
    times: np.ndarray
    sat_ids: list[SatelliteId]
    n_sat_links: np.ndarray
    n_ground_links: np.ndarray
    latitude_deg: np.ndarray
    longitude_deg: np.ndarray
    connected_sats: np.ndarray
    total_ground_links: np.ndarray
    values: dict[Mode, np.ndarray]
    degenerate: dict[Mode, np.ndarray]
    summaries: dict[Mode, RunSummary] = field(default_factory=dict)

    def column(self, sat: SatelliteId) -> int:
        return self.sat_ids.index(sat)

    @property
    def degenerate_fraction(self) -> float:
        total = sum(d.size for d in self.degenerate.values())
        bad = sum(int(d.sum()) for d in self.degenerate.values())
        return bad / total if total else 0.0


def summarize(values, degenerate=None, *, times=None, sat_ids=None,
              mode: Mode = Mode.ANCHORED) -> RunSummary:
    """Constellation-wide and per-satellite statistics of an RCRB series.

    ``values`` is ``(n_steps, n_sats)`` (a 1-D series counts as one
    satellite). Degenerate entries are excluded everywhere and counted.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.size == 0:
        raise SummaryError("empty series")
    bad = np.zeros(vals.shape, bool) if degenerate is None else np.asarray(degenerate, bool).reshape(vals.shape)
    bad = bad | ~np.isfinite(vals)
    good = ~bad
    if not good.any():
        raise SummaryError("every result in the series is degenerate")
    if sat_ids is None:
        sat_ids = [str(i) for i in range(vals.shape[1])]

    masked = np.where(good, vals, np.nan)
    with warnings.catch_warnings():
        # all-degenerate steps legitimately yield NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        step_mean = np.nanmean(masked, axis=1)
        step_max = np.nanmax(masked, axis=1)
        step_min = np.nanmin(masked, axis=1)

    per_sat = {}
    for col, sid in enumerate(sat_ids):
        v = vals[good[:, col], col]
        if v.size == 0:
            continue
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        per_sat[str(sid)] = BoxStats(float(med), float(q1), float(q3), float(v.min()), float(v.max()))

    flat = vals[good]
    return RunSummary(
        mode=Mode(mode),
        mean_rcrb_m=float(flat.mean()),
        max_rcrb_m=float(flat.max()),
        min_rcrb_m=float(flat.min()),
        degenerate_count=int(bad.sum()),
        total_count=int(vals.size),
        per_step_mean=step_mean,
        per_step_max=step_max,
        per_step_min=step_min,
        per_satellite_stats=per_sat,
    )


def ground_pass_report(times, series, ground_link_counts) -> list[GroundPass]:
    """Maximal runs of steps with at least one ground link, with RCRB ratios."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    in_pass = np.asarray(ground_link_counts) > 0
    passes = []
    k, n = 0, len(times)
    while k < n:
        if not in_pass[k]:
            k += 1
            continue
        start = k
        while k < n and in_pass[k]:
            k += 1
        window = series[start:k]
        pre = float(series[start - 1]) if start > 0 and np.isfinite(series[start - 1]) else None
        passes.append(GroundPass(
            start_s=float(times[start]),
            end_s=float(times[k - 1]),
            pre_pass_rcrb_m=pre,
            entry_rcrb_m=float(window[0]),
            min_rcrb_m=float(np.nanmin(window)),
        ))
    return passes


def _directed_masks(config: ConstellationConfig):
    """Neighbour table, per-entry edge index, and a mask dropping repeats/self-links."""
    nbrs = plus_grid_neighbor_indices(config)
    edges = plus_grid_edges(config)
    lookup = {(int(i), int(j)): e for e, (i, j) in enumerate(edges.tolist())}
    n = nbrs.shape[0]
    edge_of = np.zeros_like(nbrs)
    unique = np.zeros(nbrs.shape, bool)
    for i in range(n):
        seen = set()
        for slot, j in enumerate(nbrs[i].tolist()):
            if j == i or j in seen:
                continue
            seen.add(j)
            unique[i, slot] = True
            edge_of[i, slot] = lookup[(min(i, j), max(i, j))]
    return nbrs, edges, edge_of, unique


def run(config: SimulationConfig) -> RunResult:
    """Evaluate every requested bound at every time step.

    Writes the figure data when ``config.output_dir`` is set.
    """
    shell = config.constellation
    stations = load_stations(config.station_file)
    if config.min_elevation_deg is not None:
        stations = [replace(s, min_elevation_deg=config.min_elevation_deg) for s in stations]
    st_ecef = stations_to_ecef(stations, shell.earth_radius_km)
    st_range = visibility_ranges(stations, shell.altitude_km, shell.earth_radius_km)

    gamma = config.channel.gamma_per_m2
    prop = ShellPropagator(shell)
    nbrs, edges, edge_of, unique = _directed_masks(shell)
    selected = config.selected()
    sel = np.array([s.index(shell) for s in selected], dtype=int)
    times = config.times
    T, K = len(times), len(sel)
    modes = config.modes
    log.info("running %d steps for %d satellites, modes %s, gamma %.6g m^-2",
             T, K, ",".join(m.value for m in modes), gamma)

    n_sat_links = np.zeros((T, K), dtype=int)
    n_ground = np.zeros((T, K), dtype=int)
    lat = np.zeros((T, K))
    lon = np.zeros((T, K))
    connected = np.zeros(T, dtype=int)
    total_ground = np.zeros(T, dtype=int)
    values = {m: np.zeros((T, K)) for m in modes}
    degenerate = {m: np.zeros((T, K), dtype=bool) for m in modes}

    out = Path(config.output_dir) if config.output_dir is not None else None
    topo_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if config.write_topology:
            topo_fh = open(out / "topology.csv", "w", encoding="utf-8", newline="\n")
            topo_fh.write("t_s,kind,end_a,end_b,range_km\n")
    names = [str(s) for s in all_satellite_ids(shell)]
    station_names = [s.name for s in stations]

    try:
        for step, t in enumerate(times):
            pos_km, _ = prop(t)
            pos = pos_km * 1000.0

            edge_ok = los_clear_many(pos_km[edges[:, 0]], pos_km[edges[:, 1]], config.links) \
                if len(edges) else np.zeros(0, bool)
            active = unique & edge_ok[edge_of] if len(edges) else unique
            diff = pos[:, None, :] - pos[nbrs]
            u = diff / np.linalg.norm(diff, axis=-1, keepdims=True).clip(min=1e-300)
            u = np.where(active[..., None], u, 0.0)
            F_sat = gamma * np.einsum("nki,nkj->nij", u, u)

            dist, vis = ground_visibility(pos_km, st_ecef, st_range, t)
            per_sat_ground = vis.sum(axis=1)
            connected[step] = int((per_sat_ground > 0).sum())
            total_ground[step] = int(per_sat_ground.sum())
            n_sat_links[step] = active[sel].sum(axis=1)
            n_ground[step] = per_sat_ground[sel]
            lat[step], lon[step] = ground_track(pos_km[sel], t)

            if Mode.ANCHORED in modes:
                F_anc = F_sat[sel].copy()
                rows = np.nonzero(per_sat_ground[sel])[0]
                if len(rows):
                    st_eci = ecef_to_eci(st_ecef, t) * 1000.0
                    gdiff = pos[sel[rows], None, :] - st_eci[None, :, :]
                    gu = gdiff / np.linalg.norm(gdiff, axis=-1, keepdims=True)
                    gu = np.where(vis[sel[rows], :, None], gu, 0.0)
                    F_anc[rows] += gamma * np.einsum("rgi,rgj->rij", gu, gu)
                values[Mode.ANCHORED][step], degenerate[Mode.ANCHORED][step] = batch_rcrb(F_anc)
            if Mode.ANCHORLESS_PER_SAT in modes:
                v, bad = batch_rcrb(F_sat[sel])
                values[Mode.ANCHORLESS_PER_SAT][step] = v
                degenerate[Mode.ANCHORLESS_PER_SAT][step] = bad
            if Mode.ANCHORLESS_NETWORK in modes:
                F_rel = anchorless_fim_network(pos, edges[edge_ok], gamma)
                res = anchorless_rcrb_network(F_rel, sel)
                values[Mode.ANCHORLESS_NETWORK][step] = [r.rcrb_m for r in res]
                degenerate[Mode.ANCHORLESS_NETWORK][step] = [r.degenerate for r in res]

            if topo_fh is not None:
                write_topology(topo_fh, t, names, pos_km, edges, edge_ok,
                               station_names, dist, vis)
    finally:
        if topo_fh is not None:
            topo_fh.close()

    result = RunResult(
        config=config, times=times, sat_ids=selected,
        n_sat_links=n_sat_links, n_ground_links=n_ground,
        latitude_deg=lat, longitude_deg=lon,
        connected_sats=connected, total_ground_links=total_ground,
        values=values, degenerate=degenerate,
    )
    for m in modes:
        try:
            result.summaries[m] = summarize(values[m], degenerate[m], times=times,
                                            sat_ids=[str(s) for s in selected], mode=m)
        except SummaryError:
            log.warning("%s: every result is degenerate", m.value)

    if out is not None:
        export_figure_data(result, out)
        if config.write_ephemeris:
            write_ephemeris(out / "ephemeris.csv", shell, times)
    return result


def export_figure_data(result: RunResult, output_dir) -> list[Path]:
    """Write the plot-ready CSV files and ``summary.json``; returns the paths."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ts = [_fmt(t) for t in result.times]
    names = [str(s) for s in result.sat_ids]

    def _open(name):
        path = out / name
        written.append(path)
        return open(path, "w", encoding="utf-8", newline="\n")

    with _open("ground_track.csv") as fh:
        fh.write("t_s,sat_id,lat_deg,lon_deg\n")
        for k, t in enumerate(ts):
            fh.write("".join(
                f"{t},{name},{_fmt(la)},{_fmt(lo)}\n"
                for name, la, lo in zip(names, result.latitude_deg[k].tolist(),
                                        result.longitude_deg[k].tolist())
            ))

    with _open("ground_connectivity.csv") as fh:
        fh.write("t_s,connected_sats,ground_links\n")
        fh.write("".join(f"{t},{c},{g}\n" for t, c, g in zip(
            ts, result.connected_sats.tolist(), result.total_ground_links.tolist())))

    for mode in result.values:
        vals, bad = result.values[mode], result.degenerate[mode]
        summary = result.summaries.get(mode)
        prefix = mode.value

        with _open(f"{prefix}_constellation_series.csv") as fh:
            fh.write("t_s,mean_rcrb_m,max_rcrb_m,min_rcrb_m\n")
            if summary is not None:
                fh.write("".join(f"{t},{_fmt(a)},{_fmt(b)},{_fmt(c)}\n" for t, a, b, c in zip(
                    ts, summary.per_step_mean.tolist(), summary.per_step_max.tolist(),
                    summary.per_step_min.tolist())))

        with _open(f"{prefix}_satellite_series.csv") as fh:
            fh.write("t_s,sat_id,rcrb_m,n_sat_links,n_ground_links,degenerate\n")
            for k, t in enumerate(ts):
                fh.write("".join(
                    f"{t},{name},{_fmt(v)},{ns},{ng},{int(d)}\n"
                    for name, v, ns, ng, d in zip(
                        names, vals[k].tolist(), result.n_sat_links[k].tolist(),
                        result.n_ground_links[k].tolist(), bad[k].tolist())
                ))

        with _open(f"{prefix}_box_stats.csv") as fh:
            fh.write("sat_id,median,q1,q3,min,max\n")
            if summary is not None:
                for name in names:
                    b = summary.per_satellite_stats.get(name)
                    if b is not None:
                        fh.write(f"{name},{_fmt(b.median)},{_fmt(b.q1)},{_fmt(b.q3)},"
                                 f"{_fmt(b.min)},{_fmt(b.max)}\n")

    def _num(x):
        return float(_fmt(x)) if math.isfinite(x) else None

    report = {
        "n_steps": len(result.times),
        "time_step_s": result.config.time_step_s,
        "n_satellites": len(result.sat_ids),
        "gamma_per_m2": _num(result.config.channel.gamma_per_m2),
        "ground_connected_sats": {
            "min": int(result.connected_sats.min()), "max": int(result.connected_sats.max()),
            "mean": _num(float(result.connected_sats.mean())),
        },
        "ground_links": {
            "min": int(result.total_ground_links.min()), "max": int(result.total_ground_links.max()),
            "mean": _num(float(result.total_ground_links.mean())),
        },
        "modes": {},
    }
    for mode in result.values:
        s = result.summaries.get(mode)
        entry = {"degenerate_count": int(result.degenerate[mode].sum()),
                 "total_count": int(result.degenerate[mode].size)}
        if s is not None:
            entry.update(mean_rcrb_m=_num(s.mean_rcrb_m), max_rcrb_m=_num(s.max_rcrb_m),
                         min_rcrb_m=_num(s.min_rcrb_m))
        report["modes"][mode.value] = entry
    with _open("summary.json") as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return written
