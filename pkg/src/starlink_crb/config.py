"""``key = value`` run configuration with dotted section prefixes.

Example::

    # comment
    constellation.num_planes = 72
    channel.gamma_per_m2 = 0.298605
    simulation.satellites = s01001, s02001

Unknown keys, repeated keys and unparsable values raise
:class:`ConfigurationError` naming the key.
"""
from __future__ import annotations

from pathlib import Path

from .constellation import ConstellationConfig, SatelliteId
from .crb import DEFAULT_GAMMA, SPEED_OF_LIGHT_MS, ChannelModel, LinkBudget
from .exceptions import ConfigurationError
from .simulation import SimulationConfig
from .topology import LinkConstraints

_FLOAT, _INT, _STR, _BOOL, _PATH, _IDS = "float", "int", "str", "bool", "path", "ids"

KEYS = {
    "constellation.altitude_km": _FLOAT,
    "constellation.num_planes": _INT,
    "constellation.sats_per_plane": _INT,
    "constellation.inclination_deg": _FLOAT,
    "constellation.phasing_offset_deg": _FLOAT,
    "constellation.earth_radius_km": _FLOAT,
    "constellation.mu_km3s2": _FLOAT,
    "constellation.j2": _FLOAT,
    "channel.gamma_per_m2": _FLOAT,
    "channel.sigma_toa_s": _FLOAT,
    "channel.propagation_velocity_ms": _FLOAT,
    "link_budget.bandwidth_hz": _FLOAT,
    "link_budget.signal_duration_s": _FLOAT,
    "link_budget.centre_frequency_hz": _FLOAT,
    "link_budget.snr": _FLOAT,
    "links.ionosphere_height_km": _FLOAT,
    "links.max_links_per_sat": _INT,
    "stations.file": _PATH,
    "stations.min_elevation_deg": _FLOAT,
    "simulation.duration_s": _FLOAT,
    "simulation.time_step_s": _FLOAT,
    "simulation.mode": _STR,
    "simulation.satellites": _IDS,
    "output.dir": _PATH,
    "output.ephemeris": _BOOL,
    "output.topology": _BOOL,
}


def parse_satellite_list(text: str) -> tuple[SatelliteId, ...] | None:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        return None
    return tuple(SatelliteId.parse(t) for t in items)


def _convert(key, kind, raw, base_dir):
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _BOOL:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == _PATH:
            path = Path(raw)
            return path if path.is_absolute() or base_dir is None else base_dir / path
        if kind == _IDS:
            return parse_satellite_list(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(key, f"cannot parse {raw!r} as {kind}") from exc


def read_config_file(path) -> dict:
    """Parse a config file into ``{key: typed value}``.

    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigurationError(f"line {lineno}", "expected 'key = value'")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            if key not in KEYS:
                raise ConfigurationError(key, "unknown key")
            if key in values:
                raise ConfigurationError(key, "set more than once")
            values[key] = _convert(key, KEYS[key], raw, path.parent)
    return values


def _section(values, prefix):
    return {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith(prefix + ".")}


def _channel(values) -> ChannelModel:
    ch = _section(values, "channel")
    budget = _section(values, "link_budget")
    v_p = ch.get("propagation_velocity_ms", SPEED_OF_LIGHT_MS)
    sources = [name for name, present in (
        ("channel.gamma_per_m2", "gamma_per_m2" in ch),
        ("channel.sigma_toa_s", "sigma_toa_s" in ch),
        ("link_budget", bool(budget)),
    ) if present]
    if len(sources) > 1:
        raise ConfigurationError(sources[1], f"conflicts with {sources[0]}; set only one channel source")
    if "gamma_per_m2" in ch:
        return ChannelModel.from_gamma(ch["gamma_per_m2"], v_p)
    if "sigma_toa_s" in ch:
        return ChannelModel(v_p, ch["sigma_toa_s"])
    if budget:
        missing = {"bandwidth_hz", "signal_duration_s", "centre_frequency_hz", "snr"} - budget.keys()
        if missing:
            raise ConfigurationError(f"link_budget.{sorted(missing)[0]}", "missing")
        return ChannelModel.from_budget(LinkBudget(**budget), v_p)
    return ChannelModel.from_gamma(DEFAULT_GAMMA, v_p)


def _prefixed(section, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ConfigurationError as exc:
        if "." in exc.field:
            raise
        message = str(exc).split(": ", 1)[1]
        raise ConfigurationError(f"{section}.{exc.field}", message) from exc


def build_config(values: dict) -> SimulationConfig:
    """Assemble a validated :class:`SimulationConfig` from typed key values."""
    shell = _prefixed("constellation", ConstellationConfig, **_section(values, "constellation"))
    links = _prefixed("links", LinkConstraints, earth_radius_km=shell.earth_radius_km,
                      **_section(values, "links"))
    channel = _prefixed("channel", _channel, values)

    sim = _section(values, "simulation")
    out = _section(values, "output")
    stations = _section(values, "stations")
    return SimulationConfig(
        constellation=shell,
        channel=channel,
        links=links,
        duration_s=sim.get("duration_s", 5730.0),
        time_step_s=sim.get("time_step_s", 10.0),
        mode=sim.get("mode", "both"),
        station_file=stations.get("file"),
        min_elevation_deg=stations.get("min_elevation_deg"),
        satellites=sim.get("satellites"),
        output_dir=out.get("dir"),
        write_ephemeris=out.get("ephemeris", False),
        write_topology=out.get("topology", False),
    )


def load_config(path, overrides: dict | None = None) -> SimulationConfig:
    """Read ``path`` and apply ``overrides`` (already typed, keyed like the file)."""
    values = read_config_file(path)
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigurationError(key, "unknown key")
        if value is None:
            continue
        if key == "channel.gamma_per_m2":
            # an explicit gamma replaces whatever channel source the file used
            for other in [k for k in values if k == "channel.sigma_toa_s" or k.startswith("link_budget.")]:
                del values[other]
        values[key] = value
    return build_config(values)
