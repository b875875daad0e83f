"""Cramer-Rao bounds on cooperative ToA localisation in a LEO megaconstellation."""
from .constellation import (
    ConstellationConfig,
    EciState,
    OrbitalElements,
    SatelliteId,
    ShellPropagator,
    generate_walker,
    j2_secular_rates,
    mean_motion,
    propagate,
)
from .crb import (
    ChannelModel,
    LinkBudget,
    Mode,
    RcrbResult,
    anchored_fim,
    anchorless_fim_network,
    anchorless_rcrb_network,
    anchorless_rcrb_per_sat,
    gamma_from_sigma,
    link_feasible,
    rcrb,
    sigma_toa_lower_bound,
)
from .exceptions import (
    ConfigurationError,
    DegenerateGeometryError,
    StationCatalogError,
    SummaryError,
)
from .groundnet import (
    GroundStation,
    eci_to_ecef,
    ground_track,
    load_stations,
    max_slant_range,
    station_to_ecef,
    visible,
)
from .simulation import SimulationConfig, ground_pass_report, run, summarize
from .topology import (
    LinkConstraints,
    TopologySnapshot,
    build_snapshot,
    count_los_candidates,
    los_clear,
    plus_grid_neighbors,
)

__version__ = "0.1.0"
