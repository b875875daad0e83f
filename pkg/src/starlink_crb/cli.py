"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 when more
than half of the bound evaluations are degenerate.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config, parse_satellite_list
from .exceptions import ConfigurationError, StationCatalogError
from .simulation import MODE_CHOICES, run

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2, 3

log = logging.getLogger("starlink_crb")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="starlink-crb",
        description="Instantaneous Cramer-Rao bounds for cooperative ToA localisation "
                    "in a Walker megaconstellation.",
    )
    ap.add_argument("--config", required=True, type=Path, help="key = value run configuration")
    ap.add_argument("--mode", choices=MODE_CHOICES)
    ap.add_argument("--stations", type=Path, help="ground-station catalog CSV")
    ap.add_argument("--gamma", type=float, help="channel constant, m^-2")
    ap.add_argument("--epsilon0-deg", type=float, help="elevation mask applied to every station")
    ap.add_argument("--duration-s", type=float)
    ap.add_argument("--step-s", type=float)
    ap.add_argument("--satellites", help="comma-separated ids, e.g. s01001,s02001")
    ap.add_argument("--output", type=Path, help="output directory")
    ap.add_argument("--ephemeris", action="store_true", default=None,
                    help="also write ephemeris.csv")
    ap.add_argument("--topology", action="store_true", default=None,
                    help="also write topology.csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {
            "simulation.mode": args.mode,
            "stations.file": args.stations,
            "channel.gamma_per_m2": args.gamma,
            "stations.min_elevation_deg": args.epsilon0_deg,
            "simulation.duration_s": args.duration_s,
            "simulation.time_step_s": args.step_s,
            "output.dir": args.output,
            "output.ephemeris": args.ephemeris,
            "output.topology": args.topology,
        }
        if args.satellites is not None:
            try:
                overrides["simulation.satellites"] = parse_satellite_list(args.satellites)
            except ValueError as exc:
                raise ConfigurationError("--satellites", str(exc)) from exc
        config = load_config(args.config, overrides)
        if config.output_dir is None:
            raise ConfigurationError("output.dir", "no output directory given (--output)")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run(config)
    except StationCatalogError as exc:
        print(f"station catalog error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    for mode, summary in result.summaries.items():
        print(f"{mode.value}: mean {summary.mean_rcrb_m:.4f} m, max {summary.max_rcrb_m:.4f} m, "
              f"min {summary.min_rcrb_m:.4f} m, degenerate {summary.degenerate_count}"
              f"/{summary.total_count}")
    if result.degenerate_fraction > 0.5:
        print(f"{result.degenerate_fraction:.1%} of results are degenerate", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
