from pathlib import Path

import pytest

from starlink_crb.cli import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_IO, EXIT_OK, main
from starlink_crb.config import build_config, load_config, read_config_file
from starlink_crb.crb import DEFAULT_GAMMA
from starlink_crb.exceptions import ConfigurationError

DEFAULT_CONF = Path(__file__).resolve().parents[1] / "configs" / "default.conf"


def _conf(tmp_path, text, name="run.conf"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestConfigFile:
    def test_default_file(self):
        cfg = load_config(DEFAULT_CONF)
        assert cfg.constellation.total_satellites == 1584
        assert cfg.channel.gamma_per_m2 == pytest.approx(DEFAULT_GAMMA, rel=1e-12)
        assert cfg.links.ionosphere_height_km == 80.0
        assert cfg.n_steps == 573 and cfg.mode == "both"
        assert cfg.output_dir == DEFAULT_CONF.parent / ".." / "out"

    def test_empty_file_uses_defaults(self, tmp_path):
        cfg = load_config(_conf(tmp_path, "# nothing\n\n"))
        assert cfg.channel.gamma_per_m2 == pytest.approx(DEFAULT_GAMMA)
        assert cfg.output_dir is None

    def test_relative_paths(self, tmp_path):
        cfg = load_config(_conf(tmp_path, "stations.file = gs.csv\noutput.dir = o\n"))
        assert cfg.station_file == tmp_path / "gs.csv"
        assert cfg.output_dir == tmp_path / "o"

    def test_satellite_list(self, tmp_path):
        cfg = load_config(_conf(tmp_path, "simulation.satellites = s01001, s02001\n"))
        assert [str(s) for s in cfg.selected()] == ["s01001", "s02001"]

    @pytest.mark.parametrize("text,field", [
        ("constellation.colour = red\n", "constellation.colour"),
        ("constellation.num_planes = 3\nconstellation.num_planes = 4\n", "constellation.num_planes"),
        ("constellation.num_planes = many\n", "constellation.num_planes"),
        ("constellation.altitude_km = -1\n", "constellation.altitude_km"),
        ("links.max_links_per_sat = 6\n", "links.max_links_per_sat"),
        ("output.topology = maybe\n", "output.topology"),
        ("channel.gamma_per_m2 = 0.3\nchannel.sigma_toa_s = 1e-9\n", "channel.sigma_toa_s"),
        ("link_budget.snr = 10\n", "link_budget.bandwidth_hz"),
        ("simulation.satellites = s99\n", "simulation.satellites"),
        ("just words\n", "line 1"),
    ])
    def test_errors_name_the_field(self, tmp_path, text, field):
        with pytest.raises(ConfigurationError) as err:
            load_config(_conf(tmp_path, text))
        assert err.value.field == field

    def test_sigma_source(self, tmp_path):
        cfg = load_config(_conf(tmp_path, "channel.sigma_toa_s = 6.1e-9\n"
                                          "channel.propagation_velocity_ms = 3e8\n"))
        assert cfg.channel.gamma_per_m2 == pytest.approx(0.2986, abs=1e-4)

    def test_link_budget_source(self, tmp_path):
        cfg = load_config(_conf(tmp_path, "link_budget.bandwidth_hz = 1\n"
                                          "link_budget.signal_duration_s = 1\n"
                                          "link_budget.centre_frequency_hz = 1\n"
                                          "link_budget.snr = 2079002.079\n"
                                          "channel.propagation_velocity_ms = 3e8\n"))
        assert cfg.channel.gamma_per_m2 == pytest.approx(0.2994, abs=1e-4)

    def test_gamma_override_replaces_other_source(self, tmp_path):
        p = _conf(tmp_path, "channel.sigma_toa_s = 1e-9\n")
        cfg = load_config(p, {"channel.gamma_per_m2": 2.5, "simulation.mode": None})
        assert cfg.channel.gamma_per_m2 == pytest.approx(2.5)

    def test_override_unknown_key(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(_conf(tmp_path, ""), {"bogus.key": 1})

    def test_read_and_build_split(self, tmp_path):
        values = read_config_file(_conf(tmp_path, "simulation.duration_s = 100\n"))
        assert values == {"simulation.duration_s": 100.0}
        assert build_config(values).n_steps == 10


class TestCli:
    def test_success(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["--config", str(DEFAULT_CONF), "--output", str(out),
                     "--duration-s", "20", "--satellites", "s01001,s02001"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("anchored: mean ")
        assert lines[1].startswith("anchorless_per_sat: mean ")
        assert (out / "anchored_box_stats.csv").exists()
        assert not (out / "topology.csv").exists()

    def test_flags_override(self, tmp_path):
        out = tmp_path / "out"
        code = main(["--config", str(DEFAULT_CONF), "--output", str(out), "--mode", "anchored",
                     "--duration-s", "10", "--step-s", "5", "--gamma", "1.0",
                     "--epsilon0-deg", "10", "--satellites", "s01001", "--ephemeris",
                     "--topology"])
        assert code == EXIT_OK
        names = {p.name for p in out.iterdir()}
        assert "anchorless_per_sat_box_stats.csv" not in names
        assert {"ephemeris.csv", "topology.csv", "anchored_satellite_series.csv"} <= names
        rows = (out / "anchored_satellite_series.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in rows[1:]] == ["0", "5"]
        assert '"gamma_per_m2": 1.0' in (out / "summary.json").read_text()

    def test_missing_config(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "nope.conf"), "--output", str(tmp_path)]) == EXIT_CONFIG
        assert "configuration" in capsys.readouterr().err

    def test_bad_key(self, tmp_path, capsys):
        p = _conf(tmp_path, "constellation.colour = red\n")
        assert main(["--config", str(p), "--output", str(tmp_path)]) == EXIT_CONFIG
        assert "constellation.colour" in capsys.readouterr().err

    def test_no_output_dir(self, tmp_path):
        assert main(["--config", str(_conf(tmp_path, ""))]) == EXIT_CONFIG

    def test_bad_satellite_flag(self, tmp_path):
        assert main(["--config", str(DEFAULT_CONF), "--output", str(tmp_path),
                     "--satellites", "sat1"]) == EXIT_CONFIG

    def test_bad_station_catalog(self, tmp_path, capsys):
        cat = tmp_path / "gs.csv"
        cat.write_text("name,lat_deg,lon_deg,alt_m,min_elev_deg\nx,95,0,,\n", encoding="utf-8")
        code = main(["--config", str(DEFAULT_CONF), "--output", str(tmp_path / "o"),
                     "--stations", str(cat), "--duration-s", "10"])
        assert code == EXIT_IO
        assert "line 2" in capsys.readouterr().err

    def test_missing_station_catalog(self, tmp_path):
        code = main(["--config", str(DEFAULT_CONF), "--output", str(tmp_path / "o"),
                     "--stations", str(tmp_path / "absent.csv"), "--duration-s", "10"])
        assert code == EXIT_IO

    def test_mostly_degenerate(self, tmp_path):
        p = _conf(tmp_path, "constellation.num_planes = 2\nconstellation.sats_per_plane = 2\n"
                            "constellation.inclination_deg = 90\n"
                            "simulation.mode = anchorless_per_sat\nsimulation.duration_s = 10\n")
        assert main(["--config", str(p), "--output", str(tmp_path / "o")]) == EXIT_DEGENERATE

    def test_module_entry(self):
        import subprocess
        import sys
        proc = subprocess.run([sys.executable, "-m", "starlink_crb", "--help"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert "--epsilon0-deg" in proc.stdout
