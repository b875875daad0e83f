import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starlink_crb.constellation import (
    ConstellationConfig,
    OrbitalElements,
    SatelliteId,
    ShellPropagator,
    element_arrays,
    generate_walker,
    j2_secular_rates,
    mean_motion,
    orbital_period,
    propagate,
    write_ephemeris,
)
from starlink_crb.exceptions import ConfigurationError

DEFAULT = ConstellationConfig()
A = 6921.0
MU = 398600.4418


def _rot1(x):
    c, s = math.cos(x), math.sin(x)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot3(x):
    c, s = math.cos(x), math.sin(x)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _oracle_position(a, inc, raan, u):
    # perifocal -> inertial via explicit rotation product
    return _rot3(raan) @ _rot1(inc) @ _rot3(u) @ np.array([a, 0.0, 0.0])


class TestConfig:
    def test_defaults(self):
        assert DEFAULT.total_satellites == 1584
        assert DEFAULT.semi_major_axis_km == 6921.0

    @pytest.mark.parametrize("field,value", [
        ("altitude_km", 0.0), ("altitude_km", -5.0), ("inclination_deg", 181.0),
        ("inclination_deg", -1.0), ("num_planes", 0), ("sats_per_plane", 2.5),
    ])
    def test_invalid_names_field(self, field, value):
        with pytest.raises(ConfigurationError) as err:
            ConstellationConfig(**{field: value})
        assert err.value.field == field


class TestSatelliteId:
    def test_text_form(self):
        assert str(SatelliteId(1, 1)) == "s01001"
        assert str(SatelliteId(72, 22)) == "s72022"

    @given(st.integers(1, 99), st.integers(1, 999))
    def test_round_trip(self, plane, slot):
        sid = SatelliteId(plane, slot)
        assert SatelliteId.parse(str(sid)) == sid

    @pytest.mark.parametrize("bad", ["01001", "s0101", "x01001", "s01a01", ""])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            SatelliteId.parse(bad)

    def test_index_round_trip(self):
        for i in (0, 21, 22, 1583):
            assert SatelliteId.from_index(i, DEFAULT).index(DEFAULT) == i
        assert SatelliteId(2, 1).index(DEFAULT) == 22

    def test_index_outside_shell(self):
        with pytest.raises(ValueError):
            SatelliteId(73, 1).index(DEFAULT)


class TestGenerateWalker:
    def test_default_shell(self):
        sats = generate_walker(DEFAULT)
        assert len(sats) == 1584
        raans = sorted({round(math.degrees(el.raan_rad), 9) for _, el in sats})
        assert len(raans) == 72
        assert np.allclose(np.diff(raans), 5.0)
        per_plane = {}
        for sid, el in sats:
            per_plane.setdefault(sid.plane, set()).add(round(el.arg_latitude_rad, 12))
        assert all(len(v) == 22 for v in per_plane.values())

    def test_first_satellite_at_a00(self):
        sid, el = generate_walker(DEFAULT)[0]
        assert str(sid) == "s01001"
        assert el.raan_rad == 0.0 and el.arg_latitude_rad == 0.0
        state = propagate(el, 0.0, DEFAULT)
        np.testing.assert_allclose(state.position_km, [6921.0, 0.0, 0.0], atol=1e-9)

    def test_two_sats_half_orbit_apart(self):
        cfg = ConstellationConfig(num_planes=1, sats_per_plane=2)
        (_, e1), (_, e2) = generate_walker(cfg)
        assert e2.arg_latitude_rad - e1.arg_latitude_rad == pytest.approx(math.pi)
        p1 = propagate(e1, 0, cfg).position_km
        p2 = propagate(e2, 0, cfg).position_km
        np.testing.assert_allclose(p1, -p2, atol=1e-9)

    def test_phasing_offset(self):
        cfg = ConstellationConfig(num_planes=3, sats_per_plane=4, phasing_offset_deg=10.0)
        els = dict(generate_walker(cfg))
        assert math.degrees(els[SatelliteId(3, 2)].arg_latitude_rad) == pytest.approx(90 + 20)

    def test_arrays_match_records(self):
        raan, u = element_arrays(DEFAULT)
        els = [el for _, el in generate_walker(DEFAULT)]
        np.testing.assert_allclose(raan, [e.raan_rad for e in els], atol=1e-12)
        np.testing.assert_allclose(u, [e.arg_latitude_rad for e in els], atol=1e-12)


class TestMeanMotion:
    def test_default_value(self):
        n = mean_motion(DEFAULT)
        assert n == pytest.approx(math.sqrt(MU / A**3), rel=1e-15)
        assert n == pytest.approx(1.0965e-3, rel=1e-4)
        period = 2 * math.pi / n
        assert period == pytest.approx(5730.0, abs=1.0)
        # 1.59 h
        assert abs(period - 1.59 * 3600) / (1.59 * 3600) < 0.002

    def test_kepler_scaling(self):
        n1 = mean_motion(DEFAULT, 7000.0)
        n4 = mean_motion(DEFAULT, 28000.0)
        assert n4 == pytest.approx(n1 / 8, rel=1e-14)

    def test_step_size(self):
        assert round(orbital_period(DEFAULT)) / 573 == 10.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            mean_motion(DEFAULT, 0.0)


class TestJ2:
    def _elements(self, inc_deg, a=A):
        return OrbitalElements(a, math.radians(inc_deg), 0.0, 0.0)

    def test_polar_no_node_drift(self):
        raan_rate, _ = j2_secular_rates(self._elements(90), DEFAULT)
        assert raan_rate == pytest.approx(0.0, abs=1e-20)

    def test_default_node_drift(self):
        # textbook form: -3/2 n J2 (R/p)^2 cos i with p = a (1 - e^2), e = 0
        n = math.sqrt(MU / A**3)
        expected = -1.5 * n * 1.08263e-3 * (6371.0 / A) ** 2 * math.cos(math.radians(53))
        raan_rate, _ = j2_secular_rates(self._elements(53), DEFAULT)
        assert raan_rate == pytest.approx(expected, rel=1e-12)
        assert raan_rate == pytest.approx(-9.08e-7, rel=2e-3)
        assert math.degrees(raan_rate) * 86400 == pytest.approx(-4.5, abs=0.05)

    def test_latitude_rate_oracle(self):
        n = math.sqrt(MU / A**3)
        k = 1.5 * 1.08263e-3 * (6371.0 / A) ** 2 * n
        s2 = math.sin(math.radians(53)) ** 2
        perigee = k * (2 - 2.5 * s2)
        anomaly = k * (1 - 1.5 * s2)
        _, u_rate = j2_secular_rates(self._elements(53), DEFAULT)
        assert u_rate == pytest.approx(n + perigee + anomaly, rel=1e-14)

    def test_zero_j2_is_keplerian(self):
        cfg = ConstellationConfig(j2=0.0)
        raan_rate, u_rate = j2_secular_rates(self._elements(53), cfg)
        assert raan_rate == 0.0
        assert u_rate == mean_motion(cfg)


class TestPropagate:
    def test_identity_at_epoch(self):
        for sid, el in generate_walker(DEFAULT)[::97]:
            state = propagate(el, 0.0, DEFAULT)
            np.testing.assert_allclose(
                state.position_km,
                _oracle_position(el.semi_major_axis_km, el.inclination_rad,
                                 el.raan_rad, el.arg_latitude_rad),
                atol=1e-8,
            )

    def test_matches_rotation_oracle_over_time(self):
        el = generate_walker(DEFAULT)[300][1]
        raan_rate, u_rate = j2_secular_rates(el, DEFAULT)
        for t in (0.0, 123.4, 2865.0, 5730.0):
            got = propagate(el, t, DEFAULT).position_km
            want = _oracle_position(A, el.inclination_rad, el.raan_rad + raan_rate * t,
                                    el.arg_latitude_rad + u_rate * t)
            np.testing.assert_allclose(got, want, atol=1e-8)

    def test_one_period_drift(self):
        el = generate_walker(DEFAULT)[0][1]
        p0 = propagate(el, 0.0, DEFAULT).position_km
        pT = propagate(el, 5730.0, DEFAULT).position_km
        offset = np.linalg.norm(pT - p0)
        raan_rate, u_rate = j2_secular_rates(el, DEFAULT)
        want = np.linalg.norm(_oracle_position(A, el.inclination_rad, raan_rate * 5730.0,
                                               u_rate * 5730.0) - p0)
        assert offset == pytest.approx(want, rel=1e-9)
        # small J2 drift, tens of km
        assert 20.0 < offset < 40.0

    def test_zero_j2_periodic(self):
        cfg = ConstellationConfig(j2=0.0)
        for _, el in generate_walker(cfg)[::131]:
            s0 = propagate(el, 0.0, cfg)
            sT = propagate(el, orbital_period(cfg), cfg)
            np.testing.assert_allclose(sT.position_km, s0.position_km, atol=1e-6 * A)
            np.testing.assert_allclose(sT.velocity_kms, s0.velocity_kms, atol=1e-6 * 7.6)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            propagate(generate_walker(DEFAULT)[0][1], -1.0, DEFAULT)

    @settings(max_examples=200, deadline=None)
    @given(idx=st.integers(0, 1583), t=st.floats(0.0, 2e5))
    def test_circular_invariants(self, idx, t):
        el = generate_walker(DEFAULT)[idx][1]
        s = propagate(el, t, DEFAULT)
        r = np.linalg.norm(s.position_km)
        v = np.linalg.norm(s.velocity_kms)
        _, u_rate = j2_secular_rates(el, DEFAULT)
        assert abs(r - A) / A < 1e-6
        assert abs(np.dot(s.position_km, s.velocity_kms)) < 1e-6 * A * u_rate * A
        assert abs(v - u_rate * A) / (u_rate * A) < 1e-6

    def test_velocity_is_time_derivative(self):
        el = generate_walker(DEFAULT)[500][1]
        h = 1e-3
        t = 1000.0
        fd = (propagate(el, t + h, DEFAULT).position_km
              - propagate(el, t - h, DEFAULT).position_km) / (2 * h)
        v = propagate(el, t, DEFAULT).velocity_kms
        # analytic velocity omits the node-drift term, bounded by |raan_rate| * a
        raan_rate, _ = j2_secular_rates(el, DEFAULT)
        assert np.linalg.norm(v - fd) <= abs(raan_rate) * A * 1.0001


class TestShellPropagator:
    def test_matches_scalar_path(self):
        prop = ShellPropagator(DEFAULT)
        sats = generate_walker(DEFAULT)
        for t in (0.0, 777.0):
            pos, vel = prop(t)
            for i in (0, 21, 22, 999, 1583):
                s = propagate(sats[i][1], t, DEFAULT)
                np.testing.assert_allclose(pos[i], s.position_km, atol=1e-9)
                np.testing.assert_allclose(vel[i], s.velocity_kms, atol=1e-12)


def test_ephemeris_file(tmp_path):
    cfg = ConstellationConfig(num_planes=2, sats_per_plane=3)
    path = tmp_path / "eph.csv"
    write_ephemeris(path, cfg, [0.0, 10.0])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "sat_id,t_s,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms"
    assert len(lines) == 1 + 2 * 6
    first = lines[1].split(",")
    assert first[0] == "s01001" and first[1] == "0"
    assert float(first[2]) == pytest.approx(6921.0)
    # at least nine significant digits survive the round trip
    x = float(lines[7].split(",")[2])
    pos, _ = ShellPropagator(cfg)(10.0)
    assert x == pytest.approx(pos[0, 0], rel=1e-10)
