import csv

import numpy as np
import pytest

from nfisac.baselines import Scheme, run_fd
from nfisac.channel import PolarPoint, near_field_response
from nfisac.config import from_dict, load_bundled
from nfisac.experiments import (GAIN_FLOOR_DB, RESULT_HEADER, PolarGrid, ResultRow, combined_grid, combined_patterns,
                                parse_schemes, pattern_peaks, range_cut, run_sweep, to_db, uplink_grid,
                                uplink_patterns, write_grid_csv, write_range_cut_csv, write_results_csv)
from nfisac.metrics import transmit_covariance

SMALL = {
    "carrier_ghz": 28, "tx_elements": 8, "rx_elements": 8, "spacing": "half-wavelength", "bs_noise_dbm": -94,
    "downlink": [{"range_m": 5.0, "angle_deg": -30, "tau_db": 6, "noise_dbm": -94}],
    "uplink": [{"range_m": 6.0, "angle_deg": 40, "power_dbm": -30, "tau_db": 3}],
    "targets": [{"range_m": 4.0, "angle_deg": 5, "tau_db": 3, "zeta_db": -50}],
    "pathloss": {"offset_db": 30},
}


@pytest.fixture(scope="module")
def solved():
    cfg = from_dict(SMALL)
    sc = cfg.scenario
    return sc, run_fd(sc, cfg.ao).runs[0].beamformers


def test_default_grid():
    g = PolarGrid.default()
    assert g.shape == (361, 281)
    assert g.theta_deg[0] == -90 and g.theta_deg[-1] == 90 and g.theta_deg[181] == 0.5
    assert g.range_m[0] == 1 and g.range_m[-1] == 15 and g.range_m[40] == 3.0 and g.range_m[100] == 6.0


def test_grid_parse():
    g = PolarGrid.parse("-10:10:5,2:3:0.5")
    np.testing.assert_array_equal(g.theta_deg, [-10, -5, 0, 5, 10])
    np.testing.assert_array_equal(g.range_m, [2, 2.5, 3])
    r, t = g.points()
    assert r.shape == t.shape == (15,)
    assert r[:3].tolist() == [2, 2.5, 3] and np.allclose(t[:3], np.deg2rad(-10))
    for bad in ("0:1:1", "-100:0:1,1:2:1", "0:1:1,0:2:1", "0:1:0,1:2:1", "a:b:c,1:2:1"):
        with pytest.raises(ValueError):
            PolarGrid.parse(bad)


def test_to_db():
    np.testing.assert_allclose(to_db([1.0, 0.1, 0.01]), [0, -10, -20])
    np.testing.assert_allclose(to_db([2.0, 1.0], reference=1.0), [10 * np.log10(2), 0])
    assert to_db([1.0, 0.0])[1] == GAIN_FLOOR_DB
    assert np.all(to_db(np.zeros(3)) == GAIN_FLOOR_DB)


def test_pattern_peaks():
    x = np.linspace(0, 1, 201)
    y = -40 + 30 * np.exp(-((x - 0.3) / 0.03) ** 2) + 38 * np.exp(-((x - 0.7) / 0.03) ** 2)
    y += 2 * np.sin(40 * np.pi * x)          # ripples below the threshold
    idx, prom = pattern_peaks(y, 10.0)
    assert x[idx].tolist() == pytest.approx([0.3, 0.7], abs=0.01)
    assert np.all(prom >= 10)


def test_pattern_peaks_at_edges():
    y = np.array([0.0, -20, -30, -20, -5])
    idx, _ = pattern_peaks(y, 10.0)
    assert idx.tolist() == [0, 4]
    assert pattern_peaks(np.linspace(-30, 0, 7), 10.0)[0].tolist() == [6]


def test_combined_patterns_oracle(solved):
    sc, bf = solved
    r_x = transmit_covariance(bf)
    for r, deg in [(4.0, 5.0), (2.0, -60.0), (10.0, 33.3)]:
        a = near_field_response(sc.tx, PolarPoint.from_degrees(r, deg))
        want = [abs(np.vdot(u, a)) ** 2 * np.vdot(a, r_x @ a).real for u in bf.rx_sensing]
        got = combined_patterns(sc, bf, r, np.deg2rad(deg))[:, 0]
        np.testing.assert_allclose(got, want, rtol=1e-10)


def test_uplink_patterns_oracle(solved):
    sc, bf = solved
    a = near_field_response(sc.rx, PolarPoint.from_degrees(6.0, 40.0))
    got = uplink_patterns(sc, bf, 6.0, np.deg2rad(40.0))[0, 0]
    assert got == pytest.approx(abs(np.vdot(bf.rx_uplink[0], a)) ** 2, rel=1e-12)


def test_patterns_chunking_consistent(solved):
    sc, bf = solved
    g = PolarGrid.parse("-90:90:1,1:15:0.25")    # > one chunk of points
    r, t = g.points()
    full = combined_patterns(sc, bf, r, t)
    part = combined_patterns(sc, bf, r[-10:], t[-10:])
    np.testing.assert_array_equal(full[:, -10:], part)


def test_grids_and_csv(solved, tmp_path):
    sc, bf = solved
    g = PolarGrid.parse("-20:20:10,3:5:1")
    cg = combined_grid(sc, bf, g)
    assert set(cg.patterns) == {"target0", "sum"}
    assert cg.patterns["sum"].shape == g.shape
    np.testing.assert_allclose(cg.patterns["sum"], cg.patterns["target0"])
    assert cg.angular_profile_db("sum").max() == 0.0
    write_grid_csv(tmp_path / "c.csv", cg)
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["r_m", "theta_deg", "gain_db_target0", "gain_db_sum"]
    assert len(rows) == 1 + 5 * 3
    assert rows[1][:2] == ["3.0000", "-20.0000"] and rows[2][:2] == ["4.0000", "-20.0000"]
    assert max(float(r[3]) for r in rows[1:]) == 0.0

    ug = uplink_grid(sc, bf, g)
    assert set(ug.patterns) == {"uplink0"}

    cut = range_cut(sc, bf, 5.0, np.array([3.0, 4.0, 5.0]))
    write_range_cut_csv(tmp_path / "r.csv", cut)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert len(rows) == 4 and rows[1][1] == "5.0000"
    # the target sits on this cut at 4 m
    assert int(np.argmax(cut.patterns["sum"])) == 1


def test_result_rows(tmp_path):
    rows = [
        ResultRow("FD", 4.0, -45.123456789, True, 3, 1.5e-9, 12.345),
        ResultRow("HD", None, -np.inf, True, 2, 0.0),
        ResultRow("FarField", 12.0, np.nan, False, 0, np.nan, 5.0, "MismatchInfeasible: x"),
    ]
    write_results_csv(tmp_path / "a.csv", rows)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == ",".join(RESULT_HEADER)
    assert lines[1] == "FD,4,-45.123457,true,3,1.500e-09,"
    assert lines[2] == "HD,,-inf,true,2,0.000e+00,"
    assert lines[3] == "FarField,12,nan,false,0,nan,"
    write_results_csv(tmp_path / "b.csv", rows, timing=True)
    assert (tmp_path / "b.csv").read_text().splitlines()[1].endswith(",12.3")


def test_parse_schemes():
    assert parse_schemes(None) == list(Scheme)
    assert parse_schemes("fd, CommOnly,farfield") == [Scheme.FD, Scheme.COMM_ONLY, Scheme.FAR_FIELD]
    with pytest.raises(ValueError, match="unknown scheme"):
        parse_schemes("FD,XX")


def test_run_sweep_order_and_workers():
    cfg = from_dict(SMALL)
    values = [3.0, 9.0, 6.0]
    serial = run_sweep(cfg, "tau_dl_db", values, [Scheme.FD, Scheme.HD])
    assert [(r.scheme, r.sweep_value) for r in serial] == [
        ("FD", 3.0), ("FD", 9.0), ("FD", 6.0), ("HD", 3.0), ("HD", 9.0), ("HD", 6.0)]
    assert all(r.feasible for r in serial)
    parallel = run_sweep(cfg, "tau_dl_db", values, [Scheme.FD, Scheme.HD], workers=3)
    assert [r.cells() for r in parallel] == [r.cells() for r in serial]


def test_run_sweep_records_failures():
    cfg = from_dict(SMALL)
    rows = run_sweep(cfg, "tau_ul_db", [3.0, 80.0], [Scheme.FD])
    assert rows[0].feasible and not rows[1].feasible
    assert rows[1].error.startswith("InfeasibleScenario")


def test_run_sweep_rejects_bad_values():
    cfg = load_bundled("single_user")
    with pytest.raises(ValueError):
        run_sweep(cfg, "nope", [1.0])
