import csv
import subprocess
import sys

import numpy as np
import pytest

from nfisac import cli
from nfisac import io as mio
from nfisac.ao import NumericalFailure
from nfisac.channel import build_channel_set
from nfisac.config import load_bundled

SMALL_TOML = """
carrier_ghz = 28
tx_elements = 8
rx_elements = 8
spacing = "half-wavelength"
bs_noise_dbm = -94

[[downlink]]
range_m = 5.0
angle_deg = -30
tau_db = 6
noise_dbm = -94

[[uplink]]
range_m = 6.0
angle_deg = 40
power_dbm = -30
tau_db = 3

[[targets]]
range_m = 4.0
angle_deg = 5
tau_db = 3
zeta_db = -50

[pathloss]
model = "free-space"
offset_db = 30

[sweep]
variable = "tau_dl_db"
values = [3, 6]
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL_TOML)
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_single_user_matches_mrt(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["solve", "--config", "single_user", "--out", str(out)]) == cli.EXIT_OK
    rows = read_rows(out / "results.csv")
    assert len(rows) == 1 and rows[0]["scheme"] == "FD" and rows[0]["feasible"] == "true"
    sc = load_bundled("single_user").scenario
    h = build_channel_set(sc).downlink[0]
    want = 10 * np.log10(sc.tau_dl[0] * sc.downlink[0].noise / np.vdot(h, h).real) + 30
    assert float(rows[0]["objective_dbm"]) == pytest.approx(want, abs=1e-5)
    assert rows[0]["objective_dbm"] == "-50.670856"
    assert rows[0]["wall_ms"] == ""
    mats = mio.load_matrices(out / "beamformers.txt")
    assert mats["f[0]"].shape == (16, 1)
    assert (out / "trace.csv").read_text().startswith("iteration,")
    assert "FD:" in capsys.readouterr().out


def test_solve_hd_writes_both_slots(small_cfg, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["solve", "--config", small_cfg, "--scheme", "HD", "--out", str(out)]) == 0
    names = mio.load_matrices(out / "beamformers.txt")
    assert "slot1.f[0]" in names and "slot2.w[0]" in names
    assert (out / "trace_slot2.csv").exists()


def test_infeasible_uplink_exit_code(tmp_path, capsys):
    code = cli.main(["solve", "--config", "infeasible_uplink", "--out", str(tmp_path)])
    assert code == cli.EXIT_INFEASIBLE == 3
    assert "uplink[0]" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL_TOML.replace("tau_db = 6\nnoise_dbm = -94\n", "tau_db = 6\n"))
    assert cli.main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG == 2
    assert "downlink[0].noise_dbm: required field missing" in capsys.readouterr().err
    assert cli.main(["solve", "--config", "no_such_config", "--out", str(tmp_path)]) == 2
    assert cli.main(["solve", "--config", "single_user", "--scheme", "FD,HD", "--out", str(tmp_path)]) == 2
    assert cli.main(["sweep", "--config", "single_user", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve"])
    assert exc.value.code == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg, scheme):
        raise NumericalFailure("progress stalled")
    monkeypatch.setattr(cli, "run_scheme", boom)
    assert cli.main(["solve", "--config", "single_user", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL == 4
    assert "numerical failure" in capsys.readouterr().err


def test_precheck(capsys):
    assert cli.main(["precheck", "--config", "infeasible_uplink"]) == 3
    assert "uplink[0]" in capsys.readouterr().out
    assert cli.main(["precheck", "--config", "single_user"]) == 0


def test_beampattern_files(small_cfg, tmp_path):
    out = tmp_path / "bp"
    args = ["beampattern", "--config", small_cfg, "--out", str(out), "--grid=-90:90:1,1:15:0.5", "--angle", "5"]
    assert cli.main(args) == 0
    comb = read_rows(out / "combined.csv")
    assert len(comb) == 181 * 29
    assert max(float(r["gain_db_sum"]) for r in comb) == 0.0
    up = read_rows(out / "uplink.csv")
    best = max(up, key=lambda r: float(r["gain_db_uplink0"]))
    assert abs(float(best["theta_deg"]) - 40) <= 3     # 8-element main lobe is ~15 degrees wide
    cut = read_rows(out / "range_cut.csv")
    assert {r["theta_deg"] for r in cut} == {"5.0000"}


def test_beampattern_single_kind(small_cfg, tmp_path):
    out = tmp_path / "bp"
    assert cli.main(["beampattern", "--config", small_cfg, "--out", str(out), "--which", "uplink",
                     "--grid", "0:10:5,1:2:1"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["uplink.csv"]


def test_sweep_uses_config_section_and_is_reproducible(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", small_cfg, "--out", str(a), "--scheme", "FD,CommOnly"]) == 0
    assert cli.main(["sweep", "--config", small_cfg, "--out", str(b), "--scheme", "FD,CommOnly",
                     "--workers", "2"]) == 0
    rows = read_rows(a / "results.csv")
    assert [(r["scheme"], r["sweep_value"]) for r in rows] == [
        ("FD", "3"), ("FD", "6"), ("CommOnly", "3"), ("CommOnly", "6")]
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_sweep_override_and_unknown_variable(small_cfg, tmp_path):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", small_cfg, "--out", str(out), "--scheme", "FD",
                     "--variable", "tau_ul_db", "--values", "0,10,80"]) == 0
    rows = read_rows(out / "results.csv")
    assert [r["feasible"] for r in rows] == ["true", "true", "false"]
    assert cli.main(["sweep", "--config", small_cfg, "--out", str(out), "--variable", "carrier_ghz",
                     "--values", "1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nfisac", "precheck", "--config", "single_user"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
