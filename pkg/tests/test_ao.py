import dataclasses
import io

import numpy as np
import pytest

from nfisac.ao import AoSettings, InfeasibleScenario, feasibility_precheck, initialize, receive_step, run
from nfisac.channel import PolarPoint, build_channel_set
from nfisac.config import from_dict, load_bundled
from nfisac.metrics import all_sinrs, total_power, transmit_covariance
from nfisac.scenario import Target, dbm2watt, lin2db
from nfisac.transmit import DesignInputs

from helpers import random_scenario


@pytest.fixture(scope="module")
def paper():
    sc = load_bundled("paper_fig5").scenario
    ch = build_channel_set(sc)
    return sc, ch, run(sc, ch)


def test_settings_validation():
    with pytest.raises(ValueError):
        AoSettings(epsilon=0)
    with pytest.raises(ValueError):
        AoSettings(max_iterations=0)


def test_initialize_single_user():
    sc = load_bundled("single_user").scenario
    ch = build_channel_set(sc)
    bf = initialize(DesignInputs.from_scenario(sc, ch), AoSettings(init_power_dbm=20))
    assert len(bf.tx_users) == 1 and not bf.tx_sensing_cov
    f, h = bf.tx_users[0], ch.downlink[0]
    assert abs(np.vdot(f, h)) == pytest.approx(np.linalg.norm(f) * np.linalg.norm(h), rel=1e-12)
    assert total_power(bf) == pytest.approx(dbm2watt(20), rel=1e-12)


def test_initialize_paper(paper):
    sc, ch, _ = paper
    bf = initialize(DesignInputs.from_scenario(sc, ch))
    assert total_power(bf) == pytest.approx(1.0, rel=1e-12)     # 30 dBm
    r = transmit_covariance(bf)
    ev = np.linalg.eigvalsh(r)
    assert np.sum(ev > 1e-10 * ev[-1]) <= 4


def test_single_user_is_mrt():
    sc = load_bundled("single_user").scenario
    ch = build_channel_set(sc)
    res = run(sc, ch)
    h = ch.downlink[0]
    want = sc.tau_dl[0] * sc.downlink[0].noise / np.vdot(h, h).real
    assert res.objective == pytest.approx(want, rel=1e-6)
    assert res.converged and res.iterations == 2       # second solve confirms the fixed point
    assert res.trace.objectives[0] == pytest.approx(want, rel=1e-6)
    assert res.report.sinr["downlink"][0] == pytest.approx(sc.tau_dl[0], rel=1e-6)


def test_paper_trace_monotone_and_converged(paper):
    _, _, res = paper
    p = res.trace.objectives
    assert np.all(p[1:] <= p[:-1] * (1 + 1e-6))
    assert res.trace.is_monotone()
    assert res.converged and res.iterations <= 50
    assert abs(p[-1] - p[-2]) / p[-2] < 1e-4
    assert res.report.ok


def test_monotone_on_random_scenarios():
    rng = np.random.default_rng(11)
    for _ in range(4):
        sc = random_scenario(rng, n=8)
        try:
            res = run(sc, build_channel_set(sc))
        except InfeasibleScenario:
            continue
        assert res.trace.is_monotone()


def test_fixed_point_idempotence(paper):
    sc, ch, res = paper
    before = all_sinrs(ch, res.beamformers, sc.powers)
    w, u = receive_step(DesignInputs.from_scenario(sc, ch), transmit_covariance(res.beamformers))
    again = dataclasses.replace(res.beamformers, rx_uplink=w, rx_sensing=u)
    after = all_sinrs(ch, again, sc.powers)
    for kind in ("uplink", "sensing"):
        np.testing.assert_allclose(after[kind], before[kind], rtol=1e-8)


def test_deterministic(paper):
    sc, ch, res = paper
    again = run(sc, build_channel_set(sc))
    assert again.iterations == res.iterations
    np.testing.assert_allclose(again.trace.objectives, res.trace.objectives, rtol=1e-10)


def test_infeasible_uplink_names_user():
    cfg = load_bundled("infeasible_uplink")
    sc = cfg.scenario
    ch = build_channel_set(sc)
    cap = sc.powers.uplink_tx[0] * np.vdot(ch.uplink[0], ch.uplink[0]).real / sc.noise_bs
    assert sc.tau_ul[0] > cap
    with pytest.raises(InfeasibleScenario) as exc:
        run(sc, ch)
    assert "uplink[0]" in exc.value.binding and "uplink[0]" in str(exc.value)


def test_max_iterations_status(paper):
    sc, ch, _ = paper
    res = run(sc, ch, AoSettings(max_iterations=1))
    assert not res.converged and res.status == "MaxIterations" and res.iterations == 1


def test_trace_csv(paper):
    _, _, res = paper
    buf = io.StringIO()
    res.trace.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,objective_dBm,worst_slack,status"
    assert len(lines) == res.iterations + 1
    assert float(lines[-1].split(",")[1]) == pytest.approx(res.objective_dbm, abs=1e-6)


def test_no_transmit_variables():
    """Uplink-only scenario: nothing to transmit, objective 0."""
    sc = load_bundled("infeasible_uplink").scenario.with_thresholds(tau_ul=1.0)
    sc = dataclasses.replace(sc, downlink=())
    res = run(sc, build_channel_set(sc))
    assert res.objective == 0.0 and res.report.ok


def test_precheck_free_space_paper_numbers():
    raw = dict(load_bundled("paper_fig5").raw)
    raw["pathloss"] = {"model": "free-space", "offset_db": 0.0}
    sc = from_dict(raw).scenario
    rep = feasibility_precheck(sc, build_channel_set(sc))
    caps_db = lin2db(rep.uplink_caps)
    assert 1.0 <= caps_db[0] <= 2.0          # 9.4 m user
    assert np.all(caps_db < 12.0)
    assert len(rep.uplink_flags) == 2 and not rep.ok
    assert "uplink[0]" in rep.uplink_flags[0]


def test_precheck_calibrated_paper_passes(paper):
    sc, ch, _ = paper
    rep = feasibility_precheck(sc, ch)
    assert rep.ok and not rep.near_field_flags


def test_precheck_tiny_noise_never_flags(paper):
    sc, ch, _ = paper
    quiet = dataclasses.replace(sc, noise_bs=1e-30)
    assert feasibility_precheck(quiet, ch).ok


def test_precheck_far_entity():
    sc = load_bundled("paper_fig5").scenario
    far = dataclasses.replace(sc, targets=sc.targets + (Target(PolarPoint(30.0, 0.0), 100.0),))
    rep = feasibility_precheck(far, build_channel_set(far))
    assert rep.rayleigh_distance == pytest.approx(21.93, abs=0.01)
    assert rep.near_field_flags == ["target[2] beyond the Rayleigh distance"]
    assert any("FLAG target[2]" in line for line in rep.lines())
