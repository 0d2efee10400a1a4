"""Shared builders for the test suite."""
import numpy as np

from nfisac.channel import ArrayGeometry, PathLossModel, PolarPoint, ReflectionModel, SelfInterferenceModel
from nfisac.scenario import DownlinkUser, Scenario, Target, UplinkUser, db2lin, dbm2watt

CARRIER = 28e9


def geometry(n: int) -> ArrayGeometry:
    return ArrayGeometry.half_wavelength(n, CARRIER)


def random_scenario(rng, n=8, K=2, L=2, M=2, tau_db=3.0, offset_db=30.0, zeta_db=-50.0):
    """Scattered entities 4-12 m away with moderate thresholds."""
    def point():
        return PolarPoint.from_degrees(rng.uniform(4, 12), rng.uniform(-70, 70))

    tau = float(db2lin(tau_db))
    return Scenario(
        tx=geometry(n), rx=geometry(n),
        downlink=[DownlinkUser(point(), tau, float(dbm2watt(-94))) for _ in range(K)],
        uplink=[UplinkUser(point(), float(dbm2watt(-30)), tau) for _ in range(L)],
        targets=[Target(point(), tau, ReflectionModel(zeta=float(db2lin(zeta_db)))) for _ in range(M)],
        noise_bs=float(dbm2watt(-94)),
        si=SelfInterferenceModel(-110.0, 10.0),
        pathloss=PathLossModel(offset_db),
    )


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, n=8, K=2, L=2, M=2, si=1e-2):
    """Unit-scale random ChannelSet with rank-one target channels."""
    from nfisac.channel import ChannelSet

    a_t = [np.exp(2j * np.pi * rng.random(n)) for _ in range(M)]
    a_r = [np.exp(2j * np.pi * rng.random(n)) for _ in range(M)]
    zeta = [float(rng.uniform(0.1, 1.0)) for _ in range(M)]
    return ChannelSet(
        downlink=[crandn(rng, n) for _ in range(K)],
        uplink=[crandn(rng, n) for _ in range(L)],
        targets=[np.sqrt(z) * np.outer(r, t.conj()) for z, t, r in zip(zeta, a_t, a_r)],
        si=si * crandn(rng, n, n),
        target_tx=a_t, target_rx=a_r, target_gains=zeta,
    )


def random_powers(rng, K=2, L=2):
    from nfisac.scenario import PowerLevels

    return PowerLevels(rng.uniform(0.5, 2.0, L), rng.uniform(0.05, 0.2, K), float(rng.uniform(0.05, 0.2)))


def random_psd(rng, n, rank=None):
    x = crandn(rng, n, rank or n)
    return x @ x.conj().T
