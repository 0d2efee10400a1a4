"""Problem instance: arrays, entities, thresholds, noise and impairment models.

Everything in here is linear (watts, linear SINR).  dB conversions live at the
config boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (ArrayGeometry, PathLossModel, PolarPoint, ReflectionModel,
                      SelfInterferenceModel)


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def dbm2watt(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt2dbm(x):
    return 10.0 * np.log10(x) + 30.0


@dataclass(frozen=True)
class DownlinkUser:
    position: PolarPoint
    tau: float       # linear SINR threshold
    noise: float     # watts


@dataclass(frozen=True)
class UplinkUser:
    position: PolarPoint
    power: float     # watts
    tau: float


@dataclass(frozen=True)
class Target:
    position: PolarPoint
    tau: float
    reflection: ReflectionModel = field(default_factory=ReflectionModel)


@dataclass(frozen=True)
class PowerLevels:
    uplink_tx: np.ndarray
    noise_dl: np.ndarray
    noise_bs: float

    def __post_init__(self):
        if np.any(np.asarray(self.uplink_tx) <= 0) or np.any(np.asarray(self.noise_dl) <= 0) \
                or not self.noise_bs > 0:
            raise ValueError("all powers must be strictly positive")


@dataclass(frozen=True)
class Scenario:
    tx: ArrayGeometry
    rx: ArrayGeometry
    downlink: tuple[DownlinkUser, ...] = ()
    uplink: tuple[UplinkUser, ...] = ()
    targets: tuple[Target, ...] = ()
    noise_bs: float = 1e-12
    si: SelfInterferenceModel = field(default_factory=SelfInterferenceModel)
    pathloss: PathLossModel = field(default_factory=PathLossModel)
    strict_near_field: bool = False

    def __post_init__(self):
        # accept lists for convenience
        object.__setattr__(self, "downlink", tuple(self.downlink))
        object.__setattr__(self, "uplink", tuple(self.uplink))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.noise_bs > 0:
            raise ValueError("noise_bs must be positive")
        if not np.isclose(self.tx.wavelength, self.rx.wavelength):
            raise ValueError("transmit and receive arrays must share a carrier")

    @property
    def K(self) -> int:
        return len(self.downlink)

    @property
    def L(self) -> int:
        return len(self.uplink)

    @property
    def M(self) -> int:
        return len(self.targets)

    @property
    def powers(self) -> PowerLevels:
        return PowerLevels(
            uplink_tx=np.array([u.power for u in self.uplink], dtype=float),
            noise_dl=np.array([u.noise for u in self.downlink], dtype=float),
            noise_bs=self.noise_bs,
        )

    @property
    def tau_dl(self) -> np.ndarray:
        return np.array([u.tau for u in self.downlink], dtype=float)

    @property
    def tau_ul(self) -> np.ndarray:
        return np.array([u.tau for u in self.uplink], dtype=float)

    @property
    def tau_sensing(self) -> np.ndarray:
        return np.array([t.tau for t in self.targets], dtype=float)

    def entities(self):
        """Yield (label, PolarPoint) for every user and target."""
        for k, u in enumerate(self.downlink):
            yield f"downlink[{k}]", u.position
        for l, u in enumerate(self.uplink):
            yield f"uplink[{l}]", u.position
        for m, t in enumerate(self.targets):
            yield f"target[{m}]", t.position

    def beyond_rayleigh(self) -> list[str]:
        limit = max(self.tx.rayleigh_distance, self.rx.rayleigh_distance)
        return [name for name, p in self.entities() if p.range > limit]

    def with_thresholds(self, tau_dl=None, tau_ul=None, tau_sensing=None) -> "Scenario":
        """Copy with thresholds replaced (scalars broadcast, None keeps)."""
        def upd(items, taus):
            if taus is None:
                return items
            taus = np.broadcast_to(np.asarray(taus, dtype=float), (len(items),))
            return tuple(replace(it, tau=float(t)) for it, t in zip(items, taus))

        return replace(self, downlink=upd(self.downlink, tau_dl), uplink=upd(self.uplink, tau_ul),
                       targets=upd(self.targets, tau_sensing))
