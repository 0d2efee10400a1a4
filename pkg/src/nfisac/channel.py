"""Array geometry, near/far-field responses and channel construction.

The BS uses two uniform linear arrays (transmit and receive) laid along the
y-axis with symmetric element indices ``(-N+1)/2, ..., (N-1)/2``.  Angles are
measured from broadside, so an entity at range ``r`` and angle ``theta`` sits at
``[r cos(theta), r sin(theta)]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class NearFieldViolation(ValueError):
    """An entity lies beyond the Rayleigh distance with strict validation on."""


@dataclass(frozen=True)
class ArrayGeometry:
    num_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")

    @classmethod
    def half_wavelength(cls, num_elements: int, carrier_hz: float) -> "ArrayGeometry":
        lam = SPEED_OF_LIGHT / carrier_hz
        return cls(num_elements, lam / 2.0, lam)

    @property
    def indices(self) -> np.ndarray:
        """Symmetric element indices (half-integers when N is even)."""
        n = self.num_elements
        return np.arange(n) - (n - 1) / 2.0

    @property
    def positions(self) -> np.ndarray:
        """Element coordinates, shape (N, 2)."""
        pos = np.zeros((self.num_elements, 2))
        pos[:, 1] = self.indices * self.spacing
        return pos

    @property
    def aperture(self) -> float:
        return (self.num_elements - 1) * self.spacing

    @property
    def rayleigh_distance(self) -> float:
        return 2.0 * self.aperture ** 2 / self.wavelength


@dataclass(frozen=True)
class PolarPoint:
    range: float
    angle: float  # radians from broadside

    def __post_init__(self):
        if not np.isfinite(self.range) or self.range < 0:
            raise ValueError(f"range must be finite and >= 0, got {self.range}")

    @classmethod
    def from_degrees(cls, range_m: float, angle_deg: float) -> "PolarPoint":
        return cls(float(range_m), float(np.deg2rad(angle_deg)))

    @property
    def cartesian(self) -> np.ndarray:
        return self.range * np.array([np.cos(self.angle), np.sin(self.angle)])


def element_distance(geom: ArrayGeometry, p: PolarPoint, n) -> np.ndarray:
    """Distance from element index ``n`` (scalar or array) to point ``p``."""
    n = np.asarray(n, dtype=float)
    d = geom.spacing
    r = p.range
    return np.sqrt(r ** 2 + (n * d) ** 2 - 2.0 * r * n * d * np.sin(p.angle))


def near_field_response(geom: ArrayGeometry, p: PolarPoint) -> np.ndarray:
    r_n = element_distance(geom, p, geom.indices)
    return np.exp(-2j * np.pi * r_n / geom.wavelength)


def near_field_responses(geom: ArrayGeometry, ranges, angles) -> np.ndarray:
    """Stacked responses for many points; ``ranges``/``angles`` (radians) broadcast.

    Returns shape ``(G, N)`` with one row per point.
    """
    r, th = np.broadcast_arrays(np.asarray(ranges, dtype=float), np.asarray(angles, dtype=float))
    r, th = r.ravel()[:, None], th.ravel()[:, None]
    nd = (geom.indices * geom.spacing)[None, :]
    r_n = np.sqrt(r ** 2 + nd ** 2 - 2.0 * r * nd * np.sin(th))
    return np.exp(-2j * np.pi * r_n / geom.wavelength)


def far_field_response(geom: ArrayGeometry, angle: float) -> np.ndarray:
    phase = 2.0 * np.pi / geom.wavelength * geom.indices * geom.spacing * np.sin(angle)
    return np.exp(1j * phase)


def array_response(geom: ArrayGeometry, p: PolarPoint, model: str = "near") -> np.ndarray:
    if model == "near":
        return near_field_response(geom, p)
    if model == "far":
        return far_field_response(geom, p.angle)
    raise ValueError(f"unknown response model {model!r}")


@dataclass(frozen=True)
class PathLossModel:
    """Free-space (Friis) power gain with a calibration offset in dB."""

    offset_db: float = 0.0

    def __call__(self, r: float, wavelength: float) -> float:
        return path_gain(r, wavelength, self)


def path_gain(r: float, wavelength: float, model: PathLossModel | None = None) -> float:
    if not r > 0:
        raise ValueError(f"range must be positive, got {r}")
    offset = 0.0 if model is None else model.offset_db
    return (wavelength / (4.0 * np.pi * r)) ** 2 * 10.0 ** (offset / 10.0)


@dataclass(frozen=True)
class ReflectionModel:
    """Round-trip target gain.

    With ``zeta`` set, that value is returned as-is.  Otherwise the monostatic
    radar range equation with radar cross-section ``rcs`` (m^2) is used.
    """

    rcs: float = 1.0
    zeta: float | None = None


def target_gain(r: float, wavelength: float, model: ReflectionModel | None = None) -> float:
    model = model or ReflectionModel()
    if model.zeta is not None:
        return float(model.zeta)
    if not r > 0:
        raise ValueError(f"range must be positive, got {r}")
    if not model.rcs > 0:
        raise ValueError(f"rcs must be positive, got {model.rcs}")
    return model.rcs * wavelength ** 2 / ((4.0 * np.pi) ** 3 * r ** 4)


def user_channel(geom: ArrayGeometry, p: PolarPoint, beta: float, model: str = "near") -> np.ndarray:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return np.sqrt(beta) * array_response(geom, p, model)


def target_channel(tx: ArrayGeometry, rx: ArrayGeometry, p: PolarPoint, zeta: float,
                   model: str = "near") -> np.ndarray:
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    a_t = array_response(tx, p, model)
    a_r = array_response(rx, p, model)
    return np.sqrt(zeta) * np.outer(a_r, a_t.conj())


@dataclass(frozen=True)
class SelfInterferenceModel:
    """Residual SI after cancellation: LoS coupling between co-located arrays.

    The receive array is parallel to the transmit array, displaced by
    ``offset_wavelengths`` along broadside.
    """

    residual_db: float = -110.0
    offset_wavelengths: float = 10.0

    @property
    def residual(self) -> float:
        return 10.0 ** (self.residual_db / 10.0)


def si_channel(tx: ArrayGeometry, rx: ArrayGeometry, si: SelfInterferenceModel | None = None,
               *, residual: float | None = None) -> np.ndarray:
    si = si or SelfInterferenceModel()
    rho = si.residual if residual is None else residual
    if rho < 0:
        raise ValueError("SI residual attenuation must be non-negative")
    offset = si.offset_wavelengths * tx.wavelength
    ty = tx.indices * tx.spacing
    ry = rx.indices * rx.spacing
    dist = np.sqrt(offset ** 2 + (ry[:, None] - ty[None, :]) ** 2)
    return np.sqrt(rho) * np.exp(-2j * np.pi * dist / tx.wavelength)


@dataclass
class ChannelSet:
    """All channels of one problem instance.

    ``downlink[k]`` has length N_t, ``uplink[l]`` length N_r, ``targets[m]`` and
    ``si`` are N_r x N_t.  The target array responses and round-trip gains are
    kept alongside because the sensing filter and the initializer need them.
    """

    downlink: list[np.ndarray]
    uplink: list[np.ndarray]
    targets: list[np.ndarray]
    si: np.ndarray
    target_tx: list[np.ndarray] = field(default_factory=list)
    target_rx: list[np.ndarray] = field(default_factory=list)
    target_gains: list[float] = field(default_factory=list)

    @property
    def n_tx(self) -> int:
        return self.si.shape[1]

    @property
    def n_rx(self) -> int:
        return self.si.shape[0]

    @cached_property
    def agg_a(self) -> np.ndarray:
        return sum(self.targets, np.zeros_like(self.si)) + self.si

    @cached_property
    def agg_b(self) -> list[np.ndarray]:
        return [self.agg_a - g for g in self.targets]

    def subset(self, downlink=True, uplink=True) -> "ChannelSet":
        """Copy with the downlink and/or uplink users removed (targets kept)."""
        return ChannelSet(
            downlink=list(self.downlink) if downlink else [],
            uplink=list(self.uplink) if uplink else [],
            targets=list(self.targets),
            si=self.si,
            target_tx=list(self.target_tx),
            target_rx=list(self.target_rx),
            target_gains=list(self.target_gains),
        )


def build_channel_set(scenario, model: str = "near") -> ChannelSet:
    """Realize every channel of ``scenario``.

    ``model="far"`` swaps every entity's array response for the planar-wave one
    while keeping path gains at the true ranges.  The SI coupling is a property
    of the hardware and is left unchanged.
    """
    if scenario.strict_near_field:
        offenders = scenario.beyond_rayleigh()
        if offenders:
            raise NearFieldViolation("entities beyond the Rayleigh distance: " + ", ".join(offenders))
    tx, rx = scenario.tx, scenario.rx
    lam = tx.wavelength
    pl = scenario.pathloss

    downlink = [user_channel(tx, u.position, path_gain(u.position.range, lam, pl), model)
                for u in scenario.downlink]
    uplink = [user_channel(rx, u.position, path_gain(u.position.range, lam, pl), model)
              for u in scenario.uplink]
    gains = [target_gain(t.position.range, lam, t.reflection) for t in scenario.targets]
    a_t = [array_response(tx, t.position, model) for t in scenario.targets]
    a_r = [array_response(rx, t.position, model) for t in scenario.targets]
    targets = [np.sqrt(z) * np.outer(ar, at.conj()) for z, at, ar in zip(gains, a_t, a_r)]
    return ChannelSet(
        downlink=downlink,
        uplink=uplink,
        targets=targets,
        si=si_channel(tx, rx, scenario.si),
        target_tx=a_t,
        target_rx=a_r,
        target_gains=gains,
    )
