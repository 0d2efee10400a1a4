"""Scenario configuration files (TOML) and their schema.

A config describes one scenario plus solver, AO, baseline and sweep options.
All quantities are in the units named by the key suffix (``_dbm``, ``_db``,
``_m``, ``_deg``, ``_ghz``); conversion to linear/SI happens here and nowhere
else.

Example::

    carrier_ghz = 28
    tx_elements = 65
    rx_elements = 65
    spacing = "half-wavelength"
    bs_noise_dbm = -94

    [[downlink]]
    range_m = 9.2
    angle_deg = -40
    tau_db = 12
    noise_dbm = -94
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import tomli

from .ao import AoSettings
from .channel import (SPEED_OF_LIGHT, ArrayGeometry, PathLossModel, PolarPoint, ReflectionModel,
                      SelfInterferenceModel)
from .scenario import DownlinkUser, Scenario, Target, UplinkUser, db2lin, dbm2watt
from .sdp import SdpSettings
from .transmit import DESIGN_SDP_SETTINGS

SWEEP_VARIABLES = ("tau_dl_db", "tau_ul_db", "tau_sensing_db", "pathloss_offset_db", "si_residual_db")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_angle = {"type": "number", "minimum": -90, "maximum": 90}


def _entity(extra: dict, required: list[str]) -> dict:
    props = {"range_m": _pos, "angle_deg": _angle, "tau_db": _num, **extra}
    return {"type": "object", "properties": props, "required": ["range_m", "angle_deg", "tau_db", *required],
            "additionalProperties": False}


SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "carrier_ghz": _pos,
        "tx_elements": {"type": "integer", "minimum": 1},
        "rx_elements": {"type": "integer", "minimum": 1},
        "spacing": {"oneOf": [{"const": "half-wavelength"}, _pos]},
        "bs_noise_dbm": _num,
        "strict_near_field": {"type": "boolean"},
        "downlink": {"type": "array", "items": _entity({"noise_dbm": _num}, ["noise_dbm"])},
        "uplink": {"type": "array", "items": _entity({"power_dbm": _num}, ["power_dbm"])},
        "targets": {
            "type": "array",
            "items": {
                **_entity({"rcs_m2": _pos, "zeta_db": _num}, []),
                "oneOf": [{"required": ["rcs_m2"]}, {"required": ["zeta_db"]}],
            },
        },
        "si": {
            "type": "object",
            "properties": {"residual_db": _num, "offset_wavelengths": _pos},
            "additionalProperties": False,
        },
        "pathloss": {
            "type": "object",
            "properties": {"model": {"const": "free-space"}, "offset_db": _num},
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "tol_gap": _pos, "tol_feas": _pos, "tol_psd": _pos, "tol_infeas": _pos,
                "max_iterations": {"type": "integer", "minimum": 1},
                "step_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "embedding": {"enum": ["complex", "real"]},
            },
            "additionalProperties": False,
        },
        "ao": {
            "type": "object",
            "properties": {
                "epsilon": _pos,
                "max_iterations": {"type": "integer", "minimum": 1},
                "init_power_dbm": _num,
            },
            "additionalProperties": False,
        },
        "far_field": {
            "type": "object",
            "properties": {
                "protocol": {"enum": ["mismatch", "ff-world"]},
                "reoptimize_rx": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "variable": {"enum": list(SWEEP_VARIABLES)},
                "values": {"type": "array", "items": _num, "minItems": 1},
            },
            "required": ["variable", "values"],
            "additionalProperties": False,
        },
    },
    "required": ["carrier_ghz", "tx_elements", "rx_elements", "spacing", "bs_noise_dbm"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str], source: str = ""):
        self.errors = list(errors)
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(self.errors))


@dataclass(frozen=True)
class FarFieldOptions:
    protocol: str = "mismatch"
    reoptimize_rx: bool = False


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]


@dataclass
class ExperimentConfig:
    scenario: Scenario
    ao: AoSettings
    far_field: FarFieldOptions = field(default_factory=FarFieldOptions)
    sweep: SweepSpec | None = None
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def _path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _messages(err: jsonschema.ValidationError) -> list[str]:
    if err.validator == "required":
        missing = err.message.split("'")[1]
        base = _path(err)
        return [f"{missing if base == '<root>' else base + '.' + missing}: required field missing"]
    if err.validator == "oneOf" and isinstance(err.instance, dict):
        return [f"{_path(err)}: give exactly one of rcs_m2 or zeta_db"]
    if err.validator == "oneOf":
        return [f"{_path(err)}: must be \"half-wavelength\" or a positive length in meters"]
    return [f"{_path(err)}: {err.message}"]


def validate(data: dict) -> list[str]:
    """All schema violations, sorted by location."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path]):
        errors.extend(_messages(err))
    return errors


def _point(d: dict) -> PolarPoint:
    return PolarPoint.from_degrees(d["range_m"], d["angle_deg"])


def from_dict(data: dict, source: str = "") -> ExperimentConfig:
    errors = validate(data)
    if errors:
        raise ConfigError(errors, source)
    lam = SPEED_OF_LIGHT / (data["carrier_ghz"] * 1e9)
    spacing = lam / 2.0 if data["spacing"] == "half-wavelength" else float(data["spacing"])
    tx = ArrayGeometry(data["tx_elements"], spacing, lam)
    rx = ArrayGeometry(data["rx_elements"], spacing, lam)

    downlink = [DownlinkUser(_point(u), float(db2lin(u["tau_db"])), float(dbm2watt(u["noise_dbm"])))
                for u in data.get("downlink", [])]
    uplink = [UplinkUser(_point(u), float(dbm2watt(u["power_dbm"])), float(db2lin(u["tau_db"])))
              for u in data.get("uplink", [])]
    targets = []
    for t in data.get("targets", []):
        refl = (ReflectionModel(zeta=float(db2lin(t["zeta_db"]))) if "zeta_db" in t
                else ReflectionModel(rcs=float(t["rcs_m2"])))
        targets.append(Target(_point(t), float(db2lin(t["tau_db"])), refl))
    if not (downlink or uplink or targets):
        raise ConfigError(["<root>: at least one of downlink, uplink or targets must be non-empty"], source)

    si_cfg = data.get("si", {})
    si = SelfInterferenceModel(si_cfg.get("residual_db", -110.0), si_cfg.get("offset_wavelengths", 10.0))
    pathloss = PathLossModel(data.get("pathloss", {}).get("offset_db", 0.0))
    scenario = Scenario(tx, rx, downlink, uplink, targets, float(dbm2watt(data["bs_noise_dbm"])), si, pathloss,
                        bool(data.get("strict_near_field", False)))

    base = DESIGN_SDP_SETTINGS
    solver = SdpSettings(**{**{k: getattr(base, k) for k in base.__dataclass_fields__}, **data.get("solver", {})})
    ao = AoSettings(**{**data.get("ao", {}), "sdp": solver})
    ff = FarFieldOptions(**data.get("far_field", {}))
    sweep = None
    if "sweep" in data:
        sweep = SweepSpec(data["sweep"]["variable"], tuple(float(v) for v in data["sweep"]["values"]))
    return ExperimentConfig(scenario, ao, ff, sweep, data.get("name", Path(source).stem if source else ""),
                            copy.deepcopy(data))


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"<root>: TOML syntax error: {exc}"], str(path)) from exc
    return from_dict(data, str(path))


def bundled_configs() -> list[str]:
    root = resources.files("nfisac") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def bundled_path(name: str) -> Path:
    """Filesystem path of a config shipped with the package (``paper_fig5`` etc.)."""
    ref = resources.files("nfisac") / "configs" / f"{name.removesuffix('.toml')}.toml"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled config {name!r}; available: {', '.join(bundled_configs())}")
    return Path(str(ref))


def load_bundled(name: str) -> ExperimentConfig:
    return parse_config(bundled_path(name))


def apply_sweep_value(data: dict, variable: str, value: float) -> dict:
    """Copy of raw config ``data`` with one sweep variable set everywhere it applies."""
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"unknown sweep variable {variable!r}; choose from {', '.join(SWEEP_VARIABLES)}")
    out = copy.deepcopy(data)
    out.pop("sweep", None)
    section = {"tau_dl_db": "downlink", "tau_ul_db": "uplink", "tau_sensing_db": "targets"}.get(variable)
    if section:
        for item in out.get(section, []):
            item["tau_db"] = float(value)
    elif variable == "pathloss_offset_db":
        out.setdefault("pathloss", {})["offset_db"] = float(value)
    else:
        out.setdefault("si", {})["residual_db"] = float(value)
    return out


def sweep_values(spec: str) -> tuple[float, ...]:
    """``"4,6,8"`` or ``"start:stop:step"`` (stop inclusive) to a tuple of floats."""
    spec = spec.strip()
    if ":" in spec:
        try:
            start, stop, step = (float(v) for v in spec.split(":"))
        except ValueError:
            raise ValueError(f"bad range {spec!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {spec!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    try:
        return tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"bad value list {spec!r}") from None
