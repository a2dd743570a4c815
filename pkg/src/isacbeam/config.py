"""Scenario files: JSON in dBm / dB / degrees, converted to linear units here."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .conic import SolverSettings
from .designs import SearchSettings
from .errors import ConfigError
from .model import SampleGrid, Scene, Target, db_loss_to_linear, dbm_to_watts, desired_beampattern, make_scene

DESIGNS = ("optimal", "zf", "separate", "sensing_only")

_LINK = {
    "angle_deg": {"type": "number", "minimum": -90, "maximum": 90},
    "distance_m": {"type": "number", "exclusiveMinimum": 0},
    "path_loss_db": {"type": "number", "minimum": 0},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_antennas", "targets", "cu", "cu_noise_power_dbm", "power_budget_dbm"],
    "properties": {
        "n_antennas": {"type": "integer", "minimum": 2},
        "antenna_spacing_ratio": {"type": "number", "exclusiveMinimum": 0},
        "targets": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["angle_deg"],
                "properties": {
                    **_LINK,
                    "eavesdropper": {"type": "boolean"},
                    "noise_power_dbm": {"type": "number"},
                },
            },
        },
        "cu": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **_LINK,
                "channel": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "cu_noise_power_dbm": {"type": "number"},
        "power_budget_dbm": {"type": "number"},
        "design": {"enum": list(DESIGNS)},
        "secrecy_rate_bpshz": {"type": "number", "minimum": 0},
        "beam_width_deg": {"type": "number", "exclusiveMinimum": 0},
        "n_samples": {"type": "integer", "minimum": 2},
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_grid": {"type": "integer", "minimum": 2},
                "n_refine": {"type": "integer", "minimum": 0},
                "n_subdivide": {"type": "integer", "minimum": 1},
                "gamma_lo": {"type": "number", "exclusiveMinimum": 0},
                "gamma_hi": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol_feas": {"type": "number", "exclusiveMinimum": 0},
                "tol_gap": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
            },
        },
        "output_dir": {"type": "string"},
        "sweep": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
}


@dataclass
class ScenarioConfig:
    scene: Scene
    design: str = "optimal"
    secrecy_rate_bpshz: float = 0.0
    beam_width_deg: float = 5.0
    n_samples: int = 201
    search: SearchSettings = field(default_factory=SearchSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_dir: str = "out"
    sweep: list[float] = field(default_factory=list)

    def grid(self) -> SampleGrid:
        return desired_beampattern(self.scene, np.deg2rad(self.beam_width_deg), self.n_samples)


def _target(d: dict) -> Target:
    eve = bool(d.get("eavesdropper", False))
    noise = d.get("noise_power_dbm")
    if eve and noise is None:
        raise ConfigError(f"eavesdropper at {d['angle_deg']} deg needs noise_power_dbm")
    return Target(
        angle=float(np.deg2rad(d["angle_deg"])),
        distance=float(d.get("distance_m", 1.0)),
        reference_pathloss=float(db_loss_to_linear(d.get("path_loss_db", 0.0))),
        is_eavesdropper=eve,
        noise_power=None if noise is None else float(dbm_to_watts(noise)),
    )


def parse_config(doc: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    cu = doc["cu"]
    if ("channel" in cu) == ("angle_deg" in cu):
        raise ConfigError("cu: give exactly one of 'channel' or 'angle_deg'")
    try:
        targets = [_target(t) for t in doc["targets"]]
        kwargs = dict(
            cu_noise_power=float(dbm_to_watts(doc["cu_noise_power_dbm"])),
            power_budget=float(dbm_to_watts(doc["power_budget_dbm"])),
            spacing_ratio=float(doc.get("antenna_spacing_ratio", 0.5)),
        )
        if "channel" in cu:
            ch = np.array([complex(re, im) for re, im in cu["channel"]])
            scene = make_scene(doc["n_antennas"], targets, cu_channel=ch, **kwargs)
        else:
            scene = make_scene(
                doc["n_antennas"], targets,
                cu_angle=float(np.deg2rad(cu["angle_deg"])),
                cu_distance=float(cu.get("distance_m", 1.0)),
                cu_pathloss=float(db_loss_to_linear(cu.get("path_loss_db", 0.0))),
                **kwargs,
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sweep = [float(x) for x in doc.get("sweep", [])]
    if sweep != sorted(sweep):
        raise ConfigError("sweep values must be sorted ascending")
    return ScenarioConfig(
        scene=scene,
        design=doc.get("design", "optimal"),
        secrecy_rate_bpshz=float(doc.get("secrecy_rate_bpshz", 0.0)),
        beam_width_deg=float(doc.get("beam_width_deg", 5.0)),
        n_samples=int(doc.get("n_samples", 201)),
        search=SearchSettings(**doc.get("search", {})),
        solver=SolverSettings(**doc.get("solver", {})),
        output_dir=doc.get("output_dir", "out"),
        sweep=sweep,
    )


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(doc)


def channel_hash(scene: Scene) -> str:
    """Digest of the channel matrix at 12 significant digits."""
    H = scene.channel_matrix()
    text = ";".join(f"{z.real:.12e},{z.imag:.12e}" for z in H.ravel())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


REFERENCE_TARGETS_DEG = (-10, 10, -30, 30, 80, -80, -50, 50)
REFERENCE_EAVESDROPPERS_DEG = (-30, 30)


def reference_config(cu_angle_deg: float = 0.0, **overrides) -> dict:
    """Reference desk-scale scenario (8 antennas, 8 targets) as a config document."""
    doc = {
        "n_antennas": 8,
        "antenna_spacing_ratio": 0.5,
        "targets": [
            {"angle_deg": a, "path_loss_db": 70, "eavesdropper": a in REFERENCE_EAVESDROPPERS_DEG,
             **({"noise_power_dbm": -60} if a in REFERENCE_EAVESDROPPERS_DEG else {})}
            for a in REFERENCE_TARGETS_DEG
        ],
        "cu": {"angle_deg": cu_angle_deg, "path_loss_db": 70},
        "cu_noise_power_dbm": -60,
        "power_budget_dbm": 20,
        "beam_width_deg": 5,
        "n_samples": 201,
    }
    doc.update(overrides)
    return doc
