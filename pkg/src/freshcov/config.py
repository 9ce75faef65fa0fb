"""Scenario and experiment configuration: defaults, JSON parsing, validation.

Two scenario kinds are supported:

* ``single-precharged`` — one sensor at the centre of a disc-shaped area,
  battery charged once with a fixed budget, sink at a configurable distance.
* ``multi-eh`` — several energy-harvesting sensors placed in a rectangle
  with the sink at its centre.

Every field has a default so a minimal config file only states deviations;
numeric defaults follow the reference parameter table used across the
experiment suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .params import (
    ChannelParams,
    CorrelationParams,
    EnergyParams,
    TimingParams,
    dbm_to_mw,
)

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "ExperimentConfig",
    "SINGLE_PRECHARGED",
    "MULTI_EH",
    "parse_scenario",
    "parse_experiment",
    "load_experiment",
    "scenario_defaults",
]

SINGLE_PRECHARGED = "single-precharged"
MULTI_EH = "multi-eh"

COVERAGE_MODES = ("error", "cic", "disc-analytic")
CHANNEL_FIDELITIES = ("analytic-outage", "geometric", "scripted")
SWEEP_AXES = (
    "eta",
    "distance",
    "n_sensors",
    "compute_energy",
    "reuse_prob",
    "max_retx",
    "battery_budget",
)


class ConfigError(ValueError):
    """A configuration document violates the schema; message carries the path."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved physical scenario for the simulator and the analysis."""

    kind: str
    ch: ChannelParams
    corr: CorrelationParams
    energy: EnergyParams
    timing: TimingParams
    # Geometry: the single kind monitors a disc of ``area_radius`` centred on
    # the sensor; the multi kind monitors a rectangle with the sink inside.
    area_radius: float = 50.0
    sensor_sink_distance: float = 100.0
    area_width: float = 250.0
    area_height: float = 250.0
    n_sensors: int = 10
    sink_position: Tuple[float, float] = (125.0, 125.0)
    positions: Optional[Tuple[Tuple[float, float], ...]] = None
    placement_seed: int = 20_240_101
    observation_range: float = 100.0
    # Scoring.
    target_ratio: float = 0.9
    penalty: float = 1.0
    grid_resolution: float = 1.0
    coverage_mode: str = "error"
    channel_fidelity: str = "analytic-outage"
    outcome_script: Optional[Tuple[bool, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in (SINGLE_PRECHARGED, MULTI_EH):
            raise ConfigError(f"scenario.kind must be one of "
                              f"{SINGLE_PRECHARGED!r}, {MULTI_EH!r}; got {self.kind!r}")
        if self.coverage_mode not in COVERAGE_MODES:
            raise ConfigError(
                f"scenario.coverage_mode must be one of {COVERAGE_MODES}, "
                f"got {self.coverage_mode!r}"
            )
        if self.channel_fidelity not in CHANNEL_FIDELITIES:
            raise ConfigError(
                f"scenario.channel_fidelity must be one of {CHANNEL_FIDELITIES}, "
                f"got {self.channel_fidelity!r}"
            )
        if not 0 < self.target_ratio <= 1:
            raise ConfigError("scenario.target_ratio must be in (0, 1]")
        if self.penalty < 0:
            raise ConfigError("scenario.penalty must be >= 0")
        if self.grid_resolution <= 0:
            raise ConfigError("scenario.grid_resolution must be > 0")
        if self.kind == SINGLE_PRECHARGED:
            if self.n_sensors != 1:
                raise ConfigError(
                    "scenario.n_sensors must be 1 for the single-precharged kind"
                )
            if self.area_radius <= 0 or self.sensor_sink_distance <= 0:
                raise ConfigError(
                    "scenario.area_radius and sensor_sink_distance must be > 0"
                )
        else:
            if self.n_sensors < 1:
                raise ConfigError("scenario.n_sensors must be >= 1")
            if self.area_width <= 0 or self.area_height <= 0:
                raise ConfigError("scenario.area dimensions must be > 0")
            if not (
                0 <= self.sink_position[0] <= self.area_width
                and 0 <= self.sink_position[1] <= self.area_height
            ):
                raise ConfigError("scenario.sink_position must lie inside the area")
        if self.observation_range < 0:
            raise ConfigError("scenario.observation_range must be >= 0")
        if self.coverage_mode == "disc-analytic" and self.n_sensors != 1:
            raise ConfigError(
                "disc-analytic coverage scoring is exact only for one sensor"
            )
        if self.positions is not None and len(self.positions) != self.n_sensors:
            raise ConfigError(
                f"scenario.positions lists {len(self.positions)} sensors "
                f"but n_sensors is {self.n_sensors}"
            )
        if self.channel_fidelity == "scripted" and self.outcome_script is None:
            raise ConfigError(
                "scripted channel fidelity requires scenario.outcome_script"
            )

    # -- derived views ----------------------------------------------------

    @property
    def harvesting(self) -> bool:
        return self.kind == MULTI_EH

    @property
    def initial_battery(self) -> float:
        """Pre-charged sensors start at their budget, harvesters at the cap."""
        if self.harvesting:
            return self.energy.battery_cap
        return self.energy.battery_budget

    @property
    def battery_cap(self) -> float:
        if self.harvesting:
            return self.energy.battery_cap
        return self.energy.battery_budget

    def sensor_positions(self) -> Tuple[Tuple[float, float], ...]:
        """Resolved sensor coordinates (placement is its own RNG stream)."""
        if self.kind == SINGLE_PRECHARGED:
            return ((0.0, 0.0),)
        if self.positions is not None:
            return self.positions
        rng = np.random.default_rng(self.placement_seed)
        xs = rng.uniform(0.0, self.area_width, self.n_sensors)
        ys = rng.uniform(0.0, self.area_height, self.n_sensors)
        return tuple((float(x), float(y)) for x, y in zip(xs, ys))

    def sink_xy(self) -> Tuple[float, float]:
        if self.kind == SINGLE_PRECHARGED:
            # Place the sink along the x axis at the configured uplink length.
            return (self.sensor_sink_distance, 0.0)
        return self.sink_position

    def area(self) -> float:
        if self.kind == SINGLE_PRECHARGED:
            return math.pi * self.area_radius**2
        return self.area_width * self.area_height

    def to_single_scenario(self):
        """View as the closed-form analysis input (single kind only)."""
        from .analysis import SingleSensorScenario

        if self.kind != SINGLE_PRECHARGED:
            raise ConfigError(
                "closed-form analysis applies to the single-precharged kind only"
            )
        return SingleSensorScenario(
            ch=self.ch,
            corr=self.corr,
            energy=self.energy,
            timing=self.timing,
            sensor_sink_distance=self.sensor_sink_distance,
            area=self.area(),
            target_ratio=self.target_ratio,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Round-trippable plain-dict form (powers manifests and the bridge)."""
        return {
            "kind": self.kind,
            "channel": {
                "tx_power_mw": self.ch.tx_power,
                "path_loss_exp": self.ch.path_loss_exp,
                "noise_mw": self.ch.noise_power,
                "sink_intensity": self.ch.sink_intensity,
                "reuse_prob": self.ch.reuse_prob,
                "bandwidth_hz": self.ch.bandwidth,
                "data_size_edge_bits": self.ch.data_size_edge,
                "data_size_local_bits": self.ch.data_size_local,
                "slot_duration_s": self.ch.slot_duration,
                "max_retx": self.ch.max_retx,
            },
            "correlation": {
                "beta1": self.corr.beta1,
                "beta2": self.corr.beta2,
                "err_threshold": self.corr.err_threshold,
            },
            "energy": {
                "sense_mj": self.energy.sense_energy,
                "tx_mj": self.energy.tx_energy,
                "compute_mj": self.energy.compute_energy,
                "battery_budget_mj": self.energy.battery_budget,
                "battery_cap_mj": self.energy.battery_cap,
                "harvest_min_mj": self.energy.harvest_min,
                "harvest_max_mj": self.energy.harvest_max,
            },
            "timing": {
                "round_slots": self.timing.round_len,
                "edge_compute_slots": self.timing.compute_slots_edge,
                "local_compute_slots": self.timing.compute_slots_local,
                "rounds_per_episode": self.timing.rounds_per_episode,
            },
            "geometry": {
                "area_radius_m": self.area_radius,
                "sensor_sink_distance_m": self.sensor_sink_distance,
                "width_m": self.area_width,
                "height_m": self.area_height,
                "n_sensors": self.n_sensors,
                "sink_position": list(self.sink_position),
                "positions": (
                    [list(p) for p in self.positions]
                    if self.positions is not None
                    else None
                ),
                "placement_seed": self.placement_seed,
                "observation_range_m": self.observation_range,
            },
            "target_ratio": self.target_ratio,
            "penalty": self.penalty,
            "grid_resolution_m": self.grid_resolution,
            "coverage_mode": self.coverage_mode,
            "channel_fidelity": self.channel_fidelity,
            "outcome_script": (
                list(self.outcome_script)
                if self.outcome_script is not None
                else None
            ),
        }


def scenario_defaults(kind: str) -> Dict[str, Any]:
    """Default configuration document for a scenario kind."""
    if kind not in (SINGLE_PRECHARGED, MULTI_EH):
        raise ConfigError(
            f"scenario.kind must be one of {SINGLE_PRECHARGED!r}, "
            f"{MULTI_EH!r}; got {kind!r}"
        )
    single = kind == SINGLE_PRECHARGED
    return {
        "kind": kind,
        "channel": {
            # The mW forms, when given, take precedence over the dBm forms.
            "tx_power_dbm": 15.0,
            "tx_power_mw": None,
            "path_loss_exp": 4.0,
            "noise_dbm": -100.0,
            "noise_mw": None,
            "sink_intensity": 1e-4,
            "reuse_prob": 1.0,
            "bandwidth_hz": 1e7,
            "data_size_edge_bits": 6000.0,
            "data_size_local_bits": 500.0,
            "slot_duration_s": 0.01,
            "max_retx": 3,
        },
        "correlation": {"beta1": 0.0045, "beta2": 1.35, "err_threshold": 0.6},
        "energy": {
            "sense_mj": 10.0,
            "tx_mj": 13.55,
            "compute_mj": 12.0 if single else 20.0,
            "battery_budget_mj": 400.0,
            "battery_cap_mj": 400.0 if single else 50.0,
            "harvest_min_mj": 0.0 if single else 1.5,
            "harvest_max_mj": 0.0 if single else 4.5,
        },
        "timing": {
            "round_slots": 8,
            "edge_compute_slots": 1,
            "local_compute_slots": 2,
            "rounds_per_episode": 20,
        },
        "geometry": {
            "area_radius_m": 50.0,
            "sensor_sink_distance_m": 100.0,
            "width_m": 250.0,
            "height_m": 250.0,
            "n_sensors": 1 if single else 10,
            "sink_position": [125.0, 125.0],
            "positions": None,
            "placement_seed": 20_240_101,
            "observation_range_m": 100.0,
        },
        "target_ratio": 0.9,
        "penalty": 1.0,
        "grid_resolution_m": 1.0,
        "coverage_mode": "disc-analytic" if single else "error",
        "channel_fidelity": "analytic-outage",
        "outcome_script": None,
    }


def _expect_mapping(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _expect_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _expect_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _merge(defaults: Dict[str, Any], overrides: Mapping[str, Any], path: str) -> Dict[str, Any]:
    out = dict(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            raise ConfigError(f"{path}.{key}: unknown field")
        if isinstance(defaults[key], dict) and isinstance(value, Mapping):
            out[key] = _merge(defaults[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


def parse_scenario(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a (partial) JSON document."""
    doc = _expect_mapping(doc, "scenario")
    kind = doc.get("kind", SINGLE_PRECHARGED)
    merged = _merge(scenario_defaults(kind), doc, "scenario")

    chd = merged["channel"]
    if chd.get("tx_power_mw") is not None:
        tx_power = _expect_number(chd["tx_power_mw"], "scenario.channel.tx_power_mw")
    else:
        tx_power = dbm_to_mw(
            _expect_number(chd["tx_power_dbm"], "scenario.channel.tx_power_dbm")
        )
    if chd.get("noise_mw") is not None:
        noise = _expect_number(chd["noise_mw"], "scenario.channel.noise_mw")
    else:
        noise = dbm_to_mw(
            _expect_number(chd["noise_dbm"], "scenario.channel.noise_dbm")
        )
    try:
        ch = ChannelParams(
            tx_power=tx_power,
            path_loss_exp=_expect_number(chd["path_loss_exp"], "scenario.channel.path_loss_exp"),
            noise_power=noise,
            sink_intensity=_expect_number(chd["sink_intensity"], "scenario.channel.sink_intensity"),
            reuse_prob=_expect_number(chd["reuse_prob"], "scenario.channel.reuse_prob"),
            bandwidth=_expect_number(chd["bandwidth_hz"], "scenario.channel.bandwidth_hz"),
            data_size_edge=_expect_number(chd["data_size_edge_bits"], "scenario.channel.data_size_edge_bits"),
            data_size_local=_expect_number(chd["data_size_local_bits"], "scenario.channel.data_size_local_bits"),
            slot_duration=_expect_number(chd["slot_duration_s"], "scenario.channel.slot_duration_s"),
            max_retx=_expect_int(chd["max_retx"], "scenario.channel.max_retx"),
        )
        corrd = merged["correlation"]
        corr = CorrelationParams(
            beta1=_expect_number(corrd["beta1"], "scenario.correlation.beta1"),
            beta2=_expect_number(corrd["beta2"], "scenario.correlation.beta2"),
            err_threshold=_expect_number(corrd["err_threshold"], "scenario.correlation.err_threshold"),
        )
        ed = merged["energy"]
        energy = EnergyParams(
            sense_energy=_expect_number(ed["sense_mj"], "scenario.energy.sense_mj"),
            tx_energy=_expect_number(ed["tx_mj"], "scenario.energy.tx_mj"),
            compute_energy=_expect_number(ed["compute_mj"], "scenario.energy.compute_mj"),
            battery_budget=_expect_number(ed["battery_budget_mj"], "scenario.energy.battery_budget_mj"),
            battery_cap=_expect_number(ed["battery_cap_mj"], "scenario.energy.battery_cap_mj"),
            harvest_min=_expect_number(ed["harvest_min_mj"], "scenario.energy.harvest_min_mj"),
            harvest_max=_expect_number(ed["harvest_max_mj"], "scenario.energy.harvest_max_mj"),
        )
        td = merged["timing"]
        timing = TimingParams(
            round_len=_expect_int(td["round_slots"], "scenario.timing.round_slots"),
            compute_slots_edge=_expect_int(td["edge_compute_slots"], "scenario.timing.edge_compute_slots"),
            compute_slots_local=_expect_int(td["local_compute_slots"], "scenario.timing.local_compute_slots"),
            rounds_per_episode=_expect_int(td["rounds_per_episode"], "scenario.timing.rounds_per_episode"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    gd = merged["geometry"]
    positions = gd.get("positions")
    if positions is not None:
        positions = tuple(
            (float(p[0]), float(p[1]))
            for p in positions
        )
    sink_pos = gd["sink_position"]
    script = merged["outcome_script"]
    try:
        return ScenarioConfig(
            kind=kind,
            ch=ch,
            corr=corr,
            energy=energy,
            timing=timing,
            area_radius=_expect_number(gd["area_radius_m"], "scenario.geometry.area_radius_m"),
            sensor_sink_distance=_expect_number(gd["sensor_sink_distance_m"], "scenario.geometry.sensor_sink_distance_m"),
            area_width=_expect_number(gd["width_m"], "scenario.geometry.width_m"),
            area_height=_expect_number(gd["height_m"], "scenario.geometry.height_m"),
            n_sensors=_expect_int(gd["n_sensors"], "scenario.geometry.n_sensors"),
            sink_position=(float(sink_pos[0]), float(sink_pos[1])),
            positions=positions,
            placement_seed=_expect_int(gd["placement_seed"], "scenario.geometry.placement_seed"),
            observation_range=_expect_number(gd["observation_range_m"], "scenario.geometry.observation_range_m"),
            target_ratio=_expect_number(merged["target_ratio"], "scenario.target_ratio"),
            penalty=_expect_number(merged["penalty"], "scenario.penalty"),
            grid_resolution=_expect_number(merged["grid_resolution_m"], "scenario.grid_resolution_m"),
            coverage_mode=merged["coverage_mode"],
            channel_fidelity=merged["channel_fidelity"],
            outcome_script=tuple(script) if script is not None else None,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """A runnable experiment: scenario + policy + sweep + replication plan."""

    scenario: ScenarioConfig
    policy: "PolicySpec"  # noqa: F821 - imported lazily to avoid a cycle
    sweep_axis: Optional[str] = None
    sweep_values: Tuple[Any, ...] = ()
    replications: int = 16
    seeds: Tuple[int, ...] = field(default_factory=tuple)
    output_dir: str = "out"

    def __post_init__(self) -> None:
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(
                f"sweep.axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}"
            )
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")

    def resolved_seeds(self) -> Tuple[int, ...]:
        if self.seeds:
            return self.seeds
        return tuple(range(self.replications))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "policy": self.policy.to_dict(),
            "sweep": (
                {"axis": self.sweep_axis, "values": list(self.sweep_values)}
                if self.sweep_axis is not None
                else None
            ),
            "replications": self.replications,
            "seeds": list(self.resolved_seeds()),
            "output_dir": self.output_dir,
        }


def apply_sweep_value(scenario: ScenarioConfig, axis: str, value: Any) -> ScenarioConfig:
    """Return a copy of the scenario with one swept parameter replaced."""
    from dataclasses import replace

    if axis == "eta":
        return replace(scenario, target_ratio=float(value))
    if axis == "distance":
        return replace(scenario, sensor_sink_distance=float(value))
    if axis == "n_sensors":
        return replace(scenario, n_sensors=int(value), positions=None)
    if axis == "compute_energy":
        return replace(
            scenario, energy=_replace_energy(scenario.energy, compute_energy=float(value))
        )
    if axis == "reuse_prob":
        return replace(scenario, ch=_replace_channel(scenario.ch, reuse_prob=float(value)))
    if axis == "max_retx":
        return replace(scenario, ch=_replace_channel(scenario.ch, max_retx=int(value)))
    if axis == "battery_budget":
        return replace(
            scenario,
            energy=_replace_energy(
                scenario.energy,
                battery_budget=float(value),
                battery_cap=(
                    float(value)
                    if scenario.kind == SINGLE_PRECHARGED
                    else scenario.energy.battery_cap
                ),
            ),
        )
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _replace_energy(energy: EnergyParams, **kw) -> EnergyParams:
    from dataclasses import replace

    return replace(energy, **kw)


def _replace_channel(ch: ChannelParams, **kw) -> ChannelParams:
    from dataclasses import replace

    return replace(ch, **kw)


def parse_experiment(doc: Mapping[str, Any]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a JSON document."""
    from .policies import PolicySpec

    doc = _expect_mapping(doc, "config")
    known = {"scenario", "policy", "sweep", "replications", "seeds", "base_seed", "output_dir"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"config.{key}: unknown field")
    scenario = parse_scenario(doc.get("scenario", {}))
    policy = PolicySpec.from_dict(doc.get("policy", {"kind": "probability-scd"}))

    sweep_axis = None
    sweep_values: Tuple[Any, ...] = ()
    if doc.get("sweep") is not None:
        sweep = _expect_mapping(doc["sweep"], "config.sweep")
        if "axis" not in sweep:
            raise ConfigError("config.sweep.axis: required")
        sweep_axis = sweep["axis"]
        values = sweep.get("values", [])
        if not isinstance(values, Sequence) or isinstance(values, (str, bytes)):
            raise ConfigError("config.sweep.values: expected a list")
        sweep_values = tuple(values)

    replications = doc.get("replications", 16)
    replications = _expect_int(replications, "config.replications")

    seeds: Tuple[int, ...] = ()
    if "seeds" in doc and doc["seeds"] is not None:
        raw = doc["seeds"]
        if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)):
            raise ConfigError("config.seeds: expected a list of integers")
        seeds = tuple(_expect_int(s, "config.seeds[]") for s in raw)
    elif "base_seed" in doc:
        base = _expect_int(doc["base_seed"], "config.base_seed")
        seeds = tuple(base + i for i in range(replications))

    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("config.output_dir: expected a string")

    return ExperimentConfig(
        scenario=scenario,
        policy=policy,
        sweep_axis=sweep_axis,
        sweep_values=sweep_values,
        replications=replications,
        seeds=seeds,
        output_dir=output_dir,
    )


def load_experiment(path: str) -> ExperimentConfig:
    """Load and validate an experiment config file (JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_experiment(doc)
