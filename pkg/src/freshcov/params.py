"""Immutable parameter groups shared by the analytical and simulation layers.

All quantities are stored in linear units: mW for powers, mJ for energies,
Hz for bandwidth, bits for payload sizes, seconds for durations, and integer
slots for protocol timing.  Decibel inputs are converted once when a
configuration is parsed (see :mod:`freshcov.config`); everything downstream
is linear-scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "ChannelParams",
    "CorrelationParams",
    "EnergyParams",
    "TimingParams",
    "AoiState",
    "MODE_EDGE",
    "MODE_LOCAL",
    "dbm_to_mw",
    "mw_to_dbm",
]

# Compute-mode selectors used across the package.  "edge" offloads the raw
# sample to the sink's server; "local" compresses on the sensor first.
MODE_EDGE = "edge"
MODE_LOCAL = "local"


def dbm_to_mw(dbm: float) -> float:
    """Convert a dBm power level to milliwatts."""
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    """Convert a milliwatt power level to dBm."""
    if mw <= 0:
        raise ValueError(f"power must be positive to express in dBm, got {mw}")
    return 10.0 * math.log10(mw)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class ChannelParams:
    """Radio-link and payload parameters for one cell.

    Attributes:
        tx_power: transmit power of every sensor, mW.
        path_loss_exp: path-loss exponent; must exceed 2 for the interference
            field around the sink to have a finite characteristic functional.
        noise_power: thermal noise power, mW.
        sink_intensity: density of co-channel cells (sinks) per square metre.
        reuse_prob: probability that a co-channel cell transmits in a given
            slot; the interferer field is the sink field thinned by this.
        bandwidth: channel bandwidth, Hz.
        data_size_edge: payload size when offloading the raw sample, bits.
        data_size_local: payload size after on-sensor compression, bits.
        slot_duration: slot length, seconds.
        max_retx: maximum transmission attempts per data item (>= 1).
    """

    tx_power: float
    path_loss_exp: float
    noise_power: float
    sink_intensity: float
    reuse_prob: float
    bandwidth: float
    data_size_edge: float
    data_size_local: float
    slot_duration: float
    max_retx: int

    def __post_init__(self) -> None:
        _require(self.tx_power > 0, f"tx_power must be > 0 mW, got {self.tx_power}")
        _require(
            self.path_loss_exp > 2,
            f"path_loss_exp must be > 2, got {self.path_loss_exp}",
        )
        _require(self.noise_power >= 0, "noise_power must be >= 0 mW")
        _require(self.sink_intensity >= 0, "sink_intensity must be >= 0")
        _require(0 <= self.reuse_prob <= 1, "reuse_prob must be in [0, 1]")
        _require(self.bandwidth > 0, "bandwidth must be > 0 Hz")
        _require(self.data_size_local > 0, "data_size_local must be > 0 bits")
        _require(
            self.data_size_edge > self.data_size_local,
            "data_size_edge must exceed data_size_local (compression shrinks data)",
        )
        _require(self.slot_duration > 0, "slot_duration must be > 0 s")
        _require(
            isinstance(self.max_retx, int) and self.max_retx >= 1,
            f"max_retx must be an integer >= 1, got {self.max_retx!r}",
        )

    @property
    def interferer_intensity(self) -> float:
        """Density of simultaneously active co-channel transmitters."""
        return self.sink_intensity * self.reuse_prob

    def target_rate(self, mode: str) -> float:
        """Bit rate needed to deliver the mode's payload within one slot."""
        return self.data_size(mode) / self.slot_duration

    def data_size(self, mode: str) -> float:
        if mode == MODE_EDGE:
            return self.data_size_edge
        if mode == MODE_LOCAL:
            return self.data_size_local
        raise ValueError(f"unknown compute mode {mode!r}")


@dataclass(frozen=True)
class CorrelationParams:
    """Spatio-temporal correlation decay of the sensed field.

    ``beta1`` (1/m) weighs spatial distance and ``beta2`` (1/s) weighs data
    age in the exponential correlation model; ``err_threshold`` is the
    largest tolerable estimation-error variance for a point to count as
    covered.
    """

    beta1: float
    beta2: float
    err_threshold: float

    def __post_init__(self) -> None:
        _require(self.beta1 > 0, f"beta1 must be > 0, got {self.beta1}")
        _require(self.beta2 > 0, f"beta2 must be > 0, got {self.beta2}")
        _require(
            0 < self.err_threshold < 1,
            f"err_threshold must be in (0, 1), got {self.err_threshold}",
        )


@dataclass(frozen=True)
class EnergyParams:
    """Per-action energy costs and battery sizing, all in mJ.

    ``battery_budget`` is the non-replenishable budget of a pre-charged
    sensor; ``battery_cap`` is the storage cap of a harvesting sensor whose
    per-slot energy arrival is uniform on [harvest_min, harvest_max].
    """

    sense_energy: float
    tx_energy: float
    compute_energy: float
    battery_budget: float
    battery_cap: float
    harvest_min: float = 0.0
    harvest_max: float = 0.0

    def __post_init__(self) -> None:
        for name in (
            "sense_energy",
            "tx_energy",
            "compute_energy",
            "battery_budget",
            "battery_cap",
            "harvest_min",
            "harvest_max",
        ):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0 mJ")
        _require(
            self.harvest_min <= self.harvest_max,
            "harvest_min must not exceed harvest_max",
        )

    @property
    def mean_harvest(self) -> float:
        """Mean per-slot harvested energy, mJ."""
        return 0.5 * (self.harvest_min + self.harvest_max)


@dataclass(frozen=True)
class TimingParams:
    """Round/slot structure of the protocol.

    A round spans ``round_len`` slots and starts with at most one sensing
    decision per sensor.  Edge processing takes ``compute_slots_edge`` server
    slots; on-sensor compression takes ``compute_slots_local`` sensor slots
    and must be the slower of the two.
    """

    round_len: int
    compute_slots_edge: int
    compute_slots_local: int
    rounds_per_episode: int

    def __post_init__(self) -> None:
        for name in (
            "round_len",
            "compute_slots_edge",
            "compute_slots_local",
            "rounds_per_episode",
        ):
            value = getattr(self, name)
            _require(
                isinstance(value, int) and value >= 1,
                f"{name} must be an integer >= 1, got {value!r}",
            )
        _require(
            self.compute_slots_edge < self.compute_slots_local,
            "compute_slots_edge must be < compute_slots_local "
            "(the server is the faster processor)",
        )

    def compute_slots(self, mode: str) -> int:
        if mode == MODE_EDGE:
            return self.compute_slots_edge
        if mode == MODE_LOCAL:
            return self.compute_slots_local
        raise ValueError(f"unknown compute mode {mode!r}")

    def episode_slots(self) -> int:
        return self.round_len * self.rounds_per_episode

    def validate_round_capacity(self, max_retx: int) -> None:
        """Check that a full sense/compress/retransmit cycle fits in a round.

        The closed-form analysis requires sensing, local compression, and all
        allowed transmission attempts of one data item to finish before the
        next round starts.
        """
        needed = 1 + max_retx + self.compute_slots_local
        _require(
            needed <= self.round_len,
            f"a round of {self.round_len} slots cannot contain sensing + "
            f"{self.compute_slots_local} compression slots + {max_retx} "
            f"attempts ({needed} slots needed)",
        )


@dataclass(frozen=True)
class AoiState:
    """Age of a sensor's data, in slots, at the sensor and at the sink.

    ``None`` means no data exists yet on that side (infinite age, zero
    coverage contribution).  The two ages track different update chains:
    the sensor side resets on every sensing, the sink side only on a
    successful delivery, so neither bounds the other in general.
    """

    aoi_sensor: Optional[int]
    aoi_sink: Optional[int]

    def __post_init__(self) -> None:
        for name in ("aoi_sensor", "aoi_sink"):
            value = getattr(self, name)
            if value is not None:
                _require(
                    isinstance(value, int) and value >= 1,
                    f"{name} must be None or an integer >= 1, got {value!r}",
                )
