"""Physical-layer, energy, age, and coverage mathematics as pure functions.

Everything here is a deterministic function of immutable inputs; the
simulator and the closed-form analysis both build on these primitives so the
two layers cannot drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .params import (
    ChannelParams,
    CorrelationParams,
    MODE_EDGE,
    MODE_LOCAL,
)

__all__ = [
    "CoverageGrid",
    "outage_probability",
    "estimation_error",
    "sensing_radius",
    "coverage_ratio",
    "battery_step",
]


@dataclass(frozen=True)
class CoverageGrid:
    """Discrete set of evaluation points tiling the monitored area.

    Points are cell centres; the covered fraction of the area is estimated
    as the fraction of covered points.
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self) -> None:
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise ValueError("xs and ys must be 1-D arrays of equal length")
        if self.xs.size == 0:
            raise ValueError("coverage grid must contain at least one point")

    @property
    def n_points(self) -> int:
        return int(self.xs.size)

    @staticmethod
    def rectangle(
        width: float, height: float, resolution: float = 1.0
    ) -> "CoverageGrid":
        """Cell-centre grid over a [0, width] x [0, height] rectangle."""
        if width <= 0 or height <= 0 or resolution <= 0:
            raise ValueError("width, height, and resolution must be positive")
        nx = max(1, int(round(width / resolution)))
        ny = max(1, int(round(height / resolution)))
        cx = (np.arange(nx) + 0.5) * resolution
        cy = (np.arange(ny) + 0.5) * resolution
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        return CoverageGrid(xs=gx.ravel(), ys=gy.ravel())

    @staticmethod
    def disc(
        radius: float,
        resolution: float = 1.0,
        center: Tuple[float, float] = (0.0, 0.0),
    ) -> "CoverageGrid":
        """Cell-centre grid over a disc of the given radius."""
        if radius <= 0 or resolution <= 0:
            raise ValueError("radius and resolution must be positive")
        n = max(1, int(round(2 * radius / resolution)))
        coords = (np.arange(n) + 0.5) * resolution - radius
        gx, gy = np.meshgrid(coords, coords, indexing="ij")
        keep = gx**2 + gy**2 <= radius**2
        if not keep.any():
            # Degenerate resolution: fall back to the single centre point.
            return CoverageGrid(
                xs=np.array([center[0]]), ys=np.array([center[1]])
            )
        return CoverageGrid(
            xs=gx[keep] + center[0], ys=gy[keep] + center[1]
        )


def outage_probability(mode: str, distance: float, ch: ChannelParams) -> float:
    """Per-attempt probability that the link rate falls below the mode's target.

    Models a Rayleigh-faded link of length ``distance`` to the serving sink,
    thermal noise, and a Poisson field of co-channel interferers (intensity
    ``sink_intensity * reuse_prob``, each transmitting with the same power).
    The closed form follows from averaging the rate-outage event over the
    fading and over the interferer field's characteristic functional.
    """
    if mode not in (MODE_EDGE, MODE_LOCAL):
        raise ValueError(f"unknown compute mode {mode!r}")
    if distance <= 0:
        raise ValueError(f"distance must be > 0 m, got {distance}")

    rate_ratio = ch.target_rate(mode) / ch.bandwidth
    try:
        threshold = 2.0**rate_ratio - 1.0  # required SINR for the target rate
    except OverflowError:
        threshold = math.inf
    alpha = ch.path_loss_exp

    exponent = 0.0
    if ch.noise_power > 0 and threshold > 0:
        exponent += threshold * distance**alpha / ch.tx_power * ch.noise_power
    lam_i = ch.interferer_intensity
    if lam_i > 0 and threshold > 0:
        angular = (2 * math.pi / alpha) / math.sin(2 * math.pi / alpha)
        exponent += (
            math.pi * lam_i * (threshold * distance**alpha) ** (2.0 / alpha) * angular
        )

    if math.isnan(exponent):
        raise ValueError(
            "outage probability is indeterminate for these parameters "
            f"(rate/bandwidth ratio {rate_ratio:g} overflows)"
        )
    # exponent == +inf cleanly yields 1.0 here (certain outage).
    return -math.expm1(-exponent)


def estimation_error(
    distance: float, aoi: float, corr: CorrelationParams
) -> float:
    """Variance of estimating the field at ``distance`` m from data ``aoi`` s old.

    Equals ``1 - exp(-2*beta1*distance - 2*beta2*aoi)``: zero for fresh data
    at the sensor itself, approaching one as distance or age grows.
    """
    if distance < 0:
        raise ValueError(f"distance must be >= 0 m, got {distance}")
    if aoi < 0:
        raise ValueError(f"aoi must be >= 0 s, got {aoi}")
    return -math.expm1(-2.0 * (corr.beta1 * distance + corr.beta2 * aoi))


def sensing_radius(aoi: float, corr: CorrelationParams) -> float:
    """Largest distance at which data ``aoi`` seconds old still covers a point.

    Inverts the estimation-error model at the error threshold; clamped to 0
    once the data is too stale to cover even the sensor's own location.
    """
    if aoi < 0:
        raise ValueError(f"aoi must be >= 0 s, got {aoi}")
    radius = (-2.0 * corr.beta2 * aoi - math.log1p(-corr.err_threshold)) / (
        2.0 * corr.beta1
    )
    return max(0.0, radius)


def coverage_ratio(
    grid: CoverageGrid,
    sensors: Sequence[Tuple[Tuple[float, float], Optional[float]]],
    corr: CorrelationParams,
) -> float:
    """Fraction of grid points covered by at least one sensor.

    ``sensors`` holds ``((x, y), sink_side_aoi_seconds)`` pairs; a sensor
    whose data has never reached the sink passes ``None`` and contributes no
    coverage.  A point is covered when it lies within the sensing radius of
    the sensor's current data age.
    """
    covered = np.zeros(grid.n_points, dtype=bool)
    for (x, y), aoi_seconds in sensors:
        if aoi_seconds is None:
            continue
        radius = sensing_radius(aoi_seconds, corr)
        if radius <= 0:
            continue
        d2 = (grid.xs - x) ** 2 + (grid.ys - y) ** 2
        covered |= d2 <= radius * radius
    return float(covered.mean())


def battery_step(
    level: float, consumed: float, harvested: float, cap: float
) -> float:
    """One slot of battery evolution: consume, then harvest, then cap.

    The caller must only schedule affordable consumption; an unaffordable
    ``consumed`` is a programming error in the caller and raises loudly
    rather than silently clamping.
    """
    if not 0 <= level <= cap:
        raise ValueError(f"battery level {level} outside [0, {cap}]")
    if consumed < 0:
        raise ValueError(f"consumed must be >= 0 mJ, got {consumed}")
    if harvested < 0:
        raise ValueError(f"harvested must be >= 0 mJ, got {harvested}")
    if consumed > level:
        raise RuntimeError(
            f"consumption {consumed} mJ exceeds battery level {level} mJ; "
            "the scheduler must gate actions on affordability"
        )
    return min(level - consumed + harvested, cap)
