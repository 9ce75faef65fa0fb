"""Round-start decision policies and the action vocabulary.

A policy is asked once per round, for every sensor, to pick one of three
actions: sense-and-offload to the edge server, sense-and-compute locally,
or stay idle.  Policies never get to break the rules: requests for busy or
energy-starved sensors are coerced to idle and counted, so any action
source (including an external learner) is safe to plug in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .model import CoverageGrid, sensing_radius
from .params import MODE_EDGE, MODE_LOCAL, CorrelationParams

__all__ = [
    "Action",
    "RoundObservation",
    "PolicySpec",
    "Policy",
    "ProbabilityScdPolicy",
    "AlwaysModePolicy",
    "ExternalPolicy",
    "make_policy",
    "coerce_actions",
    "decide",
    "cic_coverage_ratio",
]


class Action(enum.IntEnum):
    """Per-sensor round action; the integer codes are part of the wire API."""

    EDGE = 0
    LOCAL = 1
    IDLE = 2

    @property
    def mode(self) -> Optional[str]:
        if self is Action.EDGE:
            return MODE_EDGE
        if self is Action.LOCAL:
            return MODE_LOCAL
        return None


@dataclass(frozen=True)
class RoundObservation:
    """What a policy may look at when deciding for one sensor.

    ``busy`` means the sensor is still working through a previous job
    (sensing, computing, transmitting, or stalled waiting for energy);
    a sensor whose sample merely sits in the edge-server queue is *not*
    busy — it may sense again and replace the queued job.
    """

    sensor_id: int
    battery: float
    busy: bool
    can_sense: bool
    waiting_time: int
    aoi_sink_slots: Optional[int] = None
    aoi_sensor_slots: Optional[int] = None


_KINDS = ("probability-scd", "always-mode", "external", "cic-variant")


@dataclass(frozen=True)
class PolicySpec:
    """Declarative policy description (JSON-friendly, round-trippable)."""

    kind: str = "probability-scd"
    sense_prob: float = 0.5
    edge_prob: float = 0.5
    mode: str = MODE_EDGE
    inner: Optional["PolicySpec"] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"policy.kind must be one of {_KINDS}, got {self.kind!r}")
        if not 0 <= self.sense_prob <= 1:
            raise ValueError("policy.sense_prob must be in [0, 1]")
        if not 0 <= self.edge_prob <= 1:
            raise ValueError("policy.edge_prob must be in [0, 1]")
        if self.mode not in (MODE_EDGE, MODE_LOCAL):
            raise ValueError(f"policy.mode must be {MODE_EDGE!r} or {MODE_LOCAL!r}")
        if self.kind == "cic-variant" and self.inner is None:
            raise ValueError("cic-variant requires an inner policy spec")

    # -- factories ---------------------------------------------------------

    @classmethod
    def probability(cls, sense_prob: float, edge_prob: float) -> "PolicySpec":
        """Independent coin flips each round: sense w.p. ``sense_prob``,
        then offload w.p. ``edge_prob`` (compute locally otherwise)."""
        return cls(kind="probability-scd", sense_prob=sense_prob, edge_prob=edge_prob)

    @classmethod
    def always(cls, mode: str, sense_prob: float = 1.0) -> "PolicySpec":
        """Sense w.p. ``sense_prob`` but always use one fixed compute mode."""
        return cls(kind="always-mode", sense_prob=sense_prob, mode=mode)

    @classmethod
    def external(cls) -> "PolicySpec":
        """Actions are supplied from outside (e.g. over the environment bridge)."""
        return cls(kind="external")

    @classmethod
    def cic(cls, inner: "PolicySpec") -> "PolicySpec":
        """Wrap another policy but score coverage by the conservative
        fixed-radius rule instead of the estimation-error rule."""
        return cls(kind="cic-variant", inner=inner)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind}
        if self.kind == "probability-scd":
            out["sense_prob"] = self.sense_prob
            out["edge_prob"] = self.edge_prob
        elif self.kind == "always-mode":
            out["sense_prob"] = self.sense_prob
            out["mode"] = self.mode
        elif self.kind == "cic-variant":
            out["inner"] = self.inner.to_dict()  # type: ignore[union-attr]
        return out

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PolicySpec":
        if not isinstance(doc, Mapping):
            raise ValueError("policy: expected an object")
        kind = doc.get("kind", "probability-scd")
        known = {"kind", "sense_prob", "edge_prob", "mode", "inner"}
        for key in doc:
            if key not in known:
                raise ValueError(f"policy.{key}: unknown field")
        inner = None
        if doc.get("inner") is not None:
            inner = cls.from_dict(doc["inner"])
        return cls(
            kind=kind,
            sense_prob=float(doc.get("sense_prob", 0.5)),
            edge_prob=float(doc.get("edge_prob", 0.5)),
            mode=doc.get("mode", MODE_EDGE),
            inner=inner,
        )

    @property
    def coverage_mode_override(self) -> Optional[str]:
        return "cic" if self.kind == "cic-variant" else None


class Policy:
    """Runtime policy object; one instance per episode (may hold state)."""

    spec: PolicySpec

    def raw_intents(
        self, observations: Sequence[RoundObservation], rng: np.random.Generator
    ) -> List[Action]:
        raise NotImplementedError

    def decide(
        self, observations: Sequence[RoundObservation], rng: np.random.Generator
    ) -> List[Action]:
        actions, _ = coerce_actions(self.raw_intents(observations, rng), observations)
        return actions


class ProbabilityScdPolicy(Policy):
    """Two independent uniform draws per sensor per round.

    Both coins are always consumed — even for busy or starved sensors —
    so the random stream consumed by one sensor never depends on the
    state of another, keeping rounds i.i.d. for the renewal analysis.
    """

    def __init__(self, spec: PolicySpec):
        self.spec = spec

    def raw_intents(self, observations, rng):
        intents: List[Action] = []
        for _ in observations:
            sense_coin = rng.random()
            mode_coin = rng.random()
            if sense_coin < self.spec.sense_prob:
                intents.append(Action.EDGE if mode_coin < self.spec.edge_prob else Action.LOCAL)
            else:
                intents.append(Action.IDLE)
        return intents


class AlwaysModePolicy(Policy):
    """Fixed compute mode; still flips the sensing coin (1.0 = every round)."""

    def __init__(self, spec: PolicySpec):
        self.spec = spec
        self._action = Action.EDGE if spec.mode == MODE_EDGE else Action.LOCAL

    def raw_intents(self, observations, rng):
        intents: List[Action] = []
        for _ in observations:
            sense_coin = rng.random()
            intents.append(self._action if sense_coin < self.spec.sense_prob else Action.IDLE)
        return intents


class ExternalPolicy(Policy):
    """Actions pushed in from outside before each round; defaults to idle."""

    def __init__(self, spec: PolicySpec):
        self.spec = spec
        self._pending: Optional[List[Action]] = None

    def set_actions(self, actions: Sequence[int]) -> None:
        self._pending = [Action(int(a)) for a in actions]

    def raw_intents(self, observations, rng):
        if self._pending is None:
            return [Action.IDLE] * len(observations)
        if len(self._pending) != len(observations):
            raise ValueError(
                f"external policy got {len(self._pending)} actions "
                f"for {len(observations)} sensors"
            )
        actions, self._pending = self._pending, None
        return actions


def make_policy(spec: PolicySpec) -> Policy:
    """Instantiate the runtime object for a spec (fresh state per episode)."""
    if spec.kind == "probability-scd":
        return ProbabilityScdPolicy(spec)
    if spec.kind == "always-mode":
        return AlwaysModePolicy(spec)
    if spec.kind == "external":
        return ExternalPolicy(spec)
    if spec.kind == "cic-variant":
        inner = make_policy(spec.inner)  # type: ignore[arg-type]
        inner.spec = spec.inner  # type: ignore[assignment]
        wrapper = _CicWrapper(spec, inner)
        return wrapper
    raise ValueError(f"unknown policy kind {spec.kind!r}")


class _CicWrapper(Policy):
    def __init__(self, spec: PolicySpec, inner: Policy):
        self.spec = spec
        self.inner = inner

    def raw_intents(self, observations, rng):
        return self.inner.raw_intents(observations, rng)

    def set_actions(self, actions: Sequence[int]) -> None:
        if isinstance(self.inner, ExternalPolicy):
            self.inner.set_actions(actions)
        else:
            raise TypeError("inner policy does not accept external actions")


def coerce_actions(
    intents: Sequence[Action], observations: Sequence[RoundObservation]
) -> Tuple[List[Action], int]:
    """Force illegal requests to idle; return (legal actions, #coerced).

    A request is illegal when the sensor is busy with a previous job or
    cannot afford the sensing cost.
    """
    if len(intents) != len(observations):
        raise ValueError(
            f"got {len(intents)} intents for {len(observations)} sensors"
        )
    actions: List[Action] = []
    coerced = 0
    for intent, obs in zip(intents, observations):
        intent = Action(intent)
        if intent is not Action.IDLE and (obs.busy or not obs.can_sense):
            actions.append(Action.IDLE)
            coerced += 1
        else:
            actions.append(intent)
    return actions, coerced


def decide(
    policy: Policy,
    observations: Sequence[RoundObservation],
    rng: np.random.Generator,
) -> List[Action]:
    """Ask ``policy`` for one legal action per sensor."""
    return policy.decide(observations, rng)


def cic_coverage_ratio(
    grid: CoverageGrid,
    sensors: Sequence[Tuple[Tuple[float, float], bool]],
    corr: CorrelationParams,
    round_duration_s: float,
) -> float:
    """Covered-area share under the conservative fixed-radius rule.

    Each sensor with an active update covers a disc whose radius is the
    sensing radius evaluated at one full round of staleness, independent
    of the actual age, so coverage holds for a whole round after a
    successful update and then lapses.
    """
    if grid.n_points == 0 or not sensors:
        return 0.0
    radius = sensing_radius(round_duration_s, corr)
    if radius <= 0:
        return 0.0
    covered = np.zeros(grid.n_points, dtype=bool)
    r2 = radius * radius
    for (x, y), active in sensors:
        if not active:
            continue
        covered |= (grid.xs - x) ** 2 + (grid.ys - y) ** 2 <= r2
    return float(np.count_nonzero(covered)) / grid.n_points
