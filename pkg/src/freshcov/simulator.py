"""Slot-granular episode engine for the sensing/offloading network.

Time advances in fixed slots grouped into rounds.  At each round start a
policy picks one action per sensor (offload to the edge server, compute
locally, or idle); the engine then walks every sensor through its job
pipeline one slot at a time:

* sensing occupies the round's first slot and pays the sensing cost;
* local jobs then compute for a fixed number of slots (the compute cost
  is paid once, on the first compute slot), and finally transmit the
  *result* to the sink — a success updates the sink in the same slot;
* edge jobs transmit the *raw sample* first; a success parks the job in
  the edge-server queue, which serves one slot of work per slot, head of
  line first, and updates the sink when the job completes;
* each transmission attempt pays the transmit cost and is retried up to
  the configured cap, after which the sample is dropped;
* energy-harvesting sensors that cannot pay for the next pipeline step
  stall until their battery suffices; pre-charged sensors drop the job.

At the end of every slot the sink's record is refreshed with any update
generated strictly later than what it holds, per-sensor ages and battery
levels are recorded, and the covered share of the monitored area is
scored.  A round's reward is +1 per slot meeting the coverage target and
a configurable penalty per slot missing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import ScenarioConfig, SINGLE_PRECHARGED
from .model import CoverageGrid, outage_probability, sensing_radius
from .params import MODE_EDGE, MODE_LOCAL
from .policies import (
    Action,
    Policy,
    PolicySpec,
    RoundObservation,
    coerce_actions,
    make_policy,
)

__all__ = [
    "PHASE_IDLE",
    "PHASE_SENSING",
    "PHASE_COMPUTING",
    "PHASE_TRANSMITTING",
    "PHASE_AWAITING_ENERGY",
    "PHASE_AT_EC_SERVER",
    "SensorRuntime",
    "EcServerQueue",
    "waiting_time",
    "UpdateEvent",
    "EpisodeTrace",
    "EpisodeEngine",
    "run_episode",
    "estimate_eta_coverage",
]

PHASE_IDLE = "idle"
PHASE_SENSING = "sensing"
PHASE_COMPUTING = "computing"
PHASE_TRANSMITTING = "transmitting"
PHASE_AWAITING_ENERGY = "awaiting-energy"
PHASE_AT_EC_SERVER = "at-ec-server"

# Phases that block a new round decision.  A job parked at the edge server
# does not: the sensor may sense again and replace the queued sample.
_BUSY_PHASES = frozenset(
    {PHASE_SENSING, PHASE_COMPUTING, PHASE_TRANSMITTING, PHASE_AWAITING_ENERGY}
)


@dataclass
class SensorRuntime:
    """Mutable per-sensor state while an episode runs."""

    sensor_id: int
    position: Tuple[float, float]
    battery: float
    phase: str = PHASE_IDLE
    mode: Optional[str] = None          # compute mode of the job in flight
    job_gen: int = -1                   # slot the in-flight sample was sensed
    compute_left: int = 0
    compute_charged: bool = False
    attempts: int = 0
    stalled_step: Optional[str] = None  # "compute" | "tx" while awaiting energy
    sensor_gen: int = -1                # newest sample this sensor ever sensed
    sink_gen: int = -1                  # newest sample the sink holds (-1 = none)

    @property
    def busy(self) -> bool:
        return self.phase in _BUSY_PHASES

    def sink_age(self, boundary: int) -> Optional[int]:
        return boundary - self.sink_gen if self.sink_gen >= 0 else None

    def sensor_age(self, boundary: int) -> Optional[int]:
        return boundary - self.sensor_gen if self.sensor_gen >= 0 else None


class EcServerQueue:
    """FIFO work queue at the edge server; one slot of service per slot.

    Each sensor may hold at most one job.  Submitting while an older job
    of the same sensor is queued *replaces* it in place: the queue
    position is kept but the remaining service time starts over.
    """

    def __init__(self) -> None:
        self._jobs: List[List[int]] = []  # [sensor_id, gen_slot, remaining]

    def __len__(self) -> int:
        return len(self._jobs)

    def has(self, sensor_id: int) -> bool:
        return any(job[0] == sensor_id for job in self._jobs)

    def submit(self, sensor_id: int, gen_slot: int, service_slots: int) -> None:
        if service_slots < 1:
            raise ValueError("service_slots must be >= 1")
        for job in self._jobs:
            if job[0] == sensor_id:
                job[1] = gen_slot
                job[2] = service_slots
                return
        self._jobs.append([sensor_id, gen_slot, service_slots])

    def advance(self) -> List[Tuple[int, int]]:
        """Serve one slot of work; return completions as (sensor_id, gen)."""
        if not self._jobs:
            return []
        head = self._jobs[0]
        head[2] -= 1
        if head[2] == 0:
            self._jobs.pop(0)
            return [(head[0], head[1])]
        return []

    def waiting_time(self, sensor_id: int) -> int:
        """Slots of service queued ahead of and including this sensor's job."""
        total = 0
        for job in self._jobs:
            total += job[2]
            if job[0] == sensor_id:
                return total
        return 0

    def snapshot(self) -> List[Tuple[int, int, int]]:
        return [tuple(job) for job in self._jobs]


def waiting_time(queue: EcServerQueue, sensor_id: int) -> int:
    """Queued service slots ahead of (and including) a sensor's edge job."""
    return queue.waiting_time(sensor_id)


@dataclass(frozen=True)
class UpdateEvent:
    slot: int
    sensor_id: int
    gen_slot: int
    mode: str


@dataclass
class EpisodeTrace:
    """Everything recorded while one episode ran."""

    seed: int
    n_sensors: int
    n_slots: int
    round_len: int
    target_ratio: float
    coverage: np.ndarray          # (n_slots,) covered share at each boundary
    rewards: np.ndarray           # (n_rounds,)
    decisions: np.ndarray         # (n_rounds, n_sensors) Action codes
    illegal: np.ndarray           # (n_rounds,) coerced requests per round
    aoi_sink: np.ndarray          # (n_slots, n_sensors), +inf before any update
    aoi_sensor: np.ndarray        # (n_slots, n_sensors)
    battery: np.ndarray           # (n_slots, n_sensors)
    updates: List[UpdateEvent] = field(default_factory=list)
    n_sensed: np.ndarray = None   # per sensor
    n_tx: np.ndarray = None
    n_computed: np.ndarray = None
    n_dropped: np.ndarray = None
    energy_consumed: np.ndarray = None
    energy_harvested: np.ndarray = None

    @property
    def n_rounds(self) -> int:
        return self.n_slots // self.round_len

    def coverage_indicator(self, target_ratio: Optional[float] = None) -> np.ndarray:
        eta = self.target_ratio if target_ratio is None else target_ratio
        return self.coverage >= eta

    def eta_coverage(self, target_ratio: Optional[float] = None) -> float:
        """Share of slot boundaries whose covered area meets the target."""
        return float(self.coverage_indicator(target_ratio).mean())

    def total_reward(self) -> float:
        return float(self.rewards.sum())

    def to_csv(self, path: str) -> None:
        """Write the per-slot record (coverage, ages, batteries) as CSV."""
        import csv

        header = ["slot", "coverage"]
        for i in range(self.n_sensors):
            header += [f"aoi_sink_{i}", f"aoi_sensor_{i}", f"battery_{i}"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            for t in range(self.n_slots):
                row = [t, f"{self.coverage[t]:.10g}"]
                for i in range(self.n_sensors):
                    row += [
                        f"{self.aoi_sink[t, i]:.10g}",
                        f"{self.aoi_sensor[t, i]:.10g}",
                        f"{self.battery[t, i]:.10g}",
                    ]
                writer.writerow(row)

    def summary(self) -> Dict[str, Any]:
        total = self.decisions.size
        return {
            "seed": self.seed,
            "slots": self.n_slots,
            "rounds": self.n_rounds,
            "sensors": self.n_sensors,
            "eta_coverage": self.eta_coverage(),
            "mean_coverage": float(self.coverage.mean()),
            "total_reward": self.total_reward(),
            "mean_round_reward": float(self.rewards.mean()),
            "updates": len(self.updates),
            "illegal_requests": int(self.illegal.sum()),
            "drops": int(self.n_dropped.sum()),
            "decision_shares": {
                "edge": float((self.decisions == Action.EDGE).sum() / total),
                "local": float((self.decisions == Action.LOCAL).sum() / total),
                "idle": float((self.decisions == Action.IDLE).sum() / total),
            },
            "energy": {
                "sensed": int(self.n_sensed.sum()),
                "transmissions": int(self.n_tx.sum()),
                "computed": int(self.n_computed.sum()),
                "consumed_mj": float(self.energy_consumed.sum()),
                "harvested_mj": float(self.energy_harvested.sum()),
            },
            "final_battery_mj": [float(b) for b in self.battery[-1]],
        }


class _DiscAnalyticCoverage:
    """Exact covered share for one sensor at the centre of a disc."""

    def __init__(self, config: ScenarioConfig):
        self.radius = config.area_radius
        self.corr = config.corr
        self.slot_s = config.ch.slot_duration

    def on_update(self, sensor_idx: int, gen_slot: int, slot: int) -> None:
        pass  # stateless: reads the sink age directly

    def ratio(self, boundary: int, sensors: Sequence[SensorRuntime]) -> float:
        gen = sensors[0].sink_gen
        if gen < 0:
            return 0.0
        age_s = (boundary - gen) * self.slot_s
        r = sensing_radius(age_s, self.corr)
        if r <= 0.0:
            return 0.0
        if r >= self.radius:
            return 1.0
        return (r / self.radius) ** 2


class _ErrorGridCoverage:
    """Grid scoring by the estimation-error rule.

    Every grid point stores the last boundary at which it is still
    covered (its expiry); an update from sensor ``s`` sensed at slot
    ``g`` pushes each point's expiry to at least ``g + V[s, point]``,
    where ``V`` is the point's maximum tolerable age under that sensor.
    """

    def __init__(self, config: ScenarioConfig, positions: Sequence[Tuple[float, float]]):
        if config.kind == SINGLE_PRECHARGED:
            grid = CoverageGrid.disc(config.area_radius, config.grid_resolution)
        else:
            grid = CoverageGrid.rectangle(
                config.area_width, config.area_height, config.grid_resolution
            )
        self.grid = grid
        corr = config.corr
        slot_s = config.ch.slot_duration
        budget = -math.log1p(-corr.err_threshold)
        never = np.iinfo(np.int64).min // 4
        self.max_age = np.empty((len(positions), grid.n_points), dtype=np.int64)
        for idx, (x, y) in enumerate(positions):
            dist = np.hypot(grid.xs - x, grid.ys - y)
            slack = budget - 2.0 * corr.beta1 * dist
            ages = np.floor(slack / (2.0 * corr.beta2 * slot_s))
            self.max_age[idx] = np.where(slack >= 0.0, ages.astype(np.int64), never)
        self.expiry = np.full(grid.n_points, -1, dtype=np.int64)

    def on_update(self, sensor_idx: int, gen_slot: int, slot: int) -> None:
        np.maximum(self.expiry, gen_slot + self.max_age[sensor_idx], out=self.expiry)

    def ratio(self, boundary: int, sensors: Sequence[SensorRuntime]) -> float:
        return float(np.count_nonzero(self.expiry >= boundary)) / self.grid.n_points


class _CicGridCoverage:
    """Grid scoring by the conservative fixed-radius rule.

    A successful update covers the sensor's fixed disc (radius = sensing
    radius at one full round of staleness) from the update until the end
    of the round it landed in.
    """

    def __init__(self, config: ScenarioConfig, positions: Sequence[Tuple[float, float]]):
        if config.kind == SINGLE_PRECHARGED:
            grid = CoverageGrid.disc(config.area_radius, config.grid_resolution)
        else:
            grid = CoverageGrid.rectangle(
                config.area_width, config.area_height, config.grid_resolution
            )
        self.grid = grid
        self.round_len = config.timing.round_len
        radius = sensing_radius(
            config.timing.round_len * config.ch.slot_duration, config.corr
        )
        r2 = radius * radius
        self.masks = [
            (grid.xs - x) ** 2 + (grid.ys - y) ** 2 <= r2 for (x, y) in positions
        ]
        self.expiry = np.full(grid.n_points, -1, dtype=np.int64)

    def on_update(self, sensor_idx: int, gen_slot: int, slot: int) -> None:
        mask = self.masks[sensor_idx]
        horizon = (slot // self.round_len + 1) * self.round_len
        self.expiry[mask] = np.maximum(self.expiry[mask], horizon)

    def ratio(self, boundary: int, sensors: Sequence[SensorRuntime]) -> float:
        return float(np.count_nonzero(self.expiry >= boundary)) / self.grid.n_points


class _ScriptedChannel:
    def __init__(self, script: Sequence[bool]):
        self._script = list(script)
        self._next = 0

    def attempt(self, sensor: SensorRuntime, mode: str, rng) -> bool:
        if self._next >= len(self._script):
            raise ValueError(
                "scripted channel exhausted after "
                f"{len(self._script)} transmission outcomes"
            )
        ok = bool(self._script[self._next])
        self._next += 1
        return ok


class _AnalyticChannel:
    """Per-attempt Bernoulli draws with the closed-form failure odds."""

    def __init__(self, config: ScenarioConfig, positions, sink_xy):
        self.fail = {}
        for idx, pos in enumerate(positions):
            d = math.hypot(pos[0] - sink_xy[0], pos[1] - sink_xy[1])
            self.fail[idx] = {
                MODE_EDGE: outage_probability(MODE_EDGE, d, config.ch),
                MODE_LOCAL: outage_probability(MODE_LOCAL, d, config.ch),
            }

    def attempt(self, sensor: SensorRuntime, mode: str, rng) -> bool:
        return rng.random() >= self.fail[sensor.sensor_id][mode]


class _GeometricChannel:
    """Draw the interferer field and fading explicitly for every attempt."""

    def __init__(self, config: ScenarioConfig, positions, sink_xy):
        from .oracles import interferer_field_radius

        self.ch = config.ch
        self.distances = {
            idx: math.hypot(pos[0] - sink_xy[0], pos[1] - sink_xy[1])
            for idx, pos in enumerate(positions)
        }
        self.field_radius = {
            idx: interferer_field_radius(MODE_EDGE, d, config.ch)
            for idx, d in self.distances.items()
        }

    def attempt(self, sensor: SensorRuntime, mode: str, rng) -> bool:
        ch = self.ch
        d = self.distances[sensor.sensor_id]
        rate_ratio = ch.target_rate(mode) / ch.bandwidth
        threshold = 2.0**rate_ratio - 1.0
        if threshold <= 0.0:
            return True
        radius = self.field_radius[sensor.sensor_id]
        lam = ch.interferer_intensity
        signal = ch.tx_power * rng.exponential() * d ** (-ch.path_loss_exp)
        interference = 0.0
        if lam > 0:
            count = rng.poisson(lam * math.pi * radius * radius)
            if count:
                r = radius * np.sqrt(rng.random(count))
                fades = rng.exponential(size=count)
                interference = float(
                    np.sum(ch.tx_power * fades * r ** (-ch.path_loss_exp))
                )
        return signal >= threshold * (ch.noise_power + interference)


class EpisodeEngine:
    """Runs one episode round by round; usable directly or via the bridge."""

    def __init__(
        self,
        config: ScenarioConfig,
        policy: Union[Policy, PolicySpec, None] = None,
        seed: int = 0,
    ):
        if isinstance(policy, PolicySpec):
            policy = make_policy(policy)
        elif policy is None:
            policy = make_policy(PolicySpec.probability(0.5, 0.5))
        self.config = config
        self.policy = policy
        self.seed = int(seed)
        self.rng = np.random.default_rng(np.random.SeedSequence(self.seed))

        positions = config.sensor_positions()
        sink_xy = config.sink_xy()
        self.sensors = [
            SensorRuntime(sensor_id=i, position=pos, battery=config.initial_battery)
            for i, pos in enumerate(positions)
        ]
        self.queue = EcServerQueue()

        coverage_mode = config.coverage_mode
        spec = getattr(policy, "spec", None)
        override = spec.coverage_mode_override if spec is not None else None
        if override is not None:
            coverage_mode = override
        if coverage_mode == "disc-analytic":
            self.coverage = _DiscAnalyticCoverage(config)
        elif coverage_mode == "cic":
            self.coverage = _CicGridCoverage(config, positions)
        else:
            self.coverage = _ErrorGridCoverage(config, positions)

        if config.channel_fidelity == "scripted":
            self.channel = _ScriptedChannel(config.outcome_script or ())
        elif config.channel_fidelity == "geometric":
            self.channel = _GeometricChannel(config, positions, sink_xy)
        else:
            self.channel = _AnalyticChannel(config, positions, sink_xy)

        timing = config.timing
        self.round_len = timing.round_len
        self.n_rounds = timing.rounds_per_episode
        self.n_slots = timing.episode_slots()
        n = config.n_sensors
        self.t = 0
        self.round_idx = 0
        self._trace = EpisodeTrace(
            seed=self.seed,
            n_sensors=n,
            n_slots=self.n_slots,
            round_len=self.round_len,
            target_ratio=config.target_ratio,
            coverage=np.zeros(self.n_slots),
            rewards=np.zeros(self.n_rounds),
            decisions=np.full((self.n_rounds, n), int(Action.IDLE), dtype=np.int8),
            illegal=np.zeros(self.n_rounds, dtype=np.int32),
            aoi_sink=np.full((self.n_slots, n), np.inf),
            aoi_sensor=np.full((self.n_slots, n), np.inf),
            battery=np.zeros((self.n_slots, n)),
            n_sensed=np.zeros(n, dtype=np.int64),
            n_tx=np.zeros(n, dtype=np.int64),
            n_computed=np.zeros(n, dtype=np.int64),
            n_dropped=np.zeros(n, dtype=np.int64),
            energy_consumed=np.zeros(n),
            energy_harvested=np.zeros(n),
        )
        # Neighbourhoods for the wire-format observations: self first, then
        # the other sensors within observation range by ascending id.
        self.neighbours: List[List[int]] = []
        obs_range = config.observation_range
        for i, pos in enumerate(positions):
            ids = [i]
            for j, other in enumerate(positions):
                if j == i:
                    continue
                if math.hypot(pos[0] - other[0], pos[1] - other[1]) <= obs_range:
                    ids.append(j)
            self.neighbours.append(ids)

    # -- observations -------------------------------------------------------

    def observations(self) -> List[RoundObservation]:
        """Per-sensor decision context at the current round boundary."""
        boundary = self.t
        sense_cost = self.config.energy.sense_energy
        return [
            RoundObservation(
                sensor_id=s.sensor_id,
                battery=s.battery,
                busy=s.busy,
                can_sense=s.battery >= sense_cost,
                waiting_time=self.queue.waiting_time(s.sensor_id),
                aoi_sink_slots=s.sink_age(boundary),
                aoi_sensor_slots=s.sensor_age(boundary),
            )
            for s in self.sensors
        ]

    def observation_vectors(self) -> List[List[Optional[float]]]:
        """Wire-format per-agent vectors: [battery, sink age, sensor age]
        for self then each in-range neighbour (ascending id), then the
        sensor's queued-work wait.  Unknown ages are ``None``."""
        boundary = self.t
        out: List[List[Optional[float]]] = []
        for i, ids in enumerate(self.neighbours):
            vec: List[Optional[float]] = []
            for j in ids:
                s = self.sensors[j]
                age_rx = s.sink_age(boundary)
                age_tx = s.sensor_age(boundary)
                vec.append(float(s.battery))
                vec.append(float(age_rx) if age_rx is not None else None)
                vec.append(float(age_tx) if age_tx is not None else None)
            vec.append(float(self.queue.waiting_time(i)))
            out.append(vec)
        return out

    @property
    def done(self) -> bool:
        return self.round_idx >= self.n_rounds

    # -- core loop ------------------------------------------------------------

    def run_round(self, actions: Optional[Sequence[int]] = None) -> Dict[str, Any]:
        """Advance one full round; returns the round reward and counters."""
        if self.done:
            raise RuntimeError("episode is complete")
        config = self.config
        trace = self._trace
        j = self.round_idx
        obs = self.observations()
        if actions is not None:
            intents = [Action(int(a)) for a in actions]
        else:
            intents = self.policy.raw_intents(obs, self.rng)
        legal, coerced = coerce_actions(intents, obs)
        trace.illegal[j] = coerced
        trace.decisions[j] = [int(a) for a in legal]
        for sensor, action in zip(self.sensors, legal):
            if action is not Action.IDLE:
                sensor.phase = PHASE_SENSING
                sensor.mode = action.mode

        eta = config.target_ratio
        penalty = config.penalty
        reward = 0.0
        updates_this_round = 0
        start = self.t
        for t in range(start, start + self.round_len):
            updates: List[Tuple[int, int, str]] = [
                (sid, gen, MODE_EDGE) for sid, gen in self.queue.advance()
            ]
            for sid, _, _ in updates:
                sensor = self.sensors[sid]
                if sensor.phase == PHASE_AT_EC_SERVER:
                    sensor.phase = PHASE_IDLE
            for sensor in self.sensors:
                self._step_sensor(sensor, t, updates)
            if config.harvesting:
                gains = self.rng.uniform(
                    config.energy.harvest_min,
                    config.energy.harvest_max,
                    len(self.sensors),
                )
                cap = config.energy.battery_cap
                for sensor, gain in zip(self.sensors, gains):
                    before = sensor.battery
                    sensor.battery = min(before + gain, cap)
                    trace.energy_harvested[sensor.sensor_id] += sensor.battery - before
            boundary = t + 1
            updates_this_round += self._apply_updates(updates, t)
            ratio = self.coverage.ratio(boundary, self.sensors)
            trace.coverage[t] = ratio
            reward += 1.0 if ratio >= eta else -penalty
            for sensor in self.sensors:
                sid = sensor.sensor_id
                trace.battery[t, sid] = sensor.battery
                if sensor.sink_gen >= 0:
                    trace.aoi_sink[t, sid] = boundary - sensor.sink_gen
                if sensor.sensor_gen >= 0:
                    trace.aoi_sensor[t, sid] = boundary - sensor.sensor_gen
        self.t = start + self.round_len
        self.round_idx = j + 1
        trace.rewards[j] = reward
        return {
            "round": j,
            "reward": reward,
            "illegal": int(coerced),
            "updates": updates_this_round,
            "coverage_mean": float(
                trace.coverage[start : self.t].mean()
            ),
        }

    def _apply_updates(self, updates: List[Tuple[int, int, str]], slot: int) -> int:
        applied = 0
        for item in updates:
            sid, gen, mode = item
            sensor = self.sensors[sid]
            if gen > sensor.sink_gen:
                sensor.sink_gen = gen
                self.coverage.on_update(sid, gen, slot)
                self._trace.updates.append(UpdateEvent(slot, sid, gen, mode))
                applied += 1
        return applied

    def _step_sensor(
        self, sensor: SensorRuntime, t: int, updates: List[Tuple[int, int, str]]
    ) -> None:
        phase = sensor.phase
        if phase == PHASE_IDLE or phase == PHASE_AT_EC_SERVER:
            return
        config = self.config
        energy = config.energy
        trace = self._trace
        sid = sensor.sensor_id
        if phase == PHASE_SENSING:
            self._consume(sensor, energy.sense_energy)
            trace.n_sensed[sid] += 1
            sensor.job_gen = t
            sensor.sensor_gen = t
            sensor.attempts = 0
            if sensor.mode == MODE_LOCAL:
                sensor.phase = PHASE_COMPUTING
                sensor.compute_left = config.timing.compute_slots_local
                sensor.compute_charged = False
            else:
                sensor.phase = PHASE_TRANSMITTING
            return
        if phase == PHASE_COMPUTING:
            self._compute_step(sensor, t)
            return
        if phase == PHASE_TRANSMITTING:
            self._transmit_step(sensor, t, updates)
            return
        if phase == PHASE_AWAITING_ENERGY:
            if sensor.stalled_step == "compute":
                if sensor.battery >= energy.compute_energy:
                    sensor.phase = PHASE_COMPUTING
                    sensor.stalled_step = None
                    self._compute_step(sensor, t)
            else:
                if sensor.battery >= energy.tx_energy:
                    sensor.phase = PHASE_TRANSMITTING
                    sensor.stalled_step = None
                    self._transmit_step(sensor, t, updates)
            return
        raise AssertionError(f"unknown phase {phase!r}")

    def _compute_step(self, sensor: SensorRuntime, t: int) -> None:
        config = self.config
        energy = config.energy
        if not sensor.compute_charged:
            if sensor.battery < energy.compute_energy:
                self._stall_or_drop(sensor, "compute")
                return
            self._consume(sensor, energy.compute_energy)
            self._trace.n_computed[sensor.sensor_id] += 1
            sensor.compute_charged = True
        sensor.compute_left -= 1
        if sensor.compute_left == 0:
            sensor.phase = PHASE_TRANSMITTING
            sensor.attempts = 0

    def _transmit_step(
        self, sensor: SensorRuntime, t: int, updates: List[Tuple[int, int, str]]
    ) -> None:
        config = self.config
        energy = config.energy
        if sensor.battery < energy.tx_energy:
            self._stall_or_drop(sensor, "tx")
            return
        self._consume(sensor, energy.tx_energy)
        self._trace.n_tx[sensor.sensor_id] += 1
        sensor.attempts += 1
        mode = sensor.mode or MODE_EDGE
        if self.channel.attempt(sensor, mode, self.rng):
            if mode == MODE_EDGE:
                self.queue.submit(
                    sensor.sensor_id,
                    sensor.job_gen,
                    config.timing.compute_slots_edge,
                )
                sensor.phase = PHASE_AT_EC_SERVER
            else:
                updates.append((sensor.sensor_id, sensor.job_gen, MODE_LOCAL))
                sensor.phase = PHASE_IDLE
        elif sensor.attempts >= config.ch.max_retx:
            sensor.phase = PHASE_IDLE
            self._trace.n_dropped[sensor.sensor_id] += 1

    def _stall_or_drop(self, sensor: SensorRuntime, step: str) -> None:
        if self.config.harvesting:
            sensor.phase = PHASE_AWAITING_ENERGY
            sensor.stalled_step = step
        else:
            sensor.phase = PHASE_IDLE
            self._trace.n_dropped[sensor.sensor_id] += 1

    def _consume(self, sensor: SensorRuntime, amount: float) -> None:
        if amount > sensor.battery + 1e-12:
            raise RuntimeError(
                f"sensor {sensor.sensor_id} asked to spend {amount} mJ "
                f"with only {sensor.battery} mJ available"
            )
        sensor.battery -= amount
        self._trace.energy_consumed[sensor.sensor_id] += amount

    def run(self) -> EpisodeTrace:
        while not self.done:
            self.run_round()
        return self._trace

    @property
    def trace(self) -> EpisodeTrace:
        return self._trace


def run_episode(
    config: ScenarioConfig,
    policy: Union[Policy, PolicySpec, None] = None,
    seed: int = 0,
) -> EpisodeTrace:
    """Simulate one full episode and return its trace."""
    return EpisodeEngine(config, policy, seed).run()


def estimate_eta_coverage(
    config: ScenarioConfig,
    policy: Union[PolicySpec, Policy, None],
    target_ratio: Optional[float] = None,
    replications: int = 16,
    seeds: Optional[Sequence[int]] = None,
    return_episode_means: bool = False,
):
    """Monte Carlo estimate of the probability the coverage target is met.

    Runs ``replications`` independent episodes and pools all slot
    boundaries.  Returns ``(estimate, half_width)`` where the half-width
    is a 95% normal-approximation radius on the pooled count; with
    ``return_episode_means`` a list of per-episode means is appended so
    callers can build replication-level intervals instead.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if seeds is None:
        seeds = range(replications)
    seeds = list(seeds)[:replications]
    if len(seeds) < replications:
        raise ValueError("fewer seeds than replications")
    eta = config.target_ratio if target_ratio is None else float(target_ratio)
    if isinstance(policy, PolicySpec) or policy is None:
        spec = policy
    else:
        spec = getattr(policy, "spec", None)
        if spec is None:
            raise TypeError("policy instance lacks a spec; pass a PolicySpec")
    episode_means: List[float] = []
    hits = 0
    total = 0
    for seed in seeds:
        trace = run_episode(config, spec, seed)
        indicator = trace.coverage_indicator(eta)
        episode_means.append(float(indicator.mean()))
        hits += int(indicator.sum())
        total += indicator.size
    p_hat = hits / total if total else 0.0
    half_width = 1.96 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / total) if total else 0.0
    if return_episode_means:
        return p_hat, half_width, episode_means
    return p_hat, half_width
