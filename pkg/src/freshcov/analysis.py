"""Closed-form freshness-coverage analysis for a single pre-charged sensor.

The sink-side data age follows a renewal process: each round the sensor
senses with probability ``p_s``, offloads to the sink's server with
probability ``p_e`` (otherwise compresses locally), and retransmits up to
``max_retx`` times against the mode's per-attempt outage probability.  The
coverage target translates into an age budget; this module computes the
stationary probability that the budget holds, in closed form, together with
the energy-constrained search for the best ``(p_s, p_e)``.

Derivation conventions (shared with the simulator and the oracles):

* Ages are sampled at slot boundaries.  An update that used ``c`` attempts
  resets the sink-side age to ``1 + c + tau_mode`` slots.
* Between updates the age grows by one per slot, so a cycle that starts at
  age ``Z`` and spans ``U`` slots records the ages ``Z, Z+1, ..., Z+U-1``.
* The number of rounds between consecutive updates is geometric with the
  per-round update probability; attempt counts are truncated-geometric given
  success.  All expectations below are explicit sums over these laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .model import outage_probability, sensing_radius
from .params import (
    ChannelParams,
    CorrelationParams,
    EnergyParams,
    MODE_EDGE,
    MODE_LOCAL,
    TimingParams,
)

__all__ = [
    "UnreachableTarget",
    "NeverUpdates",
    "SingleSensorScenario",
    "ClosedFormResult",
    "TargetAoi",
    "target_aoi",
    "p_update",
    "expected_inter_update",
    "conditional_mode_prob",
    "violation_time_conditional",
    "eta_coverage_closed_form",
    "expected_tx_count",
    "per_mode_round_energy",
    "avg_energy_per_round",
    "optimal_ps_given_pe",
    "optimize_single",
    "SingleOptimum",
    "MultiOptimum",
    "optimize_multi",
]


class UnreachableTarget(ValueError):
    """The coverage target cannot be met even by perfectly fresh data."""


class NeverUpdates(ValueError):
    """No successful sink update is possible under these parameters."""


@dataclass(frozen=True)
class SingleSensorScenario:
    """One pre-charged sensor at the centre of a disc-shaped area.

    ``sensor_sink_distance`` is the uplink length in metres; ``area`` is the
    monitored area in square metres; ``target_ratio`` is the coverage
    fraction that must hold for a slot to count as covered.
    """

    ch: ChannelParams
    corr: CorrelationParams
    energy: EnergyParams
    timing: TimingParams
    sensor_sink_distance: float
    area: float
    target_ratio: float

    def __post_init__(self) -> None:
        if self.sensor_sink_distance <= 0:
            raise ValueError("sensor_sink_distance must be > 0 m")
        if self.area <= 0:
            raise ValueError("area must be > 0 m^2")
        if not 0 < self.target_ratio <= 1:
            raise ValueError("target_ratio must be in (0, 1]")
        self.timing.validate_round_capacity(self.ch.max_retx)


@dataclass(frozen=True)
class ClosedFormResult:
    """Stationary freshness-coverage metrics of the update renewal process."""

    target_aoi_slots: int
    p_update: float
    expected_inter_update: float
    expected_violation: float
    violation_prob: float
    eta_coverage: float


class TargetAoi(NamedTuple):
    """Largest tolerable sink-side age: exact seconds and whole slots."""

    seconds: float
    slots: int


def target_aoi(
    eta: float,
    area: float,
    corr: CorrelationParams,
    slot_duration: float,
) -> TargetAoi:
    """Age budget under which one centred sensor still covers ``eta`` of the area.

    The sensor's coverage disc must hold at least ``eta * area``, i.e. its
    sensing radius must reach ``sqrt(eta * area / pi)``; inverting the radius
    in the age gives the budget.  Raises :class:`UnreachableTarget` when even
    age-zero data falls short, or when the budget does not survive a single
    slot.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    if area <= 0:
        raise ValueError(f"area must be > 0 m^2, got {area}")
    if slot_duration <= 0:
        raise ValueError("slot_duration must be > 0 s")
    needed_radius = math.sqrt(eta * area / math.pi)
    if sensing_radius(0.0, corr) < needed_radius:
        raise UnreachableTarget(
            f"coverage target {eta:g} needs a {needed_radius:.2f} m sensing "
            "radius, which even fresh data cannot provide"
        )
    seconds = (
        -(corr.beta1 / corr.beta2) * needed_radius
        - math.log1p(-corr.err_threshold) / (2.0 * corr.beta2)
    )
    if seconds <= slot_duration:
        raise UnreachableTarget(
            f"age budget {seconds:.4g} s does not survive one "
            f"{slot_duration:g} s slot"
        )
    return TargetAoi(seconds=seconds, slots=int(math.floor(seconds / slot_duration)))


def p_update(
    p_s: float, p_e: float, p_o_edge: float, p_o_local: float, delta: int
) -> float:
    """Per-round probability that a sensing leads to a successful sink update."""
    for name, value in (
        ("p_s", p_s),
        ("p_e", p_e),
        ("p_o_edge", p_o_edge),
        ("p_o_local", p_o_local),
    ):
        if not 0 <= value <= 1:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    if delta < 1:
        raise ValueError("delta must be >= 1")
    return p_s * (
        p_e * (1.0 - p_o_edge**delta) + (1.0 - p_e) * (1.0 - p_o_local**delta)
    )


def expected_inter_update(p_x: float, tau_r: int) -> float:
    """Mean number of slots between consecutive sink updates."""
    if not 0 <= p_x <= 1:
        raise ValueError(f"p_x must be in [0, 1], got {p_x}")
    if p_x == 0:
        raise NeverUpdates("update probability is zero; the age never resets")
    return tau_r / p_x


def conditional_mode_prob(
    p_e: float, p_o_edge: float, p_o_local: float, delta: int
) -> Tuple[float, float]:
    """Mode split of successful updates: (edge share, local share)."""
    edge_mass = p_e * (1.0 - p_o_edge**delta)
    local_mass = (1.0 - p_e) * (1.0 - p_o_local**delta)
    den = edge_mass + local_mass
    if den <= 0:
        raise NeverUpdates(
            "neither compute mode can complete an update (all attempts fail)"
        )
    return edge_mass / den, local_mass / den


def _attempt_pmf_given_success(p_o: float, delta: int) -> List[float]:
    """P[c attempts | success within delta], c = 1..delta."""
    if p_o >= 1.0:
        raise NeverUpdates("per-attempt outage 1 admits no successful update")
    if p_o <= 0.0:
        return [1.0] + [0.0] * (delta - 1)
    norm = 1.0 - p_o**delta
    return [p_o ** (c - 1) * (1.0 - p_o) / norm for c in range(1, delta + 1)]


def _mean_attempts_given_success(p_o: float, delta: int) -> float:
    """E[c | success within delta] for the truncated attempt count."""
    if p_o >= 1.0:
        raise NeverUpdates("per-attempt outage 1 admits no successful update")
    if p_o <= 0.0:
        return 1.0
    return 1.0 / (1.0 - p_o) - delta * p_o**delta / (1.0 - p_o**delta)


def _mode_constants(
    mode: str, p_o_edge: float, p_o_local: float, tau_e: int, tau_l: int
) -> Tuple[float, int]:
    if mode == MODE_EDGE:
        return p_o_edge, tau_e
    if mode == MODE_LOCAL:
        return p_o_local, tau_l
    raise ValueError(f"unknown compute mode {mode!r}")


def violation_time_conditional(
    v_th_slots: int,
    mode_prev: str,
    mode_cur: str,
    p_x: float,
    p_o_edge: float,
    p_o_local: float,
    delta: int,
    tau_r: int,
    tau_e: int,
    tau_l: int,
) -> float:
    """Mean age-violating slots per renewal cycle, given the two modes.

    A cycle runs from one update (made in mode ``mode_prev``, resetting the
    age to ``Z_prev``) to the next (mode ``mode_cur``).  The recorded ages
    are ``Z_prev .. Z_prev + U - 1`` for a cycle of ``U`` slots, so the count
    of ages above the budget ``F = v_th_slots`` is
    ``max(0, U - max(0, F + 1 - Z_prev))``.  The expectation is evaluated by
    splitting on which of five ranges contains ``F``:

    1. ``F < 2 + tau_prev``: even the freshest update violates; every slot of
       the cycle counts.
    2. ``F < 1 + delta + tau_prev``: only cycles whose opening age is small
       enough start with fresh slots; subtract their expected count.
    3. ``F < tau_r + 2 + tau_cur``: every cycle starts fresh and goes stale
       before the next update can land.
    4/5. larger ``F``: cycles short enough end entirely fresh; sum the
       geometric tail over the number of update-free rounds, with (case 4) a
       partial attempt-count sum in the straddling round.
    """
    if v_th_slots < 0:
        raise ValueError("v_th_slots must be >= 0")
    if not 0 < p_x <= 1:
        if p_x == 0:
            raise NeverUpdates("update probability is zero")
        raise ValueError(f"p_x must be in (0, 1], got {p_x}")
    if delta < 1 or tau_r < 1:
        raise ValueError("delta and tau_r must be >= 1")

    p_prev, tau_prev = _mode_constants(mode_prev, p_o_edge, p_o_local, tau_e, tau_l)
    p_cur, tau_cur = _mode_constants(mode_cur, p_o_edge, p_o_local, tau_e, tau_l)
    big_f = int(v_th_slots)
    miss = 1.0 - p_x  # per-round probability of no update

    mean_age_cur = 1 + tau_cur + _mean_attempts_given_success(p_cur, delta)
    mean_age_prev = 1 + tau_prev + _mean_attempts_given_success(p_prev, delta)
    mean_cycle = tau_r / p_x + mean_age_cur - mean_age_prev

    # Case 1: the budget is below the smallest possible opening age.
    if big_f < 2 + tau_prev:
        return mean_cycle

    # Case 2: the budget sits inside the opening age's support.
    if big_f < 1 + delta + tau_prev:
        n = big_f - 1 - tau_prev  # largest attempt count that opens fresh
        pmf_prev = _attempt_pmf_given_success(p_prev, delta)
        fresh = sum((n + 1 - c) * pmf_prev[c - 1] for c in range(1, n + 1))
        return mean_cycle - fresh

    # Cases 3-5: every cycle opens fresh; violations are the cycle slots
    # beyond the budget, max(0, Y*tau_r + Z_cur - (F + 1)) for Y update-free
    # rounds and closing age Z_cur.
    if big_f < tau_r + 2 + tau_cur:
        # Case 3: even a first-round update closes at or beyond the budget.
        return tau_r / p_x + mean_age_cur - 1 - big_f

    rounds_below = (big_f - 2 - tau_cur) // tau_r  # y: largest Y fully fresh-capable
    offset = big_f - (rounds_below * tau_r + 2 + tau_cur)
    tail = miss**rounds_below * (
        rounds_below * tau_r + tau_r / p_x + mean_age_cur - 1 - big_f
    )
    if offset <= delta - 2:
        # Case 4: at Y = rounds_below the violation depends on the attempt
        # count; sum the partial truncated-geometric mass.
        cutoff = offset + 1  # attempts c <= cutoff+? stay within budget
        pmf_cur = _attempt_pmf_given_success(p_cur, delta)
        partial = sum(
            (c - cutoff - 1) * pmf_cur[c - 1] for c in range(cutoff + 2, delta + 1)
        )
        return p_x * miss ** (rounds_below - 1) * partial + tail
    # Case 5: the straddling round never violates; only longer cycles do.
    return tail


def _case_label(
    v_th_slots: int,
    tau_prev: int,
    tau_cur: int,
    delta: int,
    tau_r: int,
) -> int:
    """Which of the five budget ranges applies (diagnostic helper)."""
    big_f = int(v_th_slots)
    if big_f < 2 + tau_prev:
        return 1
    if big_f < 1 + delta + tau_prev:
        return 2
    if big_f < tau_r + 2 + tau_cur:
        return 3
    rounds_below = (big_f - 2 - tau_cur) // tau_r
    offset = big_f - (rounds_below * tau_r + 2 + tau_cur)
    return 4 if offset <= delta - 2 else 5


def eta_coverage_closed_form(
    scn: SingleSensorScenario, p_s: float, p_e: float
) -> ClosedFormResult:
    """Stationary probability that the coverage target holds at a random slot.

    Combines the age budget implied by the coverage target, the per-round
    update probability, and the per-mode-pair expected violating slots into
    ``1 - (expected violating slots per cycle) / (expected cycle length)``.
    A zero update probability yields the degenerate result (certain
    violation) rather than an error, matching the simulator's behaviour for
    a never-updating policy.
    """
    delta = scn.ch.max_retx
    tau_r = scn.timing.round_len
    budget = target_aoi(
        scn.target_ratio, scn.area, scn.corr, scn.ch.slot_duration
    )
    p_o_edge = outage_probability(MODE_EDGE, scn.sensor_sink_distance, scn.ch)
    p_o_local = outage_probability(MODE_LOCAL, scn.sensor_sink_distance, scn.ch)
    p_x = p_update(p_s, p_e, p_o_edge, p_o_local, delta)
    if p_x == 0:
        return ClosedFormResult(
            target_aoi_slots=budget.slots,
            p_update=0.0,
            expected_inter_update=math.inf,
            expected_violation=math.inf,
            violation_prob=1.0,
            eta_coverage=0.0,
        )
    share_edge, share_local = conditional_mode_prob(
        p_e, p_o_edge, p_o_local, delta
    )
    shares = {MODE_EDGE: share_edge, MODE_LOCAL: share_local}
    mean_violation = 0.0
    for mode_prev, w_prev in shares.items():
        if w_prev == 0.0:
            continue
        for mode_cur, w_cur in shares.items():
            if w_cur == 0.0:
                continue
            mean_violation += w_prev * w_cur * violation_time_conditional(
                budget.slots,
                mode_prev,
                mode_cur,
                p_x,
                p_o_edge,
                p_o_local,
                delta,
                tau_r,
                scn.timing.compute_slots_edge,
                scn.timing.compute_slots_local,
            )
    mean_cycle = tau_r / p_x
    violation_prob = min(1.0, max(0.0, mean_violation / mean_cycle))
    return ClosedFormResult(
        target_aoi_slots=budget.slots,
        p_update=p_x,
        expected_inter_update=mean_cycle,
        expected_violation=mean_violation,
        violation_prob=violation_prob,
        eta_coverage=1.0 - violation_prob,
    )


def expected_tx_count(p_o: float, delta: int) -> float:
    """Mean transmission attempts per data item, counting failed items.

    Explicit sum over the attempt law: ``c`` attempts with probability
    ``p_o^(c-1) * (1 - p_o)`` for a success at attempt ``c``, plus ``delta``
    attempts with probability ``p_o^delta`` for a dropped item.
    """
    if not 0 <= p_o <= 1:
        raise ValueError(f"p_o must be in [0, 1], got {p_o}")
    if delta < 1:
        raise ValueError("delta must be >= 1")
    return (
        sum(c * p_o ** (c - 1) * (1.0 - p_o) for c in range(1, delta + 1))
        + delta * p_o**delta
    )


def per_mode_round_energy(
    energy: EnergyParams, p_o_edge: float, p_o_local: float, delta: int
) -> Tuple[float, float]:
    """Mean energy of one sensing round per mode: (edge mJ, local mJ)."""
    edge = energy.sense_energy + energy.tx_energy * expected_tx_count(
        p_o_edge, delta
    )
    local = (
        energy.sense_energy
        + energy.compute_energy
        + energy.tx_energy * expected_tx_count(p_o_local, delta)
    )
    return edge, local


def avg_energy_per_round(
    p_s: float,
    p_e: float,
    p_o_edge: float,
    p_o_local: float,
    delta: int,
    energy: EnergyParams,
) -> float:
    """Mean energy a sensor spends per round under the probability policy."""
    edge, local = per_mode_round_energy(energy, p_o_edge, p_o_local, delta)
    return p_s * (p_e * edge + (1.0 - p_e) * local)


def optimal_ps_given_pe(
    p_e: float, battery_budget: float, n_rounds: int, edge_energy: float, local_energy: float
) -> float:
    """Largest sensing probability the energy budget sustains for ``n_rounds``.

    The coverage probability is nondecreasing in the sensing probability, so
    the budget constraint binds and the optimum is the budget divided by the
    mean per-sensing energy, capped at one.
    """
    if edge_energy <= 0 or local_energy <= 0:
        raise ValueError("per-round energies must be positive")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if battery_budget < 0:
        raise ValueError("battery_budget must be >= 0")
    per_sensing = p_e * edge_energy + (1.0 - p_e) * local_energy
    return min(battery_budget / (n_rounds * per_sensing), 1.0)


class SingleOptimum(NamedTuple):
    p_s: float
    p_e: float
    eta_coverage: float


def optimize_single(scn: SingleSensorScenario) -> SingleOptimum:
    """Exhaustive search over the offload probability, budget-tight sensing.

    Scans ``p_e`` over {0, 0.01, ..., 1}, pairs each with the largest
    affordable ``p_s``, and returns the best coverage probability; ties go to
    the smaller ``p_e``.
    """
    p_o_edge = outage_probability(MODE_EDGE, scn.sensor_sink_distance, scn.ch)
    p_o_local = outage_probability(MODE_LOCAL, scn.sensor_sink_distance, scn.ch)
    edge_energy, local_energy = per_mode_round_energy(
        scn.energy, p_o_edge, p_o_local, scn.ch.max_retx
    )
    best: Optional[SingleOptimum] = None
    for step in range(101):
        p_e = step / 100.0
        p_s = optimal_ps_given_pe(
            p_e,
            scn.energy.battery_budget,
            scn.timing.rounds_per_episode,
            edge_energy,
            local_energy,
        )
        result = eta_coverage_closed_form(scn, p_s, p_e)
        if best is None or result.eta_coverage > best.eta_coverage:
            best = SingleOptimum(p_s, p_e, result.eta_coverage)
    assert best is not None
    return best


class MultiOptimum(NamedTuple):
    p_s: float
    p_e: float
    eta_coverage: float
    half_width: float


def optimize_multi(
    config,
    grid: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    replications: int = 16,
    base_seed: int = 0,
) -> MultiOptimum:
    """Exhaustive simulation search over a (p_s, p_e) probability grid.

    ``config`` is a :class:`freshcov.config.ScenarioConfig`; each grid point
    is scored by Monte Carlo with common per-replication seeds so the argmax
    comparison is paired.  Ties go to the smaller ``p_s``, then the smaller
    ``p_e``.  The reported half-width is a normal-approximation confidence
    radius over per-replication episode means (slots within an episode are
    serially correlated, so slot-level counting would understate it).
    """
    from .policies import PolicySpec  # local import: avoid a module cycle
    from .simulator import estimate_eta_coverage

    if replications < 1:
        raise ValueError("replications must be >= 1")
    if grid is None:
        values = [round(0.05 * i, 2) for i in range(21)]
        grid = (values, values)
    ps_values, pe_values = grid
    seeds = [base_seed + i for i in range(replications)]

    best: Optional[MultiOptimum] = None
    for p_s in sorted(ps_values):
        for p_e in sorted(pe_values):
            policy = PolicySpec.probability(p_s, p_e)
            estimate, _, episode_means = estimate_eta_coverage(
                config,
                policy,
                config.target_ratio,
                replications,
                seeds,
                return_episode_means=True,
            )
            if len(episode_means) > 1:
                mean = sum(episode_means) / len(episode_means)
                var = sum((m - mean) ** 2 for m in episode_means) / (
                    len(episode_means) - 1
                )
                half_width = 1.96 * math.sqrt(var / len(episode_means))
            else:
                half_width = 0.0
            half_width = max(half_width, 1e-4)
            if best is None or estimate > best.eta_coverage:
                best = MultiOptimum(p_s, p_e, estimate, half_width)
    assert best is not None
    return best
