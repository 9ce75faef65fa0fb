"""Independent Monte Carlo oracles for the closed-form layer.

These estimators deliberately avoid the closed-form code paths: the outage
oracle samples an explicit interferer field and fading draws, and the renewal
oracle replays the per-round update process from first principles.  The test
suite (and the ``validate`` CLI verb) compares the analytic layer against
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .params import ChannelParams

__all__ = [
    "interferer_field_radius",
    "expected_interferers_per_trial",
    "outage_probability_mc",
    "RenewalStats",
    "renewal_violation_mc",
]


def interferer_field_radius(
    mode: str, distance: float, ch: ChannelParams, tail_bound: float = 0.002
) -> float:
    """Radius of the sampled interferer disc around the sink.

    Interferers beyond this radius are dropped; the radius is chosen so the
    neglected far-field mean interference shifts the outage exponent by at
    most ``tail_bound`` (and is never below four link lengths).
    """
    alpha = ch.path_loss_exp
    rate_ratio = ch.target_rate(mode) / ch.bandwidth
    threshold = 2.0**rate_ratio - 1.0
    lam_i = ch.interferer_intensity
    floor = 4.0 * distance
    if lam_i <= 0 or threshold <= 0:
        return floor
    # Neglected exponent mass: scale * 2*pi*lam_i * P * R^(2-alpha) / (alpha-2)
    # with scale = threshold * d^alpha / P, i.e. independent of tx power.
    coeff = threshold * distance**alpha * 2.0 * math.pi * lam_i / (alpha - 2.0)
    radius = (coeff / tail_bound) ** (1.0 / (alpha - 2.0))
    return max(floor, radius)


def expected_interferers_per_trial(
    mode: str, distance: float, ch: ChannelParams, tail_bound: float = 0.002
) -> float:
    """Mean number of sampled interferer points per Monte Carlo trial."""
    radius = interferer_field_radius(mode, distance, ch, tail_bound)
    return ch.interferer_intensity * math.pi * radius * radius


def outage_probability_mc(
    mode: str,
    distance: float,
    ch: ChannelParams,
    trials: int = 1_000_000,
    seed: int = 0,
    tail_bound: float = 0.002,
    chunk_points: int = 4_000_000,
) -> float:
    """Estimate the per-attempt outage probability by direct sampling.

    Each trial draws a unit-mean exponential fade for the tagged link, a
    Poisson number of interferers uniform on a disc around the sink (each
    with its own fade), and tests whether the achievable rate clears the
    mode's target rate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    alpha = ch.path_loss_exp
    rate_ratio = ch.target_rate(mode) / ch.bandwidth
    threshold = 2.0**rate_ratio - 1.0
    if threshold <= 0:
        return 0.0
    lam_i = ch.interferer_intensity
    radius = interferer_field_radius(mode, distance, ch, tail_bound)
    mean_points = lam_i * math.pi * radius * radius
    signal_gain = ch.tx_power * distance ** (-alpha)

    # Chunk trials so the total sampled interferer count stays bounded.
    trials_per_chunk = max(
        1, int(chunk_points / max(mean_points, 1.0))
    )
    failures = 0
    done = 0
    while done < trials:
        m = min(trials_per_chunk, trials - done)
        fade = rng.exponential(1.0, size=m)
        interference = np.zeros(m)
        if mean_points > 0:
            counts = rng.poisson(mean_points, size=m)
            total = int(counts.sum())
            if total > 0:
                radii = radius * np.sqrt(rng.random(total))
                fades = rng.exponential(1.0, size=total)
                powers = ch.tx_power * fades * radii ** (-alpha)
                # Sum the interferer powers per trial.
                starts = np.zeros(m, dtype=np.int64)
                np.cumsum(counts[:-1], out=starts[1:])
                nonempty = counts > 0
                sums = np.add.reduceat(powers, starts[nonempty])
                interference[nonempty] = sums
        sinr = signal_gain * fade / (ch.noise_power + interference)
        failures += int(np.count_nonzero(sinr < threshold))
        done += m
    return failures / trials


@dataclass(frozen=True)
class RenewalStats:
    """Empirical statistics of the sink-update renewal process.

    ``pair_violation_means`` maps (previous mode, current mode) pairs to the
    mean number of age-violating slots per renewal cycle of that kind, with
    matching counts in ``pair_cycle_counts``.
    """

    n_rounds: int
    n_cycles: int
    mean_inter_update: float
    violation_prob: float
    mean_violation: float
    pair_violation_means: Dict[Tuple[str, str], float]
    pair_cycle_counts: Dict[Tuple[str, str], int]


def renewal_violation_mc(
    p_s: float,
    p_e: float,
    p_o_edge: float,
    p_o_local: float,
    delta: int,
    tau_r: int,
    tau_e: int,
    tau_l: int,
    v_th_slots: int,
    rounds: int = 1_000_000,
    seed: int = 0,
) -> Optional[RenewalStats]:
    """Replay the per-round update process and measure age violations.

    Each round independently senses with probability ``p_s``, offloads with
    probability ``p_e`` (otherwise compresses locally), and retransmits up to
    ``delta`` times against the mode's per-attempt outage probability.  A
    successful delivery in round ``j`` with ``c`` attempts resets the
    sink-side age to ``1 + c + tau_mode`` slots at the completion boundary.
    Per-slot ages between consecutive updates follow the resulting sawtooth;
    a slot violates when its age exceeds ``v_th_slots``.  Slots before the
    first and after the last update are excluded (the stationary quantities
    are per-cycle averages).

    Returns ``None`` when fewer than two updates occurred.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = np.random.default_rng(seed)
    sense = rng.random(rounds) < p_s
    edge = rng.random(rounds) < p_e
    # 1 - U is uniform on (0, 1]; log of it is finite.
    u = 1.0 - rng.random(rounds)

    p_o = np.where(edge, p_o_edge, p_o_local)
    with np.errstate(divide="ignore", invalid="ignore"):
        # Failures before the first success of an unbounded Bernoulli chain.
        fails = np.floor(np.log(u) / np.log(p_o)).astype(np.int64)
    fails = np.where(p_o <= 0.0, 0, fails)
    fails = np.where(p_o >= 1.0, delta, fails)

    success = sense & (fails < delta)
    idx = np.flatnonzero(success)
    if idx.size < 2:
        return None

    attempts = fails[idx] + 1
    tau = np.where(edge[idx], tau_e, tau_l)
    ages_after_update = 1 + attempts + tau  # sink-side age at completion

    inter_update = (
        np.diff(idx) * tau_r + ages_after_update[1:] - ages_after_update[:-1]
    )
    fresh_slots = np.clip(
        v_th_slots + 1 - ages_after_update[:-1], 0, inter_update
    )
    violations = inter_update - fresh_slots

    pair_means: Dict[Tuple[str, str], float] = {}
    pair_counts: Dict[Tuple[str, str], int] = {}
    prev_edge = edge[idx][:-1]
    cur_edge = edge[idx][1:]
    for prev_label, prev_mask in (("edge", prev_edge), ("local", ~prev_edge)):
        for cur_label, cur_mask in (("edge", cur_edge), ("local", ~cur_edge)):
            mask = prev_mask & cur_mask
            count = int(np.count_nonzero(mask))
            pair_counts[(prev_label, cur_label)] = count
            if count:
                pair_means[(prev_label, cur_label)] = float(
                    violations[mask].mean()
                )
    return RenewalStats(
        n_rounds=rounds,
        n_cycles=int(inter_update.size),
        mean_inter_update=float(inter_update.mean()),
        violation_prob=float(violations.sum() / inter_update.sum()),
        mean_violation=float(violations.mean()),
        pair_violation_means=pair_means,
        pair_cycle_counts=pair_counts,
    )
