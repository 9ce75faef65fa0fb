"""Factories for the default parameter set used throughout the suite.

Kept outside conftest.py so test modules can import them by name.
"""

import math

from freshcov.params import (
    ChannelParams,
    CorrelationParams,
    EnergyParams,
    TimingParams,
    dbm_to_mw,
)
from freshcov.analysis import SingleSensorScenario


def make_channel(**overrides) -> ChannelParams:
    base = dict(
        tx_power=dbm_to_mw(15),
        path_loss_exp=4.0,
        noise_power=dbm_to_mw(-100),
        sink_intensity=1e-4,
        reuse_prob=1.0,
        bandwidth=1e7,
        data_size_edge=6000.0,
        data_size_local=500.0,
        slot_duration=0.01,
        max_retx=3,
    )
    base.update(overrides)
    return ChannelParams(**base)


def make_correlation(**overrides) -> CorrelationParams:
    base = dict(beta1=0.0045, beta2=1.35, err_threshold=0.6)
    base.update(overrides)
    return CorrelationParams(**base)


def make_energy_single(**overrides) -> EnergyParams:
    base = dict(
        sense_energy=10.0,
        tx_energy=13.55,
        compute_energy=12.0,
        battery_budget=400.0,
        battery_cap=400.0,
        harvest_min=0.0,
        harvest_max=0.0,
    )
    base.update(overrides)
    return EnergyParams(**base)


def make_energy_multi(**overrides) -> EnergyParams:
    base = dict(
        sense_energy=10.0,
        tx_energy=13.55,
        compute_energy=20.0,
        battery_budget=50.0,
        battery_cap=50.0,
        harvest_min=1.5,
        harvest_max=4.5,
    )
    base.update(overrides)
    return EnergyParams(**base)


def make_timing(**overrides) -> TimingParams:
    base = dict(
        round_len=8,
        compute_slots_edge=1,
        compute_slots_local=2,
        rounds_per_episode=20,
    )
    base.update(overrides)
    return TimingParams(**base)


def make_single_scenario(**overrides) -> SingleSensorScenario:
    base = dict(
        ch=make_channel(),
        corr=make_correlation(),
        energy=make_energy_single(),
        timing=make_timing(),
        sensor_sink_distance=100.0,
        area=math.pi * 50.0**2,
        target_ratio=0.9,
    )
    base.update(overrides)
    return SingleSensorScenario(**base)
