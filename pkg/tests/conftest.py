"""Shared fixtures: the default parameter set used throughout the suite."""

import pytest

from freshcov.params import ChannelParams, CorrelationParams, EnergyParams, TimingParams
from freshcov.analysis import SingleSensorScenario

from factories import (
    make_channel,
    make_correlation,
    make_energy_single,
    make_single_scenario,
    make_timing,
)


@pytest.fixture
def channel() -> ChannelParams:
    return make_channel()


@pytest.fixture
def correlation() -> CorrelationParams:
    return make_correlation()


@pytest.fixture
def energy_single() -> EnergyParams:
    return make_energy_single()


@pytest.fixture
def timing() -> TimingParams:
    return make_timing()


@pytest.fixture
def single_scenario() -> SingleSensorScenario:
    return make_single_scenario()
