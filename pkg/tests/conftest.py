"""Shared fixtures: default parameters and a tiny network for fast tests."""

import pytest

from spikesim import (EncodingConfig, NetworkConfig, NeuronParams,
                      SimulationConfig, build_network)

# Calibration constant for the default neuron (100 ms window, 10 spikes,
# dt=0.1 ms), frozen from the reference calibration run.
I_K_DEFAULT = 797.4


@pytest.fixture
def params():
    return NeuronParams()


@pytest.fixture
def enc():
    return EncodingConfig(I_K=I_K_DEFAULT, target=10, window=100.0)


@pytest.fixture
def tiny_cfg():
    # 16 inputs -> 4 feature -> 4 inhib -> 4 readout (2 classes x 2)
    return NetworkConfig(rows=4, cols=4, n_classes=2, neurons_per_class=2,
                         seed=5)


@pytest.fixture
def tiny_net(tiny_cfg, params):
    return build_network(tiny_cfg, params)


@pytest.fixture
def sim():
    return SimulationConfig(seed=5, epochs_phase1=1, epochs_phase2=1)
