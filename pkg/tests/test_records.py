"""SpikeRecord construction, validation, and slicing."""

import numpy as np
import pytest

from spikesim import SpikeRecord


def test_from_step_events_times_on_grid():
    events = [(3, np.array([0, 2])), (7, np.array([2]))]
    rec = SpikeRecord.from_step_events(events, 4, dt=0.1, window=10.0)
    assert np.allclose(rec.times[0], [0.3])
    assert np.allclose(rec.times[2], [0.3, 0.7])
    assert rec.times[1].size == 0 and rec.times[3].size == 0
    assert rec.counts().tolist() == [1, 0, 2, 0]
    assert rec.total() == 3


def test_empty_record():
    rec = SpikeRecord.empty(5, 100.0)
    assert rec.total() == 0
    assert rec.counts().tolist() == [0] * 5


def test_validation_rejects_bad_trains():
    with pytest.raises(ValueError):
        SpikeRecord([np.array([5.0, 4.0])], 10.0)          # not increasing
    with pytest.raises(ValueError):
        SpikeRecord([np.array([11.0])], 10.0)              # out of window
    with pytest.raises(ValueError):
        SpikeRecord([np.array([-0.1])], 10.0)              # negative time
    with pytest.raises(ValueError):
        SpikeRecord([np.array([np.nan])], 10.0)            # non-finite
    with pytest.raises(ValueError):
        SpikeRecord([np.array([[1.0]])], 10.0)             # not 1-D


def test_subset_slices_by_neuron_range():
    rec = SpikeRecord([np.array([1.0]), np.array([2.0, 3.0]), np.empty(0)], 10.0)
    sub = rec.subset(1, 3)
    assert sub.counts().tolist() == [2, 0]
    assert np.allclose(sub.times[0], [2.0, 3.0])


def test_equality():
    a = SpikeRecord([np.array([1.0, 2.0])], 10.0)
    b = SpikeRecord([np.array([1.0, 2.0])], 10.0)
    c = SpikeRecord([np.array([1.0, 2.5])], 10.0)
    assert a == b and a != c
