# MIT License
# 
# Copyright (c) 2021, Alex M. Maldonado
# 
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
# 
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

import pytest
import numpy as np

from vsne_tools.schedules import *
from vsne_tools.utils import *

def test_geometric_batches():
    schedule = geometric(1.0, 0.5)
    assert batch_size(schedule, 0) == 2
    assert batch_size(schedule, 2) == 8
    assert batch_size(geometric(0.01, 0.98), 0) == 10205

def test_polynomial_batches():
    assert batch_size(polynomial(1.0, 2), 3) == 16
    assert batch_size(raw_polynomial(1), 0) == 1
    assert batch_size(raw_polynomial(1), 9) == 10

def test_raw_and_pbr_batches():
    assert batch_size(raw_geometric(0.5), 3) == 16
    # ceil(2 * 0.5^-2) at k = 0.
    assert batch_size(pbr_geometric(2.0, 0.5), 0) == 8
    assert batch_size(constant(16), 1000) == 16

def test_batch_sizes_nondecreasing():
    for schedule in (geometric(0.1, 0.9), polynomial(0.5, 1.5), raw_geometric(0.98)):
        sizes = [batch_size(schedule, k) for k in range(100)]
        assert sizes[0] >= 1
        assert all(b >= a for a, b in zip(sizes, sizes[1:]))

def test_batch_cap():
    schedule = raw_geometric(0.5, max_batch=1000)
    assert batch_size(schedule, 8) == 512
    with pytest.raises(ScheduleError):
        batch_size(schedule, 9)
    # Far past the cap the check must not overflow.
    with pytest.raises(ScheduleError):
        batch_size(raw_geometric(0.5), 5000)

def test_batch_parameter_errors():
    with pytest.raises(ScheduleError):
        geometric(1.0, 1.0)
    with pytest.raises(ScheduleError):
        raw_geometric(0.0)
    with pytest.raises(ScheduleError):
        polynomial(1.0, 0.0)
    with pytest.raises(ScheduleError):
        constant(0)
    with pytest.raises(ScheduleError):
        BatchSchedule('geometric', alpha=1.0)
    with pytest.raises(ConfigurationError):
        BatchSchedule('exponential')

def test_comm_rounds():
    assert comm_rounds(CommSchedule('linear'), 4) == 5
    assert comm_rounds(CommSchedule('polynomial', u=0.5), 8) == 3
    assert comm_rounds(CommSchedule('log'), 0) == 1
    assert comm_rounds(CommSchedule('log'), 1) == 1
    assert comm_rounds(CommSchedule('log'), 3) == 2
    with pytest.raises(ScheduleError):
        CommSchedule('polynomial', u=1.5)
    with pytest.raises(ScheduleError):
        CommSchedule('polynomial')

def test_cumulative_counts():
    assert cumulative_comm_rounds(CommSchedule('linear'), 10) == 55
    assert cumulative_samples(raw_geometric(0.5), 3, 3) == 3 * (2 + 4 + 8)
    assert cumulative_samples(constant(4), 2, 0) == 0
