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

from vsne_tools.prox import *
from vsne_tools.game import affine_game, deterministic_gradient, ResourceCounters
from vsne_tools.cournot import gen_linear_cournot
from vsne_tools.analysis import ground_truth_ne
from vsne_tools.utils import *

def test_box_prox():
    box = box_indicator(0.0, 2.0)
    assert np.array_equal(prox(box, np.array([1.0, 1.0]), 0.5), np.array([1.0, 1.0]))
    for alpha in (1e-3, 1.0, 10.0):
        assert np.array_equal(prox(box, np.array([-1.0, 3.0]), alpha), np.array([0.0, 2.0]))

def test_nonneg_prox():
    assert np.array_equal(
        prox(nonneg_indicator(), np.array([-1.0, 2.0]), 1.0), np.array([0.0, 2.0])
    )

def test_l1_soft_threshold():
    op = l1(1.0)
    assert np.array_equal(prox(op, np.array([2.0, -0.5, 0.0]), 1.0), np.array([1.0, 0.0, 0.0]))
    # Exactly at the threshold.
    assert prox(op, np.array([0.5]), 0.5)[0] == 0.0
    x = prox(op, np.array([2.0, -1.0]), np.array([0.5, 0.25]))
    assert np.allclose(x, [1.5, -0.75])

def test_zero_prox_is_identity():
    x = np.array([3.0, -7.0, 0.1])
    assert np.array_equal(prox(zero(), x, 2.0), x)

def test_prox_bad_step():
    with pytest.raises(DomainError):
        prox(zero(), np.array([1.0]), 0.0)
    with pytest.raises(DomainError):
        prox(l1(1.0), np.array([1.0]), -1.0)

def test_prox_operator_validation():
    with pytest.raises(ConfigurationError):
        ProxOperator('ball')
    with pytest.raises(ConfigurationError):
        l1(-1.0)
    with pytest.raises(ConfigurationError):
        box_indicator(1.0, 0.0)

def test_prox_value():
    assert prox_value(box_indicator(0.0, 2.0), np.array([1.0, 2.0])) == 0.0
    assert prox_value(box_indicator(0.0, 2.0), np.array([1.0, 2.5])) == np.inf
    assert prox_value(nonneg_indicator(), np.array([-1e-3])) == np.inf
    assert prox_value(l1(2.0), np.array([1.0, -2.0])) == 6.0
    assert prox_value(zero(), np.array([5.0])) == 0.0

def test_prox_profile_blockwise():
    game = affine_game(
        np.eye(2), np.zeros(2),
        prox_terms=[box_indicator(0.0, 2.0), box_indicator(-1.0, 1.0)]
    )
    counters = ResourceCounters()
    x = prox_profile(game, np.array([3.0, -2.0]), 0.1, counters=counters)
    assert np.array_equal(x.data, np.array([2.0, -1.0]))
    assert counters.prox_evals == 1

def test_prox_profile_zero_terms():
    game = affine_game(np.eye(3), np.zeros(3))
    x = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(prox_profile(game, x, 0.3).data, x)

@pytest.mark.parametrize(
    'op', [box_indicator(-1.0, 2.0), nonneg_indicator(), l1(0.7), zero()],
    ids=['box', 'nonneg', 'l1', 'zero']
)
def test_prox_nonexpansive(op):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x, y = rng.normal(scale=3.0, size=(2, 5))
        alpha = rng.uniform(1e-3, 5.0)
        gap = np.linalg.norm(prox(op, x, alpha) - prox(op, y, alpha))
        assert gap <= np.linalg.norm(x - y) + 1e-12

def test_indicator_prox_idempotent():
    rng = np.random.default_rng(1)
    for op in (box_indicator(-1.0, 2.0), nonneg_indicator()):
        for _ in range(100):
            x = rng.normal(scale=3.0, size=6)
            once = prox(op, x, 0.5)
            assert np.array_equal(prox(op, once, 0.5), once)

def test_nonneg_prox_step_independent():
    rng = np.random.default_rng(2)
    x = rng.normal(size=50)
    reference = prox(nonneg_indicator(), x, 1.0)
    for alpha in (1e-6, 0.3, 7.0, 1e4):
        assert np.array_equal(prox(nonneg_indicator(), x, alpha), reference)

def test_equilibrium_is_prox_fixed_point():
    box_game = affine_game(
        2.0 * np.eye(2), np.array([-6.0, 1.0]),
        prox_terms=[box_indicator(0.0, 2.0), box_indicator(0.0, 2.0)]
    )
    cournot, _ = gen_linear_cournot(6, 3, seed=0)
    for game in (box_game, cournot):
        x_star = ground_truth_ne(game).data
        for alpha in (0.01, 0.1):
            step = x_star - alpha * deterministic_gradient(game, x_star).data
            assert np.allclose(prox_profile(game, step, alpha).data, x_star, rtol=0.0, atol=1e-10)
    assert np.allclose(ground_truth_ne(box_game).data, [2.0, 0.0], atol=1e-12)
