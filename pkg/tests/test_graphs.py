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

from vsne_tools.graphs import *
from vsne_tools.game import ResourceCounters
from vsne_tools.analysis import fit_rate
from vsne_tools.utils import *

def test_topologies():
    assert build_topology('cycle', 4) == [(0, 1), (0, 3), (1, 2), (2, 3)]
    assert build_topology('star', 4) == [(0, 1), (0, 2), (0, 3)]
    assert build_topology('complete', 3) == build_topology('cycle', 3)
    assert len(build_topology('complete', 6)) == 15

def test_topology_errors():
    with pytest.raises(ConfigurationError):
        build_topology('cycle', 1)
    with pytest.raises(ConfigurationError):
        build_topology('ring', 5)

def test_erdos_renyi_connected_and_seeded():
    edges = build_topology('erdos_renyi', 12, seed=3)
    assert edges == build_topology('erdos_renyi', 12, seed=3)
    A = weight_matrix(edges, 12)
    assert slem(A) < 1.0

def test_weight_matrix_examples():
    assert np.allclose(weight_matrix([(0, 1)], 2), np.full((2, 2), 0.5))
    A = weight_matrix(build_topology('star', 3), 3)
    expected = np.array([[1, 1, 1], [1, 2, 0], [1, 0, 2]]) / 3.0
    assert np.allclose(A, expected, atol=1e-15)
    assert np.array_equal(weight_matrix(build_topology('cycle', 3), 3), np.full((3, 3), 1.0 / 3.0))

def test_weight_matrix_needs_connected_graph():
    with pytest.raises(ConfigurationError):
        weight_matrix([(0, 1)], 3)

@pytest.mark.parametrize('kind', topology_names)
def test_weights_doubly_stochastic(kind):
    for n in (3, 7, 20, 30):
        A = weight_matrix(build_topology(kind, n, seed=1), n)
        assert np.allclose(A, A.T, atol=1e-12)
        assert np.allclose(A.sum(axis=0), 1.0, atol=1e-12)
        assert np.allclose(A.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(A >= 0.0)

def test_slem_values():
    assert slem(weight_matrix([(0, 1)], 2)) == 0.0
    for n in (3, 10, 20):
        assert slem(weight_matrix(build_topology('complete', n), n)) == 0.0
    assert np.isclose(slem(weight_matrix(build_topology('star', 3), 3)), 2.0 / 3.0, atol=1e-9)
    assert np.isclose(build_graph('star', 20).beta, 0.95, atol=0.02)
    assert np.isclose(build_graph('cycle', 20).beta, 0.967, atol=0.02)

def test_slem_nonsymmetric():
    with pytest.raises(DomainError):
        slem(np.array([[0.5, 0.5], [0.2, 0.8]]))

def test_consensus_step():
    A = weight_matrix([(0, 1)], 2)
    estimates = np.array([[1.0, 4.0], [3.0, 0.0]])
    counters = ResourceCounters()
    assert np.array_equal(consensus_step(estimates, A, 0), estimates)
    mixed = consensus_step(estimates, A, 1, counters=counters)
    assert np.allclose(mixed, [[2.0, 2.0], [2.0, 2.0]])
    assert counters.comm_rounds == 1

def test_consensus_preserves_average():
    graph = build_graph('cycle', 8)
    rng = np.random.default_rng(0)
    estimates = rng.normal(size=(8, 3))
    mixed = consensus_step(estimates, graph.A, 25)
    assert np.allclose(mixed.mean(axis=0), estimates.mean(axis=0), atol=1e-12)

@pytest.mark.parametrize('kind', ['star', 'cycle', 'erdos_renyi'])
def test_consensus_contraction(kind):
    graph = build_graph(kind, 20, seed=0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        estimates = rng.normal(size=(20, 4))
        before = np.linalg.norm(estimates - estimates.mean(axis=0))
        for tau in (1, 3, 10):
            mixed = consensus_step(estimates, graph.A, tau)
            after = np.linalg.norm(mixed - mixed.mean(axis=0))
            assert after <= graph.beta**tau * before + 1e-10

@pytest.mark.parametrize('kind, n', [('star', 10), ('star', 20), ('cycle', 6)])
def test_power_decay_ratio(kind, n):
    graph = build_graph(kind, n)
    power = np.eye(n)
    gaps = []
    for k in range(31):
        gaps.append(np.max(np.abs(power - 1.0 / n)))
        power = power @ graph.A
    fit = fit_rate(np.array(gaps), window=(5, 30))
    assert abs(fit.rate - graph.beta) <= 0.05 * graph.beta

def test_power_decay_constant():
    graph = build_graph('cycle', 10)
    theta = power_decay_constant(graph.A, graph.beta)
    power = np.linalg.matrix_power(graph.A, 12)
    assert np.max(np.abs(power - 0.1)) <= theta * graph.beta**12 + 1e-12

def test_graph_to_dict():
    graph_dict = build_graph('star', 4).to_dict()
    assert graph_dict['adjacency']['0'] == [1, 2, 3]
    assert graph_dict['adjacency']['2'] == [0]
    assert graph_dict['edges'] == [[0, 1], [0, 2], [0, 3]]
