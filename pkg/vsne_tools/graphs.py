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

"""Communication graphs, the max-degree weight rule and multi-round
consensus averaging."""

from dataclasses import dataclass
import logging
import numpy as np
import networkx as nx
from scipy import linalg

from vsne_tools.utils import *

log = logging.getLogger(__name__)

@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected connected graph with its doubly stochastic weights.

    Every node is implicitly its own neighbor; ``edges`` lists only pairs
    ``(i, j)`` with ``i < j``.
    """
    kind: str
    n: int
    edges: tuple
    A: np.ndarray
    beta: float
    seed: int = None

    @property
    def degrees(self):
        """|N_i| counting the node itself."""
        return (self.A > 0.0).sum(axis=1)

    def neighbors(self, i):
        return [int(j) for j in np.flatnonzero(self.A[i] > 0.0) if j != i]

    def to_dict(self):
        return {
            'kind': self.kind,
            'n': self.n,
            'seed': self.seed,
            'beta': self.beta,
            'edges': [list(e) for e in self.edges],
            'adjacency': {str(i): self.neighbors(i) for i in range(self.n)},
        }

def _nx_graph(edges, n):
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(edges)
    return graph

def build_topology(kind, n, seed=0, max_attempts=default_er_attempts):
    """Edge set of one of the benchmark graph families.

    Erdos-Renyi graphs include each edge with probability 2/n and are
    redrawn from a fresh seed until connected.

    Parameters
    ----------
    kind : :obj:`str`
        ``'cycle'``, ``'star'``, ``'erdos_renyi'`` or ``'complete'``.
    n : :obj:`int`
        Number of nodes, at least 2.
    seed : :obj:`int`, optional
        Only used by ``'erdos_renyi'``. Defaults to ``0``.
    max_attempts : :obj:`int`, optional
        Erdos-Renyi redraw cap. Defaults to ``1000``.
    
    Returns
    -------
    :obj:`list` [:obj:`tuple`]
        Sorted edges ``(i, j)`` with ``i < j``; the star center is node 0.
    """
    if n < 2:
        raise ConfigurationError(f'A communication graph needs n >= 2; got {n}')
    if kind == 'cycle':
        graph = nx.cycle_graph(n)
    elif kind == 'star':
        graph = nx.star_graph(n - 1)
    elif kind == 'complete':
        graph = nx.complete_graph(n)
    elif kind == 'erdos_renyi':
        p = min(1.0, 2.0 / n)
        for attempt in range(max_attempts):
            attempt_seed = int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])
            graph = nx.erdos_renyi_graph(n, p, seed=attempt_seed)
            if nx.is_connected(graph):
                log.debug(f'Connected Erdos-Renyi sample after {attempt + 1} draws')
                break
        else:
            raise ConfigurationError(
                f'No connected Erdos-Renyi graph (n={n}) in {max_attempts} draws'
            )
    else:
        raise ConfigurationError(f'Unknown topology {kind}')
    return sorted(tuple(sorted((int(i), int(j)))) for i, j in graph.edges())

def weight_matrix(edges, n):
    """Symmetric doubly stochastic weights from the max-degree rule.

    a_ij = 1/d_max on edges and a_ii = 1 - (d(i) - 1)/d_max, where d(i)
    counts node i itself.

    Parameters
    ----------
    edges : :obj:`list` [:obj:`tuple`]
    n : :obj:`int`
    
    Returns
    -------
    :obj:`numpy.ndarray`
        ``(n, n)`` weight matrix.
    """
    if not nx.is_connected(_nx_graph(edges, n)):
        raise ConfigurationError('Weights need a connected graph')
    degree = np.ones(n, dtype=int)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    d_max = int(degree.max())
    A = np.zeros((n, n))
    for i, j in edges:
        A[i, j] = A[j, i] = 1.0 / d_max
    # Integer numerators keep a_ii == 1/n exactly on complete graphs.
    for i in range(n):
        A[i, i] = (d_max - degree[i] + 1) / d_max
    return A

def slem(A):
    """Second-largest eigenvalue modulus beta of a symmetric stochastic A.

    Computed as the spectral radius of A - 11^T/n, which removes the Perron
    eigenvalue.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f'slem needs a square matrix; got shape {A.shape}')
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
        raise DomainError('slem needs a symmetric matrix')
    n = A.shape[0]
    deviation = A - np.full((n, n), 1.0 / n)
    if not np.any(deviation):
        return 0.0
    return float(np.max(np.abs(linalg.eigvalsh(deviation))))

def build_graph(kind, n, seed=0, max_attempts=default_er_attempts):
    """Topology, weights and beta in one :obj:`WeightedGraph`."""
    edges = build_topology(kind, n, seed=seed, max_attempts=max_attempts)
    A = weight_matrix(edges, n)
    beta = slem(A)
    log.info(f'{kind} graph on {n} nodes: {len(edges)} edges, beta={beta:.4f}')
    return WeightedGraph(
        kind=kind, n=n, edges=tuple(edges), A=A, beta=beta, seed=seed
    )

def consensus_step(estimates, A, tau, counters=None):
    """Applies ``tau`` synchronous averaging rounds v_i <- sum_j a_ij v_j.

    Parameters
    ----------
    estimates : :obj:`numpy.ndarray`
        ``(n, d)`` stack of local estimates.
    A : :obj:`numpy.ndarray`
        Weight matrix.
    tau : :obj:`int`
        Number of rounds, ``tau >= 0``.
    counters : :obj:`vsne_tools.game.ResourceCounters`, optional
        ``comm_rounds`` is increased by ``tau``.
    
    Returns
    -------
    :obj:`numpy.ndarray`
        A^tau applied to the estimates.
    """
    if tau < 0:
        raise DomainError(f'Consensus rounds must be nonnegative; got {tau}')
    out = np.array(estimates, dtype=float, copy=True)
    for _ in range(tau):
        out = A @ out
    if counters is not None:
        counters.comm_rounds += int(tau)
    return out

def power_decay_constant(A, beta, k_max=50):
    """Smallest theta with max_ij |[A^k]_ij - 1/n| <= theta beta^k for
    k = 1..k_max."""
    n = A.shape[0]
    if beta == 0.0:
        return float(np.max(np.abs(A - 1.0 / n)))
    theta = 0.0
    power = np.eye(n)
    for k in range(1, k_max + 1):
        power = power @ A
        theta = max(theta, float(np.max(np.abs(power - 1.0 / n))) / beta**k)
    return theta
