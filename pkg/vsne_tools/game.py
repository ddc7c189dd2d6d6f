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

"""Game abstraction: strategy profiles, players, noise streams and the
stochastic first-order oracle shared by every solver."""

from dataclasses import dataclass, field, asdict
from functools import partial
from typing import Callable
import logging
import numpy as np

from vsne_tools.utils import *
from vsne_tools.prox import ProxOperator, zero

log = logging.getLogger(__name__)

game_kinds = ('general', 'aggregative')

@dataclass
class ResourceCounters:
    """Cumulative resource usage of a single run."""
    prox_evals: int = 0
    samples: int = 0
    comm_rounds: int = 0
    inner_solves: int = 0

    def as_dict(self):
        return asdict(self)

class StrategyProfile:
    """Concatenated strategies x = (x_1, ..., x_n) in contiguous storage.

    Blocks are views into :attr:`data`, so inner loops can read and write
    player strategies without copies.

    Parameters
    ----------
    data : :obj:`numpy.ndarray`
        Flat profile of length ``sum(dims)``. A two-dimensional ``(n, d)``
        array is flattened row by row.
    dims : :obj:`tuple` [:obj:`int`], optional
        Block dimensions. Defaults to a single block.
    """
    __slots__ = ('data', 'dims', 'offsets')

    def __init__(self, data, dims=None):
        data = np.ascontiguousarray(data, dtype=float).reshape(-1)
        if dims is None:
            dims = (data.size,)
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise ConfigurationError(f'Block dimensions must be positive; got {dims}')
        if sum(dims) != data.size:
            raise ConfigurationError(
                f'Profile of size {data.size} does not match block dimensions {dims}'
            )
        if not np.all(np.isfinite(data)):
            raise DomainError('Strategy profile has nonfinite entries')
        self.data = data
        self.dims = dims
        self.offsets = np.concatenate(([0], np.cumsum(dims))).astype(int)
    
    @classmethod
    def from_blocks(cls, blocks):
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        return cls(np.concatenate(blocks), [b.size for b in blocks])
    
    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(sum(dims)), dims)

    @property
    def total_dim(self):
        return self.data.size
    
    @property
    def n_players(self):
        return len(self.dims)

    def block(self, i):
        return self.data[self.offsets[i]:self.offsets[i + 1]]

    @property
    def blocks(self):
        return [self.block(i) for i in range(self.n_players)]

    def stack(self):
        """``(n, d)`` view; requires equal block dimensions."""
        if len(set(self.dims)) != 1:
            raise ConfigurationError('Only equal block dimensions can be stacked')
        return self.data.reshape(self.n_players, self.dims[0])

    def copy(self):
        return StrategyProfile(self.data.copy(), self.dims)

    def __repr__(self):
        return f'StrategyProfile(dims={self.dims}, data={self.data!r})'

@dataclass(frozen=True, eq=False)
class UniformNoise:
    """Componentwise uniform noise on the symmetric box [-h, h]."""
    half_widths: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if np.any(h < 0.0) or not np.all(np.isfinite(h)):
            raise ConfigurationError(f'Noise half-widths must be finite and >= 0; got {h}')
        object.__setattr__(self, 'half_widths', h)

    @property
    def dim(self):
        return self.half_widths.size
    
    @property
    def second_moment(self):
        """E||xi||^2 of one draw."""
        return float(np.sum(self.half_widths**2) / 3.0)

    def draw(self, rng, size):
        return rng.uniform(
            -self.half_widths, self.half_widths, size=(size, self.dim)
        )

@dataclass(frozen=True)
class AggregateMap:
    """F_i(x_i, z) of an aggregative player.

    ``eval(x_i, z)`` returns the partial gradient of f_i when the aggregate
    sum_j x_j equals ``z``; ``noisy_eval(x_i, z, samples)`` returns one sampled
    gradient per row of ``samples``.
    """
    eval: Callable
    noisy_eval: Callable

@dataclass(frozen=True, eq=False)
class PlayerSpec:
    """Player problem min f_i(x_i, x_{-i}) + r_i(x_i) with a stochastic oracle.

    Parameters
    ----------
    dim : :obj:`int`
        Strategy dimension d_i.
    smooth_grad : callable
        ``smooth_grad(x)`` with the flat profile ``x``; returns grad_{x_i} f_i(x).
    noisy_grad : callable
        ``noisy_grad(x, samples)`` returns an ``(S, d_i)`` array of sampled
        gradients, one per row of ``samples``.
    prox_term : :obj:`vsne_tools.prox.ProxOperator`
        Nonsmooth term r_i.
    lower, upper : :obj:`numpy.ndarray`
        Coordinatewise domain box; may be infinite.
    noise : :obj:`UniformNoise`
        Distribution of xi_i.
    aggregate : :obj:`AggregateMap`, optional
        Required for aggregative games.
    zeta_min : :obj:`float`, optional
        Lower bound on the eigenvalues of the own Hessian block.
    zeta_max : :obj:`numpy.ndarray`, optional
        Bounds on the norms of the cross Hessian blocks, one per player.
    smoothness : :obj:`float`, optional
        Lipschitz constant of grad_{x_i} f_i in x_i; step size of the
        best-response inner solver.
    hessian_diag : :obj:`numpy.ndarray`, optional
        Constant diagonal own Hessian; enables closed-form best responses.
    payoff : callable, optional
        Deterministic f_i(x) of the flat profile.
    """
    dim: int
    smooth_grad: Callable
    noisy_grad: Callable
    prox_term: ProxOperator
    lower: np.ndarray
    upper: np.ndarray
    noise: UniformNoise
    aggregate: AggregateMap = None
    zeta_min: float = None
    zeta_max: np.ndarray = None
    smoothness: float = None
    hessian_diag: np.ndarray = None
    payoff: Callable = None

    def __post_init__(self):
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
        if np.any(lower > upper):
            raise ConfigurationError('Player domain is empty')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-player noise descriptors and the factory of seeded streams."""
    descriptors: tuple

    def stream(self, seed, counters=None):
        return NoiseStream(self, seed, counters=counters)

class NoiseStream:
    """Counter-based random draws.

    The sample block of player ``i`` at iteration ``k`` comes from a generator
    keyed by ``(seed, i, k)``; row ``p`` of a draw of any size is the same
    value. Growing a batch never perturbs earlier draws.

    Parameters
    ----------
    model : :obj:`NoiseModel`
    seed : :obj:`int`
        Nonnegative replication seed.
    counters : :obj:`ResourceCounters`, optional
        Shared counters of the run; a fresh set is created when omitted.
    """

    def __init__(self, model, seed, counters=None):
        if int(seed) < 0:
            raise ConfigurationError(f'Seeds must be nonnegative; got {seed}')
        self.model = model
        self.seed = int(seed)
        self.counters = counters if counters is not None else ResourceCounters()
    
    def generator(self, player, k):
        return np.random.default_rng([self.seed, int(player), int(k)])

    def draw(self, player, k, size):
        """Draws ``size`` samples for ``player`` at iteration ``k``."""
        if size < 1:
            raise ScheduleError(f'Batch size must be at least 1; got {size}')
        samples = self.model.descriptors[player].draw(
            self.generator(player, k), int(size)
        )
        self.counters.samples += int(size)
        return samples

@dataclass(frozen=True, eq=False)
class GameSpec:
    """Collection of player problems.

    Parameters
    ----------
    players : :obj:`tuple` [:obj:`PlayerSpec`]
    kind : :obj:`str`, optional
        ``'general'`` or ``'aggregative'``. Defaults to ``'general'``.
    operator : callable, optional
        Vectorized deterministic pseudo-gradient G of the flat profile. When
        given it must agree bitwise with the per-player maps.
    name : :obj:`str`, optional
    """
    players: tuple
    kind: str = 'general'
    operator: Callable = None
    name: str = ''
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        players = tuple(self.players)
        object.__setattr__(self, 'players', players)
        if len(players) == 0:
            raise ConfigurationError('A game needs at least one player')
        if self.kind not in game_kinds:
            raise ConfigurationError(f'Unknown game kind {self.kind}')
        if self.kind == 'aggregative':
            if any(p.aggregate is None for p in players):
                raise ConfigurationError('Every aggregative player needs an AggregateMap')
            if len(set(p.dim for p in players)) != 1:
                raise ConfigurationError('Aggregative players must share a dimension')
        dims = [p.dim for p in players]
        object.__setattr__(
            self, 'offsets', np.concatenate(([0], np.cumsum(dims))).astype(int)
        )
    
    @property
    def n(self):
        return len(self.players)

    @property
    def dims(self):
        return tuple(p.dim for p in self.players)

    @property
    def total_dim(self):
        return int(self.offsets[-1])

    def block_slice(self, i):
        return slice(self.offsets[i], self.offsets[i + 1])
    
    @property
    def lower(self):
        return np.concatenate([p.lower for p in self.players])

    @property
    def upper(self):
        return np.concatenate([p.upper for p in self.players])

    @property
    def bounded(self):
        return all(p.bounded for p in self.players)

    @property
    def diameter(self):
        """Euclidean diameter of the domain box; ``inf`` when unbounded."""
        if not self.bounded:
            return np.inf
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def noise_model(self):
        return NoiseModel(tuple(p.noise for p in self.players))



###   ORACLE   ###

def profile_data(game, x):
    """Flat profile array of ``x`` after checking it against ``game``."""
    if isinstance(x, StrategyProfile):
        if x.dims != game.dims:
            raise ConfigurationError(
                f'Profile blocks {x.dims} do not match the game {game.dims}'
            )
        return x.data
    data = np.asarray(x, dtype=float).reshape(-1)
    if data.size != game.total_dim:
        raise ConfigurationError(
            f'Profile of size {data.size} does not match the game ({game.total_dim})'
        )
    return data

def gradient_data(game, data):
    """G(x) on the flat profile array."""
    if game.operator is not None:
        return game.operator(data)
    out = np.empty(game.total_dim)
    if game.kind == 'aggregative':
        stack = data.reshape(game.n, -1)
        z = stack.sum(axis=0)
        for i, player in enumerate(game.players):
            out[game.block_slice(i)] = player.aggregate.eval(stack[i], z)
    else:
        for i, player in enumerate(game.players):
            out[game.block_slice(i)] = player.smooth_grad(data)
    return out

def deterministic_gradient(game, x):
    """G(x) = (grad_{x_i} f_i(x))_i.

    Aggregative games evaluate F_i(x_i, sum_j x_j).

    Parameters
    ----------
    game : :obj:`GameSpec`
    x : :obj:`StrategyProfile` or :obj:`numpy.ndarray`
    
    Returns
    -------
    :obj:`StrategyProfile`
    """
    data = profile_data(game, x)
    return StrategyProfile(gradient_data(game, data), game.dims)

def sampled_gradient_data(game, data, batch, stream, k, aggregates=None):
    """Batch-mean sampled gradients on the flat profile array.

    Parameters
    ----------
    aggregates : :obj:`numpy.ndarray`, optional
        Aggregate argument used in place of sum_j x_j: either one vector for
        every player or an ``(n, d)`` array with one row per player.
    """
    if batch < 1:
        raise ScheduleError(f'Batch size must be at least 1; got {batch}')
    out = np.empty(game.total_dim)
    if game.kind == 'aggregative':
        stack = data.reshape(game.n, -1)
        if aggregates is None:
            aggregates = stack.sum(axis=0)
        aggregates = np.broadcast_to(np.asarray(aggregates, dtype=float), stack.shape)
        for i, player in enumerate(game.players):
            samples = stream.draw(i, k, batch)
            grads = player.aggregate.noisy_eval(stack[i], aggregates[i], samples)
            out[game.block_slice(i)] = grads.mean(axis=0)
    else:
        if aggregates is not None:
            raise ConfigurationError('Aggregate overrides need an aggregative game')
        for i, player in enumerate(game.players):
            samples = stream.draw(i, k, batch)
            grads = player.noisy_grad(data, samples)
            out[game.block_slice(i)] = grads.mean(axis=0)
    return out

def sampled_gradient(game, x, batch, stream, k=0, aggregate_override=None):
    """Mini-batch estimate (1/S) sum_p grad_{x_i} psi_i(x; xi_{i,k}^p).

    Exactly ``batch`` draws are consumed per player and added to the sample
    counter of ``stream``.

    Parameters
    ----------
    game : :obj:`GameSpec`
    x : :obj:`StrategyProfile` or :obj:`numpy.ndarray`
    batch : :obj:`int`
        Samples per player.
    stream : :obj:`NoiseStream`
    k : :obj:`int`, optional
        Iteration index selecting the draws. Defaults to ``0``.
    aggregate_override : :obj:`numpy.ndarray`, optional
        Aggregate argument replacing sum_j x_j (aggregative games only).
    
    Returns
    -------
    :obj:`StrategyProfile`
    """
    data = profile_data(game, x)
    return StrategyProfile(
        sampled_gradient_data(game, data, batch, stream, k, aggregate_override),
        game.dims
    )



###   AFFINE GAMES   ###

def _affine_grad(rows, offset, x):
    return rows @ x + offset

def _affine_noisy_grad(rows, offset, x, samples):
    return (rows @ x + offset)[None, :] + samples

def _affine_payoff(rows, offset, sl, x):
    x_i = x[sl]
    own = rows[:, sl]
    cross = rows @ x - own @ x_i
    return float(0.5 * x_i @ own @ x_i + x_i @ (cross + offset))

def affine_game(M, b, dims=None, prox_terms=None, half_widths=0.0, lower=None, upper=None):
    """General game with G(x) = M x + b and additive uniform noise.

    Hessian information comes from the blocks of ``M``: the own block gives
    zeta_min, smoothness and (when diagonal) the closed-form curvature; the
    cross blocks give zeta_max through their spectral norms.

    Parameters
    ----------
    M : :obj:`numpy.ndarray`
        ``(D, D)`` Jacobian.
    b : :obj:`numpy.ndarray`
        ``(D,)`` offset.
    dims : :obj:`list` [:obj:`int`], optional
        Block dimensions. Defaults to scalar players.
    prox_terms : :obj:`list` [:obj:`vsne_tools.prox.ProxOperator`], optional
        Defaults to no nonsmooth term.
    half_widths : :obj:`float` or :obj:`list`, optional
        Noise half-widths, one scalar or array per player. Defaults to
        noiseless draws.
    lower, upper : :obj:`list`, optional
        Domain boxes. Default to the box of a box prox term, else unbounded.
    
    Returns
    -------
    :obj:`GameSpec`
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if M.shape[0] != M.shape[1] or M.shape[0] != b.size:
        raise ConfigurationError(f'Incompatible shapes {M.shape} and {b.shape}')
    if dims is None:
        dims = [1 for _ in range(b.size)]
    if sum(dims) != b.size:
        raise ConfigurationError(f'Block dimensions {dims} do not cover {b.size} variables')
    n = len(dims)
    if prox_terms is None:
        prox_terms = [zero() for _ in range(n)]
    if np.isscalar(half_widths):
        half_widths = [np.full(d, half_widths) for d in dims]
    offsets = np.concatenate(([0], np.cumsum(dims))).astype(int)
    slices = [slice(offsets[i], offsets[i + 1]) for i in range(n)]

    players = []
    for i, sl in enumerate(slices):
        rows = M[sl].copy()
        offset = b[sl].copy()
        own = M[sl, sl]
        zeta_max = np.array(
            [0.0 if j == i else np.linalg.norm(M[sl, slices[j]], 2) for j in range(n)]
        )
        op = prox_terms[i]
        if lower is not None:
            lo, up = lower[i], upper[i]
        elif op.kind == 'box':
            lo, up = op.lower, op.upper
        elif op.kind == 'nonneg':
            lo, up = 0.0, np.inf
        else:
            lo, up = -np.inf, np.inf
        is_diag = np.array_equal(own, np.diag(np.diag(own)))
        is_sym = np.allclose(own, own.T)
        players.append(PlayerSpec(
            dim=dims[i],
            smooth_grad=partial(_affine_grad, rows, offset),
            noisy_grad=partial(_affine_noisy_grad, rows, offset),
            prox_term=op,
            lower=lo, upper=up,
            noise=UniformNoise(half_widths[i]),
            zeta_min=float(np.linalg.eigvalsh(0.5 * (own + own.T)).min()),
            zeta_max=zeta_max,
            smoothness=float(np.linalg.norm(own, 2)),
            hessian_diag=np.diag(own).copy() if is_diag else None,
            payoff=partial(_affine_payoff, rows, offset, sl) if is_sym else None,
        ))
    return GameSpec(tuple(players), kind='general', name='affine')
