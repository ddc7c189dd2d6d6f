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

"""Variable sample-size proximal gradient and best-response schemes with
their distributed, consensus-based variants."""

from dataclasses import dataclass
import math
import logging
import numpy as np
import pandas as pd

from vsne_tools.utils import *
from vsne_tools.game import profile_data, sampled_gradient_data
from vsne_tools.prox import prox, prox_profile
from vsne_tools.schedules import BatchSchedule, CommSchedule, batch_size, comm_rounds
from vsne_tools.graphs import consensus_step
from vsne_tools.analysis import contraction_check, fixed_point_residual

log = logging.getLogger(__name__)

record_columns = (
    'k', 'mse', 'dist', 'residual', 'consensus_err', 'tracker_gap',
    'prox_evals', 'samples', 'comm_rounds', 'inner_solves'
)

@dataclass
class SolverConfig:
    """Settings of a single run.

    Parameters
    ----------
    scheme : :obj:`str`
        ``'vs_pgr'``, ``'d_vs_pgr'``, ``'vs_pbr'`` or ``'d_vs_pbr'``.
    batch : :obj:`vsne_tools.schedules.BatchSchedule`
    max_iters : :obj:`int`
        Iteration cap K.
    alpha : :obj:`float`, optional
        Step size of the gradient schemes.
    mu : :obj:`float`, optional
        Proximal regularization of the best-response schemes.
    comm : :obj:`vsne_tools.schedules.CommSchedule`, optional
        Consensus rounds; required by the distributed schemes.
    seed : :obj:`int`, optional
        Defaults to ``0``.
    ground_truth : :obj:`numpy.ndarray`, optional
        x* for error tracking. Without it the fixed-point residual is
        recorded instead.
    x0 : :obj:`numpy.ndarray`, optional
        Starting profile. Defaults to the origin.
    v0 : :obj:`numpy.ndarray`, optional
        Starting aggregate trackers of the distributed schemes, one row per
        player. Their mean must equal the mean strategy of ``x0``. Defaults
        to the blocks of ``x0``.
    budget : :obj:`int`, optional
        Stop before any iteration that starts with at least this many samples
        drawn.
    budget_unit : :obj:`str`, optional
        ``'player'`` counts the samples drawn by one player (total over n);
        ``'total'`` counts every player's samples. Defaults to ``'player'``.
    inner_tol : :obj:`float`, optional
        Best-response subproblem tolerance. Defaults to ``1e-10``.
    inner_max_iters : :obj:`int`, optional
        Defaults to ``100000``.
    closed_form_br : :obj:`bool`, optional
        Solve diagonal quadratic subproblems in closed form. Defaults to
        ``False``.
    override_contraction : :obj:`bool`, optional
        Run best-response schemes even if ||Gamma||_inf >= 1.
    residual_step : :obj:`float`, optional
        Step of the recorded fixed-point residual. Defaults to ``alpha``
        (gradient schemes) or ``1/mu`` (best-response schemes).
    """
    scheme: str
    batch: BatchSchedule
    max_iters: int
    alpha: float = None
    mu: float = None
    comm: CommSchedule = None
    seed: int = 0
    ground_truth: np.ndarray = None
    x0: np.ndarray = None
    v0: np.ndarray = None
    budget: int = None
    budget_unit: str = 'player'
    inner_tol: float = default_inner_tol
    inner_max_iters: int = default_inner_max_iters
    closed_form_br: bool = False
    override_contraction: bool = False
    residual_step: float = None

    def __post_init__(self):
        if self.scheme not in scheme_names:
            raise ConfigurationError(f'Unknown scheme {self.scheme}')
        if self.scheme in br_schemes:
            if self.mu is None or not self.mu > 0.0:
                raise ConfigurationError(f'{self.scheme} needs mu > 0; got {self.mu}')
        elif self.alpha is None or not self.alpha > 0.0:
            raise ConfigurationError(f'{self.scheme} needs alpha > 0; got {self.alpha}')
        if int(self.max_iters) < 1:
            raise ConfigurationError(f'max_iters must be at least 1; got {self.max_iters}')
        if self.scheme in distributed_schemes and self.comm is None:
            raise ConfigurationError(f'{self.scheme} needs a communication schedule')
        if self.budget is not None and self.budget < 1:
            raise ConfigurationError(f'budget must be at least 1; got {self.budget}')
        if self.budget_unit not in budget_units:
            raise ConfigurationError(f'Unknown budget unit {self.budget_unit}')
        if not self.inner_tol > 0.0:
            raise ConfigurationError(f'inner_tol must be positive; got {self.inner_tol}')
    
    @property
    def step(self):
        if self.residual_step is not None:
            return self.residual_step
        return self.alpha if self.scheme not in br_schemes else 1.0 / self.mu

class RunTrace:
    """Per-iteration records of a run.

    Record ``k`` describes x_k with the counters accumulated over the first
    ``k`` iterations. ``consensus_err`` of record ``k`` is measured during
    iteration ``k``. Snapshots of x_k are kept every ``snapshot_every``
    iterations, plus the last one.
    """

    def __init__(self, scheme, snapshot_every=1):
        self.scheme = scheme
        self.snapshot_every = max(1, int(snapshot_every))
        self.records = []
        self.snapshots = {}
        self.status = 'running'
        self.x = None
    
    def append(self, k, x, counters, ground_truth=None, residual=np.nan, tracker_gap=np.nan):
        if ground_truth is not None:
            dist = float(np.linalg.norm(x - ground_truth))
            mse = dist**2
        else:
            dist = mse = np.nan
        record = {
            'k': int(k), 'mse': mse, 'dist': dist, 'residual': residual,
            'consensus_err': np.nan, 'tracker_gap': tracker_gap,
        }
        record.update(counters.as_dict())
        self.records.append(record)
        self.x = x.copy()
        if k % self.snapshot_every == 0:
            self.snapshots[int(k)] = x.copy()
    
    def set_consensus_error(self, k, value):
        self.records[k]['consensus_err'] = float(value)

    def finish(self, status):
        self.status = status
        if self.records:
            self.snapshots[self.records[-1]['k']] = self.x.copy()

    @property
    def n_iters(self):
        return len(self.records) - 1

    def column(self, name):
        return np.array([r[name] for r in self.records], dtype=float)

    def dframe(self):
        """Records as a :obj:`pandas.DataFrame` with fixed column order."""
        return pd.DataFrame(self.records, columns=record_columns)

@dataclass
class TrackerState:
    """Local aggregate trackers v_i and their post-consensus values."""
    v: np.ndarray
    v_hat: np.ndarray = None

    def mix(self, A, tau, counters):
        self.v_hat = consensus_step(self.v, A, tau, counters)
        return self.v_hat

    def update(self, x_new, x_old):
        self.v = self.v_hat + x_new - x_old

    def gap(self, stack):
        """max |mean_i v_i - mean_i x_i| over coordinates."""
        return float(np.max(np.abs(self.v.mean(axis=0) - stack.mean(axis=0))))

@dataclass(frozen=True, eq=False)
class BRContext:
    """Frozen information of a best-response subproblem.

    General games pass the rival ``profile`` (player ``index``'s block is
    overwritten by the candidate). Aggregative games pass ``aggregate_shift``
    so the aggregate argument is x_i + aggregate_shift.
    """
    index: int
    profile: np.ndarray = None
    aggregate_shift: np.ndarray = None

    def gradient(self, player, x_i, samples, sl=None):
        """Sample-average gradient of the player's smooth term at ``x_i``."""
        if self.aggregate_shift is not None:
            grads = player.aggregate.noisy_eval(x_i, x_i + self.aggregate_shift, samples)
        else:
            data = self.profile.copy()
            data[sl] = x_i
            grads = player.noisy_grad(data, samples)
        return grads.mean(axis=0)



###   HELPERS   ###

def _snapshot_every(max_iters):
    return max(1, math.ceil(max_iters / snapshot_points))

def _divergence_limit(game, x0):
    if game.bounded:
        scale = game.diameter
    else:
        scale = max(1.0, float(np.linalg.norm(x0)))
    return divergence_factor * max(scale, 1.0)

def _start(game, config):
    if config.x0 is None:
        x = np.zeros(game.total_dim)
    else:
        x = profile_data(game, config.x0).copy()
    ground_truth = None
    if config.ground_truth is not None:
        ground_truth = profile_data(game, config.ground_truth).copy()
    return x, ground_truth

def _start_trackers(game, config, x):
    stack = x.reshape(game.n, -1)
    if config.v0 is None:
        return stack.copy()
    v = np.array(config.v0, dtype=float).reshape(stack.shape)
    if not np.allclose(v.mean(axis=0), stack.mean(axis=0), rtol=0.0, atol=1e-12):
        raise ConfigurationError('Tracker mean must equal the mean strategy of x0')
    return v

def _samples_used(game, config, counters):
    if config.budget_unit == 'total':
        return counters.samples
    return counters.samples / game.n

def _iterate(game, config, stream, step, tracker=None):
    """Shared loop: budget check, step, divergence guard and recording.

    ``step(k, x)`` returns ``(x_new, consensus_err)``.
    """
    counters = stream.counters
    x, ground_truth = _start(game, config)
    limit = _divergence_limit(game, x)
    trace = RunTrace(config.scheme, snapshot_every=_snapshot_every(config.max_iters))

    def record(k, x):
        residual = np.nan
        if ground_truth is None:
            residual = fixed_point_residual(game, x, config.step)
        gap = np.nan
        if tracker is not None:
            gap = tracker.gap(x.reshape(game.n, -1))
        trace.append(k, x, counters, ground_truth, residual, gap)

    if tracker is not None:
        tracker.v = _start_trackers(game, config, x)
    log.info(
        f'Starting {config.scheme} on {game.name or "game"} '
        f'(n={game.n}, K={config.max_iters}, seed={stream.seed})'
    )
    record(0, x)
    status = 'max_iters'
    for k in range(int(config.max_iters)):
        if config.budget is not None and _samples_used(game, config, counters) >= config.budget:
            status = 'budget'
            break
        try:
            x_new, consensus_err = step(k, x)
        except InnerSolverError as e:
            trace.finish('inner_failed')
            e.trace = trace
            raise
        if consensus_err is not None:
            trace.set_consensus_error(k, consensus_err)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > limit:
            trace.finish('diverged')
            raise DivergenceError(
                f'{config.scheme} diverged at iteration {k + 1} '
                f'(||x|| = {np.linalg.norm(x_new):.3e})', trace=trace
            )
        x = x_new
        record(k + 1, x)
        if (k + 1) % trace.snapshot_every == 0:
            log.debug(f'{config.scheme} k={k + 1}: {trace.records[-1]}')
    trace.finish(status)
    log.info(
        f'{config.scheme} stopped ({status}) after {trace.n_iters} iterations, '
        f'{counters.samples} samples'
    )
    return trace



###   GRADIENT RESPONSE   ###

def vs_pgr(game, config, stream):
    """Variable sample-size proximal stochastic gradient response.

    x_{k+1} = prox_{alpha r}[x_k - alpha (1/S_k) sum_p grad psi(x_k; xi^p_k)].

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
    config : :obj:`SolverConfig`
    stream : :obj:`vsne_tools.game.NoiseStream`
        Its counters are the run counters.
    
    Returns
    -------
    :obj:`RunTrace`
    """
    alpha = config.alpha
    counters = stream.counters

    def step(k, x):
        S = batch_size(config.batch, k)
        g = sampled_gradient_data(game, x, S, stream, k)
        y = x - alpha * g
        if not np.all(np.isfinite(y)):
            return y, None
        return prox_profile(game, y, alpha, counters).data, None

    return _iterate(game, config, stream, step)

def _check_distributed(game, graph):
    if game.kind != 'aggregative':
        raise ConfigurationError('Distributed schemes need an aggregative game')
    if graph is None:
        raise ConfigurationError('Distributed schemes need a communication graph')
    if graph.n != game.n:
        raise ConfigurationError(f'Graph has {graph.n} nodes but the game has {game.n} players')

def d_vs_pgr(game, graph, config, stream):
    """Distributed gradient response over a communication graph.

    Each player mixes its aggregate tracker for tau_k rounds, steps against
    the estimate n v_hat_i and corrects the tracker with its own move.

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
        Aggregative game.
    graph : :obj:`vsne_tools.graphs.WeightedGraph`
    config : :obj:`SolverConfig`
    stream : :obj:`vsne_tools.game.NoiseStream`
    
    Returns
    -------
    :obj:`RunTrace`
    """
    _check_distributed(game, graph)
    alpha = config.alpha
    n = game.n
    counters = stream.counters
    tracker = TrackerState(v=np.zeros((n, game.dims[0])))

    def step(k, x):
        stack = x.reshape(n, -1)
        v_hat = tracker.mix(graph.A, comm_rounds(config.comm, k), counters)
        consensus_err = np.max(np.linalg.norm(v_hat - stack.mean(axis=0), axis=1))
        S = batch_size(config.batch, k)
        g = sampled_gradient_data(game, x, S, stream, k, aggregates=n * v_hat)
        y = x - alpha * g
        if not np.all(np.isfinite(y)):
            return y, consensus_err
        x_new = prox_profile(game, y, alpha, counters).data
        tracker.update(x_new.reshape(n, -1), stack)
        return x_new, consensus_err

    return _iterate(game, config, stream, step, tracker=tracker)



###   BEST RESPONSE   ###

def solve_sample_average_br(
    player, context, samples, mu, anchor, inner_tol=default_inner_tol,
    inner_max_iters=default_inner_max_iters, closed_form=False, counters=None,
    sl=None):
    """Minimizes the sample-average proximal best-response objective.

    (1/S) sum_p psi_i(x; xi^p) + r_i(x) + (mu/2)||x - anchor||^2 is solved by
    proximal gradient with step 1/(L_f + mu) from ``anchor`` until
    consecutive iterates differ by at most ``inner_tol``.

    Parameters
    ----------
    player : :obj:`vsne_tools.game.PlayerSpec`
    context : :obj:`BRContext`
    samples : :obj:`numpy.ndarray`
        ``(S, m)`` noise draws, ``S >= 1``.
    mu : :obj:`float`
    anchor : :obj:`numpy.ndarray`
    inner_tol : :obj:`float`, optional
    inner_max_iters : :obj:`int`, optional
    closed_form : :obj:`bool`, optional
        Use x = prox_{r/h}(a - grad(a)/h) with h = diag Hessian + mu; needs
        ``player.hessian_diag``.
    counters : :obj:`vsne_tools.game.ResourceCounters`, optional
        ``inner_solves`` is incremented.
    sl : :obj:`slice`, optional
        Block of the player inside ``context.profile`` (general games).
    
    Returns
    -------
    :obj:`numpy.ndarray`
    """
    samples = np.atleast_2d(samples)
    if samples.shape[0] < 1:
        raise ConfigurationError('Best-response subproblem needs at least one sample')
    anchor = np.asarray(anchor, dtype=float)
    if counters is not None:
        counters.inner_solves += 1

    if closed_form:
        if player.hessian_diag is None:
            raise ConfigurationError('Closed-form best response needs a diagonal Hessian')
        h = player.hessian_diag + mu
        grad = context.gradient(player, anchor, samples, sl)
        return prox(player.prox_term, anchor - grad / h, 1.0 / h)

    if player.smoothness is None:
        raise ConfigurationError('Best-response inner solver needs the player smoothness')
    t = 1.0 / (player.smoothness + mu)
    x = anchor.copy()
    for _ in range(int(inner_max_iters)):
        grad = context.gradient(player, x, samples, sl) + mu * (x - anchor)
        x_new = prox(player.prox_term, x - t * grad, t)
        if not np.all(np.isfinite(x_new)):
            break
        if np.linalg.norm(x_new - x) <= inner_tol:
            return x_new
        x = x_new
    raise InnerSolverError(
        f'Best-response subproblem of player {context.index} did not reach '
        f'{inner_tol} in {inner_max_iters} iterations'
    )

def _br_round(game, config, stream, k, x, shifts=None):
    """Synchronous best responses of every player at iteration ``k``."""
    counters = stream.counters
    S = batch_size(config.batch, k)
    x_new = np.empty_like(x)
    for i, player in enumerate(game.players):
        sl = game.block_slice(i)
        samples = stream.draw(i, k, S)
        if game.kind == 'aggregative':
            context = BRContext(index=i, aggregate_shift=shifts[i])
        else:
            context = BRContext(index=i, profile=x)
        x_new[sl] = solve_sample_average_br(
            player, context, samples, config.mu, x[sl],
            inner_tol=config.inner_tol, inner_max_iters=config.inner_max_iters,
            closed_form=config.closed_form_br, counters=counters, sl=sl
        )
    counters.prox_evals += 1
    return x_new

def vs_pbr(game, config, stream):
    """Variable sample-size proximal best response.

    Every player minimizes its sample-average objective plus
    (mu/2)||x_i - x_{i,k}||^2 against the frozen rivals x_k, with S_k fresh
    samples. Needs ||Gamma||_inf < 1 unless overridden.

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
    config : :obj:`SolverConfig`
    stream : :obj:`vsne_tools.game.NoiseStream`
    
    Returns
    -------
    :obj:`RunTrace`
    """
    contraction_check(game, config.mu, override=config.override_contraction)

    def step(k, x):
        shifts = None
        if game.kind == 'aggregative':
            stack = x.reshape(game.n, -1)
            shifts = stack.sum(axis=0) - stack
        return _br_round(game, config, stream, k, x, shifts), None

    return _iterate(game, config, stream, step)

def d_vs_pbr(game, graph, config, stream):
    """Distributed proximal best response.

    Player i's aggregate argument is x_i - x_{i,k} + n v_hat_{i,k}; trackers
    are updated as in :obj:`d_vs_pgr`.
    """
    _check_distributed(game, graph)
    contraction_check(game, config.mu, override=config.override_contraction)
    n = game.n
    counters = stream.counters
    tracker = TrackerState(v=np.zeros((n, game.dims[0])))

    def step(k, x):
        stack = x.reshape(n, -1)
        v_hat = tracker.mix(graph.A, comm_rounds(config.comm, k), counters)
        consensus_err = np.max(np.linalg.norm(v_hat - stack.mean(axis=0), axis=1))
        x_new = _br_round(game, config, stream, k, x, shifts=n * v_hat - stack)
        if np.all(np.isfinite(x_new)):
            tracker.update(x_new.reshape(n, -1), stack)
        return x_new, consensus_err

    return _iterate(game, config, stream, step, tracker=tracker)

def run_scheme(game, config, stream, graph=None):
    """Dispatches on ``config.scheme``."""
    if config.scheme == 'vs_pgr':
        return vs_pgr(game, config, stream)
    elif config.scheme == 'd_vs_pgr':
        return d_vs_pgr(game, graph, config, stream)
    elif config.scheme == 'vs_pbr':
        return vs_pbr(game, config, stream)
    return d_vs_pbr(game, graph, config, stream)
