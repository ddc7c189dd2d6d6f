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

import math
import dataclasses
import pytest
import numpy as np

from vsne_tools.solvers import *
from vsne_tools.game import affine_game
from vsne_tools.schedules import BatchSchedule, CommSchedule
from vsne_tools.graphs import build_graph
from vsne_tools.cournot import cournot_game, gen_linear_cournot, gen_quadratic_cournot
from vsne_tools.analysis import (
    fit_rate, gamma_matrix, ground_truth_ne, operator_matrix, quadratic_constants
)
from vsne_tools.utils import *

# f(x) = x^2 with additive U(-1, 1) gradient noise.
square_game = affine_game(np.array([[2.0]]), np.zeros(1), half_widths=1.0)
square_quiet = affine_game(np.array([[2.0]]), np.zeros(1))

def square_config(scheme='vs_pgr', batch=None, **kwargs):
    if batch is None:
        batch = BatchSchedule('constant', size=1)
    kwargs.setdefault('alpha', 0.25)
    kwargs.setdefault('max_iters', 10)
    return SolverConfig(
        scheme=scheme, batch=batch, x0=np.ones(1), ground_truth=np.zeros(1),
        **kwargs
    )

def mean_mse(game, config, seeds):
    traces = []
    for seed in seeds:
        stream = game.noise_model.stream(seed)
        traces.append(run_scheme(game, config, stream).column('mse'))
    return np.mean(traces, axis=0)

def test_config_validation():
    batch = BatchSchedule('constant', size=1)
    with pytest.raises(ConfigurationError):
        SolverConfig('sgd', batch, 10, alpha=0.1)
    with pytest.raises(ConfigurationError):
        SolverConfig('vs_pgr', batch, 10)
    with pytest.raises(ConfigurationError):
        SolverConfig('vs_pbr', batch, 10, mu=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig('d_vs_pgr', batch, 10, alpha=0.1)
    with pytest.raises(ConfigurationError):
        SolverConfig('vs_pgr', batch, 0, alpha=0.1)
    assert SolverConfig('vs_pbr', batch, 10, mu=4.0).step == 0.25

def test_vs_pgr_noiseless_steps():
    config = square_config(max_iters=3)
    stream = square_quiet.noise_model.stream(0)
    trace = vs_pgr(square_quiet, config, stream)
    assert np.isclose(trace.x[0], 0.125)
    assert trace.n_iters == 3
    assert trace.status == 'max_iters'
    assert np.allclose(trace.column('dist'), [1.0, 0.5, 0.25, 0.125])
    assert np.allclose(trace.column('mse'), [1.0, 0.25, 0.0625, 0.015625])
    assert list(trace.column('prox_evals')) == [0, 1, 2, 3]
    assert list(trace.column('samples')) == [0, 1, 2, 3]

def test_trace_frame():
    config = square_config(max_iters=5)
    trace = vs_pgr(square_game, config, square_game.noise_model.stream(3))
    df = trace.dframe()
    assert list(df.columns) == list(record_columns)
    assert len(df) == 6
    assert df['consensus_err'].isna().all()
    assert sorted(trace.snapshots) == list(range(6))

def test_residual_without_ground_truth():
    config = SolverConfig('vs_pgr', BatchSchedule('constant', size=1), 2, alpha=0.25, x0=np.ones(1))
    trace = vs_pgr(square_quiet, config, square_quiet.noise_model.stream(0))
    assert np.isnan(trace.column('mse')).all()
    # x - prox(x - alpha G(x)) = alpha 2 x
    assert np.allclose(trace.column('residual'), [0.5, 0.25, 0.125])

def test_seed_determinism():
    config = square_config(batch=BatchSchedule('raw_geometric', rho=0.8), max_iters=15)
    first = vs_pgr(square_game, config, square_game.noise_model.stream(11))
    second = vs_pgr(square_game, config, square_game.noise_model.stream(11))
    other = vs_pgr(square_game, config, square_game.noise_model.stream(12))
    assert np.array_equal(first.column('mse'), second.column('mse'))
    assert not np.array_equal(first.column('mse'), other.column('mse'))

def test_budget_stop():
    config = square_config(batch=BatchSchedule('constant', size=4), max_iters=50, budget=10)
    trace = vs_pgr(square_game, config, square_game.noise_model.stream(0))
    assert trace.status == 'budget'
    assert trace.n_iters == 3
    assert trace.records[-1]['samples'] == 12

def test_divergence():
    config = square_config(alpha=2.0, max_iters=100)
    with pytest.raises(DivergenceError) as e:
        vs_pgr(square_quiet, config, square_quiet.noise_model.stream(0))
    assert e.value.trace.status == 'diverged'
    assert 0 < e.value.trace.n_iters < 100

def test_batch_cap():
    config = square_config(batch=BatchSchedule('raw_geometric', rho=0.01), max_iters=10)
    with pytest.raises(ScheduleError):
        vs_pgr(square_game, config, square_game.noise_model.stream(0))

def test_vs_pgr_geometric_rate():
    config = square_config(batch=BatchSchedule('raw_geometric', rho=0.8), max_iters=40)
    mse = mean_mse(square_game, config, range(50))
    fit = fit_rate(mse, window=(10, 40))
    assert abs(fit.slope - math.log(0.8)) <= 0.2 * abs(math.log(0.8))

def test_vs_pgr_polynomial_rate():
    config = square_config(batch=BatchSchedule('raw_polynomial', v=1.0), max_iters=200)
    mse = mean_mse(square_game, config, range(50))
    fit = fit_rate(mse, regime='polynomial')
    assert abs(fit.slope + 1.0) <= 0.3



###   BEST RESPONSE   ###

def test_br_subproblem_matches_closed_form():
    player = square_quiet.players[0]
    context = BRContext(index=0, profile=np.ones(1))
    samples = np.array([[0.2], [-0.6]])
    iterative = solve_sample_average_br(player, context, samples, 2.0, np.ones(1), sl=slice(0, 1))
    closed = solve_sample_average_br(
        player, context, samples, 2.0, np.ones(1), closed_form=True, sl=slice(0, 1)
    )
    # argmin x^2 - 0.2 x + (x - 1)^2
    assert np.allclose(iterative, [0.55], atol=1e-10)
    assert np.allclose(closed, [0.55], atol=1e-12)

def test_inner_solver_failure():
    config = square_config('vs_pbr', mu=2.0, inner_max_iters=1)
    with pytest.raises(InnerSolverError) as e:
        vs_pbr(square_quiet, config, square_quiet.noise_model.stream(0))
    assert e.value.trace.status == 'inner_failed'

def test_vs_pbr_noncontractive():
    game = affine_game(np.array([[1.0, 5.0], [5.0, 1.0]]), np.zeros(2))
    config = SolverConfig('vs_pbr', BatchSchedule('constant', size=1), 1, mu=1.0)
    with pytest.raises(PreconditionError):
        vs_pbr(game, config, game.noise_model.stream(0))
    config.override_contraction = True
    config.closed_form_br = True
    trace = vs_pbr(game, config, game.noise_model.stream(0))
    assert trace.n_iters == 1

def test_vs_pbr_contraction():
    game = affine_game(np.array([[2.0, 1.0], [1.0, 2.0]]), -np.ones(2))
    x_star = np.full(2, 1.0 / 3.0)
    for closed_form in (False, True):
        config = SolverConfig(
            'vs_pbr', BatchSchedule('constant', size=1), 20, mu=1.0,
            x0=np.array([1.0, -1.0]), ground_truth=x_star, closed_form_br=closed_form
        )
        trace = vs_pbr(game, config, game.noise_model.stream(0))
        errors = [np.max(np.abs(trace.snapshots[k] - x_star)) for k in range(21)]
        for before, after in zip(errors[:-1], errors[1:]):
            assert after <= 2.0 / 3.0 * before + 1e-9
        assert errors[-1] < 1e-3
        assert trace.records[-1]['inner_solves'] == 40
        assert trace.records[-1]['prox_evals'] == 20

def test_vs_pbr_geometric_rate():
    config = square_config(
        'vs_pbr', batch=BatchSchedule('pbr_geometric', c_ns=1.0, eta_br=0.8),
        mu=2.0, max_iters=25
    )
    mse = mean_mse(square_game, config, range(50))
    fit = fit_rate(mse, window=(8, 25))
    assert abs(fit.slope - 2.0 * math.log(0.8)) <= 0.25 * abs(2.0 * math.log(0.8))



###   DISTRIBUTED   ###

cournot, _ = gen_linear_cournot(4, 3, seed=1)
quad_cournot, _ = gen_quadratic_cournot(4, 3, mu=20.0, seed=1)

def distributed_pair(game, scheme, graph, **kwargs):
    batch = BatchSchedule('raw_geometric', rho=0.9)
    central = SolverConfig(scheme.replace('d_', ''), batch, 15, **kwargs)
    local = SolverConfig(scheme, batch, 15, comm=CommSchedule('linear'), **kwargs)
    central_trace = run_scheme(game, central, game.noise_model.stream(4))
    local_trace = run_scheme(game, local, game.noise_model.stream(4), graph=graph)
    return central_trace, local_trace

def test_d_vs_pgr_complete_graph():
    graph = build_graph('complete', 4)
    central, local = distributed_pair(cournot, 'd_vs_pgr', graph, alpha=0.02)
    assert np.allclose(central.x, local.x, rtol=0.0, atol=1e-9)
    assert np.allclose(central.column('residual'), local.column('residual'), atol=1e-9)
    assert np.all(local.column('consensus_err')[:-1] <= 1e-9)
    assert np.isnan(local.column('consensus_err')[-1])
    assert local.records[-1]['comm_rounds'] == 15 * 16 // 2
    assert local.records[-1]['samples'] == central.records[-1]['samples']

def test_d_vs_pbr_complete_graph():
    graph = build_graph('complete', 4)
    central, local = distributed_pair(quad_cournot, 'd_vs_pbr', graph, mu=20.0)
    assert np.allclose(central.x, local.x, rtol=0.0, atol=1e-8)
    assert local.records[-1]['inner_solves'] == 4 * 15

def test_tracker_mean_preserved():
    graph = build_graph('cycle', 4)
    config = SolverConfig(
        'd_vs_pgr', BatchSchedule('raw_geometric', rho=0.9), 20, alpha=0.02,
        comm=CommSchedule('log')
    )
    trace = d_vs_pgr(cournot, graph, config, cournot.noise_model.stream(0))
    assert np.nanmax(trace.column('tracker_gap')) <= 1e-10
    assert trace.records[-1]['comm_rounds'] == sum(max(1, math.ceil(math.log(k))) if k >= 2 else 1 for k in range(20))

def test_distributed_needs_graph():
    config = SolverConfig(
        'd_vs_pgr', BatchSchedule('constant', size=1), 5, alpha=0.02,
        comm=CommSchedule('linear')
    )
    with pytest.raises(ConfigurationError):
        run_scheme(cournot, config, cournot.noise_model.stream(0))
    with pytest.raises(ConfigurationError):
        d_vs_pgr(cournot, build_graph('cycle', 3), config, cournot.noise_model.stream(0))
    with pytest.raises(ConfigurationError):
        d_vs_pgr(square_game, build_graph('cycle', 3), config, square_game.noise_model.stream(0))

def test_tracker_mean_preserved_best_response():
    graph = build_graph('cycle', 4)
    config = SolverConfig(
        'd_vs_pbr', BatchSchedule('raw_geometric', rho=0.9), 20, mu=20.0,
        comm=CommSchedule('log')
    )
    trace = d_vs_pbr(quad_cournot, graph, config, quad_cournot.noise_model.stream(0))
    assert trace.n_iters == 20
    assert np.nanmax(trace.column('tracker_gap')) <= 1e-10

def test_tracker_start():
    graph = build_graph('cycle', 4)
    x0 = np.linspace(0.0, 1.0, 12)
    config = SolverConfig(
        'd_vs_pgr', BatchSchedule('constant', size=1), 3, alpha=0.02,
        comm=CommSchedule('log'), x0=x0, v0=np.zeros((4, 3))
    )
    with pytest.raises(ConfigurationError):
        d_vs_pgr(cournot, graph, config, cournot.noise_model.stream(0))
    config.v0 = np.tile(x0.reshape(4, 3).mean(axis=0), (4, 1))
    trace = d_vs_pgr(cournot, graph, config, cournot.noise_model.stream(0))
    assert np.nanmax(trace.column('tracker_gap')) <= 1e-10
    # Trackers in consensus need no mixing in the first round.
    assert trace.column('consensus_err')[0] <= 1e-12

def test_consensus_error_decay():
    game, _ = gen_linear_cournot(20, 10, seed=0)
    graph = build_graph('cycle', 20)
    config = SolverConfig(
        'd_vs_pgr', BatchSchedule('raw_geometric', rho=0.98), 120, alpha=0.01,
        comm=CommSchedule('linear')
    )
    trace = d_vs_pgr(game, graph, config, game.noise_model.stream(0))
    fit = fit_rate(trace.column('consensus_err')[:-1])
    assert fit.rate <= graph.beta + 0.05

def test_budget_units():
    batch = BatchSchedule('constant', size=2)
    per_player = SolverConfig('vs_pgr', batch, 50, alpha=0.02, budget=5)
    trace = vs_pgr(cournot, per_player, cournot.noise_model.stream(0))
    assert trace.status == 'budget'
    # Four firms draw 2 samples each per iteration.
    assert trace.n_iters == 3
    assert trace.records[-1]['samples'] == 24

    total = SolverConfig('vs_pgr', batch, 50, alpha=0.02, budget=5, budget_unit='total')
    trace = vs_pgr(cournot, total, cournot.noise_model.stream(0))
    assert trace.n_iters == 1
    assert trace.records[-1]['samples'] == 8
    with pytest.raises(ConfigurationError):
        SolverConfig('vs_pgr', batch, 50, alpha=0.02, budget=5, budget_unit='firm')



###   EQUILIBRIUM   ###

def quiet(instance):
    silent = dataclasses.replace(
        instance, xi_half_widths=np.zeros(instance.n),
        zeta_half_widths=np.zeros(instance.L)
    )
    return cournot_game(silent)

# Capacities well above x*, so the equilibria are interior and differ by firm.
interior_lin = quiet(gen_linear_cournot(5, 2, seed=2, cap=20.0)[1])
interior_quad = quiet(gen_quadratic_cournot(5, 2, mu=20.0, seed=2, cap=20.0)[1])

@pytest.mark.parametrize('scheme', scheme_names)
def test_stationary_at_equilibrium(scheme):
    game = interior_quad if scheme in br_schemes else interior_lin
    x_star = ground_truth_ne(game).data
    stack = x_star.reshape(game.n, -1)
    assert np.all((stack > 0.0) & (stack < 20.0))
    assert np.ptp(stack, axis=0).min() > 1e-3
    kwargs = {'mu': 20.0} if scheme in br_schemes else {'alpha': 0.01}
    graph = None
    if scheme in distributed_schemes:
        graph = build_graph('cycle', game.n)
        kwargs['comm'] = CommSchedule('log')
        kwargs['v0'] = np.tile(stack.mean(axis=0), (game.n, 1))
    config = SolverConfig(
        scheme, BatchSchedule('constant', size=2), 100, x0=x_star,
        ground_truth=x_star, **kwargs
    )
    trace = run_scheme(game, config, game.noise_model.stream(0), graph=graph)
    assert trace.n_iters == 100
    assert np.max(trace.column('dist')) <= 1e-9



###   DESK SCALE   ###

desk_game, _ = gen_linear_cournot(20, 10, seed=0)

def desk_step(game):
    # Cournot Jacobians are symmetric, so 2/(eta + L) is the contractive optimum.
    eta, L = quadratic_constants(operator_matrix(game))
    return 2.0 / (eta + L)

@pytest.mark.slow
def test_vs_pgr_geometric_rate_desk():
    x_star = ground_truth_ne(desk_game).data
    rho = 0.97
    config = SolverConfig(
        'vs_pgr', BatchSchedule('raw_geometric', rho=rho), 150,
        alpha=desk_step(desk_game), ground_truth=x_star
    )
    fit = fit_rate(mean_mse(desk_game, config, range(50)))
    assert abs(fit.slope - math.log(rho)) <= 0.2 * abs(math.log(rho))

@pytest.mark.slow
@pytest.mark.parametrize('v', [1.0, 2.0])
def test_vs_pgr_polynomial_rate_desk(v):
    x_star = ground_truth_ne(desk_game).data
    # Starting at x* leaves only the sampling error.
    config = SolverConfig(
        'vs_pgr', BatchSchedule('raw_polynomial', v=v), 160,
        alpha=desk_step(desk_game), x0=x_star, ground_truth=x_star
    )
    fit = fit_rate(mean_mse(desk_game, config, range(10)), regime='polynomial')
    assert abs(fit.slope + v) <= 0.3

br_desk_game, _ = gen_quadratic_cournot(13, 6, mu=20.0, seed=0)

@pytest.mark.slow
def test_vs_pbr_geometric_rate_desk():
    a = gamma_matrix(br_desk_game, 20.0).a_inf
    assert a < 1.0
    eta_br = 0.5 * (1.0 + a)
    x_star = ground_truth_ne(br_desk_game).data
    config = SolverConfig(
        'vs_pbr', BatchSchedule('pbr_geometric', c_ns=1.0, eta_br=eta_br), 300,
        mu=20.0, ground_truth=x_star, closed_form_br=True
    )
    fit = fit_rate(mean_mse(br_desk_game, config, range(20)))
    expected = 2.0 * math.log(eta_br)
    assert abs(fit.slope - expected) <= 0.25 * abs(expected)

@pytest.mark.slow
def test_exact_best_response_contraction_desk():
    _, instance = gen_quadratic_cournot(13, 6, mu=20.0, seed=0)
    game = quiet(instance)
    a = gamma_matrix(game, 20.0).a_inf
    x_star = ground_truth_ne(game).data
    config = SolverConfig(
        'vs_pbr', BatchSchedule('constant', size=1), 60, mu=20.0,
        ground_truth=x_star, closed_form_br=True
    )
    trace = vs_pbr(game, config, game.noise_model.stream(0))
    start = np.max(np.linalg.norm(x_star.reshape(13, -1), axis=1))
    for k in range(61):
        block_err = np.linalg.norm((trace.snapshots[k] - x_star).reshape(13, -1), axis=1)
        assert np.max(block_err) <= a**k * start + 1e-9

@pytest.mark.slow
def test_graph_ordering_desk():
    x_star = ground_truth_ne(desk_game).data
    config = SolverConfig(
        'd_vs_pgr', BatchSchedule('raw_geometric', rho=0.98), 80, alpha=0.01,
        comm=CommSchedule('linear'), ground_truth=x_star
    )
    errors = {}
    for topology in ('complete', 'cycle', 'erdos_renyi'):
        graph = build_graph(topology, 20, seed=0)
        dists = [
            run_scheme(desk_game, config, desk_game.noise_model.stream(seed), graph=graph).column('dist')
            for seed in range(10)
        ]
        errors[topology] = np.mean(dists, axis=0)
    for k in (30, 45, 60):
        assert errors['complete'][k] <= errors['cycle'][k] <= errors['erdos_renyi'][k]
