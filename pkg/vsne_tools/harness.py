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

"""Experiment harness: instances, replicated runs, summaries, complexity
comparisons and convergence plots."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict
import math
import os
import time
import logging
import numpy as np
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from vsne_tools.utils import *
from vsne_tools.game import affine_game
from vsne_tools.prox import box_indicator
from vsne_tools.cournot import (
    CournotInstance, cournot_game, cournot_noise_constants, gen_linear_cournot,
    gen_quadratic_cournot
)
from vsne_tools.graphs import build_graph, power_decay_constant
from vsne_tools.analysis import (
    contraction_check, epsilon_ne_index, fit_rate, ground_truth_ne,
    monotonicity_report, operator_matrix
)
from vsne_tools.prediction import (
    aggregative_contraction, aggregative_noise_constant, consensus_constants,
    distributed_br_constants, gradient_contraction, noise_level,
    ComplexityPrediction, polynomial_complexity_orders, predict_complexity
)
from vsne_tools.solvers import SolverConfig, run_scheme
from vsne_tools.data import average_traces, error_column, read_trace_csv, write_trace_csv

log = logging.getLogger(__name__)

@dataclass
class ExperimentSummary:
    """Averaged outcome of the replications of one experiment."""
    scheme: str
    status: str
    n_iters: int
    final_mse: float
    final_rel_err: float
    counters: dict
    x_star_norm: float
    price_noise_base: str = None
    monotonicity: dict = None
    contraction: dict = None
    fits: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    wall_clock: float = 0.0
    reason: str = None
    config: dict = None

    def to_dict(self):
        return asdict(self)

@dataclass
class ExperimentSetup:
    """Everything shared by the replications of an experiment."""
    game: object
    instance: dict
    M: np.ndarray
    nu1: float
    nu2: float
    variances: np.ndarray
    graph: object = None



###   SETUP   ###

def _affine_setup(spec):
    M = np.atleast_2d(np.asarray(spec['M'], dtype=float))
    b = np.atleast_1d(np.asarray(spec['b'], dtype=float))
    n = b.size
    prox_terms = None
    if spec['lower'] is not None:
        lower = np.broadcast_to(np.asarray(spec['lower'], dtype=float), (n,))
        upper = np.broadcast_to(np.asarray(spec['upper'], dtype=float), (n,))
        prox_terms = [box_indicator(lo, up) for lo, up in zip(lower, upper)]
    half_widths = spec['half_widths']
    if not np.isscalar(half_widths):
        half_widths = [np.atleast_1d(h) for h in half_widths]
    game = affine_game(M, b, prox_terms=prox_terms, half_widths=half_widths)
    variances = np.array([p.noise.second_moment for p in game.players])
    return game, {'family': 'affine', 'M': M, 'b': b, 'half_widths': spec['half_widths']}, variances

def build_setup(config):
    """Builds the game, its constants and (for distributed schemes) the graph.

    Parameters
    ----------
    config : :obj:`vsne_tools.data.ExperimentConfig`
    
    Returns
    -------
    :obj:`ExperimentSetup`
    """
    spec = config.instance
    nu1 = 0.0
    if spec['family'] == 'affine':
        game, instance_dict, variances = _affine_setup(spec)
        nu2 = float(variances.sum())
    else:
        if spec['path'] is not None:
            instance = CournotInstance.from_dict(read_json(spec['path']))
            game = cournot_game(instance)
        elif spec['variant'] == 'quadratic':
            game, instance = gen_quadratic_cournot(
                spec['n'], spec['L'], mu=spec['mu'], seed=spec['seed'],
                cap=spec['cap'], price_noise_base=spec['price_noise_base']
            )
        elif spec['variant'] == 'linear':
            game, instance = gen_linear_cournot(
                spec['n'], spec['L'], seed=spec['seed'], cap=spec['cap'],
                price_noise_base=spec['price_noise_base']
            )
        else:
            raise ConfigurationError(f'Unknown Cournot variant {spec["variant"]}')
        nu1, nu2, variances = cournot_noise_constants(instance)
        instance_dict = instance.to_dict()
    graph = None
    if config.scheme in distributed_schemes:
        graph = build_graph(
            config.graph['topology'], game.n, seed=config.graph['seed'],
            max_attempts=config.graph['max_attempts']
        )
    return ExperimentSetup(
        game=game, instance=instance_dict, M=operator_matrix(game),
        nu1=nu1, nu2=nu2, variances=variances, graph=graph
    )

def check_preconditions(config, setup):
    """Monotonicity (gradient schemes) or contraction (best-response schemes)
    reports; raises :obj:`PreconditionError` before any run starts."""
    game = setup.game
    if config.scheme in br_schemes:
        drawn_mu = setup.instance.get('mu')
        if drawn_mu is not None and drawn_mu != config.solver['mu']:
            log.warning(
                f'Instance was drawn for mu={drawn_mu} but the solver uses '
                f'mu={config.solver["mu"]}'
            )
        report = contraction_check(
            game, config.solver['mu'], override=config.solver['override_contraction']
        )
        return None, report
    alpha = config.solver['alpha']
    report = monotonicity_report(game, alpha=alpha, nu1=setup.nu1, M=setup.M)
    if not report.strongly_monotone:
        raise PreconditionError(
            f'Operator is not strongly monotone (eta={report.eta:.4g})'
        )
    if not alpha < 2.0 * report.eta / report.L_tilde**2:
        log.warning(
            f'alpha={alpha} exceeds the theoretical range '
            f'(0, {2.0 * report.eta / report.L_tilde**2:.4g})'
        )
    return report, None

def solver_config(config, seed, ground_truth=None):
    solver = config.solver
    return SolverConfig(
        scheme=config.scheme,
        batch=config.batch_schedule(),
        max_iters=int(solver['max_iters']),
        alpha=solver['alpha'],
        mu=solver['mu'],
        comm=config.comm_schedule() if config.scheme in distributed_schemes else None,
        seed=seed,
        ground_truth=ground_truth,
        x0=None if solver['x0'] is None else np.asarray(solver['x0'], dtype=float),
        v0=None if solver['v0'] is None else np.asarray(solver['v0'], dtype=float),
        budget=None if config.budget is None else int(config.budget),
        budget_unit=config.budget_unit,
        inner_tol=solver['inner_tol'],
        inner_max_iters=int(solver['inner_max_iters']),
        closed_form_br=solver['closed_form_br'],
        override_contraction=solver['override_contraction'],
    )

def _run_replication(config, setup, seed, x_star):
    game = setup.game
    stream = game.noise_model.stream(seed)
    return run_scheme(game, solver_config(config, seed, x_star), stream, graph=setup.graph)

def _replication_worker(config_dict, seed, x_star):
    # Workers rebuild the shared setup from the configuration.
    from vsne_tools.data import ExperimentConfig
    config = ExperimentConfig.from_dict(config_dict)
    return seed, _run_replication(config, build_setup(config), seed, x_star)

def run_replications(config, setup, x_star, workers=1):
    """Runs ``config.replications`` seeded paths (seed_r = seed + r).

    Returns
    -------
    :obj:`list` [:obj:`vsne_tools.solvers.RunTrace`]
        Ordered by seed.
    """
    base_seed = int(config.solver['seed'])
    seeds = [base_seed + r for r in range(int(config.replications))]
    if workers <= 1 or len(seeds) == 1:
        return [_run_replication(config, setup, seed, x_star) for seed in seeds]
    traces = {}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_replication_worker, config.to_dict(), seed, x_star)
            for seed in seeds
        ]
        for future in as_completed(futures):
            seed, trace = future.result()
            traces[seed] = trace
    return [traces[seed] for seed in seeds]

def workers_from_env(default=1):
    """Worker count from the ``VSNE_WORKERS`` environment variable."""
    value = os.environ.get(workers_env_var)
    if value is None:
        return default
    try:
        workers = int(value)
    except ValueError:
        raise ConfigurationError(f'{workers_env_var} must be an integer; got {value}') from None
    return max(1, workers)



###   RUN   ###

def compare_complexity(df_trace, prediction, eps, n_players=1):
    """Empirical effort to reach ``eps`` against the predicted bounds.

    Parameters
    ----------
    df_trace : :obj:`pandas.DataFrame`
        Averaged trace.
    prediction : :obj:`vsne_tools.prediction.ComplexityPrediction`
    eps : :obj:`float`
        Target MSE.
    n_players : :obj:`int`, optional
        Converts total samples to samples per player, the unit of M.
    
    Returns
    -------
    :obj:`dict`
    """
    mse = df_trace['mse'].values
    K_hat = epsilon_ne_index(mse, eps)
    report = {
        'eps': eps, 'scheme': prediction.scheme,
        'K_eps': prediction.K_eps, 'M_eps': prediction.M_eps,
        'comm_eps': prediction.comm_eps, 'regime': prediction.regime,
    }
    if K_hat is None:
        report.update({'status': 'not reached', 'K_hat': None, 'M_hat': None,
                       'comm_hat': None, 'violations': []})
        return report
    row = df_trace.iloc[K_hat]
    M_hat = float(row['samples']) / n_players
    comm_hat = int(row['comm_rounds'])
    violations = []
    # K_hat is an integer index, the bound a real number.
    if K_hat > math.ceil(prediction.K_eps - 1e-9):
        violations.append('iterations')
    if M_hat > prediction.M_eps:
        violations.append('samples')
    if prediction.comm_eps is not None and comm_hat > prediction.comm_eps:
        violations.append('communication')
    if violations:
        log.warning(f'Empirical complexity exceeds the bound at eps={eps}: {violations}')
    report.update({
        'status': 'reached', 'K_hat': K_hat, 'M_hat': M_hat,
        'samples_hat': int(row['samples']), 'comm_hat': comm_hat,
        'violations': violations,
    })
    return report

def _domain_radius(game):
    """D_R = sum_j max_{x_j in X_j} ||x_j||."""
    if not game.bounded:
        return np.inf
    return float(sum(
        np.linalg.norm(np.maximum(np.abs(p.lower), np.abs(p.upper)))
        for p in game.players
    ))

def prediction_params(config, setup, x_star):
    """Constants of :obj:`vsne_tools.prediction.predict_complexity`."""
    game = setup.game
    solver = config.solver
    schedule = config.batch_schedule()
    x0 = np.zeros(game.total_dim) if solver['x0'] is None else np.asarray(solver['x0'], dtype=float)
    C = float(np.sum((x0 - x_star)**2))
    params = {'C': C}
    scheme = config.scheme
    if scheme in ('vs_pgr', 'd_vs_pgr'):
        if schedule.growth_rate is None:
            raise ConfigurationError(
                f'Closed-form prediction needs a geometric batch; got {schedule.kind}'
            )
        alpha = solver['alpha']
        report = monotonicity_report(game, alpha=alpha, nu1=setup.nu1, M=setup.M)
        nu2 = noise_level(setup.nu1, math.sqrt(setup.nu2), alpha, np.linalg.norm(x_star))
        params.update({'rho': schedule.growth_rate, 'batch_scale': schedule.scale})
        if scheme == 'vs_pgr':
            try:
                q = gradient_contraction(alpha, report.eta, report.L_tilde)
            except DomainError as e:
                raise PreconditionError(str(e)) from None
            params.update({'q': q, 'noise': alpha**2 * nu2})
        else:
            _, varrho = aggregative_contraction(alpha, report.eta, report.L, setup.nu1)
            if not 0.0 < varrho < 1.0:
                raise PreconditionError(f'alpha={alpha} gives varrho={varrho:.4g} outside (0, 1)')
            beta = setup.graph.beta
            n = game.n
            D_R = _domain_radius(game)
            if beta > 0.0:
                theta = power_decay_constant(setup.graph.A, beta)
                C1, C2 = consensus_constants(theta, D_R, beta)
            else:
                C1 = C2 = 0.0
            lipschitz = [
                np.linalg.norm(setup.M[game.block_slice(i)], 2) for i in range(n)
            ]
            C3 = aggregative_noise_constant(
                alpha, setup.nu2, n, D_R, C1, C2, beta, lipschitz
            )
            params.update({'varrho': varrho, 'beta': beta, 'C3': C3})
    else:
        if schedule.kind != 'pbr_geometric':
            raise ConfigurationError(
                f'Closed-form prediction needs a pbr_geometric batch; got {schedule.kind}'
            )
        mu = solver['mu']
        report = contraction_check(game, mu, override=solver['override_contraction'])
        params.update({
            'a': report.a_inf, 'eta_br': schedule.eta_br, 'c_ns': schedule.c_ns,
            'n': game.n,
        })
        if scheme == 'd_vs_pbr':
            beta = setup.graph.beta
            n = game.n
            D_R = _domain_radius(game)
            if beta > 0.0:
                theta = power_decay_constant(setup.graph.A, beta)
                C1, C2 = consensus_constants(theta, D_R, beta)
            else:
                C1 = C2 = 0.0
            L_a = max(p.smoothness for p in game.players)
            L_g = max(float(np.max(p.zeta_max)) for p in game.players)
            _, _, C4 = distributed_br_constants(mu, L_a, L_g, n, C1, C2)
            params.update({'beta': beta, 'C4': C4})
    return params

def predict_experiment(config, eps, setup=None, x_star=None):
    """Predicted complexity of the configured experiment at each ``eps``.

    Returns
    -------
    :obj:`dict`
        ``params`` (the assembled constants) and ``predictions`` (one
        :obj:`vsne_tools.prediction.ComplexityPrediction` dict per eps).
        Polynomial batches report the exponents of 1/eps instead.
    """
    if setup is None:
        setup = build_setup(config)
    if x_star is None:
        x_star = ground_truth_ne(
            setup.game, mode=config.solver['oracle_mode'],
            tol=config.solver['oracle_tol'], M=setup.M
        ).data
    eps = [eps] if np.isscalar(eps) else list(eps)
    schedule = config.batch_schedule()
    if schedule.kind in ('polynomial', 'raw_polynomial'):
        u = config.comm['u'] if config.scheme in distributed_schemes else None
        return {'orders': polynomial_complexity_orders(schedule.v, u=u), 'predictions': []}
    params = prediction_params(config, setup, x_star)
    predictions = [predict_complexity(config.scheme, params, e) for e in eps]
    return {'params': params, 'predictions': [p.to_dict() for p in predictions]}

def _fits(config, df_trace):
    fits = {}
    mse = df_trace['mse'].values
    try:
        fits['mse'] = fit_rate(mse, regime=config.fit_regime).to_dict()
    except FitError as e:
        log.warning(f'No rate fit: {e}')
    if config.scheme in distributed_schemes:
        consensus = df_trace['consensus_err'].values[:-1]
        try:
            fits['consensus_err'] = fit_rate(consensus, regime='linear').to_dict()
        except FitError as e:
            log.warning(f'No consensus fit: {e}')
    return fits

def run_experiment(config, workers=1, output_dir=None):
    """Runs every replication and writes ``trace.csv``, ``summary.json`` and
    ``instance.json``.

    Aborted runs still write the partial outputs before the error is raised
    again.

    Parameters
    ----------
    config : :obj:`vsne_tools.data.ExperimentConfig`
    workers : :obj:`int`, optional
        Processes for the replications. Defaults to ``1``.
    output_dir : :obj:`str`, optional
        Overrides ``config.output_dir``.
    
    Returns
    -------
    :obj:`ExperimentSummary`
    :obj:`pandas.DataFrame`
        Averaged trace.
    """
    output_dir = config.output_dir if output_dir is None else output_dir
    os.makedirs(output_dir, exist_ok=True)
    start = time.perf_counter()

    setup = build_setup(config)
    write_json(os.path.join(output_dir, 'instance.json'), setup.instance)
    monotonicity, contraction = check_preconditions(config, setup)
    x_star = ground_truth_ne(
        setup.game, mode=config.solver['oracle_mode'],
        tol=config.solver['oracle_tol'], M=setup.M
    ).data
    x_star_norm = float(np.linalg.norm(x_star))
    log.info(f'Ground truth ||x*|| = {x_star_norm:.6g}')

    def summarize(df_trace, status, reason=None):
        final = df_trace.iloc[-1] if len(df_trace) else None
        summary = ExperimentSummary(
            scheme=config.scheme, status=status,
            n_iters=int(final['k']) if final is not None else 0,
            final_mse=float(final['mse']) if final is not None else np.nan,
            final_rel_err=float(final['rel_err']) if final is not None else np.nan,
            counters={c: int(final[c]) for c in counter_columns} if final is not None else {},
            x_star_norm=x_star_norm,
            price_noise_base=setup.instance.get('price_noise_base'),
            monotonicity=None if monotonicity is None else monotonicity.to_dict(),
            contraction=None if contraction is None else contraction.to_dict(),
            wall_clock=time.perf_counter() - start,
            reason=reason, config=config.to_dict(),
        )
        write_trace_csv(df_trace, os.path.join(output_dir, 'trace.csv'))
        return summary

    try:
        traces = run_replications(config, setup, x_star, workers=workers)
    except SolverError as e:
        if e.trace is not None:
            summary = summarize(average_traces([e.trace], x_star_norm), e.trace.status, str(e))
        else:
            summary = ExperimentSummary(
                scheme=config.scheme, status='aborted', n_iters=0, final_mse=np.nan,
                final_rel_err=np.nan, counters={}, x_star_norm=x_star_norm,
                reason=str(e), config=config.to_dict()
            )
        write_json(os.path.join(output_dir, 'summary.json'), summary.to_dict())
        raise

    df_trace = average_traces(traces, x_star_norm)
    summary = summarize(df_trace, traces[0].status)
    summary.fits = _fits(config, df_trace)
    if config.eps:
        try:
            prediction = predict_experiment(config, config.eps, setup=setup, x_star=x_star)
        except (PreconditionError, ConfigurationError, DomainError) as e:
            log.warning(f'No complexity prediction: {e}')
        else:
            for p, e in zip(prediction['predictions'], config.eps):
                summary.comparisons.append(compare_complexity(
                    df_trace, ComplexityPrediction(**p), e, n_players=setup.game.n
                ))
    write_json(os.path.join(output_dir, 'summary.json'), summary.to_dict())
    if config.plots:
        emit_plots(
            [os.path.join(output_dir, 'trace.csv')], output_dir,
            labels=[config.scheme], metric=config.metric
        )
    log.info(
        f'{config.scheme}: final relative error {summary.final_rel_err:.4e} '
        f'after {summary.n_iters} iterations'
    )
    return summary, df_trace


###   PLOTS   ###

plot_panels = {
    'iterations': ('k', 'Iteration k'),
    'samples': ('samples', 'Cumulative samples'),
}

def emit_plots(csv_paths, output_dir, labels=None, metric='relative_error', prefix='convergence'):
    """Log-scale error curves against iterations and against samples.

    One SVG per panel, with one line per trace file and a legend when there
    is more than one. Lines carry the gid ``series-<label>``.

    Parameters
    ----------
    csv_paths : :obj:`list` [:obj:`str`]
        ``trace.csv`` files.
    output_dir : :obj:`str`
    labels : :obj:`list` [:obj:`str`], optional
        Defaults to the parent directory names.
    metric : :obj:`str`, optional
        ``'relative_error'`` or ``'mse'``.
    prefix : :obj:`str`, optional
    
    Returns
    -------
    :obj:`list` [:obj:`str`]
        Written SVG paths; empty when every trace is empty.
    """
    if labels is None:
        labels = [
            os.path.basename(os.path.dirname(os.path.abspath(p))) for p in csv_paths
        ]
    series = []
    for path, label in zip(csv_paths, labels):
        df_trace = read_trace_csv(path)
        error = error_column(df_trace, metric)
        keep = np.isfinite(error) & (error > 0.0)
        if not np.any(keep):
            log.warning(f'{path} has no plottable {metric} values')
            continue
        series.append((label, df_trace[keep], error[keep]))
    if not series:
        return []

    os.makedirs(output_dir, exist_ok=True)
    written = []
    ylabel = 'Relative error' if metric == 'relative_error' else 'Mean-squared error'
    with matplotlib.rc_context({'svg.hashsalt': 'vsne', 'svg.fonttype': 'none'}):
        for panel, (column, xlabel) in plot_panels.items():
            fig, ax = plt.subplots(figsize=(6, 4))
            for label, df_trace, error in series:
                line, = ax.semilogy(df_trace[column].values, error, label=label)
                line.set_gid(f'series-{label}')
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if len(series) > 1:
                ax.legend()
            fig.tight_layout()
            svg_path = os.path.join(output_dir, f'{prefix}_{panel}.svg')
            fig.savefig(svg_path, format='svg', metadata={'Date': None})
            plt.close(fig)
            written.append(svg_path)
    return written
