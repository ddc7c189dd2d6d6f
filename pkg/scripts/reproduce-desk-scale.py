#!/usr/bin/env python3

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

"""Desk-scale reproduction of the benchmark comparisons: graph families,
sample-size schedules and best response against gradient response."""

import os
import sys
import copy
import numpy as np
from scipy import stats

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from vsne_tools.utils import *
from vsne_tools.data import ExperimentConfig
from vsne_tools.harness import emit_plots, run_experiment, workers_from_env
from vsne_tools.graphs import build_graph
from vsne_tools.analysis import epsilon_ne_index

output_root = './desk-scale'
replications = 10
budget = 10**6
check_iterations = (50, 100, 150)  # Graph ordering is compared at these k.
reference_beta = {'cycle': 0.967, 'star': 0.95, 'erdos_renyi': 0.986}
# Final relative errors at n = 20, alpha = 0.01, rho = 0.98 and 10^6 samples per firm.
reference_errors = {'complete': 2.96e-4, 'erdos_renyi': 7.5e-2}

linear_instance = {'family': 'cournot', 'variant': 'linear', 'n': 20, 'L': 10, 'seed': 0}
quadratic_instance = {
    'family': 'cournot', 'variant': 'quadratic', 'n': 13, 'L': 6, 'mu': 20.0, 'seed': 0
}



###   SCRIPT   ###

def experiment(name, config_dict):
    config_dict = copy.deepcopy(config_dict)
    config_dict.setdefault('replications', replications)
    config_dict.setdefault('budget', budget)
    config_dict['output_dir'] = os.path.join(output_root, name)
    config = ExperimentConfig.from_dict(config_dict)
    try:
        summary, df_trace = run_experiment(config, workers=workers_from_env())
    except VSNEError as e:
        print(f'{name}: {type(e).__name__}: {e}')
        return None, None
    print(f'{name}: status {summary.status}, final relative error {summary.final_rel_err:.3e}')
    return summary, df_trace

def plot_existing(names, prefix):
    paths = [os.path.join(output_root, name, 'trace.csv') for name in names]
    kept = [(p, name) for p, name in zip(paths, names) if os.path.exists(p)]
    if kept:
        emit_plots(
            [p for p, _ in kept], os.path.join(output_root, 'plots'),
            labels=[name for _, name in kept], prefix=prefix
        )

def graph_spectra(n=20):
    print('\n###   Spectral gaps (n = 20)   ###')
    for topology, beta_ref in reference_beta.items():
        graph = build_graph(topology, n, seed=0)
        flag = '' if abs(graph.beta - beta_ref) <= 0.02 else '  (outside 0.02)'
        print(f'{topology}: beta {graph.beta:.4f}, {len(graph.edges)} edges, reference {beta_ref}{flag}')

def oracle_scaling(label, df_trace, expected, decades=3.0, points=10):
    """Log-log slope of samples-to-eps against 1/eps."""
    mse = df_trace['mse'].values
    eps_grid = mse[0] * np.logspace(-1.0, -1.0 - decades, points)
    inv_eps, samples = [], []
    for eps in eps_grid:
        k_hat = epsilon_ne_index(mse, eps)
        if k_hat is not None and k_hat > 0:
            inv_eps.append(1.0 / eps)
            samples.append(df_trace['samples'].iloc[k_hat])
    if len(samples) < 3:
        print(f'{label}: too few eps values reached for a slope')
        return
    fit = stats.linregress(np.log(inv_eps), np.log(samples))
    print(f'{label}: samples-to-eps slope {fit.slope:.3f} (expected {expected})')

def graph_comparison():
    print('\n###   Graph comparison (d-VS-PGR, tau_k = k + 1)   ###')
    errors = {}
    for topology in ('complete', 'star', 'cycle', 'erdos_renyi'):
        summary, df_trace = experiment(f'graph-{topology}', {
            'instance': linear_instance, 'scheme': 'd_vs_pgr',
            'solver': {'alpha': 0.01, 'max_iters': 200},
            'batch': {'kind': 'raw_geometric', 'rho': 0.98},
            'comm': {'kind': 'linear'}, 'graph': {'topology': topology, 'seed': 0},
        })
        if df_trace is not None:
            errors[topology] = df_trace.set_index('k')['rel_err']
    for k in check_iterations:
        row = ', '.join(f'{t} {e.get(k, float("nan")):.3e}' for t, e in errors.items())
        print(f'k={k}: {row}')
        ordered = [errors[t].get(k, np.nan) for t in ('complete', 'cycle', 'erdos_renyi') if t in errors]
        print(f'    complete <= cycle <= erdos_renyi: {bool(np.all(np.diff(ordered) >= 0.0))}')
    plot_existing([f'graph-{t}' for t in errors], 'graphs')

def table_cells():
    print('\n###   Step size and schedule cells   ###')
    for alpha in (0.01, 0.02):
        summary, _ = experiment(f'cell-complete-alpha{alpha}', {
            'instance': linear_instance, 'scheme': 'vs_pgr',
            'solver': {'alpha': alpha, 'max_iters': 2000},
            'batch': {'kind': 'raw_geometric', 'rho': 0.98},
        })
        report_cell(summary, reference_errors['complete'])
        summary, _ = experiment(f'cell-er-alpha{alpha}', {
            'instance': linear_instance, 'scheme': 'd_vs_pgr',
            'solver': {'alpha': alpha, 'max_iters': 2000},
            'batch': {'kind': 'raw_geometric', 'rho': 0.98},
            'comm': {'kind': 'log'}, 'graph': {'topology': 'erdos_renyi', 'seed': 0},
        })
        report_cell(summary, reference_errors['erdos_renyi'])

def report_cell(summary, reference):
    if summary is None:
        return
    ratio = summary.final_rel_err / reference
    print(f'    {summary.n_iters} iterations, {ratio:.2f} x reference {reference:.2e}')

def schedule_comparison():
    print('\n###   Sample-size schedules (VS-PGR)   ###')
    schedules = {
        'geometric': {'kind': 'raw_geometric', 'rho': 0.98},
        'poly-v1': {'kind': 'raw_polynomial', 'v': 1},
        'poly-v2': {'kind': 'raw_polynomial', 'v': 2},
    }
    expected = {'geometric': 1.0, 'poly-v1': 2.0, 'poly-v2': 1.5}
    for label, batch in schedules.items():
        _, df_trace = experiment(f'schedule-{label}', {
            'instance': linear_instance, 'scheme': 'vs_pgr',
            'solver': {'alpha': 0.01, 'max_iters': 2000}, 'batch': batch,
        })
        if df_trace is not None:
            oracle_scaling(label, df_trace, expected[label])
    plot_existing([f'schedule-{label}' for label in schedules], 'schedules')

def best_response_comparison():
    print('\n###   Best response (quadratic costs, mu = 20)   ###')
    experiment('br-vs_pbr', {
        'instance': quadratic_instance, 'scheme': 'vs_pbr',
        'solver': {'mu': 20.0, 'max_iters': 300},
        'batch': {'kind': 'raw_geometric', 'rho': 0.98},
    })
    for topology in ('star', 'cycle', 'erdos_renyi'):
        experiment(f'br-d_vs_pbr-{topology}', {
            'instance': quadratic_instance, 'scheme': 'd_vs_pbr',
            'solver': {'mu': 20.0, 'max_iters': 300},
            'batch': {'kind': 'raw_geometric', 'rho': 0.98},
            'comm': {'kind': 'log'}, 'graph': {'topology': topology, 'seed': 0},
        })
    labels = ['br-vs_pbr'] + [f'br-d_vs_pbr-{t}' for t in ('star', 'cycle', 'erdos_renyi')]
    plot_existing(labels, 'best-response')

def main():
    setup_logging(0)
    graph_spectra()
    graph_comparison()
    table_cells()
    schedule_comparison()
    best_response_comparison()

if __name__ == '__main__':
    main()
