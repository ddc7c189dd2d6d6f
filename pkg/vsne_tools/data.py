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

"""Experiment configuration schema and the per-iteration trace tables."""

from dataclasses import dataclass, field
import copy
import logging
import numpy as np
import pandas as pd

from vsne_tools.utils import *
from vsne_tools.schedules import BatchSchedule, CommSchedule

log = logging.getLogger(__name__)

metrics = ('mse', 'relative_error')
instance_families = ('cournot', 'affine')

# Every accepted key with its default; anything else is rejected.
config_schema = {
    'instance': {
        'family': 'cournot',
        'variant': 'linear',
        'n': 20,
        'L': 10,
        'seed': 0,
        'cap': 2.0,
        'price_noise_base': 'd',
        'mu': 20.0,
        'path': None,
        'M': None,
        'b': None,
        'half_widths': 0.0,
        'lower': None,
        'upper': None,
    },
    'scheme': 'vs_pgr',
    'solver': {
        'alpha': None,
        'mu': None,
        'max_iters': 1000,
        'seed': 0,
        'x0': None,
        'v0': None,
        'inner_tol': default_inner_tol,
        'inner_max_iters': default_inner_max_iters,
        'closed_form_br': False,
        'override_contraction': False,
        'oracle_mode': 'fixed_point',
        'oracle_tol': default_oracle_tol,
    },
    'batch': {
        'kind': 'raw_geometric',
        'alpha': None,
        'rho': 0.98,
        'v': None,
        'c_ns': None,
        'eta_br': None,
        'size': None,
        'max_batch': default_max_batch,
    },
    'comm': {
        'kind': 'linear',
        'u': None,
    },
    'graph': {
        'topology': 'complete',
        'seed': 0,
        'max_attempts': default_er_attempts,
    },
    'replications': default_replications,
    'budget': default_budget,
    'budget_unit': 'player',
    'metric': 'relative_error',
    'output_dir': 'results',
    'eps': [],
    'plots': False,
}

def merge_config(schema, values, path=''):
    """Overlays ``values`` on the defaults of ``schema``."""
    merged = copy.deepcopy(schema)
    for key, value in values.items():
        if key not in schema:
            raise ConfigurationError(f'Unknown configuration key {path}{key}')
        if isinstance(schema[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f'Configuration key {path}{key} must be a section')
            merged[key] = merge_config(schema[key], value, path=f'{path}{key}.')
        else:
            merged[key] = value
    return merged

@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    Sections mirror :obj:`config_schema`; missing keys take their defaults.
    """
    instance: dict = field(default_factory=dict)
    scheme: str = 'vs_pgr'
    solver: dict = field(default_factory=dict)
    batch: dict = field(default_factory=dict)
    comm: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)
    replications: int = default_replications
    budget: int = default_budget
    budget_unit: str = 'player'
    metric: str = 'relative_error'
    output_dir: str = 'results'
    eps: list = field(default_factory=list)
    plots: bool = False

    @classmethod
    def from_dict(cls, config_dict):
        """Merges ``config_dict`` with the defaults and validates it."""
        merged = merge_config(config_schema, config_dict)
        config = cls(**merged)
        config.validate()
        return config
    
    def validate(self):
        if self.scheme not in scheme_names:
            raise ConfigurationError(f'Unknown scheme {self.scheme}')
        if self.instance['family'] not in instance_families:
            raise ConfigurationError(f'Unknown instance family {self.instance["family"]}')
        if self.instance['family'] == 'affine' and self.instance['M'] is None:
            raise ConfigurationError('Affine instances need M and b')
        if self.metric not in metrics:
            raise ConfigurationError(f'Unknown metric {self.metric}')
        if int(self.replications) < 1:
            raise ConfigurationError(f'replications must be at least 1; got {self.replications}')
        if self.budget is not None and int(self.budget) < 1:
            raise ConfigurationError(f'budget must be at least 1; got {self.budget}')
        if self.budget_unit not in budget_units:
            raise ConfigurationError(f'Unknown budget unit {self.budget_unit}')
        if self.graph['topology'] not in topology_names:
            raise ConfigurationError(f'Unknown topology {self.graph["topology"]}')
        if self.scheme in br_schemes:
            if self.solver['mu'] is None:
                raise ConfigurationError(f'{self.scheme} needs solver.mu')
        elif self.solver['alpha'] is None:
            raise ConfigurationError(f'{self.scheme} needs solver.alpha')
        if any(not e > 0.0 for e in self.eps):
            raise ConfigurationError(f'eps values must be positive; got {self.eps}')
        # Fails early on bad schedule parameters.
        self.batch_schedule()
        if self.scheme in distributed_schemes:
            self.comm_schedule()

    def batch_schedule(self):
        """:obj:`BatchSchedule` of the ``batch`` section.

        The alpha-scaled kinds inherit ``solver.alpha`` when ``batch.alpha`` is
        not set.
        """
        params = {k: v for k, v in self.batch.items() if v is not None}
        if params['kind'] in ('geometric', 'polynomial') and 'alpha' not in params:
            params['alpha'] = self.solver['alpha']
        params['max_batch'] = int(params['max_batch'])
        return BatchSchedule(**params)

    def comm_schedule(self):
        return CommSchedule(**{k: v for k, v in self.comm.items() if v is not None})

    @property
    def fit_regime(self):
        if self.batch['kind'] in ('polynomial', 'raw_polynomial'):
            return 'polynomial'
        return 'linear'

    def to_dict(self):
        return {
            'instance': self.instance, 'scheme': self.scheme,
            'solver': self.solver, 'batch': self.batch, 'comm': self.comm,
            'graph': self.graph, 'replications': self.replications,
            'budget': self.budget, 'budget_unit': self.budget_unit,
            'metric': self.metric,
            'output_dir': self.output_dir, 'eps': self.eps, 'plots': self.plots,
        }

def load_config(config_path):
    """Reads and validates a JSON experiment configuration.

    Parameters
    ----------
    config_path : :obj:`str`
    
    Returns
    -------
    :obj:`ExperimentConfig`
    """
    return ExperimentConfig.from_dict(read_json(config_path))



###   TRACES   ###

def average_traces(traces, x_star_norm=None):
    """Pointwise replication average of run traces.

    mse and consensus_err are averaged directly; rel_err is the averaged
    ||x_k - x*|| divided by ||x*||. Counters are those of the first
    replication.

    Parameters
    ----------
    traces : :obj:`list` [:obj:`vsne_tools.solvers.RunTrace`]
        Runs are truncated to the shortest one.
    x_star_norm : :obj:`float`, optional
        ||x*||; ``rel_err`` is left empty without it.
    
    Returns
    -------
    :obj:`pandas.DataFrame`
        Columns in the order of ``trace_columns``.
    """
    if len(traces) == 0:
        raise ConfigurationError('No traces to average')
    frames = [t.dframe() for t in traces]
    length = min(len(df) for df in frames)
    frames = [df.iloc[:length].reset_index(drop=True) for df in frames]
    df_trace = frames[0][['k'] + list(counter_columns)].copy()
    df_trace['mse'] = np.mean([df['mse'].values for df in frames], axis=0)
    df_trace['consensus_err'] = np.mean([df['consensus_err'].values for df in frames], axis=0)
    if x_star_norm is not None and x_star_norm > 0.0:
        mean_dist = np.mean([df['dist'].values for df in frames], axis=0)
        df_trace['rel_err'] = mean_dist / x_star_norm
    else:
        df_trace['rel_err'] = np.nan
    return df_trace[list(trace_columns)]

def write_trace_csv(df_trace, csv_path):
    """Writes a trace with the fixed column order; missing values stay empty."""
    df_trace.to_csv(
        csv_path, columns=list(trace_columns), index=False, na_rep='',
        float_format='%.12e'
    )

def read_trace_csv(csv_path):
    df_trace = pd.read_csv(csv_path)
    missing = [c for c in trace_columns if c not in df_trace.columns]
    if missing:
        raise ConfigurationError(f'{csv_path} is missing trace columns {missing}')
    return df_trace

def error_column(df_trace, metric='relative_error'):
    """Error series selected by ``metric``."""
    if metric == 'mse':
        return df_trace['mse'].values
    return df_trace['rel_err'].values
