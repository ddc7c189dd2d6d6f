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
import pandas as pd

from vsne_tools.data import *
from vsne_tools.game import affine_game
from vsne_tools.schedules import BatchSchedule
from vsne_tools.solvers import SolverConfig, vs_pgr
from vsne_tools.utils import *

base_config = {'scheme': 'vs_pgr', 'solver': {'alpha': 0.01}}

def test_defaults():
    config = ExperimentConfig.from_dict(base_config)
    assert config.instance['n'] == 20
    assert config.instance['L'] == 10
    assert config.batch['kind'] == 'raw_geometric'
    assert config.graph['topology'] == 'complete'
    assert config.solver['max_iters'] == 1000
    assert config.fit_regime == 'linear'
    assert config.batch_schedule() == BatchSchedule('raw_geometric', rho=0.98)

def test_unknown_keys():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'schemes': 'vs_pgr'})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'batch': {'rate': 0.9}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'batch': 0.9})

def test_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({'scheme': 'vs_pgr'})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({'scheme': 'vs_pbr', 'solver': {'alpha': 0.1}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'metric': 'gap'})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'eps': [0.1, 0.0]})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'instance': {'family': 'affine'}})
    with pytest.raises(ScheduleError):
        ExperimentConfig.from_dict({**base_config, 'batch': {'rho': 1.5}})
    with pytest.raises(ScheduleError):
        ExperimentConfig.from_dict({
            'scheme': 'd_vs_pgr', 'solver': {'alpha': 0.1},
            'comm': {'kind': 'polynomial'}
        })

def test_batch_alpha_inherited():
    config = ExperimentConfig.from_dict({
        **base_config, 'batch': {'kind': 'polynomial', 'v': 2.0}
    })
    schedule = config.batch_schedule()
    assert schedule.alpha == 0.01
    assert config.fit_regime == 'polynomial'
    config = ExperimentConfig.from_dict({
        **base_config, 'batch': {'kind': 'geometric', 'alpha': 0.5, 'rho': 0.9}
    })
    assert config.batch_schedule().alpha == 0.5

def test_load_config(tmp_path):
    config_path = tmp_path / 'config.json'
    write_json(str(config_path), {**base_config, 'replications': 3})
    config = load_config(str(config_path))
    assert config.replications == 3
    assert ExperimentConfig.from_dict(config.to_dict()) == config

    config_path.write_text('{"scheme": ')
    with pytest.raises(ConfigurationError):
        load_config(str(config_path))
    config_path.write_text('[1, 2]')
    with pytest.raises(ConfigurationError):
        load_config(str(config_path))
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / 'missing.json'))

def test_read_json_types(tmp_path):
    json_path = str(tmp_path / 'values.json')
    write_json(json_path, [1, 2])
    assert read_json(json_path, expect=list) == [1, 2]
    assert read_json(json_path, expect=None) == [1, 2]
    with pytest.raises(ConfigurationError):
        read_json(json_path)

def test_budget_unit():
    assert ExperimentConfig.from_dict(base_config).budget_unit == 'player'
    config = ExperimentConfig.from_dict({**base_config, 'budget_unit': 'total'})
    assert config.budget_unit == 'total'
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({**base_config, 'budget_unit': 'firm'})

def scalar_traces(n_reps=3):
    game = affine_game(np.array([[2.0]]), np.full(1, -2.0), half_widths=0.5)
    config = SolverConfig(
        'vs_pgr', BatchSchedule('constant', size=2), 6, alpha=0.25,
        ground_truth=np.ones(1)
    )
    return [vs_pgr(game, config, game.noise_model.stream(s)) for s in range(n_reps)]

def test_average_traces():
    traces = scalar_traces()
    df_trace = average_traces(traces, x_star_norm=1.0)
    assert list(df_trace.columns) == list(trace_columns)
    assert len(df_trace) == 7
    # Every run starts at the origin, one unit from x* = 1.
    assert df_trace['mse'].iloc[0] == 1.0
    assert df_trace['rel_err'].iloc[0] == 1.0
    mse = np.mean([t.column('mse') for t in traces], axis=0)
    assert np.allclose(df_trace['mse'].values, mse)
    assert list(df_trace['samples']) == [2 * k for k in range(7)]
    assert df_trace['rel_err'].notna().all()
    assert average_traces(traces)['rel_err'].isna().all()
    with pytest.raises(ConfigurationError):
        average_traces([])

def test_trace_csv(tmp_path):
    df_trace = average_traces(scalar_traces(), x_star_norm=1.0)
    csv_path = str(tmp_path / 'trace.csv')
    write_trace_csv(df_trace, csv_path)
    with open(csv_path, 'r') as f:
        lines = f.read().splitlines()
    assert lines[0] == 'k,mse,rel_err,consensus_err,prox_evals,samples,comm_rounds,inner_solves'
    assert lines[1].startswith('0,1.000000000000e+00,1.000000000000e+00,,0,0,0,0')
    df_read = read_trace_csv(csv_path)
    assert np.allclose(df_read['mse'].values, df_trace['mse'].values, rtol=1e-11)
    assert df_read['consensus_err'].isna().all()
    assert np.array_equal(error_column(df_read, 'mse'), df_read['mse'].values)

def test_read_trace_missing_columns(tmp_path):
    csv_path = str(tmp_path / 'bad.csv')
    pd.DataFrame({'k': [0, 1], 'mse': [1.0, 0.5]}).to_csv(csv_path, index=False)
    with pytest.raises(ConfigurationError):
        read_trace_csv(csv_path)
