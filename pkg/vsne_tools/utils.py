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

import json
import logging
import math
import numpy as np

####    GLOBAL INFORMATION    ####
scheme_names = ('vs_pgr', 'd_vs_pgr', 'vs_pbr', 'd_vs_pbr')
distributed_schemes = ('d_vs_pgr', 'd_vs_pbr')
br_schemes = ('vs_pbr', 'd_vs_pbr')
topology_names = ('cycle', 'star', 'erdos_renyi', 'complete')

# Column order of every trace.csv.
trace_columns = (
    'k', 'mse', 'rel_err', 'consensus_err', 'prox_evals', 'samples',
    'comm_rounds', 'inner_solves'
)
counter_columns = ('prox_evals', 'samples', 'comm_rounds', 'inner_solves')

default_budget = 10**6  # Sampled gradients per run, counted per player by default.
budget_units = ('player', 'total')
default_replications = 50
default_max_batch = 10**6  # Per player and iteration.
default_inner_tol = 1e-10
default_inner_max_iters = 100000
default_oracle_tol = 1e-12
default_oracle_max_iters = 10**6
default_er_attempts = 1000
divergence_factor = 1e6  # Abort once ||x_k|| exceeds this times the domain diameter.
snapshot_points = 200
burn_in_fraction = 0.25

workers_env_var = 'VSNE_WORKERS'
log_format = '%(asctime)s %(name)s %(levelname)s: %(message)s'



###   ERRORS   ###

class VSNEError(Exception):
    """Base class for every error raised by vsne_tools."""
    exit_code = 1

class ConfigurationError(VSNEError, ValueError):
    """Inconsistent dimensions, unknown configuration keys or bad parameters."""
    exit_code = 2

class ScheduleError(ConfigurationError):
    """Batch or communication schedule emitted an unusable value."""

class DomainError(VSNEError, ValueError):
    """Numerical routine called outside of its mathematical domain."""
    exit_code = 2

class FitError(VSNEError, ValueError):
    exit_code = 2

class PreconditionError(VSNEError):
    """A convergence precondition (contraction, strong monotonicity) fails."""
    exit_code = 3

class OracleError(PreconditionError):
    """Ground-truth equilibrium could not be computed to tolerance."""

class SolverError(VSNEError):
    """Run aborted; the partial trace is kept on the exception.

    Parameters
    ----------
    message : :obj:`str`
        Diagnostic.
    trace : :obj:`vsne_tools.solvers.RunTrace`, optional
        Records collected before the abort.
    """
    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace

class DivergenceError(SolverError):
    pass

class InnerSolverError(SolverError):
    pass



###   HELPERS   ###

class NumpyEncoder(json.JSONEncoder):
    """JSON encoder that understands numpy scalars and arrays."""

    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        return json.JSONEncoder.default(self, obj)

def read_json(json_path, expect=dict):
    """Loads a configuration or instance file.

    Parameters
    ----------
    json_path : :obj:`str`
    expect : :obj:`type`, optional
        Required type of the top-level value. Defaults to :obj:`dict`.

    Raises
    ------
    :obj:`ConfigurationError`
        If the file is missing, is not valid JSON or holds another type.
    """
    try:
        with open(json_path, 'r') as reader:
            contents = json.load(reader)
    except FileNotFoundError:
        raise ConfigurationError(f'No such file: {json_path}') from None
    except ValueError as e:
        raise ConfigurationError(f'Could not parse {json_path}: {e}') from None
    if expect is not None and not isinstance(contents, expect):
        raise ConfigurationError(
            f'{json_path} must hold a JSON {expect.__name__}; got {type(contents).__name__}'
        )
    return contents

def write_json(json_path, json_dict):
    """Write a dictionary as sorted, indented JSON.

    Parameters
    ----------
    json_path : :obj:`str`
        Path to the JSON file to write.
    json_dict : :obj:`dict`
        Contents; numpy types are converted.
    """
    json_string = json.dumps(
        json_dict, cls=NumpyEncoder, sort_keys=True, indent=4
    )
    with open(json_path, 'w') as f:
        f.write(json_string)

def setup_logging(verbosity=0):
    """Configures root logging for command line use.

    Parameters
    ----------
    verbosity : :obj:`int`, optional
        ``0`` for warnings, ``1`` for info and ``2`` or more for debug
        messages. Defaults to ``0``.
    """
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format=log_format)

def ceil_int(value):
    """Ceiling that ignores floating-point noise just above an integer.

    Schedule formulas such as ``0.5**-3`` or ``16.000000000000004`` must round
    to the integer they represent.
    """
    if not math.isfinite(value):
        raise DomainError(f'Cannot take the ceiling of {value}')
    return int(math.ceil(value - 1e-12 * max(1.0, abs(value))))

def check_unit_interval(name, value):
    """Raises :obj:`DomainError` unless ``0 < value < 1``."""
    if not 0.0 < value < 1.0:
        raise DomainError(f'{name} must lie in (0, 1); got {value}')

def exit_code_for(error):
    """CLI exit code for an exception raised by this package."""
    if isinstance(error, VSNEError):
        return error.exit_code
    return 1
