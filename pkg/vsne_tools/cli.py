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

"""Command line interface: ``run``, ``predict``, ``plot`` and
``gen-instance``."""

import argparse
import json
import logging
import sys

from vsne_tools.utils import *
from vsne_tools.data import config_schema, merge_config, load_config
from vsne_tools.cournot import gen_linear_cournot, gen_quadratic_cournot
from vsne_tools.harness import emit_plots, predict_experiment, run_experiment, workers_from_env

log = logging.getLogger(__name__)

def build_parser():
    parser = argparse.ArgumentParser(
        prog='vsne-experiment',
        description='Variable sample-size Nash equilibrium experiments.'
    )
    parser.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='increase logging verbosity (-v info, -vv debug)'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='run a configured experiment')
    run.add_argument('config', help='JSON experiment configuration')
    run.add_argument('--output-dir', default=None, help='overrides output_dir')
    run.add_argument(
        '--workers', type=int, default=None,
        help=f'replication processes (default ${workers_env_var} or 1)'
    )

    predict = subparsers.add_parser('predict', help='predicted complexity bounds')
    predict.add_argument('config', help='JSON experiment configuration')
    predict.add_argument('--eps', type=float, nargs='+', required=True, help='target MSE values')
    predict.add_argument('--output', default=None, help='write the prediction JSON here')

    plot = subparsers.add_parser('plot', help='convergence plots from trace files')
    plot.add_argument('traces', nargs='+', help='trace.csv files')
    plot.add_argument('--output-dir', default='.', help='directory for the SVG files')
    plot.add_argument('--labels', nargs='+', default=None, help='one legend label per trace')
    plot.add_argument(
        '--metric', choices=('relative_error', 'mse'), default='relative_error'
    )
    plot.add_argument('--prefix', default='convergence')

    gen = subparsers.add_parser('gen-instance', help='write a Cournot instance file')
    gen.add_argument('spec', help='JSON with the keys of the instance section')
    gen.add_argument('--output', default='instance.json')
    return parser

def _run(args):
    config = load_config(args.config)
    workers = args.workers if args.workers is not None else workers_from_env()
    summary, _ = run_experiment(config, workers=workers, output_dir=args.output_dir)
    print(json.dumps({
        'status': summary.status, 'n_iters': summary.n_iters,
        'final_rel_err': summary.final_rel_err, 'counters': summary.counters,
    }, cls=NumpyEncoder, sort_keys=True))

def _predict(args):
    config = load_config(args.config)
    prediction = predict_experiment(config, args.eps)
    if args.output is not None:
        write_json(args.output, prediction)
    print(json.dumps(prediction, cls=NumpyEncoder, sort_keys=True, indent=4))

def _plot(args):
    if args.labels is not None and len(args.labels) != len(args.traces):
        raise ConfigurationError('Give one label per trace file')
    written = emit_plots(
        args.traces, args.output_dir, labels=args.labels, metric=args.metric,
        prefix=args.prefix
    )
    for path in written:
        print(path)

def _gen_instance(args):
    spec = merge_config(config_schema['instance'], read_json(args.spec), path='instance.')
    if spec['family'] != 'cournot':
        raise ConfigurationError('gen-instance only writes Cournot instances')
    kwargs = {
        'seed': spec['seed'], 'cap': spec['cap'],
        'price_noise_base': spec['price_noise_base'],
    }
    if spec['variant'] == 'quadratic':
        _, instance = gen_quadratic_cournot(spec['n'], spec['L'], mu=spec['mu'], **kwargs)
    elif spec['variant'] == 'linear':
        _, instance = gen_linear_cournot(spec['n'], spec['L'], **kwargs)
    else:
        raise ConfigurationError(f'Unknown Cournot variant {spec["variant"]}')
    write_json(args.output, instance.to_dict())
    print(args.output)

commands = {
    'run': _run,
    'predict': _predict,
    'plot': _plot,
    'gen-instance': _gen_instance,
}

def main(argv=None):
    """Entry point; returns the process exit code.

    0 on success, 2 for configuration errors, 3 for failed preconditions and
    4 for aborted runs.
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        commands[args.command](args)
    except VSNEError as e:
        log.error(f'{type(e).__name__}: {e}')
        return exit_code_for(e)
    except OSError as e:
        log.error(str(e))
        return 2
    return 0

if __name__ == '__main__':
    sys.exit(main())
