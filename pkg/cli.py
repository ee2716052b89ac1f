import sys
import time
import logging
import argparse as arg
import multiprocessing as mp
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from simplex import Dataset, named_rng
from constraint_graph import is_feasible
from polytope import DEFAULT_PROBES, independence_assertion, vertices
from gibbs import (DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_OMEGA, CouplingConfig, init, run, sample_meeting_time,
                   step, tv_upper_bound_curve, UnmetChainError)
from evidence import (DEFAULT_ESS_THRESHOLD, DEFAULT_PARTICLES, dirichlet_dsm_phi, interval_pqr, linkage_phi_intervals,
                      linkage_phi_pqr, pqr_curve, sequential_pqr)
from data_loader import load_observations, load_trace, parse_assertion, parse_counts, parse_grid, parse_int_list
from export import write_ensemble, write_table, write_trace, write_vertices

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

DEFAULT_GRID = '0.01:0.99:99'


@dataclass
class RunConfig:
    '''
    Settings shared by all commands, built from the parsed command line.
    '''
    counts: Optional[np.ndarray] = None
    observations: Optional[str] = None
    num_categories: Optional[int] = None
    seed: int = 1
    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    omega: float = DEFAULT_OMEGA
    lag: int = 1
    max_iterations: int = DEFAULT_ITERATIONS
    replicates: int = 100
    processes: int = 1
    particles: int = DEFAULT_PARTICLES
    ess_threshold: float = DEFAULT_ESS_THRESHOLD
    probes: int = DEFAULT_PROBES
    grid: str = DEFAULT_GRID
    trace: Optional[str] = None
    assertion: Optional[str] = None
    k_grid: str = '3,5'
    n_grid: str = '30,60'
    repeats: int = 5
    bench_iterations: int = 100
    output: Optional[str] = None
    vertices: Optional[str] = None
    ensemble: Optional[str] = None
    verbose: int = 3

    def __post_init__(self):
        if self.counts is not None and self.observations is not None:
            raise ValueError('--counts and --observations are mutually exclusive')
        if self.counts is not None and isinstance(self.counts, str):
            self.counts = parse_counts(self.counts)
        positive = ['iterations', 'lag', 'max_iterations', 'replicates', 'processes', 'particles', 'repeats', 'bench_iterations']
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError('--{} must be positive, got {}'.format(name, getattr(self, name)))
        if self.burn_in < 0 or self.probes < 0 or self.seed < 0:
            raise ValueError('--burn_in, --probes and --seed must be non-negative')
        if not 0 < self.ess_threshold <= 1:
            raise ValueError('--ess_threshold must lie in (0, 1], got {}'.format(self.ess_threshold))

    @property
    def progress(self):
        return self.verbose < 3

    def dataset(self):
        if self.observations is not None:
            return load_observations(self.observations, self.num_categories)
        if self.counts is None:
            raise ValueError('either --counts or --observations is required')
        return Dataset.from_counts(self.counts)

    def rng(self, name, *stream):
        return named_rng(self.seed, name, *stream)


def cmd_sample(config):
    '''
    Run the Gibbs sampler and write the recorded eta matrices as a JSON-lines trace.
    @param config: RunConfig
    @return: array (iterations - burn_in, K, K)
    '''
    dataset = config.dataset()
    start = time.perf_counter()
    trace = run(dataset, iterations=config.iterations, burn_in=config.burn_in, rng=config.rng('gibbs'),
                progress=config.progress)
    elapsed = time.perf_counter() - start
    write_trace(trace, config.output, start_iteration=config.burn_in + 1)
    if config.vertices is not None:
        write_vertices(vertices(trace[-1]), config.vertices)

    feasible = sum(is_feasible(eta) for eta in trace)
    # stdout may carry the trace
    print('counts {}: {} records, feasibility held on {} of {}, {:.2f} s'.format(
        dataset.counts.tolist(), len(trace), feasible, len(trace), elapsed), file=sys.stderr)
    return trace


def cmd_pqr(config):
    '''
    (p, q, r) of an assertion over a stored trace, one row per grid value.
    @param config: RunConfig with trace and assertion set
    @return: DataFrame with columns assertion, c, p, q, r
    '''
    if config.trace is None or config.assertion is None:
        raise ValueError('pqr needs --trace and --assertion')
    _, trace = load_trace(config.trace)
    spec = parse_assertion(config.assertion, trace.shape[1])
    grid = parse_grid(config.grid)

    if spec.kind == 'phi':
        frame = interval_pqr(linkage_phi_intervals(trace), grid)
        frame.insert(0, 'assertion', spec.label)
    else:
        grid = [spec.value] if spec.value is not None else grid
        frame = pqr_curve(trace, spec.family, grid, label=spec.label, num_probes=config.probes, rng=config.rng('probes'))
    write_table(frame, config.output)
    return frame


def cmd_diagnose(config):
    '''
    Meeting times of lag-L coupled chains and the resulting TV upper bound curve.
    @param config: RunConfig
    @return: DataFrame with columns t, tv_upper_bound
    '''
    dataset = config.dataset()
    cfg = CouplingConfig(omega=config.omega, lag=config.lag, max_iterations=config.max_iterations)
    worker = partial(sample_meeting_time, dataset, cfg, config.seed)

    if config.processes > 1:
        with mp.Pool(config.processes) as pool:
            meetings = list(tqdm(pool.imap(worker, range(config.replicates)), total=config.replicates,
                                 desc='coupled chains', disable=not config.progress))
    else:
        meetings = [worker(r) for r in tqdm(range(config.replicates), desc='coupled chains', disable=not config.progress)]

    unmet = sum(not m.met for m in meetings)
    if unmet:
        logger.error('%d of %d replicates did not meet within %d iterations', unmet, len(meetings), cfg.max_iterations)
        raise UnmetChainError(unmet, len(meetings))

    ts, bounds = tv_upper_bound_curve(meetings)
    frame = pd.DataFrame({'t': ts, 'tv_upper_bound': bounds})
    logger.info('meeting times: median %.1f, max %d', np.median([m.meeting_time for m in meetings]),
                max(m.meeting_time for m in meetings))
    write_table(frame, config.output)
    return frame


def cmd_sequential(config):
    '''
    Sequential assimilation of the observations in file order, tracking p and 1 - q of positive association.
    @param config: RunConfig
    @return: DataFrame with columns n, p, one_minus_q
    '''
    if config.observations is not None:
        dataset = load_observations(config.observations, config.num_categories or 4)
    else:
        dataset = config.dataset()
    frame, ensemble = sequential_pqr(dataset.observations, dataset.num_categories, independence_assertion(),
                                     num_particles=config.particles, rng=config.rng('smc'),
                                     ess_threshold=config.ess_threshold, num_probes=config.probes,
                                     progress=config.progress, return_ensemble=True)
    write_table(frame, config.output)
    if config.ensemble is not None:
        write_ensemble(ensemble, config.ensemble)
    return frame


def cmd_linkage(config):
    '''
    Lower and upper cdf of the linkage parameter from the simplex sampler and from Dirichlet-DSM.
    Writes <output>_simplex.csv and <output>_dirichlet.csv.
    @param config: RunConfig with four counts
    @return: tuple of both DataFrames and the retention rate
    '''
    dataset = config.dataset()
    if dataset.num_categories != 4:
        raise ValueError('the linkage model has four categories, got {}'.format(dataset.num_categories))
    grid = parse_grid(config.grid)

    trace = run(dataset, iterations=config.iterations, burn_in=config.burn_in, rng=config.rng('gibbs'),
                progress=config.progress)
    simplex_frame, retention_rate = linkage_phi_pqr(trace, grid)
    simplex_frame['retention_rate'] = retention_rate
    dirichlet_frame = interval_pqr(dirichlet_dsm_phi(dataset.counts, len(trace), config.rng('dsm')), grid)

    prefix = config.output or 'linkage'
    write_table(simplex_frame, prefix + '_simplex.csv')
    write_table(dirichlet_frame, prefix + '_dirichlet.csv')
    logger.info('retention rate %.4f over %d recorded iterations', retention_rate, len(trace))
    return simplex_frame, dirichlet_frame, retention_rate


def time_sweeps(dataset, iterations, rng):
    state = init(dataset, rng=rng)
    start = time.perf_counter()
    for _ in range(iterations):
        state = step(state, rng)
    return time.perf_counter() - start


def cmd_bench(config):
    '''
    Median wall time of a fixed number of sweeps over a grid of (K, N), counts N // K per category.
    @param config: RunConfig
    @return: DataFrame with columns K, N, median_seconds
    '''
    rows = []
    for num_categories in parse_int_list(config.k_grid):
        for size in parse_int_list(config.n_grid):
            dataset = Dataset.from_counts([size // num_categories] * num_categories)
            timings = [time_sweeps(dataset, config.bench_iterations, config.rng('bench', num_categories, size, r))
                       for r in range(config.repeats)]
            rows.append({'K': int(num_categories), 'N': int(size), 'median_seconds': float(np.median(timings))})
            logger.info('K=%d N=%d: %.4f s', num_categories, size, rows[-1]['median_seconds'])
    frame = pd.DataFrame(rows, columns=['K', 'N', 'median_seconds'])
    write_table(frame, config.output)
    return frame


COMMANDS = {
    'sample': cmd_sample,
    'pqr': cmd_pqr,
    'diagnose': cmd_diagnose,
    'sequential': cmd_sequential,
    'linkage': cmd_linkage,
    'bench': cmd_bench,
}


def build_parser():
    common = arg.ArgumentParser(add_help=False)
    common.add_argument('--counts', metavar='<list>', type=str, help='comma separated counts per category', required=False, default=None)
    common.add_argument('--observations', metavar='<file>', type=str, help='file with one 1-based category label per line', required=False, default=None)
    common.add_argument('--num_categories', metavar='<int>', type=int, help='number of categories for observation files', required=False, default=None)
    common.add_argument('--seed', metavar='<int>', type=int, help='seed of all random streams', required=False, default=1)
    common.add_argument('--output', metavar='<file>', type=str, help='output path, stdout when omitted', required=False, default=None)
    common.add_argument('--probes', metavar='<int>', type=int, help='interior probes for nonlinear assertions', required=False, default=DEFAULT_PROBES)
    common.add_argument('--verbose', metavar='<number>', type=int, help='verbosity', required=False, default=3)

    chain = arg.ArgumentParser(add_help=False)
    chain.add_argument('--iterations', metavar='<int>', type=int, help='total Gibbs sweeps', required=False, default=DEFAULT_ITERATIONS)
    chain.add_argument('--burn_in', metavar='<int>', type=int, help='sweeps discarded before recording', required=False, default=DEFAULT_BURN_IN)

    grid = arg.ArgumentParser(add_help=False)
    grid.add_argument('--grid', metavar='<grid>', type=str, help='c values as start:stop:num or a comma separated list', required=False, default=DEFAULT_GRID)

    parser = arg.ArgumentParser(description='Dempster-Shafer inference for categorical data')
    sub = parser.add_subparsers(dest='command', required=True)

    sample = sub.add_parser('sample', parents=[common, chain], help='run the Gibbs sampler and write a trace')
    sample.add_argument('--vertices', metavar='<file>', type=str, help='JSON vertex list of the last recorded feasible set', required=False, default=None)

    pqr = sub.add_parser('pqr', parents=[common, grid], help='(p, q, r) of an assertion over a trace')
    pqr.add_argument('--trace', metavar='<file>', type=str, help='JSON-lines trace', required=True)
    pqr.add_argument('--assertion', metavar='<spec>', type=str, help='coord k [c] | logratio k l [c] | independence | phi', required=True)

    diagnose = sub.add_parser('diagnose', parents=[common], help='TV upper bounds from coupled chains')
    diagnose.add_argument('--omega', metavar='<float>', type=float, help='probability of a common random numbers update', required=False, default=DEFAULT_OMEGA)
    diagnose.add_argument('--lag', metavar='<int>', type=int, help='lag between the coupled chains', required=False, default=1)
    diagnose.add_argument('--max_iterations', metavar='<int>', type=int, help='iteration budget per replicate', required=False, default=DEFAULT_ITERATIONS)
    diagnose.add_argument('--replicates', metavar='<int>', type=int, help='independent coupled runs', required=False, default=100)
    diagnose.add_argument('--processes', metavar='<int>', type=int, help='worker processes', required=False, default=1)

    sequential = sub.add_parser('sequential', parents=[common], help='sequential analysis of positive association')
    sequential.add_argument('--particles', metavar='<int>', type=int, help='number of particles', required=False, default=DEFAULT_PARTICLES)
    sequential.add_argument('--ess_threshold', metavar='<float>', type=float, help='resampling threshold as a fraction of the particles', required=False, default=DEFAULT_ESS_THRESHOLD)
    sequential.add_argument('--ensemble', metavar='<file>', type=str, help='JSON-lines particles and log weights after the last observation', required=False, default=None)

    sub.add_parser('linkage', parents=[common, chain, grid], help='linkage model, simplex sampler against Dirichlet-DSM')

    bench = sub.add_parser('bench', parents=[common], help='timings of Gibbs sweeps')
    bench.add_argument('--K_grid', metavar='<list>', type=str, help='numbers of categories', required=False, default='3,5')
    bench.add_argument('--N_grid', metavar='<list>', type=str, help='numbers of observations', required=False, default='30,60')
    bench.add_argument('--repeats', metavar='<int>', type=int, help='repeats per grid point', required=False, default=5)
    bench.add_argument('--bench_iterations', metavar='<int>', type=int, help='sweeps per timing', required=False, default=100)

    return parser


def config_from_args(args):
    options = {k.lower(): v for k, v in vars(args).items() if k != 'command'}
    return RunConfig(**options)


def configure_logging(verbose):
    level = logging.DEBUG if verbose < 2 else logging.INFO if verbose == 2 else logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr, force=True)


def main(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = config_from_args(args)
        COMMANDS[args.command](config)
    except ValueError as e:
        logger.error('%s', e)
        return EXIT_INPUT
    except ArithmeticError as e:
        logger.error('%s', e)
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error('%s', e)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
