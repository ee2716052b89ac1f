import json
import logging
import sys
from contextlib import contextmanager

import numpy as np

logger = logging.getLogger(__name__)


@contextmanager
def _open_output(path):
    if path is None or path == '-':
        yield sys.stdout
    else:
        with open(path, 'w', newline='') as f:
            yield f


def _encode(value):
    # JSON has no infinity literal
    return 'inf' if np.isposinf(value) else float(value)


def eta_to_record(iteration, eta):
    '''
    JSON record of one trace element, row-major with +inf written as "inf".
    '''
    return {'iteration': int(iteration), 'eta': [[_encode(v) for v in row] for row in np.asarray(eta)]}


def write_trace(trace, path=None, start_iteration=1):
    '''
    Write eta matrices as JSON lines.
    @param trace: array (n, K, K)
    @param path: output file, stdout when None or '-'
    @param start_iteration: iteration number of the first element
    '''
    with _open_output(path) as f:
        for i, eta in enumerate(trace):
            f.write(json.dumps(eta_to_record(start_iteration + i, eta)) + '\n')
    logger.debug('wrote %d trace records to %s', len(trace), path or 'stdout')


def write_ensemble(ensemble, path=None):
    '''
    Write the particles of a weighted ensemble in trace format, one record per particle with its log weight.
    '''
    with _open_output(path) as f:
        for i, (state, log_weight) in enumerate(zip(ensemble.particles, ensemble.log_weights)):
            record = eta_to_record(i, state.eta)
            record['log_weight'] = _encode(log_weight) if np.isfinite(log_weight) else '-inf'
            f.write(json.dumps(record) + '\n')


def write_vertices(points, path=None):
    with _open_output(path) as f:
        f.write(json.dumps(np.asarray(points, dtype=float).tolist()) + '\n')


def write_table(frame, path=None):
    with _open_output(path) as f:
        frame.to_csv(f, index=False, lineterminator='\n')
    logger.debug('wrote %d rows to %s', len(frame), path or 'stdout')
