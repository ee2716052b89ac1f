import csv
import re
import json
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from simplex import Dataset, InvalidDimensionError
from polytope import coordinate_assertion, independence_assertion, log_ratio_assertion

logger = logging.getLogger(__name__)


class ParseError(ValueError):

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else 'line {}: {}'.format(line, message))


class UnknownAssertionError(ValueError):
    pass


def parse_counts(text):
    '''
    Parse inline counts such as "4,3".
    @param text: comma separated non-negative integers, at least two
    @return: integer array
    '''
    try:
        counts = np.array([int(part) for part in text.split(',') if part.strip() != ''], dtype=int)
    except ValueError:
        raise ParseError('counts must be comma separated integers, got {!r}'.format(text))
    if counts.shape[0] < 2:
        raise InvalidDimensionError('need counts for at least two categories, got {!r}'.format(text))
    if np.any(counts < 0):
        raise ParseError('counts must be non-negative, got {!r}'.format(text))
    return counts


def parse_int_list(text):
    try:
        values = [int(part) for part in text.split(',') if part.strip() != '']
    except ValueError:
        raise ParseError('expected comma separated integers, got {!r}'.format(text))
    if not values or min(values) <= 0:
        raise ParseError('expected positive integers, got {!r}'.format(text))
    return values


def parse_grid(text):
    '''
    Grid of c values, either "start:stop:num" (inclusive, evenly spaced) or a comma separated list.
    '''
    try:
        if ':' in text:
            start, stop, num = text.split(':')
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(part) for part in text.split(',')])
    except ValueError:
        raise ParseError('cannot read grid {!r}'.format(text))


def load_observations(path, num_categories=None):
    '''
    Read one 1-based category label per line, blank lines are ignored.
    @param path: path to the observation file
    @param num_categories: K, defaults to the largest label
    @return: Dataset with 0-based labels in file order
    '''
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False, quoting=csv.QUOTE_NONE)
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame({0: []}, dtype=str)
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise ParseError('expected one label per line', line=int(match.group(1)) if match else None)

    if frame.shape[1] > 1:
        extra = frame.iloc[:, 1:].notna().any(axis=1).to_numpy()
        raise ParseError('expected one label per line', line=int(np.argmax(extra)) + 1)

    labels = []
    for line, value in zip(frame.index + 1, frame[0]):
        if pd.isna(value) or value.strip() == '':
            continue
        try:
            label = int(value.strip())
        except ValueError:
            raise ParseError('expected an integer label, got {!r}'.format(value), line=line)
        if label < 1 or (num_categories is not None and label > num_categories):
            raise ParseError('label {} outside 1..{}'.format(label, num_categories or 'K'), line=line)
        labels.append(label - 1)

    if num_categories is None:
        num_categories = max(labels) + 1 if labels else 0
    logger.debug('read %d observations from %s', len(labels), path)
    return Dataset(num_categories, np.array(labels, dtype=int))


def eta_from_record(record):
    return np.array(record['eta'], dtype=float)


def load_trace(path):
    '''
    Read a JSON-lines trace written by export.write_trace.
    @return: tuple of iteration numbers and an array (n, K, K)
    '''
    iterations, etas = [], []
    with open(path) as f:
        for line, text in enumerate(f, start=1):
            if not text.strip():
                continue
            try:
                record = json.loads(text)
                iterations.append(int(record['iteration']))
                etas.append(eta_from_record(record))
            except (ValueError, KeyError, TypeError) as e:
                raise ParseError('malformed trace record ({})'.format(e), line=line)
    if not etas:
        raise ParseError('trace {} holds no records'.format(path))
    if len({eta.shape for eta in etas}) != 1:
        raise ParseError('trace {} mixes matrix sizes'.format(path))
    return np.array(iterations), np.array(etas)


@dataclass(frozen=True)
class AssertionSpec:
    '''
    Parsed command line assertion. family maps c to an Assertion; value is the c given inline, if any.
    '''
    kind: str
    label: str
    family: Optional[Callable]
    value: Optional[float] = None


def _category(text, num_categories):
    k = int(text)
    if not 1 <= k <= num_categories:
        raise InvalidDimensionError('category {} outside 1..{}'.format(k, num_categories))
    return k - 1


def parse_assertion(text, num_categories):
    '''
    Parse "coord k [c]", "logratio k l [c]", "independence" or "phi"; categories are 1-based.
    @param text: assertion spec
    @param num_categories: K of the trace it will be applied to
    @return: AssertionSpec
    '''
    parts = text.split()
    if not parts:
        raise UnknownAssertionError('empty assertion spec')
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == 'coord' and len(args) in (1, 2):
            k = _category(args[0], num_categories)
            value = float(args[1]) if len(args) == 2 else None
            return AssertionSpec(kind, 'coord {}'.format(k + 1), lambda c: coordinate_assertion(k, c), value)
        if kind == 'logratio' and len(args) in (2, 3):
            k, l = _category(args[0], num_categories), _category(args[1], num_categories)
            value = float(args[2]) if len(args) == 3 else None
            return AssertionSpec(kind, 'logratio {} {}'.format(k + 1, l + 1), lambda c: log_ratio_assertion(k, l, c), value)
    except ValueError as e:
        if isinstance(e, InvalidDimensionError):
            raise
        raise UnknownAssertionError('cannot read assertion {!r}'.format(text))
    if kind == 'independence' and not args:
        if num_categories != 4:
            raise InvalidDimensionError('independence needs K=4, got K={}'.format(num_categories))
        return AssertionSpec(kind, 'independence', lambda c: independence_assertion(), 0.0)
    if kind == 'phi' and not args:
        if num_categories != 4:
            raise InvalidDimensionError('the linkage segment needs K=4, got K={}'.format(num_categories))
        return AssertionSpec(kind, 'phi', None)
    raise UnknownAssertionError('unknown assertion {!r}'.format(text))
