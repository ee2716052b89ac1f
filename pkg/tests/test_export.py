import json

import numpy as np
import pandas as pd

from simplex import Dataset, make_rng
from constraint_graph import vacuous_eta
from evidence import init_ensemble
from export import eta_to_record, write_ensemble, write_table, write_trace, write_vertices


def test_infinite_entries_are_strings():
    record = eta_to_record(3, vacuous_eta(2))
    assert record == {'iteration': 3, 'eta': [[1.0, 'inf'], ['inf', 1.0]]}


def test_trace_lines(tmp_path):
    path = tmp_path / 'trace.jsonl'
    write_trace(np.array([vacuous_eta(2)] * 3), path)
    lines = path.read_text().splitlines()
    assert [json.loads(line)['iteration'] for line in lines] == [1, 2, 3]


def test_trace_to_stdout(capsys):
    write_trace(np.array([np.ones((2, 2))]), '-', start_iteration=7)
    assert json.loads(capsys.readouterr().out) == {'iteration': 7, 'eta': [[1.0, 1.0], [1.0, 1.0]]}


def test_ensemble(tmp_path):
    path = tmp_path / 'ensemble.jsonl'
    write_ensemble(init_ensemble(Dataset.from_counts([1, 2]), 4, make_rng(1)), path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == 4
    assert all(r['log_weight'] == 0.0 for r in records)


def test_vertices(tmp_path):
    path = tmp_path / 'vertices.json'
    write_vertices(np.eye(2), path)
    assert json.loads(path.read_text()) == [[1.0, 0.0], [0.0, 1.0]]


def test_table(capsys):
    write_table(pd.DataFrame({'t': [0, 1], 'tv_upper_bound': [1.5, 0.0]}))
    assert capsys.readouterr().out == 't,tv_upper_bound\n0,1.5\n1,0.0\n'
