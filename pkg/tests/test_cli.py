import json

import numpy as np
import pandas as pd
import pytest

from cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, RunConfig, build_parser, config_from_args, main


def sample_trace(tmp_path, counts='2,1', iterations='200', burn_in='50', name='trace.jsonl'):
    path = tmp_path / name
    assert main(['sample', '--counts', counts, '--iterations', iterations, '--burn_in', burn_in, '--seed', '3',
                 '--output', str(path)]) == EXIT_OK
    return path


class TestConfig:

    def test_defaults(self):
        config = config_from_args(build_parser().parse_args(['sample', '--counts', '4,3']))
        assert (config.iterations, config.burn_in, config.seed) == (10000, 1000, 1)
        np.testing.assert_array_equal(config.dataset().counts, [4, 3])

    def test_bench_flags(self):
        config = config_from_args(build_parser().parse_args(['bench', '--K_grid', '5,10', '--N_grid', '50']))
        assert (config.k_grid, config.n_grid) == ('5,10', '50')

    def test_counts_and_observations_exclusive(self):
        with pytest.raises(ValueError):
            RunConfig(counts='4,3', observations='obs.txt')

    @pytest.mark.parametrize('field', ['iterations', 'particles', 'lag'])
    def test_positive(self, field):
        with pytest.raises(ValueError):
            RunConfig(counts='4,3', **{field: 0})

    def test_missing_data(self):
        with pytest.raises(ValueError):
            RunConfig().dataset()


class TestSample:

    def test_trace_length(self, tmp_path):
        path = tmp_path / 'trace.jsonl'
        assert main(['sample', '--counts', '4,3', '--iterations', '2000', '--seed', '1', '--output', str(path)]) == EXIT_OK
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == 1000
        assert records[0]['iteration'] == 1001

    def test_byte_identical(self, tmp_path):
        first = sample_trace(tmp_path, name='a.jsonl')
        second = sample_trace(tmp_path, name='b.jsonl')
        assert first.read_bytes() == second.read_bytes()

    def test_summary_at_default_verbosity(self, tmp_path, capsys):
        sample_trace(tmp_path)
        summary = capsys.readouterr().err
        assert 'feasibility held on 150 of 150' in summary

    def test_vertex_list(self, tmp_path):
        path = tmp_path / 'vertices.json'
        assert main(['sample', '--counts', '2,1', '--iterations', '20', '--burn_in', '10', '--output',
                     str(tmp_path / 'trace.jsonl'), '--vertices', str(path)]) == EXIT_OK
        points = np.array(json.loads(path.read_text()))
        assert points.shape[1] == 2
        np.testing.assert_allclose(points.sum(axis=1), 1.0)

    def test_observation_file(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('1\n4\n2\n\n3\n1\n')
        path = tmp_path / 'trace.jsonl'
        assert main(['sample', '--observations', str(observations), '--iterations', '20', '--burn_in', '10',
                     '--output', str(path)]) == EXIT_OK
        assert len(json.loads(path.read_text().splitlines()[0])['eta']) == 4

    @pytest.mark.parametrize('argv', [
        ['sample', '--counts', '4,x'],
        ['sample', '--counts', '4,3', '--iterations', '10', '--burn_in', '10'],
        ['sample'],
    ])
    def test_input_errors(self, argv):
        assert main(argv) == EXIT_INPUT

    def test_malformed_observations(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('1\n2\nthree\n')
        assert main(['sample', '--observations', str(observations), '--iterations', '20', '--burn_in', '10']) == EXIT_INPUT

    def test_argparse_rejects_unknown_command(self):
        with pytest.raises(SystemExit):
            main(['plot'])


class TestPqr:

    def test_coordinate_curve(self, tmp_path):
        trace = sample_trace(tmp_path)
        output = tmp_path / 'pqr.csv'
        assert main(['pqr', '--trace', str(trace), '--assertion', 'coord 1', '--grid', '0.2,0.5,0.8',
                     '--output', str(output)]) == EXIT_OK
        frame = pd.read_csv(output)
        assert list(frame.columns) == ['assertion', 'c', 'p', 'q', 'r']
        assert frame['c'].tolist() == [0.2, 0.5, 0.8]
        np.testing.assert_allclose(frame[['p', 'q', 'r']].sum(axis=1), 1.0)

    def test_inline_value(self, tmp_path):
        trace = sample_trace(tmp_path)
        output = tmp_path / 'pqr.csv'
        assert main(['pqr', '--trace', str(trace), '--assertion', 'coord 1 0.5', '--output', str(output)]) == EXIT_OK
        assert len(pd.read_csv(output)) == 1

    def test_independence_needs_four_categories(self, tmp_path):
        trace = sample_trace(tmp_path)
        assert main(['pqr', '--trace', str(trace), '--assertion', 'independence']) == EXIT_INPUT

    def test_unknown_assertion(self, tmp_path):
        trace = sample_trace(tmp_path)
        assert main(['pqr', '--trace', str(trace), '--assertion', 'volume 2']) == EXIT_INPUT

    def test_phi_interval(self, tmp_path):
        trace = sample_trace(tmp_path, counts='3,1,1,2', iterations='300')
        output = tmp_path / 'phi.csv'
        assert main(['pqr', '--trace', str(trace), '--assertion', 'phi', '--grid', '0.5,1.0',
                     '--output', str(output)]) == EXIT_OK
        frame = pd.read_csv(output)
        assert frame['p'].iloc[-1] == 1.0

    def test_missing_trace(self, tmp_path):
        assert main(['pqr', '--trace', str(tmp_path / 'missing.jsonl'), '--assertion', 'coord 1']) == EXIT_INPUT

    @pytest.mark.slow
    def test_empty_category_changes_coordinate_but_not_ratio(self, tmp_path):
        curves = {}
        for counts in ('4,3', '4,3,0'):
            trace = sample_trace(tmp_path, counts=counts, iterations='3000', burn_in='500', name=counts + '.jsonl')
            for assertion, grid in (('coord 1', '0.3,0.5,0.7'), ('logratio 1 2', '-1.0,0.0,1.0')):
                output = tmp_path / '{}_{}.csv'.format(counts, assertion.replace(' ', '_'))
                assert main(['pqr', '--trace', str(trace), '--assertion', assertion, '--grid=' + grid,
                             '--output', str(output)]) == EXIT_OK
                curves[counts, assertion] = pd.read_csv(output)
        coord = np.abs(curves['4,3', 'coord 1']['p'] - curves['4,3,0', 'coord 1']['p']).max()
        ratio = np.abs(curves['4,3', 'logratio 1 2']['p'] - curves['4,3,0', 'logratio 1 2']['p']).max()
        assert coord > 0.1
        assert ratio < 0.07


class TestDiagnose:

    def test_bound_curve(self, tmp_path):
        output = tmp_path / 'tv.csv'
        assert main(['diagnose', '--counts', '2,2', '--replicates', '4', '--max_iterations', '5000',
                     '--output', str(output)]) == EXIT_OK
        frame = pd.read_csv(output)
        assert list(frame.columns) == ['t', 'tv_upper_bound']
        assert (frame['tv_upper_bound'].diff().dropna() <= 0).all()
        assert frame['tv_upper_bound'].iloc[-1] == 0.0

    def test_unmet_chains(self):
        assert main(['diagnose', '--counts', '5,5,5', '--replicates', '2', '--max_iterations', '2']) == EXIT_NUMERICAL

    def test_invalid_omega(self):
        assert main(['diagnose', '--counts', '2,2', '--omega', '1.5']) == EXIT_INPUT


class TestSequential:

    def test_ribbon(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('1\n4\n2\n1\n')
        output = tmp_path / 'ribbon.csv'
        assert main(['sequential', '--observations', str(observations), '--particles', '16', '--probes', '16',
                     '--output', str(output)]) == EXIT_OK
        frame = pd.read_csv(output)
        assert list(frame.columns) == ['n', 'p', 'one_minus_q']
        assert frame['n'].tolist() == [0, 1, 2, 3, 4]

    def test_final_ensemble(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('1\n4\n2\n')
        ensemble = tmp_path / 'ensemble.jsonl'
        assert main(['sequential', '--observations', str(observations), '--particles', '8', '--probes', '8',
                     '--output', str(tmp_path / 'ribbon.csv'), '--ensemble', str(ensemble)]) == EXIT_OK
        records = [json.loads(line) for line in ensemble.read_text().splitlines()]
        assert len(records) == 8
        assert all(len(r['eta']) == 4 and 'log_weight' in r for r in records)

    def test_empty_sequence(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('')
        output = tmp_path / 'ribbon.csv'
        assert main(['sequential', '--observations', str(observations), '--particles', '8',
                     '--output', str(output)]) == EXIT_OK
        assert pd.read_csv(output).to_dict('records') == [{'n': 0, 'p': 0.0, 'one_minus_q': 1.0}]

    def test_wrong_dimension(self, tmp_path):
        observations = tmp_path / 'obs.txt'
        observations.write_text('1\n2\n')
        assert main(['sequential', '--observations', str(observations), '--num_categories', '3']) == EXIT_INPUT


class TestLinkage:

    def test_two_tables(self, tmp_path):
        prefix = tmp_path / 'linkage'
        assert main(['linkage', '--counts', '25,3,4,7', '--iterations', '2000', '--burn_in', '100',
                     '--grid', '0.25,0.5,0.75', '--output', str(prefix)]) == EXIT_OK
        simplex_frame = pd.read_csv(str(prefix) + '_simplex.csv')
        dirichlet_frame = pd.read_csv(str(prefix) + '_dirichlet.csv')
        assert list(simplex_frame.columns) == ['c', 'p', 'q', 'r', 'retention_rate']
        assert list(dirichlet_frame.columns) == ['c', 'p', 'q', 'r']
        assert 0 < simplex_frame['retention_rate'].iloc[0] < 1

    def test_needs_four_counts(self):
        assert main(['linkage', '--counts', '4,3', '--iterations', '20', '--burn_in', '10']) == EXIT_INPUT


def test_bench(tmp_path):
    output = tmp_path / 'bench.csv'
    assert main(['bench', '--K_grid', '2,3', '--N_grid', '6', '--repeats', '1', '--bench_iterations', '2',
                 '--output', str(output)]) == EXIT_OK
    frame = pd.read_csv(output)
    assert frame[['K', 'N']].values.tolist() == [[2, 6], [3, 6]]
    assert (frame['median_seconds'] >= 0).all()


@pytest.mark.slow
def test_bench_timings_grow_with_categories_and_size(tmp_path):
    output = tmp_path / 'bench.csv'
    assert main(['bench', '--K_grid', '2,10', '--N_grid', '40,40000', '--repeats', '3', '--bench_iterations', '20',
                 '--output', str(output)]) == EXIT_OK
    timings = pd.read_csv(output).set_index(['K', 'N'])['median_seconds']
    assert timings[2, 40] < timings[2, 40000]
    assert timings[10, 40] < timings[10, 40000]
    assert timings[2, 40] < timings[10, 40]
    assert timings[2, 40000] < timings[10, 40000]
