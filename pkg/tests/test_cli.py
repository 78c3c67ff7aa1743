import json

import pandas as pd
import pytest

from starfactor.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from starfactor.pairing import MultiGraph


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_theory_json(log_dir, capsys):
    code, payload = run_json(capsys, ['theory', '--d', '4', '--kmax', '5'])
    assert code == EXIT_OK
    assert payload['command'] == 'theory'
    assert payload['constants']['variance_ratio'] == pytest.approx(1.733438113, rel=1e-9)
    assert payload['invocation']['d'] == 4
    assert payload['invocation']['log_dir'] == str(log_dir)
    assert all(check['passed'] for check in payload['checks'])
    assert (log_dir / 'starfactor.log').exists()


def test_theory_csv(log_dir, capsys):
    assert main(['theory', '--d', '6', '--kmax', '3', '--format', 'csv']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'k,lambda,delta,rel_joint_moment,lambda_delta_sq'
    assert len(lines) == 4


def test_theory_with_w_draws(log_dir, capsys):
    code, payload = run_json(capsys, ['theory', '--d', '5', '--w-draws', '50000', '--w-kmax', '15', '--seed', '2'])
    assert code == EXIT_OK
    summary = payload['W']
    assert summary['draws'] == 50000
    assert all(check['passed'] for check in payload['checks'])
    assert abs(summary['mean'] - 1) < 5 * summary['mean_stderr']
    assert {check['name'] for check in payload['checks']} >= {'W_mean_z', 'W_square_z'}


@pytest.mark.parametrize("argv", [
    ['theory', '--d', '3'],
    ['experiment', '--n', '6', '--d', '4'],
    ['sample', '--n', '3', '--d', '3'],
    ['theory'],
    ['bogus'],
])
def test_usage_errors(log_dir, argv):
    assert main(argv) == EXIT_USAGE


def test_invalid_environment_is_usage_error(log_dir, monkeypatch):
    monkeypatch.setenv('STARFACTOR_THREADS', 'many')
    assert main(['theory', '--d', '4']) == EXIT_USAGE


def test_sample_text_round_trip(log_dir, capsys, tmp_path):
    assert main(['sample', '--n', '8', '--d', '3', '--seed', '5', '--text', '--graph']) == EXIT_OK
    graph = MultiGraph.from_text(capsys.readouterr().out)
    assert graph.degrees() == [3] * 8

    target = tmp_path / 'pairing.txt'
    assert main(['sample', '--n', '8', '--d', '4', '--seed', '5', '--text', '--out', str(target)]) == EXIT_OK
    code, payload = run_json(capsys, ['count', '--pairing', str(target), '--n', '8', '--d', '4', '--oracle'])
    assert code == EXIT_OK
    assert payload['count'] == payload['oracle']


def test_count_graph_file(log_dir, capsys, tmp_path, k4):
    path = tmp_path / 'k4.txt'
    path.write_text(k4.to_text())
    code, payload = run_json(capsys, ['count', '--graph', str(path)])
    assert code == EXIT_OK
    assert payload['count'] == 4
    assert payload['has_factor']


def test_count_needs_a_source(log_dir):
    assert main(['count']) == EXIT_USAGE


def test_bad_pairing_file(log_dir, tmp_path):
    path = tmp_path / 'broken.txt'
    path.write_text('0 1\n1 2\n')
    assert main(['count', '--pairing', str(path), '--n', '2', '--d', '2']) == EXIT_USAGE


def test_census_with_trace_check(log_dir, capsys, tmp_path, cube):
    path = tmp_path / 'cube.txt'
    path.write_text(cube.to_text())
    code, payload = run_json(capsys, ['census', '--graph', str(path), '--kmax', '6'])
    assert code == EXIT_OK
    assert payload['counts']['4'] == 6
    assert payload['trace_check'] == {'X3': 0, 'X4': 6}


def test_experiment_output_is_reproducible(log_dir, capsys):
    argv = ['experiment', '--n', '8', '--d', '4', '--samples', '300', '--kmax', '3', '--seed', '9',
            '--bootstrap', '20', '--z-threshold', '4.5']
    first_code, first = run_json(capsys, argv)
    second_code, second = run_json(capsys, argv + ['--threads', '2'])
    assert first_code == second_code == EXIT_OK
    for payload in (first, second):
        payload.pop('run_info')
        payload['invocation'].pop('threads')
        payload['config'].pop('threads')
    assert first == second


def test_experiment_csv_file(log_dir, tmp_path):
    target = tmp_path / 'out' / 'report.csv'
    argv = ['experiment', '--n', '8', '--d', '4', '--samples', '200', '--kmax', '2', '--bootstrap', '0',
            '--z-threshold', '4.5', '--format', 'csv', '--out', str(target)]
    assert main(argv) == EXIT_OK
    frame = pd.read_csv(target)
    assert list(frame.columns) == ['name', 'k', 'estimate', 'stderr', 'theory', 'z', 'kind']
    assert 'mean_Y' in set(frame['name'])


def test_failed_check_exits_one(log_dir, capsys):
    argv = ['experiment', '--n', '8', '--d', '4', '--samples', '200', '--kmax', '1', '--bootstrap', '0',
            '--z-threshold', '0']
    assert main(argv) == EXIT_FAILED


def test_laplace_verify(log_dir, capsys):
    code, payload = run_json(capsys, ['laplace-verify', '--d', '4', '--starts', '16'])
    assert code == EXIT_OK
    assert payload['certified']
    assert payload['reconstruction']['relative_error'] < 1e-6


@pytest.mark.slow
def test_exhaustive_command(log_dir, capsys):
    code, payload = run_json(capsys, ['exhaustive', '--n', '4', '--d', '4', '--kmax', '2'])
    assert code == EXIT_OK
    assert payload['statistics'][0]['estimate'] == {'fraction': '2048/715', 'value': 2048 / 715}
