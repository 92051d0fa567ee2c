import csv
import json
import math

import pytest
from pytest import approx

from critforest.scaling import settings
from critforest.scaling.artifacts.tabular import split_manifest
from critforest.scaling.config import ExperimentConfig
from critforest.scaling.errors import ConfigError
from critforest.scaling.runner import EXIT_GATES_FAILED, EXIT_INVALID, EXIT_OK, MainRunner, main


@pytest.fixture(autouse=True)
def keep_settings(monkeypatch):
    for name in ('THREADS', 'G_ABS_TOL', 'LOG_LEVEL'):
        monkeypatch.setattr(settings, name, getattr(settings, name))


@pytest.fixture
def cli(capsys):
    def run(*argv):
        code = MainRunner().start([str(arg) for arg in argv])
        return code, capsys.readouterr().out
    return run


def csv_rows(text):
    manifest, lines = split_manifest(text.splitlines())
    return manifest, list(csv.DictReader(lines))


def test_oracle_counts(cli):
    code, out = cli('oracle', '--n', 3, 4, '--m', 2)
    assert code == EXIT_OK
    manifest, rows = csv_rows(out)
    assert manifest['command'] == 'oracle'
    assert [row['N'] for row in rows] == ['3', '4']
    assert float(rows[0]['exact_log_count']) == approx(math.log(3))
    assert float(rows[1]['exact_log_count']) == approx(math.log(15))


def test_oracle_acyclic(cli):
    code, out = cli('oracle', '--acyclic', '--n', 3, '--p', 0.5)
    assert code == EXIT_OK
    _, rows = csv_rows(out)
    assert float(rows[0]['exact']) == approx(0.875)


def test_missing_choice_is_a_config_error(cli):
    code, out = cli('sample-forest', '--n', 8)
    assert code == EXIT_INVALID
    error = json.loads(out)
    assert error['error'] == 'ConfigError'
    assert error['schema_version'] == settings.SCHEMA_VERSION


def test_sample_then_explore(cli, tmp_path):
    text = tmp_path / 'forests.txt'
    binary = tmp_path / 'forests.bin'
    assert cli('sample-forest', '--n', 8, '--m', 3, '--count', 2, '--seed', 1, '--out', text)[0] == EXIT_OK
    first = text.read_text()
    assert cli('sample-forest', '--n', 8, '--m', 3, '--count', 2, '--seed', 1, '--out', text)[0] == EXIT_OK
    assert text.read_text() == first
    assert first.count('# forest N=8 edges=3') == 2

    assert cli('sample-forest', '--n', 8, '--m', 3, '--count', 2, '--seed', 1, '--format', 'binary',
               '--out', binary)[0] == EXIT_OK
    outputs = []
    for path in (text, binary):
        code, out = cli('explore', '--in', path)
        assert code == EXIT_OK
        _, rows = csv_rows(out)
        assert len(rows) == 2 * 9
        assert rows[0]['Z'] == '0' and rows[8]['Z'] == '0'
        outputs.append([row['Z'] for row in rows])
    assert outputs[0] == outputs[1]


def test_binary_needs_out(cli):
    code, out = cli('sample-forest', '--n', 8, '--m', 3, '--format', 'binary')
    assert code == EXIT_INVALID
    assert json.loads(out)['error'] == 'ConfigError'


def test_compare(cli, tmp_path):
    left, right = tmp_path / 'left.json', tmp_path / 'right.json'
    left.write_text(json.dumps({'replicas': [[0.5, 0.2], [0.9], [0.3, 0.3]]}))
    right.write_text(json.dumps({'replicas': [[1.5], [2.0, 0.1], [1.8]]}))
    code, out = cli('compare', '--left', left, '--right', left, '--gate', 0.1)
    assert code == EXIT_OK
    assert json.loads(out)['records'][0]['statistic'] == 0.0
    code, out = cli('compare', '--left', left, '--right', right, '--gate', 0.1, '--rank', 1)
    assert code == EXIT_GATES_FAILED
    assert json.loads(out)['records'][0]['statistic'] == 1.0
    code, out = cli('compare', '--left', left, '--right', right, '--stat', 'spectrum')
    assert [record['name'] for record in json.loads(out)['records']] == ['spectrum_rank_1', 'spectrum_rank_2']


def test_compare_rejects_documents_without_replicas(cli, tmp_path):
    path = tmp_path / 'empty.json'
    path.write_text('{}')
    code, out = cli('compare', '--left', path, '--right', path)
    assert code == EXIT_INVALID
    assert json.loads(out)['error'] == 'ValidationError'


def test_domination_search(cli, tmp_path):
    out_path = tmp_path / 'report.json'
    assert cli('domination-search', '--n', 4, '--p', 0.1, '--q', 0.5, '--out', out_path) == (EXIT_OK, '')
    report = json.loads(out_path.read_text())
    assert report['events'] == 40
    assert 'config_hash' in report['manifest']
    code, out = cli('domination-search', '--n', 9, '--p', 0.1, '--q', 0.5)
    assert code == EXIT_INVALID
    assert json.loads(out)['error'] == 'DomainError'


def test_simulate_diffusion(cli, tmp_path):
    paths = tmp_path / 'paths.bin'
    code, out = cli('simulate-diffusion', '--T', 1, '--dt', 0.01, '--replicas', 2, '--kind', 'B', '--seed', 3,
                    '--paths-out', paths)
    assert code == EXIT_OK
    document = json.loads(out)
    assert len(document['replicas']) == 2
    assert document['kind'] == 'B'
    assert paths.stat().st_size > 2 * 101 * 8


def test_settings_overrides(cli):
    assert cli('--set', 'G_ABS_TOL=1e-9', '--threads', 2, 'oracle', '--n', 3)[0] == EXIT_OK
    assert settings.G_ABS_TOL == 1e-9
    assert settings.THREADS == 2
    code, out = cli('--set', 'NOT_A_SETTING=1', 'oracle', '--n', 3)
    assert code == EXIT_INVALID
    assert 'NOT_A_SETTING' in json.loads(out)['message']


def test_config_file(cli, tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'N': [3], 'm': 2}))
    code, out = cli('--config', path, 'oracle', '--m', 1)
    assert code == EXIT_OK
    _, rows = csv_rows(out)
    assert rows[0]['m'] == '1'
    path.write_text(json.dumps({'N': [3], 'colour': 'red'}))
    assert cli('--config', path, 'oracle')[0] == EXIT_INVALID
    assert cli('--config', tmp_path / 'missing.json', 'oracle')[0] == EXIT_INVALID


def test_main_exits_with_code(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(['oracle', '--n', '5', '--m', '4'])
    assert exit_info.value.code == EXIT_OK
    _, rows = csv_rows(capsys.readouterr().out)
    assert float(rows[0]['exact_log_count']) == approx(3 * math.log(5))


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_sources({}, {'command': 'sample-forest', 'N': 5, 'm': 2, 'p': 0.1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_sources({}, {'command': 'simulate-diffusion', 'T': -1.0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_sources({}, {'command': None})
    config = ExperimentConfig.from_sources({'overrides': ['A=1']}, {'command': 'oracle', 'N': 5, 'overrides': ['B=2'],
                                                                   'out': 'x.csv'})
    assert config.N == [5]
    assert config.overrides == ['A=1', 'B=2']
    assert 'out' not in config.to_dict() and 'overrides' not in config.to_dict()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_sources({}, {'command': 'oracle', 'N': [3, 4]}).single_N
