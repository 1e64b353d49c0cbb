"""
Tests for the command-line interface.
"""

import json

import pytest
import yaml
from click.testing import CliRunner

from sme_manifolds.cli import cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yml"
    path.write_text(yaml.safe_dump({
        'scenario': 'qutrit-qnd',
        'params': {'variant': 'single'},
        'T': 0.01,
        'dt': 0.001,
        'n_traj': 2,
        'seed': 4,
        'output_directory': str(tmp_path / "out"),
    }))
    return path


class TestInitConfig:

    @pytest.mark.parametrize("fmt,name", [("yaml", "config.yml"), ("json", "config.json")])
    def test_writes_template(self, runner, tmp_path, fmt, name):
        path = tmp_path / name
        result = runner.invoke(cli, ['init-config', '-o', str(path), '-f', fmt], obj={})
        assert result.exit_code == 0
        assert path.exists()
        if fmt == 'json':
            assert 'runs' in json.loads(path.read_text())


class TestSimulate:

    def test_overrides(self, runner, config_file, tmp_path):
        out = tmp_path / "override"
        result = runner.invoke(cli, ['simulate', '-c', str(config_file), '--traj', '3', '--dt', '0.0005',
                                     '--out', str(out), '--no-progress'], obj={})
        assert result.exit_code == 0, result.output
        summary = json.loads((out / "qutrit-qnd_summary.json").read_text())
        assert summary['n_traj'] == 3
        assert summary['dt'] == 0.0005

    def test_invalid_override_exits_1(self, runner, config_file):
        result = runner.invoke(cli, ['simulate', '-c', str(config_file), '--dt', '0.003'], obj={})
        assert result.exit_code == 1

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(cli, ['simulate', '-c', str(tmp_path / "absent.yml")], obj={})
        assert result.exit_code == 2


class TestRankAndChecks:

    def test_rank(self, runner, config_file):
        result = runner.invoke(cli, ['rank', '-c', str(config_file)], obj={})
        assert result.exit_code == 0, result.output
        assert 'M = 1' in result.output

    def test_inapplicable_check_exits_1(self, runner, config_file):
        result = runner.invoke(cli, ['emission-check', '-c', str(config_file)], obj={})
        assert result.exit_code == 1

    def test_failing_check_exits_1(self, runner, tmp_path):
        path = tmp_path / "emission.yml"
        path.write_text(yaml.safe_dump({
            'scenario': 'emission', 'T': 0.02, 'dt': 0.0001, 'seed': 1,
            'output_directory': str(tmp_path / "out"),
            'check': {'n_seeds': 2, 'tolerances': {'closed_form': 0.0}},
        }))
        result = runner.invoke(cli, ['emission-check', '-c', str(path)], obj={})
        assert result.exit_code == 1
        assert 'closed_form' in result.output


class TestFigures:

    def test_unknown_panel_exits_1(self, runner, tmp_path):
        result = runner.invoke(cli, ['figures', '--out', str(tmp_path), '--panel', 'fig9'], obj={})
        assert result.exit_code == 1
