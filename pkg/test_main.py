import json
import sys

import pytest

from config import CONFIG
from main import build_parser, main, parse_alphas

QUADRATURE = {'inner_panels': 16, 'outer_panels_per_unit': 32, 'max_outer_panels': 1024}


@pytest.fixture(autouse=True)
def quiet_cli(monkeypatch):
    monkeypatch.setattr(CONFIG, 'LOG_FILE', '')
    monkeypatch.setattr(sys, 'excepthook', sys.excepthook)


def write_case(tmp_path, name, source):
    raw = {'a': 1.0, 'L': 3, 'grid': {'nx': 48, 'ny': 4}, 'n_range': [-4, 4], 'quadrature': QUADRATURE,
           'check_convergence': False, 'output': {'dir': 'out'}}
    raw.update(source)
    path = tmp_path / f'{name}.json'
    path.write_text(json.dumps(raw), encoding='utf-8')
    return str(path)


def box_case(tmp_path):
    return write_case(tmp_path, 'box', {'potential': {'catalog': 'box', 'lambda': 10.0, 'x1': [0.0, 1.0]}})


def curve_case(tmp_path):
    curve = {'vertices': [[-2.0, 0.2], [0.0, 0.2], [0.0, 0.8], [2.0, 0.8]], 'density': 5.0}
    return write_case(tmp_path, 'step', {'curve': curve})


class TestParser:
    def test_parse_alphas(self):
        assert parse_alphas('1, 2,4.5') == [1.0, 2.0, 4.5]

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_bad_alphas(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['scan', '--config', 'x.json', '--alphas', 'one,two'])


class TestCommands:
    def test_compute_writes_report(self, tmp_path, capsys):
        assert main(['compute', '--config', box_case(tmp_path)]) == 0
        assert (tmp_path / 'out' / 'box.json').exists()
        assert 'inequality rows hold' in capsys.readouterr().out

    def test_compute_csv_to_override_dir(self, tmp_path):
        target = tmp_path / 'elsewhere'
        assert main(['compute', '--config', box_case(tmp_path), '--format', 'csv', '--out', str(target)]) == 0
        assert (target / 'box.csv').exists()

    def test_scan(self, tmp_path, capsys):
        assert main(['scan', '--config', box_case(tmp_path), '--alphas', '1,2,4']) == 0
        assert 'counts nondecreasing' in capsys.readouterr().out

    def test_scan_rejects_decreasing(self, tmp_path):
        assert main(['scan', '--config', box_case(tmp_path), '--alphas', '4,1']) == 2

    def test_certify(self, tmp_path, capsys):
        assert main(['certify', '--config', box_case(tmp_path)]) == 0
        assert 'certified lower bound' in capsys.readouterr().out

    def test_certify_needs_a_volume_potential(self, tmp_path):
        assert main(['certify', '--config', curve_case(tmp_path)]) == 2

    def test_missing_case_file(self, tmp_path):
        assert main(['compute', '--config', str(tmp_path / 'absent.json')]) == 2

    def test_oracle(self):
        assert main(['oracle', '--suite', 'inertia', '--cases', '3']) == 0
