"""Tests for the heightlab command line."""

import json
import os

import pytest

from cli import app
from cli.app import _protect_negative_fractions, main, run_subcommand
from config.lab_config import parse_config
from core.errors import RootFindingError


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 else None)


def test_negative_fractions_are_values():
    assert _protect_negative_fractions(['height', '--t', '-4/3', '--sign', '-']) == \
        ['height', '--t', '−4/3', '--sign', '-']
    assert _protect_negative_fractions(['pcf-scan', '--t', '0', '-2', '1/2']) == \
        ['pcf-scan', '--t', '0', '-2', '1/2']


def test_pcf_scan_with_negative_values(capsys, tmp_path):
    code, report = _run(capsys, ['pcf-scan', '--t', '0', '-4/3', '-2', '--cache-dir', str(tmp_path)])
    assert code == 0
    assert [row['t'] for row in report['results']] == ['0', '-4/3', '-2']
    assert report['results'][0]['status'] == 'PCF'


def test_fn(capsys, tmp_path, fresh_store):
    code, report = _run(capsys, ['fn', '--n', '2', '--resultant', '--cache-dir', str(tmp_path)])
    assert code == 0
    assert report['A'] == '4*t1*t2 + 8*t2^2'
    assert report['B'] == '3*t1^2 + 8*t1*t2 + 8*t2^2'
    assert report['degrees'] == [1, 2]
    assert report['resultant'] == '192'
    assert os.path.exists(report['cache']['file'])


def test_depth_cap_is_a_usage_error(capsys, tmp_path):
    assert main(['fn', '--n', '2', '--n-max', '12', '--cache-dir', str(tmp_path)]) == 1
    assert 'n_max' in capsys.readouterr().err


def test_unknown_command():
    assert main(['bogus']) == 1


def test_height_on_period_two_parameter(capsys, tmp_path):
    code, report = _run(capsys, ['height', '--t', '-4/3', '--n-max', '4', '--P', '30',
                                 '--cache-dir', str(tmp_path)])
    assert code == 0
    assert report['t'] == '-4/3'
    assert abs(report['quasi_adelic_full']['value']) <= 1e-9
    assert report['callsilverman_direct']['value'] == 0.0
    assert report['orbit']['period'] == 2


def test_gamma(capsys, tmp_path):
    code, report = _run(capsys, ['gamma', '--P', '7', '--n-max', '4', '--cache-dir', str(tmp_path)])
    assert code == 0
    assert [row['place'] for row in report['gamma']] == ['inf', '2', '3', '5', '7']
    assert len(report['witnesses']) == 4
    assert report['config']['P'] == 7


def test_equidist_is_deterministic(capsys, tmp_path):
    csv = str(tmp_path / 'cloud.csv')
    argv = ['equidist', '--n', '3', '--csv', csv, '--bins', '1,2', '--cache-dir', str(tmp_path)]
    code, first = _run(capsys, argv)
    with open(csv, 'rb') as f:
        first_bytes = f.read()
    assert code == 0
    code, second = _run(capsys, argv)
    with open(csv, 'rb') as f:
        assert f.read() == first_bytes
    assert first == second
    assert first['csv'] == csv
    assert sum(row['mass'] for row in first['annuli']) == pytest.approx(1.0)


def test_out_file(capsys, tmp_path):
    out = str(tmp_path / 'reports' / 'capacity.json')
    assert main(['capacity', '--place', '3', '--n-max', '2', '--out', out,
                 '--cache-dir', str(tmp_path)]) == 0
    assert capsys.readouterr().out == ''
    with open(out) as f:
        report = json.load(f)
    assert report['place'] == '3'
    assert report['capacities'][1] == pytest.approx(3 ** 0.25)


def test_run_subcommand_unknown():
    assert run_subcommand('nothing', parse_config()) == 1


def test_root_failure_exit_code(monkeypatch, tmp_path):
    def fail(*args, **kwargs):
        raise RootFindingError("no convergence", [0j])

    monkeypatch.setattr(app, 'build_Sn', fail)
    config = parse_config(overrides={'cache_dir': str(tmp_path)})
    assert run_subcommand('equidist', config, {'n': 2}) == 2
