import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from mgdispatch.cli import DISPATCH_UNITS, main
from mgdispatch.scenarios import load_profiles_csv

SMALL = {'periods': 12,
         'scenarios': {'count': 2},
         'training': {'iterations': 3, 'scenarios': 2},
         'mpc': {'horizon': 3}}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.yaml'
    path.write_text(yaml.safe_dump(SMALL))
    return path


def _run(config, out, *args):
    return main([*args, '--config', str(config), '--out', str(out)])


def _rows(path):
    with open(path, newline='') as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope='module')
def trained(tmp_path_factory):
    base = tmp_path_factory.mktemp('cli')
    cfg = base / 'small.yaml'
    cfg.write_text(yaml.safe_dump(SMALL))
    out = base / 'run'
    assert _run(cfg, out, 'train') == 0
    return cfg, out


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(['train', '--config', str(tmp_path / 'nope.yaml'), '--out', str(tmp_path)]) == 2
    assert 'not found' in capsys.readouterr().err


def test_invalid_field_exit_code(tmp_path, capsys):
    path = tmp_path / 'bad.yaml'
    path.write_text('storage:\n  soc_min: banana\n')
    assert main(['train', '--config', str(path), '--out', str(tmp_path)]) == 2
    assert 'storage.soc_min' in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, capsys):
    path = tmp_path / 'bad.yaml'
    doc = dict(SMALL, initial={'fc_power': 30.0})
    path.write_text(yaml.safe_dump(doc))
    assert main(['evaluate', '--policy', 'myopic', '--config', str(path),
                 '--out', str(tmp_path)]) == 3
    assert 'solver failure' in capsys.readouterr().err


def test_adp_needs_vfa(small_config, tmp_path, capsys):
    assert _run(small_config, tmp_path / 'o', 'evaluate', '--policy', 'adp') == 2
    assert 'vfa.json' in capsys.readouterr().err


def test_myopic_runs_without_vfa(small_config, tmp_path):
    assert _run(small_config, tmp_path / 'o', 'evaluate', '--policy', 'myopic') == 0
    assert not (tmp_path / 'o' / 'vfa.json').exists()


def test_train_outputs(trained):
    cfg, out = trained
    rows = _rows(out / 'convergence.csv')
    assert len(rows) == 3
    assert [int(r['iteration']) for r in rows] == [1, 2, 3]
    vfa = json.loads((out / 'vfa.json').read_text())
    assert len(vfa['periods']) == 12
    manifest = json.loads((out / 'manifest_train.json').read_text())
    assert manifest['command'] == 'train'
    assert set(manifest) == {'config', 'command', 'seed', 'out', 'build', 'timings'}


def test_train_is_byte_deterministic(trained, tmp_path):
    cfg, out = trained
    again = tmp_path / 'again'
    assert _run(cfg, again, 'train') == 0
    for name in ('vfa.json', 'convergence.csv', 'training_scenarios.json'):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_seed_flag_changes_training(trained, tmp_path):
    cfg, out = trained
    other = tmp_path / 'other'
    assert main(['train', '--config', str(cfg), '--out', str(other), '--seed', '11']) == 0
    assert (other / 'vfa.json').read_bytes() != (out / 'vfa.json').read_bytes()


@pytest.mark.parametrize('policy', ['adp', 'myopic', 'mpc', 'milp', 'milp-static'])
def test_evaluate_schema_and_aggregation(trained, policy):
    cfg, out = trained
    assert _run(cfg, out, 'evaluate', '--policy', policy) == 0
    summary = json.loads((out / f'summary_{policy}.json').read_text())
    totals = _rows(out / policy / 'totals.csv')
    assert len(totals) == 2
    assert summary['mean_cost'] == pytest.approx(np.mean([float(r['total_cost'])
                                                         for r in totals]), rel=1e-9)
    for r in totals:
        i = int(r['scenario'])
        rows = _rows(out / policy / f'dispatch_{i:03d}.csv')
        assert list(rows[0]) == ['period', 'unit', 'value']
        assert [r2['unit'] for r2 in rows[:len(DISPATCH_UNITS)]] == list(DISPATCH_UNITS)
        assert len(rows) == 12 * len(DISPATCH_UNITS)
        stage = sum(float(x['value']) for x in rows if x['unit'] == 'stage_cost')
        assert stage == pytest.approx(float(r['total_cost']), rel=1e-8)
        heat = _rows(out / policy / f'heat_{i:03d}.csv')
        assert list(heat[0]) == ['period', 'sample', 'heat_mw']
        assert len(heat) == 12 * 18
    if policy == 'milp-static':
        assert summary['violations'] > 0
    else:
        assert summary['violations'] == 0


def test_evaluate_is_byte_deterministic(trained, tmp_path):
    cfg, out = trained
    assert _run(cfg, out, 'evaluate', '--policy', 'adp') == 0
    second = tmp_path / 'second'
    second.mkdir()
    (second / 'vfa.json').write_bytes((out / 'vfa.json').read_bytes())
    assert _run(cfg, second, 'evaluate', '--policy', 'adp') == 0
    for name in ('summary_adp.json', 'adp/totals.csv', 'adp/dispatch_001.csv', 'adp/heat_000.csv'):
        assert (second / name).read_bytes() == (out / name).read_bytes()


def test_compare_table(trained, capsys):
    cfg, out = trained
    assert _run(cfg, out, 'compare') == 0
    rows = {r['policy']: r for r in _rows(out / 'compare.csv')}
    assert set(rows) == {'milp', 'adp', 'mpc', 'myopic'}
    costs = {k: float(r['mean_cost']) for k, r in rows.items()}
    assert costs['milp'] == min(costs.values())
    for k, r in rows.items():
        pct = 100 * (costs['myopic'] - costs[k]) / costs['myopic']
        assert float(r['saving_vs_myopic_pct']) == pytest.approx(pct, abs=1e-6)
        assert float(r['runtime_s']) > 0
    assert 'vs myopic' in capsys.readouterr().out


def test_gen_profiles(small_config, tmp_path):
    out = tmp_path / 'p'
    assert _run(small_config, out, 'gen-profiles') == 0
    assert len(load_profiles_csv(out / 'profiles.csv')) == 12
    assert len(_rows(out / 'scenarios.csv')) == 2 * 12


def test_profiles_file_round_trip(small_config, tmp_path):
    out = tmp_path / 'p'
    assert _run(small_config, out, 'gen-profiles') == 0
    cfg = tmp_path / 'with_profiles.yaml'
    cfg.write_text(yaml.safe_dump(dict(SMALL, scenarios={'count': 2,
                                                         'profiles': 'p/profiles.csv'})))
    assert _run(cfg, tmp_path / 'q', 'gen-profiles') == 0
    assert (tmp_path / 'q' / 'scenarios.csv').read_bytes() == \
        (out / 'scenarios.csv').read_bytes()


def test_console_module_entry(tmp_path):
    res = subprocess.run([sys.executable, '-m', 'mgdispatch.cli', 'train', '--config',
                          str(tmp_path / 'absent.yaml')], capture_output=True, text=True)
    assert res.returncode == 2


def test_jobs_flag_is_byte_identical(small_config, tmp_path):
    serial, pooled = tmp_path / 's', tmp_path / 'p'
    assert _run(small_config, serial, 'evaluate', '--policy', 'myopic') == 0
    assert _run(small_config, pooled, 'evaluate', '--policy', 'myopic', '--jobs', '2') == 0
    for name in ('summary_myopic.json', 'myopic/totals.csv', 'myopic/dispatch_001.csv'):
        assert (pooled / name).read_bytes() == (serial / name).read_bytes()
