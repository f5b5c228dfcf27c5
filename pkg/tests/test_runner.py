"""Tests for run settings, persistence and the command line."""
import csv
import json
import math
import os

import numpy as np
import pytest

from src.errors import ConfigError
from src.runner.cli import EXIT_CONFIG, EXIT_OK, main
from src.runner.config import RunConfig, load_config
from src.runner.persist import jsonable, write_csv

SPECTRUM_INI = """
[run]
mode = spectrum

[problem]
m = 1.0
delta = 0.1
W_max = 3
admissible = 1:1:1.5
"""

KAM_INI = """
[run]
seed = 0
steps = 1

[problem]
eps = 1e-5
W_max = 2
admissible = 1:1:1.5

[caps]
K_max = 2
D_r = 1
D_zeta = 2

[grid]
samples_per_axis = 2

[schedule]
gate = report
kappa0 = 1e-3
n_max = 2
"""

HOMOLOGICAL_INI = """
[problem]
eps = 1e-5
W_max = 2
admissible = 1:1:1.5

[caps]
K_max = 2
D_r = 1

[grid]
samples_per_axis = 2

[nonlinearity]
4 = const:1.0

[solver]
kappa = 1e-6
N = 2
"""

DECAY_INI = """
[problem]
W_max = 4
admissible = 1:1:1.5

[nonlinearity]
3 = const:1.0

[decay]
s = 2.0
theta = 0.2
W_values = 2, 3
"""


@pytest.fixture
def write_ini(tmp_path):
    """Writes an INI text into the temporary directory and returns its path."""
    def write(text, name='run.ini'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return write


def read_csv(path):
    with open(path, encoding='utf-8') as f:
        return list(csv.DictReader(f))


def test_load_config_parses_sections(write_ini):
    config = load_config(write_ini(KAM_INI), mode='kam', steps=2, seed=None)
    assert config.mode == 'kam'
    assert config.steps == 2 and config.seed == 0
    assert config.problem['admissible'] == [(1, 1, 1.5)]
    assert config.problem['caps'] == {'K_max': 2, 'D_r': 1, 'D_zeta': 2}
    assert config.problem['samples_per_axis'] == 2
    assert config.schedule == {'gate': 'report', 'kappa0': 1e-3, 'n_max': 2}
    assert config.problem_settings()['gate'] == 'report'


@pytest.mark.parametrize('text', [
    "[run]\nmode = kam\n[extra]\nx = 1\n",
    "[run]\nmode = kam\n[problem]\ncolour = red\n",
    "[run]\nmode = kam\n[problem]\nW_max = many\n",
    "[run]\nmode = kam\n[schedule]\ngate = maybe\n",
    "[run]\nmode = nothing\n",
    "[problem]\nm = 1.0\n",
    "[run]\nmode = kam\n[nonlinearity]\n1 = const:1.0\n",
])
def test_bad_config_is_rejected(write_ini, text):
    with pytest.raises(ConfigError):
        load_config(write_ini(text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'absent.ini'), mode='kam')
    out = tmp_path / 'out'
    assert main(['kam', '--config', str(tmp_path / 'absent.ini'), '--out', str(out)]) == EXIT_CONFIG
    with open(out / 'error.json', encoding='utf-8') as f:
        assert json.load(f)['mode'] == 'kam'


def test_digest_is_stable():
    a = RunConfig('kam', problem={'eps': 1e-5, 'W_max': 2})
    b = RunConfig('kam', problem={'W_max': 2, 'eps': 1e-5}, source='elsewhere.ini')
    assert a.digest() == b.digest()
    assert a.digest() != RunConfig('kam', seed=1, problem={'eps': 1e-5, 'W_max': 2}).digest()


def test_jsonable_values():
    payload = {'a': np.float64(0.5), 'b': np.arange(2), 'c': float('inf'), 'd': 1 + 2j,
               'e': np.bool_(True), 1: (np.int64(3),)}
    assert jsonable(payload) == {'a': 0.5, 'b': [0, 1], 'c': None, 'd': [1.0, 2.0], 'e': True,
                                 '1': [3]}


def test_csv_float_format(tmp_path):
    path = write_csv(str(tmp_path / 'series.csv'), ['x', 'flag', 'empty'], [[0.1, True, None]])
    with open(path, encoding='utf-8') as f:
        assert f.read() == 'x,flag,empty\n0.10000000000000001,True,\n'


def test_spectrum_run_is_deterministic(write_ini, tmp_path):
    path = write_ini(SPECTRUM_INI)
    first, second = tmp_path / 'a', tmp_path / 'b'
    assert main(['spectrum', '--config', path, '--out', str(first)]) == EXIT_OK
    assert main(['spectrum', '--config', path, '--out', str(second)]) == EXIT_OK
    assert (first / 'spectrum.csv').read_bytes() == (second / 'spectrum.csv').read_bytes()
    rows = read_csv(first / 'spectrum.csv')
    assert len(rows) == 2 + 5 + 7
    lam = {(int(r['j']), int(r['ell'])): float(r['lambda']) for r in rows}
    assert lam[(1, 2)] == pytest.approx(math.sqrt(3))
    assert lam[(2, 1)] == pytest.approx(math.sqrt(7))
    assert lam[(3, 1)] == pytest.approx(math.sqrt(13))
    with open(first / 'manifest.json', encoding='utf-8') as f:
        manifest = json.load(f)
    with open(second / 'manifest.json', encoding='utf-8') as f:
        assert json.load(f)['config_sha256'] == manifest['config_sha256']
    assert manifest['status']['accepted']
    assert manifest['reports'] == {'spectrum': 'spectrum.json'}


def test_kam_run_without_nonlinearity(write_ini, tmp_path):
    out = tmp_path / 'kam'
    assert main(['kam', '--config', write_ini(KAM_INI), '--out', str(out)]) == EXIT_OK
    steps = read_csv(out / 'kam_steps.csv')
    assert len(steps) == 1
    assert float(steps[0]['eps_measured']) == 0.0
    assert steps[0]['status'] == 'accepted'
    with open(out / 'kam.json', encoding='utf-8') as f:
        report = json.load(f)
    assert report['eps0'] == pytest.approx(1e-5)
    assert report['limits']['stability']
    assert len(read_csv(out / 'kam_limits.csv')) == 2
    assert os.path.isfile(out / 'manifest.json')


def test_homological_run_reports_family_norms(write_ini, tmp_path):
    out = tmp_path / 'homological'
    assert main(['homological', '--config', write_ini(HOMOLOGICAL_INI), '--out', str(out)]) == EXIT_OK
    with open(out / 'homological.json', encoding='utf-8') as f:
        report = json.load(f)
    assert report['residual']['relative'] < 1e-10
    family = report['family_norms']
    assert family['S']['value'] >= family['S']['c0'] > 0
    assert family['R']['value'] == 0.0
    rows = {r['quantity']: float(r['value']) for r in read_csv(out / 'homological_norms.csv')}
    assert rows['S_family'] == pytest.approx(family['S']['value'])


def test_decay_run(write_ini, tmp_path):
    out = tmp_path / 'decay'
    assert main(['decay', '--config', write_ini(DECAY_INI), '--out', str(out)]) == EXIT_OK
    with open(out / 'decay.json', encoding='utf-8') as f:
        report = json.load(f)
    assert report['decay']['banded']
    assert report['gradient']['stable']
    assert os.path.isfile(out / 'hessian_blocks.csv')


def test_kam_gate_failure_exits_with_config_code(write_ini, tmp_path):
    text = KAM_INI.replace('gate = report', 'gate = enforce')
    out = tmp_path / 'gate'
    assert main(['kam', '--config', write_ini(text), '--out', str(out)]) == EXIT_CONFIG
    with open(out / 'manifest.json', encoding='utf-8') as f:
        assert 'ScheduleGateError' in json.load(f)['status']['error']
    assert os.path.isfile(out / 'error.json')
