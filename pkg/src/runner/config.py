"""
Настройки запуска

INI files read with configparser. Sections: [run], [problem], [caps],
[nonlinearity], [grid], [schedule], [solver], [scan], [decay]. Every
missing option falls back to the defaults in src.config.
"""
import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

from src.config import (KG_CONFIG, RUNNER_CONFIG, SCHEDULE_CONFIG, SERIES_CONFIG, SOLVER_CONFIG,
                        SPECTRUM_CONFIG)
from src.errors import ConfigError, InvalidParameterError
from src.kleingordon.nonlinearity import Nonlinearity

MODES = ('spectrum', 'scan', 'homological', 'kam', 'decay')

SECTIONS = {
    'run': ('mode', 'seed', 'threads', 'steps', 'out'),
    'problem': ('d', 'm', 'delta', 'eps', 'W_max', 'admissible'),
    'caps': ('K_max', 'D_r', 'D_zeta', 'D_w'),
    'grid': ('samples_per_axis',),
    'schedule': ('sigma0', 'mu0', 'kappa0', 'n_max', 'M', 'gate', 'smallness'),
    'solver': ('kappa', 'N', 'sigma_prime'),
    'scan': ('kappas', 'N'),
    'decay': ('W_values', 's', 'theta'),
}


@dataclass
class RunConfig:
    mode: str
    seed: int = RUNNER_CONFIG['seed']
    threads: int = RUNNER_CONFIG['threads']
    steps: int = RUNNER_CONFIG['steps']
    out: str = RUNNER_CONFIG['out']
    problem: Dict = field(default_factory=dict)
    nonlinearity: Dict[str, str] = field(default_factory=dict)
    schedule: Dict = field(default_factory=dict)
    solver: Dict = field(default_factory=dict)
    scan: Dict = field(default_factory=dict)
    decay: Dict = field(default_factory=dict)
    source: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.threads < 1 or self.steps < 0:
            raise ConfigError("threads must be >= 1 and steps >= 0")

    def problem_settings(self) -> dict:
        """Keyword dict for kleingordon.problem.build_problem."""
        settings = dict(self.problem)
        settings['nonlinearity'] = Nonlinearity.parse(self.nonlinearity)
        if 'gate' in self.schedule:
            settings['gate'] = self.schedule['gate']
        return settings

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop('source')
        return data

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(',') if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(',') if x.strip()]


def _admissible(text: str) -> list:
    triples = []
    for item in filter(None, (part.strip() for part in text.split(','))):
        j, ell, I = item.split(':')
        triples.append((int(j), int(ell), float(I)))
    return triples


PARSERS: Dict[str, Callable[[str], object]] = {
    'seed': int, 'threads': int, 'steps': int, 'out': str, 'mode': str,
    'd': int, 'm': float, 'delta': float, 'eps': float, 'W_max': int,
    'admissible': _admissible,
    'K_max': int, 'D_r': int, 'D_zeta': int, 'D_w': int,
    'samples_per_axis': int,
    'sigma0': float, 'mu0': float, 'kappa0': float, 'n_max': int, 'M': float,
    'gate': str, 'smallness': str,
    'kappa': float, 'N': int, 'sigma_prime': float,
    'kappas': _floats, 'W_values': _ints, 's': float, 'theta': _floats,
}


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, text in parser[name].items():
        if key not in SECTIONS[name]:
            raise ConfigError(f"[{name}] has unknown option {key!r}")
        try:
            out[key] = PARSERS[key](text.strip())
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key} = {text!r}: {exc}")
    return out


def load_config(path: Optional[str] = None, mode: Optional[str] = None, **overrides) -> RunConfig:
    """
    Чтение INI-файла и наложение параметров командной строки.

    overrides may hold seed, threads, steps and out; None values are ignored.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} not found")
        try:
            parser.read(path, encoding='utf-8')
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}")
    for name in parser.sections():
        if name not in SECTIONS and name != 'nonlinearity':
            raise ConfigError(f"unknown section [{name}]")
    run = _section(parser, 'run')
    run.update({k: v for k, v in overrides.items() if v is not None})
    if mode is not None:
        run['mode'] = mode
    if 'mode' not in run:
        raise ConfigError("run mode missing: give a subcommand or [run] mode")
    problem = _section(parser, 'problem')
    caps = _section(parser, 'caps')
    if caps:
        problem['caps'] = caps
    problem.update(_section(parser, 'grid'))
    nonlinearity = dict(parser['nonlinearity']) if parser.has_section('nonlinearity') else {}
    schedule = _section(parser, 'schedule')
    for key, allowed in (('gate', ('enforce', 'report')), ('smallness', ('abort', 'exclude', 'report'))):
        if key in schedule and schedule[key] not in allowed:
            raise ConfigError(f"[schedule] {key} must be one of {allowed}")
    try:
        Nonlinearity.parse(nonlinearity)
        return RunConfig(problem=problem, nonlinearity=nonlinearity, schedule=schedule,
                         solver=_section(parser, 'solver'), scan=_section(parser, 'scan'),
                         decay=_section(parser, 'decay'), source=path, **run)
    except (TypeError, InvalidParameterError) as exc:
        raise ConfigError(str(exc))


def defaults() -> dict:
    """Effective defaults, recorded in the manifest next to the run settings."""
    return {'spectrum': SPECTRUM_CONFIG, 'series': SERIES_CONFIG, 'solver': SOLVER_CONFIG,
            'schedule': SCHEDULE_CONFIG, 'kg': KG_CONFIG}
