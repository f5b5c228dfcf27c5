"""
Сохранение результатов

JSON reports with sorted keys, CSV series with a fixed float format, and
the run manifest (config hash, package versions, stage log).
"""
import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from importlib import metadata
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from src.config import RUNNER_CONFIG

logger = logging.getLogger(__name__)

PACKAGES = ('numpy', 'scipy', 'networkx')


class StageLog:
    """Begin/end records of pipeline stages with elapsed seconds."""

    def __init__(self):
        self._start = time.perf_counter()
        self._opened: Dict[str, float] = {}
        self.records: List[dict] = []

    def begin(self, stage: str):
        self._opened[stage] = time.perf_counter()
        self._append(stage, 'begin')
        logger.info("stage %s: begin", stage)

    def end(self, stage: str, extra: Optional[Mapping] = None):
        took = time.perf_counter() - self._opened.pop(stage, self._start)
        self._append(stage, 'end', {'seconds': took, **(extra or {})})
        logger.info("stage %s: end (%.2f s)", stage, took)

    def _append(self, stage: str, status: str, extra: Optional[Mapping] = None):
        record = {'stage': stage, 'status': status, 'elapsed': time.perf_counter() - self._start}
        if extra:
            record['extra'] = dict(extra)
        self.records.append(record)


def jsonable(value):
    """numpy scalars and arrays to plain JSON values; non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(path: str, payload) -> str:
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(jsonable(payload), f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write('\n')
    return path


def _cell(value, float_format: str) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return float_format % float(value)
    if value is None:
        return ''
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence],
              float_format: str = None) -> str:
    float_format = RUNNER_CONFIG['float_format'] if float_format is None else float_format
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v, float_format) for v in row])
    return path


def package_versions() -> Dict[str, Optional[str]]:
    versions = {}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


@dataclass
class RunArtifact:
    out: str
    manifest: str = ''
    reports: Dict[str, str] = field(default_factory=dict)
    series: Dict[str, str] = field(default_factory=dict)
    exit_code: int = 0

    def report(self, name: str, payload) -> str:
        self.reports[name] = write_json(os.path.join(self.out, f"{name}.json"), payload)
        return self.reports[name]

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        self.series[name] = write_csv(os.path.join(self.out, f"{name}.csv"), header, rows)
        return self.series[name]

    def write_manifest(self, config, stages: StageLog, defaults: dict, status: dict) -> str:
        payload = {
            'mode': config.mode,
            'config': config.to_dict(),
            'config_sha256': config.digest(),
            'config_file': config.source,
            'defaults': defaults,
            'seed': config.seed,
            'versions': package_versions(),
            'stages': stages.records,
            'reports': {k: os.path.basename(v) for k, v in self.reports.items()},
            'series': {k: os.path.basename(v) for k, v in self.series.items()},
            'status': status,
        }
        self.manifest = write_json(os.path.join(self.out, 'manifest.json'), payload)
        return self.manifest
