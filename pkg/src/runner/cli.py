"""
Командная строка

    python -m src.main {spectrum|scan|homological|kam|decay} --config run.ini
        [--out DIR] [--seed N] [--threads N] [--steps K]

Exit codes: 0 success, 2 acceptance failure, 3 configuration error.
"""
import argparse
import logging
import os
from typing import List, Optional

from src.errors import (ConfigError, InvalidParameterError, KamError, QuadratureError,
                        ScheduleGateError, TruncationError)
from src.runner.config import MODES, RunConfig, defaults, load_config
from src.runner.persist import RunArtifact, StageLog, write_json
from src.runner.pipelines import PIPELINES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ACCEPTANCE = 2
EXIT_CONFIG = 3

CONFIG_ERRORS = (ConfigError, InvalidParameterError, ScheduleGateError, TruncationError,
                 QuadratureError)


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog='kam-sphere',
        description='Finite-truncation KAM iteration for Klein-Gordon on the 2-sphere.',
    )
    parser.add_argument('mode', choices=MODES)
    parser.add_argument('--config', dest='config_path', default=None)
    parser.add_argument('--out', dest='out', default=None)
    parser.add_argument('--seed', dest='seed', type=int, default=None)
    parser.add_argument('--threads', dest='threads', type=int, default=None)
    parser.add_argument('--steps', dest='steps', type=int, default=None)
    parser.add_argument('--log-level', dest='log_level', default='INFO')
    return parser.parse_args(argv)


def run(config: RunConfig) -> RunArtifact:
    """Dispatch to the pipeline, write reports and the manifest."""
    artifact = RunArtifact(out=config.out)
    stages = StageLog()
    os.makedirs(config.out, exist_ok=True)
    try:
        status = PIPELINES[config.mode](config, artifact, stages)
    except CONFIG_ERRORS as exc:
        status = {'accepted': False, 'error': f"{type(exc).__name__}: {exc}"}
        artifact.exit_code = EXIT_CONFIG
    except KamError as exc:
        status = {'accepted': False, 'error': f"{type(exc).__name__}: {exc}"}
        artifact.exit_code = EXIT_ACCEPTANCE
    else:
        artifact.exit_code = EXIT_OK if status.get('accepted') else EXIT_ACCEPTANCE
    if 'error' in status:
        logger.error("%s pipeline failed: %s", config.mode, status['error'])
        artifact.report('error', {'mode': config.mode, 'error': status['error']})
    artifact.write_manifest(config, stages, defaults(), status)
    return artifact


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        config = load_config(args.config_path, mode=args.mode, seed=args.seed,
                             threads=args.threads, steps=args.steps, out=args.out)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        if args.out:
            write_json(os.path.join(args.out, 'error.json'), {'mode': args.mode, 'error': str(exc)})
        return EXIT_CONFIG
    artifact = run(config)
    logger.info("%s finished with exit code %d, manifest %s", config.mode, artifact.exit_code,
                artifact.manifest)
    return artifact.exit_code
