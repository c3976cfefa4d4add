#!/usr/bin/env python3
"""
ParaSurf: Main entrance

Batch runner for invariant-surface computations of perturbed flat geodesic
flows on translation surfaces.

Usage:
    python main.py solve --config config/experiments/torus_golden.yaml --out runs/golden
    python main.py check-identities
    python main.py ce --config config/experiments/torus_golden.yaml
    python main.py obstructions --config config/experiments/l3_obstructions.yaml
    python main.py sweep --config config/experiments/sweep.yaml --workers 4
    python main.py report runs/golden
"""

import argparse
import logging
import sys
from typing import List, Optional

from core.orchestrator import Orchestrator
from utils.logger import Logger, get_logger
from version import APP_NAME, __version__

logger = get_logger('ParaSurf')

COMMANDS = ('solve', 'check-identities', 'ce', 'obstructions', 'sweep')


def _seed(value: str) -> int:
    seed = int(value)
    if seed < 0 or seed >= 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='parasurf', description=f"{APP_NAME} {__version__}")
    parser.add_argument('--version', action='version', version=f"{APP_NAME} {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('--config', help='experiment YAML (default: system defaults)')
        cmd.add_argument('--out', help='run directory (PARASURF_OUT overrides)')
        cmd.add_argument('--seed', type=_seed, help='seed for every randomized check')
        cmd.add_argument('--verbose', action='store_true', help='DEBUG logging')
        if name == 'sweep':
            cmd.add_argument('--workers', type=int, help='worker pool size')

    rep = sub.add_parser('report')
    rep.add_argument('run_dir', help='run directory containing result.json')
    rep.add_argument('--verbose', action='store_true', help='DEBUG logging')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for ParaSurf"""
    args = build_parser().parse_args(argv)
    if args.verbose:
        Logger.set_level(logging.DEBUG)

    orchestrator = Orchestrator()
    try:
        if args.command == 'report':
            return orchestrator.report(args.run_dir)
        return orchestrator.run(args.command, args.config, args.out, args.seed, getattr(args, 'workers', None))
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130


if __name__ == '__main__':
    sys.exit(main())
