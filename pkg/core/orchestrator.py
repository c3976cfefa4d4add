"""
Orchestrator for ParaSurf.

Loads the configuration, builds the run context, dispatches a command and maps
failures to exit codes:

    0  success
    1  configuration error (bad config, unreadable surface, unknown command)
    2  numerical failure, reported as "<ErrorClass>: <message>"
"""

import sys
from typing import Any, Dict, Optional, TextIO

from core.registry import Registry
from engine.errors import (ConfigError, GaussBonnetMismatch, MissingArtifacts, NotAPermutation, ParaSurfError,
                           ParseError)
from engine.output.artifacts import RunDirectory
from engine.output.formatter import report
from integrations.commands.manager import CommandManager
from models.experiment import RunContext, load_experiment
from utils.logger import get_logger
from utils.path_helper import load_system_config, resolve_run_dir

logger = get_logger('Orchestrator')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

CONFIG_ERRORS = (ConfigError, ParseError, NotAPermutation, GaussBonnetMismatch)


class Orchestrator:
    """
    Orchestrator coordinates one ParaSurf invocation.

    Responsibilities:
    - Load system defaults and the experiment config
    - Register the commands from commands.yaml
    - Run a command into its run directory
    - Translate errors into exit codes
    """

    def __init__(self, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None):
        """
        Initialize the Orchestrator.

        Args:
            stdout: Stream for reports (default sys.stdout)
            stderr: Stream for error lines (default sys.stderr)
        """
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr
        self.system_config: Dict[str, Any] = {}
        self.commands: Optional[CommandManager] = None
        self.registry = Registry()
        logger.debug("Orchestrator created")

    def _load_commands(self) -> CommandManager:
        if self.commands is None:
            self.commands = CommandManager()
            self.commands.load_from_config()
        return self.commands

    def _fail(self, code: int, error: Exception) -> int:
        message = f"{type(error).__name__}: {error}"
        logger.error(message)
        print(message, file=self.stderr)
        return code

    def run(self, command: str, config_path: Optional[str] = None, out: Optional[str] = None,
            seed: Optional[int] = None, workers: Optional[int] = None) -> int:
        """
        Run a command.

        Args:
            command: Command name (solve, check-identities, ce, obstructions, sweep)
            config_path: Experiment YAML (None: system defaults)
            out: Run directory (PARASURF_OUT overrides)
            seed: Seed override
            workers: Sweep worker count override

        Returns:
            int: Exit code
        """
        try:
            self.system_config = load_system_config()
            manager = self._load_commands()
            if manager.get(command) is None:
                raise ConfigError(f"unknown command '{command}'; available: {', '.join(manager.list_commands())}")
            if workers is not None and int(workers) < 1:
                raise ConfigError(f"--workers must be at least 1, got {workers}")
            experiment = load_experiment(config_path, seed, self.system_config)
            run_dir = RunDirectory(resolve_run_dir(out, command))
        except CONFIG_ERRORS as e:
            return self._fail(EXIT_CONFIG, e)
        except OSError as e:
            return self._fail(EXIT_CONFIG, ConfigError(str(e)))

        logger.info("=" * 60)
        logger.info(f"ParaSurf {command}: {experiment.name} -> {run_dir.path}")
        logger.info("=" * 60)

        context = RunContext(command, experiment, run_dir, self.registry, workers)
        try:
            run_dir.write_meta(command, experiment.to_dict())
            payload = manager.execute(command, context)
        except CONFIG_ERRORS as e:
            return self._fail(EXIT_CONFIG, e)
        except ParaSurfError as e:
            return self._fail(EXIT_NUMERICAL, e)
        except (ValueError, ArithmeticError) as e:
            # numerical library failures without a domain error class
            return self._fail(EXIT_NUMERICAL, e)

        run_dir.write_result(payload)
        print(report(run_dir.path), end='', file=self.stdout)
        return EXIT_OK

    def report(self, run_dir: str) -> int:
        """
        Print the report of an existing run directory.

        Returns:
            int: 0, or 1 with MissingArtifacts
        """
        try:
            text = report(run_dir)
        except MissingArtifacts as e:
            return self._fail(EXIT_CONFIG, e)
        print(text, end='', file=self.stdout)
        return EXIT_OK

    def get_status(self) -> Dict[str, Any]:
        return {
            'commands': self.commands.list_commands() if self.commands else [],
            'registry': self.registry.get_status(),
        }
