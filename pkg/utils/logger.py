"""
Logging system for ParaSurf.

Every module asks for a named logger at import time. The root logger is set up
once, on first use, with the level from config/system.yaml (system.log_level);
the --verbose flag lowers it to DEBUG afterwards. Log records never reach
result.json.
"""

import logging
import os
import sys
from typing import Optional

import yaml

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class Logger:
    """Root logger setup shared by all ParaSurf components."""

    _handler: Optional[logging.Handler] = None

    @classmethod
    def get_logger(cls, name: str = 'ParaSurf') -> logging.Logger:
        """
        Args:
            name: Component name shown in every record

        Returns:
            logging.Logger
        """
        if cls._handler is None:
            cls._setup(cls._configured_level())
        return logging.getLogger(name)

    @classmethod
    def set_level(cls, level: int) -> None:
        """Change the level of the root logger and its handler."""
        if cls._handler is None:
            cls._setup(level)
        logging.getLogger().setLevel(level)
        cls._handler.setLevel(level)

    @classmethod
    def _setup(cls, level: int) -> None:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler.setLevel(level)
        root = logging.getLogger()
        root.addHandler(handler)
        root.setLevel(level)
        cls._handler = handler

    @staticmethod
    def _configured_level() -> int:
        # utils/ sits one level below the project root
        path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'system.yaml')
        try:
            with open(path, 'r') as f:
                config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            print(f"Warning: cannot read log level from {path} ({e}), using INFO", file=sys.stderr)
            return logging.INFO

        name = str((config.get('system', {}) or {}).get('log_level', 'INFO')).upper()
        if name not in LEVELS:
            print(f"Warning: unknown log level '{name}' in {path}, using INFO", file=sys.stderr)
            return logging.INFO
        return getattr(logging, name)


def get_logger(name: str = 'ParaSurf') -> logging.Logger:
    """Shortcut for Logger.get_logger."""
    return Logger.get_logger(name)
