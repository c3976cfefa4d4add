"""
Command Manager for ParaSurf.

Manages command registration, lookup and execution.
"""

import time
from typing import Any, Dict, List, Optional

import yaml

from engine.errors import ConfigError
from utils.logger import get_logger
from utils.path_helper import get_config_path

logger = get_logger('CommandManager')


class CommandManager:
    """
    CommandManager handles command registration and execution.

    Features:
    - Register commands from configuration
    - Execute commands against a run context
    - Provide command schemas
    """

    def __init__(self):
        """Initialize the CommandManager."""
        self.commands: Dict[str, Any] = {}  # All loaded commands (enabled and disabled)
        self.command_schemas: Dict[str, Dict[str, Any]] = {}
        self.enabled_commands: set = set()
        self.command_configs: Dict[str, Dict[str, Any]] = {}
        self.config_path: Optional[str] = None
        logger.debug("CommandManager initialized")

    def register(self, command: Any, enabled: bool = True) -> None:
        """
        Register a command instance.

        Args:
            command: Command instance (must have 'name' and an 'execute' method)
            enabled: Whether the command can be run
        """
        if not hasattr(command, 'name'):
            raise ValueError("Command must have a 'name' attribute")

        if not hasattr(command, 'execute'):
            raise ValueError("Command must have an 'execute' method")

        name = command.name
        self.commands[name] = command
        if hasattr(command, 'get_schema'):
            self.command_schemas[name] = command.get_schema()
        if enabled:
            self.enabled_commands.add(name)

        logger.debug(f"Command registered: {name}")

    def get(self, name: str) -> Optional[Any]:
        """
        Get a command instance by name.

        Args:
            name: Name of the command

        Returns:
            Command instance or None if not found or disabled
        """
        command = self.commands.get(name)
        if command is None:
            logger.warning(f"Command not found: {name}")
            return None

        if name not in self.enabled_commands:
            logger.warning(f"Command is disabled: {name}")
            return None

        return command

    def execute(self, name: str, context: Any) -> Dict[str, Any]:
        """
        Execute a command.

        Args:
            name: Command name
            context: RunContext handed to the command

        Returns:
            dict: The command's result payload (also written to result.json)

        Raises:
            ConfigError: Unknown or disabled command
            ParaSurfError: Whatever the command raises
        """
        logger.info(f"Executing command: {name}")

        command = self.get(name)
        if command is None:
            raise ConfigError(f"unknown or disabled command '{name}'; available: {', '.join(self.list_commands())}")

        start_time = time.time()
        try:
            result = command.execute(context)
        except Exception as e:
            logger.error(f"Command '{name}' failed: {type(e).__name__}: {e}")
            raise

        logger.info(f"Command '{name}' finished in {time.time() - start_time:.2f}s")
        return result

    def list_commands(self, include_disabled: bool = False) -> List[str]:
        """
        List registered commands.

        Args:
            include_disabled: If True, include disabled commands

        Returns:
            list: Sorted command names
        """
        names = self.commands.keys() if include_disabled else self.enabled_commands
        return sorted(names)

    def get_command_schema(self, name: str) -> Optional[Dict[str, Any]]:
        return self.command_schemas.get(name)

    def load_from_config(self, config_path: Optional[str] = None) -> None:
        """
        Load and register commands from commands.yaml.

        Args:
            config_path: Path to commands.yaml. If None, uses the bundled file.

        Raises:
            ConfigError: The file is missing or malformed
        """
        if config_path is None:
            config_path = get_config_path('commands.yaml')
        self.config_path = config_path

        try:
            with open(config_path, 'r') as f:
                config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Error loading commands from configuration: {e}")
            raise ConfigError(f"cannot load command configuration {config_path}: {e}")

        commands_config = config.get('commands', [])
        logger.debug(f"Loading {len(commands_config)} commands from configuration")
        for command_config in commands_config:
            self._load_command_from_config(command_config)

        logger.info(f"Loaded {len(self.commands)} commands ({len(self.enabled_commands)} enabled)")

    def _load_command_from_config(self, command_config: Dict[str, Any]) -> None:
        """
        Load and register a single command from configuration.

        Args:
            command_config: Command configuration dictionary
        """
        name = command_config.get('name')
        command_type = command_config.get('type')
        enabled = command_config.get('enabled', False)

        if not name:
            logger.error("Command configuration missing 'name' field")
            return

        self.command_configs[name] = command_config
        command = self._create_command_instance(command_config)
        if command is None:
            logger.warning(f"Failed to create command instance for '{name}' (type: {command_type})")
            return
        self.register(command, enabled)

    def _create_command_instance(self, command_config: Dict[str, Any]) -> Optional[Any]:
        """
        Create a command instance from configuration.

        Args:
            command_config: Command configuration

        Returns:
            Command instance or None
        """
        name = command_config.get('name')
        command_type = command_config.get('type')
        config = command_config.get('config', {}) or {}

        if command_type != 'builtin':
            logger.warning(f"Unknown command type: {command_type}")
            return None

        if name == 'solve':
            from integrations.commands.builtin.solve import SolveCommand
            return SolveCommand(name, config)
        elif name == 'check-identities':
            from integrations.commands.builtin.identities import CheckIdentitiesCommand
            return CheckIdentitiesCommand(name, config)
        elif name == 'ce':
            from integrations.commands.builtin.ce import CohomologyCommand
            return CohomologyCommand(name, config)
        elif name == 'obstructions':
            from integrations.commands.builtin.obstructions import ObstructionsCommand
            return ObstructionsCommand(name, config)
        elif name == 'sweep':
            from integrations.commands.builtin.sweep import SweepCommand
            return SweepCommand(name, config)
        else:
            logger.warning(f"Unknown builtin command: {name}")
            return None
