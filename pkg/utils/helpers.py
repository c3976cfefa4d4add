"""
Helper utility functions for ParaSurf.
"""

import json
import uuid
from datetime import datetime
from typing import Any

import numpy as np


def generate_uuid() -> str:
    """
    Generate a unique identifier.

    Returns:
        str: A UUID string
    """
    return str(uuid.uuid4())


def get_timestamp() -> datetime:
    """
    Get the current timestamp.

    Returns:
        datetime: Current datetime object
    """
    return datetime.now()


def make_rng(seed: int) -> np.random.Generator:
    """
    Create the random generator every randomized check draws from.

    Args:
        seed: Non-negative integer seed

    Returns:
        np.random.Generator: PCG64 generator
    """
    return np.random.default_rng(int(seed))


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays (possibly nested in dicts/lists) to plain Python.

    Args:
        value: Any value

    Returns:
        JSON-serializable equivalent
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if value != value or value in (float('inf'), float('-inf')):
            return str(value)
        return value
    return value


def dump_json(data: Any) -> str:
    """
    Serialize to JSON deterministically (sorted keys, fixed indentation).

    Args:
        data: Data to serialize

    Returns:
        str: JSON text ending with a newline
    """
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2) + '\n'
