"""
Run directory writer for ParaSurf.

Layout of a run directory:

    result.json      deterministic results (no timestamps, sorted keys)
    run_meta.json    run id, start time and version
    trace.csv        iteration trace of a fixed-point solve
    <table>.csv      command tables (identities, obstructions, sweep)
    fields/*.bin     Field values (little-endian float64) with .json sidecars
    plots/*.csv      two-column plot data
"""

import csv
import json
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

from engine.errors import MissingArtifacts
from models.field import Field
from models.results import IterationRecord
from utils.helpers import dump_json, generate_uuid, get_timestamp, to_jsonable
from utils.logger import get_logger
from version import APP_NAME, __version__

logger = get_logger('Artifacts')

RESULT_FILE = 'result.json'
META_FILE = 'run_meta.json'
TRACE_FILE = 'trace.csv'
TRACE_COLUMNS = ('iter', 'residual', 'increment', 'contraction_factor')


def _cell(value: Any) -> str:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunDirectory:
    """Writes and reads the artifacts of one command run."""

    def __init__(self, path: str, create: bool = True):
        self.path = os.path.abspath(path)
        if create:
            os.makedirs(self.path, exist_ok=True)

    def file(self, *parts: str) -> str:
        return os.path.join(self.path, *parts)

    def write_result(self, data: Dict[str, Any]) -> str:
        path = self.file(RESULT_FILE)
        with open(path, 'w') as f:
            f.write(dump_json(data))
        logger.info(f"Wrote {path}")
        return path

    def write_meta(self, command: str, experiment: Optional[Dict[str, Any]] = None) -> str:
        """run_meta.json carries everything that differs between identical runs."""
        meta = {
            'run_id': generate_uuid(),
            'started': get_timestamp().isoformat(),
            'app': APP_NAME,
            'version': __version__,
            'command': command,
            'experiment': experiment or {},
        }
        path = self.file(META_FILE)
        with open(path, 'w') as f:
            f.write(dump_json(meta))
        return path

    def write_table(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        path = self.file(name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        logger.debug(f"Wrote {path}")
        return path

    def write_trace(self, history: Sequence[IterationRecord]) -> str:
        rows = [(r.iteration, r.residual, r.increment, r.contraction_factor) for r in history]
        return self.write_table(TRACE_FILE, TRACE_COLUMNS, rows)

    def write_plot(self, name: str, x_label: str, y_label: str, xs: Sequence[Any], ys: Sequence[Any]) -> str:
        """Two-column CSV under plots/."""
        return self.write_table(os.path.join('plots', f'{name}.csv'), (x_label, y_label), zip(xs, ys))

    def write_field(self, name: str, field: Field) -> str:
        path = self.file('fields', f'{name}.bin')
        field.save(path)
        logger.debug(f"Wrote field {name} {field.shape} to {path}")
        return path

    def read_result(self) -> Dict[str, Any]:
        """
        Load result.json.

        Raises:
            MissingArtifacts: The directory has no readable result.json
        """
        path = self.file(RESULT_FILE)
        if not os.path.isfile(path):
            raise MissingArtifacts(f"no {RESULT_FILE} in {self.path}")
        try:
            with open(path, 'r') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Corrupt {path}: {e}")
            raise MissingArtifacts(f"{RESULT_FILE} in {self.path} is not valid JSON: {e}")

    def list_files(self) -> List[str]:
        found = []
        for root, _, files in os.walk(self.path):
            for name in files:
                found.append(os.path.relpath(os.path.join(root, name), self.path))
        return sorted(found)
