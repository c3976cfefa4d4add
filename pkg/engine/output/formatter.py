"""
Report Formatter for ParaSurf.

Turns the result.json of a run directory into a human-readable summary. The
text depends on result.json only, so equal results give byte-identical
reports.
"""

import math
import os
from typing import Any, Callable, Dict, List, Optional

from engine.errors import MissingArtifacts
from engine.output.artifacts import RunDirectory
from utils.logger import get_logger

logger = get_logger('Formatter')


def sci(value: Optional[float], digits: int = 1) -> str:
    """Compact scientific notation: 0.0e0, 1.2e-10, n/a for missing values."""
    if value is None:
        return 'n/a'
    if isinstance(value, str):
        return value
    value = float(value)
    if not math.isfinite(value):
        return str(value)
    mantissa, exponent = f"{value:.{digits}e}".split('e')
    return f"{mantissa}e{int(exponent)}"


def verdict(value: Any, tolerance: Any) -> str:
    """PASS when value is a number within tolerance."""
    passed = isinstance(value, (int, float)) and isinstance(tolerance, (int, float)) and value <= tolerance
    return 'PASS' if passed else 'FAIL'


class Formatter:
    """
    Formatter renders run results as text.

    One section per command; unknown commands fall back to a key listing.
    """

    def __init__(self):
        self._sections: Dict[str, Callable[[Dict[str, Any]], List[str]]] = {
            'solve': self._solve,
            'check-identities': self._identities,
            'ce': self._ce,
            'obstructions': self._obstructions,
            'sweep': self._sweep,
        }

    def format(self, result: Dict[str, Any]) -> str:
        """
        Args:
            result: Parsed result.json

        Returns:
            str: Report text ending with a newline
        """
        command = result.get('command', 'unknown')
        logger.debug(f"Formatting report for command {command}")
        experiment = result.get('experiment', {})
        lines = [
            f"ParaSurf report: {command}",
            f"experiment {experiment.get('name', '?')} on {experiment.get('surface', '?')}, "
            f"N={experiment.get('resolution', '?')}, xi={experiment.get('xi', '?')}, seed={experiment.get('seed', '?')}",
        ]
        section = self._sections.get(command)
        if section is None:
            lines.extend(f"{key}: {result[key]}" for key in sorted(result))
        else:
            lines.extend(section(result))
        lines.append(f"status {result.get('status', 'n/a')}")
        return '\n'.join(lines) + '\n'

    def _solve(self, result: Dict[str, Any]) -> List[str]:
        solve = result.get('solve', {})
        tol = result.get('tolerances', {})
        residual = solve.get('residual')
        obstruction = solve.get('obstruction', [])
        p_norm = max((abs(p) for p in obstruction), default=0.0)
        lines = [
            f"residual {sci(residual)} (tol {sci(tol.get('residual_tol'))}) "
            f"{verdict(residual, tol.get('residual_tol'))}",
            f"iterations {solve.get('iterations', 0)}, converged {solve.get('converged')}, "
            f"contraction factor {sci(solve.get('contraction_factor'), 3)}",
            f"obstruction |P| {sci(p_norm)} (tol {sci(tol.get('obstruction_tol'))}) "
            f"{verdict(p_norm, tol.get('obstruction_tol'))}",
        ]
        for i, p in enumerate(obstruction):
            lines.append(f"  P[{i // 4}][{i % 4}] = {sci(p, 6)}")
        lines.append(f"lagrangian defect {sci(solve.get('lagrangian_defect'))}")
        lines.append(f"identity residual {sci(solve.get('identity_residual'))} "
                     f"(para-CE residual {sci(solve.get('back_substitution_residual'))}, "
                     f"{solve.get('iteration_mode', 'plain')} iteration)")
        conj = result.get('conjugacy_deviation')
        if conj is not None:
            lines.append(f"conjugacy deviation {sci(conj)} (tol {sci(tol.get('conjugacy_tol'))}) "
                         f"{verdict(conj, tol.get('conjugacy_tol'))}")
        else:
            lines.append("conjugacy deviation n/a")
        newton = result.get('newton_distance')
        if newton is not None:
            lines.append(f"newton distance {sci(newton)} (tol {sci(tol.get('newton_tol'))}) "
                         f"{verdict(newton, tol.get('newton_tol'))}")
        correction = result.get('correction')
        if correction:
            coeffs = ', '.join(f"{d}: {sci(c, 6)}" for d, c in zip(correction['directions'], correction['coefficients']))
            lines.append(f"correction after {correction['steps']} step(s): {coeffs}")
        return lines

    def _identities(self, result: Dict[str, Any]) -> List[str]:
        lines = []
        for row in result.get('identities', []):
            lines.append(f"{row['suite']:<24} {sci(row['measured'], 2):>10}  tol {sci(row['tolerance']):>7}  {row['status']}")
        return lines

    def _ce(self, result: Dict[str, Any]) -> List[str]:
        ce = result.get('ce', {})
        tol = result.get('tolerances', {})
        lines = [
            f"f = {ce.get('expr')}, s = {ce.get('s')}, t = {ce.get('t')}",
            f"residual {sci(ce.get('residual'))} (tol {sci(tol.get('residual_tol'))}), "
            f"sup residual {sci(ce.get('sup_residual'))}",
            f"counterterms ({ce.get('count')}): " + ', '.join(sci(c, 6) for c in ce.get('counterterms', [])),
            f"a priori constant {sci(ce.get('apriori_constant'), 4)}",
        ]
        if ce.get('solution_norm') is not None:
            lines.append(f"solution norm H^t {sci(ce['solution_norm'])}")
        if ce.get('vanishing_defect') is not None:
            lines.append(f"vanishing defect (order {ce.get('vanishing_order')}) {sci(ce['vanishing_defect'])}")
        return lines

    def _obstructions(self, result: Dict[str, Any]) -> List[str]:
        lines = []
        for row in result.get('obstructions', []):
            lines.append(f"s = {row['s']}: h = {row['count']}, gap ratio {sci(row['gap_ratio'], 2)}")
        lines.append(f"non-decreasing {result.get('non_decreasing')}")
        return lines

    def _sweep(self, result: Dict[str, Any]) -> List[str]:
        lines = []
        for row in result.get('sweep', []):
            params = ', '.join(f"{k}={v}" for k, v in sorted(row['params'].items()))
            if row['status'] == 'ok':
                lines.append(f"[{row['index']}] {params}: residual {sci(row['residual'])}, "
                             f"|P| {sci(row['obstruction_norm'])}, {row['iterations']} iteration(s)")
            else:
                lines.append(f"[{row['index']}] {params}: {row['error']}")
        return lines


def report(run_dir: str) -> str:
    """
    Summary text of a run directory.

    Args:
        run_dir: Directory containing result.json

    Returns:
        str

    Raises:
        MissingArtifacts: No result.json
    """
    if not os.path.isdir(run_dir):
        raise MissingArtifacts(f"run directory {run_dir} does not exist")
    result = RunDirectory(run_dir, create=False).read_result()
    return Formatter().format(result)
