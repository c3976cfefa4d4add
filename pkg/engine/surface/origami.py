"""
OrigamiSpec loader for ParaSurf.

Parses the line-oriented key=value surface format and derives the vertex
structure (cone points, genus) from the commutator of the gluing permutations.

Format:
    # comment
    name=L3
    squares=3
    h=2,1,3
    v=3,2,1
"""

import os
from typing import Dict, List, Sequence, Tuple

from engine.errors import GaussBonnetMismatch, NotAPermutation, ParseError
from models.surface import ConePoint, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Origami')

REQUIRED_KEYS = ('squares', 'h', 'v')


def parse_origami_spec(text: str) -> Dict[str, str]:
    """
    Split OrigamiSpec text into its key/value pairs.

    Args:
        text: Spec text

    Returns:
        dict: Raw string values by key

    Raises:
        ParseError: On malformed lines, duplicate or missing keys
    """
    entries: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ParseError(f"line {line_no}: expected key=value, got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ParseError(f"line {line_no}: empty key")
        if key in entries:
            raise ParseError(f"line {line_no}: duplicate key '{key}'")
        entries[key] = value

    missing = [k for k in REQUIRED_KEYS if k not in entries]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}")
    return entries


def _parse_images(key: str, value: str) -> List[int]:
    try:
        images = [int(tok) for tok in value.replace(' ', '').split(',') if tok != '']
    except ValueError:
        raise ParseError(f"'{key}' must be a comma-separated list of integers, got '{value}'")
    if not images:
        raise ParseError(f"'{key}' is empty")
    return images


def _to_permutation(key: str, images: Sequence[int], n: int) -> Tuple[int, ...]:
    """Validate 1-indexed images and return the 0-indexed permutation."""
    if len(images) != n:
        raise ParseError(f"'{key}' has {len(images)} entries, expected {n}")
    if sorted(images) != list(range(1, n + 1)):
        raise NotAPermutation(f"'{key}' = {list(images)} is not a permutation of 1..{n}")
    return tuple(i - 1 for i in images)


def _cycles(perm: Sequence[int]) -> List[List[int]]:
    seen = [False] * len(perm)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cycle = []
        i = start
        while not seen[i]:
            seen[i] = True
            cycle.append(i)
            i = perm[i]
        cycles.append(cycle)
    return cycles


def commutator(h: Sequence[int], v: Sequence[int]) -> Tuple[int, ...]:
    """
    The commutator v . h . v^-1 . h^-1 (h^-1 applied first).

    Its cycles are the classes of bottom-left corners sharing a vertex.
    """
    n = len(h)
    h_inv = [0] * n
    v_inv = [0] * n
    for i in range(n):
        h_inv[h[i]] = i
        v_inv[v[i]] = i
    return tuple(v[h[v_inv[h_inv[i]]]] for i in range(n))


def _is_connected(h: Sequence[int], v: Sequence[int]) -> bool:
    n = len(h)
    reached = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in (h[i], v[i]):
            if j not in reached:
                reached.add(j)
                stack.append(j)
    return len(reached) == n


def build_surface(name: str, h: Sequence[int], v: Sequence[int]) -> TranslationSurface:
    """
    Build a validated TranslationSurface from 0-indexed permutations.

    Args:
        name: Surface name
        h: Right-neighbour permutation
        v: Upper-neighbour permutation

    Returns:
        TranslationSurface
    """
    n = len(h)
    if not _is_connected(h, v):
        raise ParseError(f"surface '{name}' is not connected")

    cycles = _cycles(commutator(h, v))
    bl_vertex = [0] * n
    for vid, cycle in enumerate(cycles):
        for s in cycle:
            bl_vertex[s] = vid

    cone_points = tuple(
        ConePoint(vertex=vid, square=min(cycle), corner='bl', k=len(cycle) - 1)
        for vid, cycle in enumerate(cycles) if len(cycle) >= 2
    )

    # Gauss-Bonnet: sum k_p = 2g - 2; Euler: V - E + F = V - 2n + n
    total_k = sum(cp.k for cp in cone_points)
    if total_k % 2 != 0:
        raise GaussBonnetMismatch(f"sum of cone parameters {total_k} is odd")
    genus = (total_k + 2) // 2
    euler = len(cycles) - n
    if euler != 2 - 2 * genus:
        raise GaussBonnetMismatch(
            f"Euler characteristic {euler} disagrees with genus {genus} from cone data"
        )

    return TranslationSurface(
        name=name,
        n_squares=n,
        h_perm=tuple(h),
        v_perm=tuple(v),
        vertex_squares=tuple(tuple(sorted(c)) for c in cycles),
        cone_points=cone_points,
        genus=genus,
        _bl_vertex=tuple(bl_vertex),
    )


def load_origami(text: str) -> TranslationSurface:
    """
    Load a translation surface from OrigamiSpec text.

    Args:
        text: Spec text

    Returns:
        TranslationSurface with cone points and genus derived

    Raises:
        ParseError: Malformed spec
        NotAPermutation: h or v is not a permutation of 1..n
        GaussBonnetMismatch: Internal consistency failure
    """
    entries = parse_origami_spec(text)
    name = entries.get('name', 'origami')

    try:
        n = int(entries['squares'])
    except ValueError:
        raise ParseError(f"'squares' must be an integer, got '{entries['squares']}'")
    if n < 1:
        raise ParseError(f"'squares' must be positive, got {n}")

    h = _to_permutation('h', _parse_images('h', entries['h']), n)
    v = _to_permutation('v', _parse_images('v', entries['v']), n)

    surface = build_surface(name, h, v)
    logger.info(
        f"Loaded surface '{surface.name}': {n} squares, genus {surface.genus}, "
        f"{len(surface.cone_points)} cone point(s) "
        f"{[cp.k for cp in surface.cone_points]}"
    )
    return surface


def load_origami_file(path: str) -> TranslationSurface:
    """
    Load a translation surface from an OrigamiSpec file.

    Args:
        path: Path to the spec file

    Returns:
        TranslationSurface
    """
    if not os.path.exists(path):
        raise ParseError(f"surface file not found: {path}")
    with open(path, 'r') as f:
        return load_origami(f.read())


def flat_torus() -> TranslationSurface:
    """The one-square torus."""
    return build_surface('torus', (0,), (0,))
