"""
Straight-line flow on square-tiled surfaces.

Traces the translation flow X_xi exactly across square edges, and moves
node arrays by small displacements through the gluings.
"""

from typing import Tuple

import numpy as np

from engine.errors import HitsSingularity
from models.surface import CORNER_OFFSETS, Direction, SurfacePoint, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Flow')

DEFAULT_CONE_EPSILON = 1e-9


def _segment_distance(p0: Tuple[float, float], p1: Tuple[float, float], q: Tuple[float, float]) -> float:
    """Distance from point q to the segment p0-p1."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    length2 = dx * dx + dy * dy
    if length2 == 0.0:
        return float(np.hypot(q[0] - p0[0], q[1] - p0[1]))
    s = ((q[0] - p0[0]) * dx + (q[1] - p0[1]) * dy) / length2
    s = min(1.0, max(0.0, s))
    return float(np.hypot(q[0] - (p0[0] + s * dx), q[1] - (p0[1] + s * dy)))


def _check_segment(surface: TranslationSurface, square: int,
                   p0: Tuple[float, float], p1: Tuple[float, float], epsilon: float) -> None:
    for corner in surface.cone_corners(square):
        q = CORNER_OFFSETS[corner]
        dist = _segment_distance(p0, p1, q)
        if dist < epsilon:
            raise HitsSingularity(
                f"trajectory passes within {dist:.3e} of the cone point at "
                f"square {square + 1} corner {corner} (epsilon {epsilon:.1e})"
            )


def straight_flow(surface: TranslationSurface, d: Direction, p: SurfacePoint, t: float,
                  epsilon: float = DEFAULT_CONE_EPSILON) -> SurfacePoint:
    """
    Advance a point for time t along X_xi.

    Args:
        surface: Translation surface
        d: Flow direction
        p: Starting point (not a cone point)
        t: Time (negative times flow backwards)
        epsilon: Minimal allowed distance to a cone point

    Returns:
        SurfacePoint: The point at time t

    Raises:
        HitsSingularity: If the trajectory passes within epsilon of a cone point
    """
    if t == 0.0:
        _check_segment(surface, p.square, (p.x, p.y), (p.x, p.y), epsilon)
        return p

    sign = 1.0 if t > 0 else -1.0
    vx, vy = sign * d.xi[0], sign * d.xi[1]
    remaining = abs(t)
    sq, x, y = p.square, float(p.x), float(p.y)
    h, v = surface.h_perm, surface.v_perm
    h_inv, v_inv = surface.h_inv, surface.v_inv

    while True:
        if vx > 0:
            tx = (1.0 - x) / vx
        elif vx < 0:
            tx = x / -vx
        else:
            tx = np.inf
        if vy > 0:
            ty = (1.0 - y) / vy
        elif vy < 0:
            ty = y / -vy
        else:
            ty = np.inf

        finished = remaining < min(tx, ty)
        step = remaining if finished else min(tx, ty)
        x_new, y_new = x + vx * step, y + vy * step
        _check_segment(surface, sq, (x, y), (x_new, y_new), epsilon)
        x, y = x_new, y_new
        remaining -= step
        if finished:
            break

        # edge crossing; both when leaving through a (regular) corner
        if tx <= ty:
            if vx > 0:
                sq, x = h[sq], 0.0
            else:
                sq, x = h_inv[sq], 1.0
        if ty <= tx:
            if vy > 0:
                sq, y = v[sq], 0.0
            else:
                sq, y = v_inv[sq], 1.0

    if x >= 1.0:
        sq, x = h[sq], x - 1.0
    elif x < 0.0:
        sq, x = h_inv[sq], x + 1.0
    if y >= 1.0:
        sq, y = v[sq], y - 1.0
    elif y < 0.0:
        sq, y = v_inv[sq], y + 1.0

    return SurfacePoint(square=int(sq), x=x, y=y)


def translate(surface: TranslationSurface, square: np.ndarray, x: np.ndarray, y: np.ndarray,
              dx: np.ndarray, dy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Move points by displacements |d| < 1, crossing at most one vertical and
    one horizontal edge (horizontal move first).

    Args:
        surface: Translation surface
        square, x, y: Point arrays
        dx, dy: Displacement arrays (broadcast against the points)

    Returns:
        (square, x, y) arrays of the displaced points
    """
    h = np.asarray(surface.h_perm)
    v = np.asarray(surface.v_perm)
    h_inv = np.asarray(surface.h_inv)
    v_inv = np.asarray(surface.v_inv)

    sq = np.array(square, dtype=int, copy=True)
    xs = np.asarray(x, dtype=float) + dx
    ys = np.asarray(y, dtype=float) + dy
    sq, xs, ys = np.broadcast_arrays(sq, xs, ys)
    sq, xs, ys = sq.copy(), xs.copy(), ys.copy()

    right = xs >= 1.0
    left = xs < 0.0
    sq[right] = h[sq[right]]
    xs[right] -= 1.0
    sq[left] = h_inv[sq[left]]
    xs[left] += 1.0

    up = ys >= 1.0
    down = ys < 0.0
    sq[up] = v[sq[up]]
    ys[up] -= 1.0
    sq[down] = v_inv[sq[down]]
    ys[down] += 1.0
    return sq, xs, ys


def distance_to_cone_points(surface: TranslationSurface, square: np.ndarray,
                            x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    In-square distance from points to the nearest cone corner (inf if none).

    Args:
        surface: Translation surface
        square, x, y: Point arrays

    Returns:
        np.ndarray of distances
    """
    square = np.asarray(square, dtype=int)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.full(np.broadcast(square, x, y).shape, np.inf)
    if not surface.cone_points:
        return dist
    mask = surface.cone_corner_mask()
    for c_idx, corner in enumerate(('bl', 'br', 'tl', 'tr')):
        cx, cy = CORNER_OFFSETS[corner]
        d = np.hypot(x - cx, y - cy)
        d = np.where(mask[square, c_idx], d, np.inf)
        dist = np.minimum(dist, d)
    return dist
