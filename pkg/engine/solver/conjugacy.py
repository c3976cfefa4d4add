"""
Conjugacy check: u should intertwine the translation flow with the X_H flow,

    phi^t_H(u(x)) = u(x + t xi).

Trajectories of X_H are integrated with an adaptive Runge-Kutta method. On the
torus the base coordinates are unwrapped and u is interpolated exactly by its
trigonometric polynomial; on origamis the integration stops at square edges
and restarts in the glued square, and u is interpolated by per-square bicubic
splines on node grids padded through the gluings.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline

from engine.dynamics.embedding import Embedding
from engine.dynamics.hamiltonian import Hamiltonian, hamiltonian_field
from engine.errors import HitsSingularity, SolverFailure
from engine.surface.flow import DEFAULT_CONE_EPSILON, distance_to_cone_points, straight_flow
from models.surface import SurfacePoint, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Conjugacy')

DEFAULTS = {
    't_max': 10.0,
    'n_points': 8,
    'n_times': 11,
    'rtol': 1e-11,
    'atol': 1e-12,
    'method': 'DOP853',
}


class TorusInterpolant:
    """Trigonometric interpolation of a displacement on the torus."""

    def __init__(self, u: Embedding):
        grid = u.grid
        self.n = grid.resolution
        self.coeffs = grid.fourier(u.w.values[:, 0])
        self.k = np.fft.fftfreq(self.n, d=1.0 / self.n)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """w at points, shape (4, len(x))."""
        ex = np.exp(2j * np.pi * np.outer(np.atleast_1d(x), self.k))
        ey = np.exp(2j * np.pi * np.outer(np.atleast_1d(y), self.k))
        return np.einsum('cab,pa,pb->cp', self.coeffs, ex, ey).real


class OrigamiInterpolant:
    """Per-square bicubic splines of a displacement, padded by one node layer."""

    def __init__(self, u: Embedding):
        grid = u.grid
        surface = grid.surface
        n = grid.resolution
        values = u.w.values[:, 0]
        axis = np.arange(n + 1) / n
        h, v = surface.h_perm, surface.v_perm
        self.splines: List[List[RectBivariateSpline]] = []
        for sq in range(surface.n_squares):
            padded = np.empty((4, n + 1, n + 1))
            padded[:, :n, :n] = values[:, sq]
            padded[:, n, :n] = values[:, h[sq], 0, :]
            padded[:, :n, n] = values[:, v[sq], :, 0]
            padded[:, n, n] = values[:, h[v[sq]], 0, 0]
            self.splines.append([RectBivariateSpline(axis, axis, padded[c]) for c in range(4)])

    def __call__(self, square: int, x: float, y: float) -> np.ndarray:
        return np.array([s(x, y, grid=False) for s in self.splines[square]])


def _base_distance(surface: TranslationSurface, a: Tuple[int, float, float], b: Tuple[int, float, float]) -> float:
    """Flat distance between nearby points given in (possibly different) squares."""
    sa, xa, ya = a
    sb, xb, yb = b
    h, v, h_inv, v_inv = surface.h_perm, surface.v_perm, surface.h_inv, surface.v_inv
    best = np.inf
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            sq = sb
            sq = h_inv[sq] if ox == 1 else (h[sq] if ox == -1 else sq)
            sq = v_inv[sq] if oy == 1 else (v[sq] if oy == -1 else sq)
            if sq == sa:
                best = min(best, float(np.hypot(xb + ox - xa, yb + oy - ya)))
    return best


class ConjugacyChecker:
    """Integrates X_H from u(x) and compares with u along the straight flow."""

    def __init__(self, H: Hamiltonian, u: Embedding, config: Optional[Dict[str, Any]] = None):
        self.H = H
        self.u = u
        self.surface = H.surface
        self.direction = u.direction
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        if self.surface.is_torus:
            self.interp = TorusInterpolant(u)
        else:
            self.interp = OrigamiInterpolant(u)

    def _rhs(self, square: int):
        def rhs(_, state):
            x, y, p1, p2 = state
            if self.surface.is_torus:
                x, y = x % 1.0, y % 1.0
            return hamiltonian_field(self.H, (square, x, y, p1, p2))
        return rhs

    def _integrate(self, fun, t0: float, t1: float, state: np.ndarray, t_eval: np.ndarray, events=None):
        cfg = self.config
        sol = solve_ivp(fun, (t0, t1), state, method=cfg['method'], rtol=cfg['rtol'], atol=cfg['atol'],
                        t_eval=t_eval, events=events)
        if sol.status < 0:
            raise SolverFailure(f"trajectory integration failed: {sol.message}")
        return sol

    def _torus_deviation(self, x0: float, y0: float, times: np.ndarray) -> float:
        xi = np.array(self.direction.xi)
        w0 = self.interp(x0, y0)[:, 0]
        state = np.array([x0 + w0[0], y0 + w0[1], xi[0] + w0[2], xi[1] + w0[3]])
        sol = self._integrate(self._rhs(0), 0.0, times[-1], state, times)

        bx, by = x0 + xi[0] * times, y0 + xi[1] * times
        w = self.interp(bx % 1.0, by % 1.0)
        dx = sol.y[0] - (bx + w[0])
        dy = sol.y[1] - (by + w[1])
        dx, dy = dx - np.round(dx), dy - np.round(dy)
        dp = sol.y[2:] - (xi[:, None] + w[2:])
        return float(np.max(np.sqrt(dx ** 2 + dy ** 2 + np.sum(dp ** 2, axis=0))))

    def _origami_trajectory(self, square: int, state: np.ndarray, times: np.ndarray) -> List[Tuple[int, np.ndarray]]:
        """States (square, [x, y, p1, p2]) of the X_H flow at the requested times."""
        surface = self.surface
        h, v, h_inv, v_inv = surface.h_perm, surface.v_perm, surface.h_inv, surface.v_inv

        def edge(index, offset, direction):
            def event(_, s):
                return s[index] - offset
            event.terminal = True
            event.direction = direction
            return event

        events = [edge(0, 1.0, 1), edge(0, 0.0, -1), edge(1, 1.0, 1), edge(1, 0.0, -1)]
        out: List[Tuple[int, np.ndarray]] = []
        t, sq = 0.0, square
        pending = list(times)
        while pending:
            t_eval = np.array([s for s in pending if s >= t])
            sol = self._integrate(self._rhs(sq), t, pending[-1], state, t_eval, events)
            out.extend((sq, sol.y[:, i].copy()) for i in range(sol.y.shape[1]))
            pending = pending[sol.y.shape[1]:]
            if sol.status != 1:
                break
            hit = next(i for i, ev in enumerate(sol.t_events) if len(ev))
            t = float(sol.t_events[hit][0])
            state = sol.y_events[hit][0].copy()
            if distance_to_cone_points(surface, np.array(sq), state[0], state[1]) < DEFAULT_CONE_EPSILON:
                raise HitsSingularity(f"X_H trajectory reaches a cone point of square {sq} at t={t:.6f}")
            if hit == 0:
                sq, state[0] = h[sq], 0.0
            elif hit == 1:
                sq, state[0] = h_inv[sq], 1.0
            elif hit == 2:
                sq, state[1] = v[sq], 0.0
            else:
                sq, state[1] = v_inv[sq], 1.0
        return out

    def _origami_deviation(self, square: int, x0: float, y0: float, times: np.ndarray) -> float:
        xi = np.array(self.direction.xi)
        w0 = self.interp(square, x0, y0)
        start = SurfacePoint(square, x0, y0)
        state = np.array([x0 + w0[0], y0 + w0[1], xi[0] + w0[2], xi[1] + w0[3]])
        traj = self._origami_trajectory(square, state, times)

        worst = 0.0
        for t, (sq_t, s) in zip(times, traj):
            ref = straight_flow(self.surface, self.direction, start, float(t))
            w = self.interp(ref.square, ref.x, ref.y)
            base = _base_distance(self.surface, (ref.square, ref.x + w[0], ref.y + w[1]), (sq_t, s[0], s[1]))
            fiber = np.hypot(s[2] - xi[0] - w[2], s[3] - xi[1] - w[3])
            worst = max(worst, float(np.hypot(base, fiber)))
        return worst

    def run(self, rng: np.random.Generator, t_max: Optional[float] = None, n_points: Optional[int] = None) -> float:
        """
        Largest deviation over random base points and times in [0, t_max].

        Raises:
            HitsSingularity: A trajectory passes through a cone point
        """
        t_max = float(t_max if t_max is not None else self.config['t_max'])
        n_points = int(n_points if n_points is not None else self.config['n_points'])
        times = np.linspace(0.0, t_max, int(self.config['n_times']))
        worst = 0.0
        for _ in range(n_points):
            square = int(rng.integers(0, self.surface.n_squares))
            x0, y0 = rng.random(2)
            if self.surface.is_torus:
                dev = self._torus_deviation(x0, y0, times)
            else:
                dev = self._origami_deviation(square, x0, y0, times)
            worst = max(worst, dev)
        logger.info(f"Conjugacy deviation over t <= {t_max}: {worst:.3e} ({n_points} point(s))")
        return worst


def verify_conjugacy(H: Hamiltonian, u: Embedding, t_max: float, n_points: int, rng: np.random.Generator,
                     config: Optional[Dict[str, Any]] = None) -> float:
    """
    Max distance between phi^t_H(u(x)) and u(x + t xi) over sampled x and t.

    Args:
        H: Hamiltonian
        u: Embedding (direction taken from u)
        t_max: Largest time
        n_points: Number of random base points
        rng: Seeded generator
        config: 'conjugacy' config section

    Returns:
        float
    """
    return ConjugacyChecker(H, u, config).run(rng, t_max, n_points)
