"""
Hamiltonians on the trivialized tangent bundle of a translation surface.

H(x, p) = (p1^2 + p2^2) / 2 + mask(x) * f(x, p), where f is a finite sum of
coefficient * expression terms built from the named factors

    cos_base(m, n)   cos(2 pi (m x + n y))
    sin_base(m, n)   sin(2 pi (m x + n y))
    fiber_poly(i, j) p1^i p2^j

and the mask is identically zero within mask_radius of every cone point.
Expressions are parsed and differentiated with sympy, then lambdified once per
cone-corner pattern of the squares.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import sympy as sp

from engine.errors import ConfigError, EvaluationAtSingularity
from engine.surface.flow import distance_to_cone_points, translate
from models.surface import CORNER_OFFSETS, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Hamiltonian')

X, Y, P1, P2 = sp.symbols('x y p1 p2', real=True)
VARIABLES = (X, Y, P1, P2)

DEFAULT_MASK_RADIUS = 0.1
SINGULARITY_EPSILON = 1e-9


def cos_base(m, n):
    return sp.cos(2 * sp.pi * (m * X + n * Y))


def sin_base(m, n):
    return sp.sin(2 * sp.pi * (m * X + n * Y))


def fiber_poly(i, j):
    return P1 ** i * P2 ** j


TERM_FACTORS = {'cos_base': cos_base, 'sin_base': sin_base, 'fiber_poly': fiber_poly}


def parse_term(expression: str) -> sp.Expr:
    """
    Parse a term expression such as 'cos_base(1,-1)*fiber_poly(1,0)'.

    Raises:
        ConfigError: If the expression uses anything but the named factors and numbers
    """
    try:
        expr = sp.sympify(expression, locals=dict(TERM_FACTORS), rational=False)
    except (sp.SympifyError, TypeError, SyntaxError) as e:
        raise ConfigError(f"cannot parse Hamiltonian term '{expression}': {e}")
    unknown = expr.free_symbols - set(VARIABLES)
    if unknown:
        raise ConfigError(
            f"Hamiltonian term '{expression}' uses unknown symbols {sorted(str(s) for s in unknown)}; "
            f"allowed factors are {sorted(TERM_FACTORS)}"
        )
    return expr


def _bump(r2: sp.Expr, radius: float) -> sp.Expr:
    """0 for r <= radius, 1 for r >= 2 radius, quintic smoothstep in r^2 in between."""
    rho2 = radius ** 2
    s = (r2 - rho2) / (3 * rho2)
    return sp.Piecewise((0, s <= 0), (1, s >= 1), (s ** 3 * (10 - 15 * s + 6 * s ** 2), True))


def mask_expression(corners: Sequence[str], radius: float) -> sp.Expr:
    """Product of bumps around the given square corners."""
    expr = sp.Integer(1)
    for corner in corners:
        cx, cy = CORNER_OFFSETS[corner]
        expr = expr * _bump((X - cx) ** 2 + (Y - cy) ** 2, radius)
    return expr


@dataclass(frozen=True)
class HamiltonianTerm:
    """One perturbation term: coefficient * expression."""
    coefficient: float
    expression: str

    @classmethod
    def from_config(cls, item: Dict[str, Any]) -> 'HamiltonianTerm':
        if 'expr' not in item:
            raise ConfigError(f"Hamiltonian term {item} has no 'expr'")
        return cls(coefficient=float(item.get('coefficient', 1.0)), expression=str(item['expr']))

    def to_dict(self) -> Dict[str, Any]:
        return {'coefficient': self.coefficient, 'expr': self.expression}


class _Compiled:
    """Lambdified value, gradient and Hessian of H on squares with one corner pattern."""

    def __init__(self, expr: sp.Expr):
        self.expr = expr
        grad = [sp.diff(expr, v) for v in VARIABLES]
        hess = [[sp.diff(g, v) for v in VARIABLES] for g in grad]
        self.value = sp.lambdify(VARIABLES, expr, 'numpy')
        self.grad = [sp.lambdify(VARIABLES, g, 'numpy') for g in grad]
        self.hess = [[sp.lambdify(VARIABLES, h, 'numpy') for h in row] for row in hess]


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """
    Flat kinetic energy plus a masked perturbation.

    Attributes:
        surface: Translation surface
        terms: Perturbation terms
        mask_radius: Radius of the unperturbed neighborhood of each cone point
    """
    surface: TranslationSurface
    terms: Tuple[HamiltonianTerm, ...] = ()
    mask_radius: float = DEFAULT_MASK_RADIUS
    perturbation: sp.Expr = field(init=False, repr=False)
    _compiled: Dict[Tuple[str, ...], Tuple[np.ndarray, _Compiled]] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        perturbation = sum((t.coefficient * parse_term(t.expression) for t in self.terms), sp.Integer(0))
        object.__setattr__(self, 'perturbation', perturbation)
        object.__setattr__(self, '_compiled', {})

        kinetic = (P1 ** 2 + P2 ** 2) / 2
        patterns: Dict[Tuple[str, ...], List[int]] = {}
        for s in range(self.surface.n_squares):
            patterns.setdefault(self.surface.cone_corners(s), []).append(s)
        use_mask = self.mask_radius > 0.0
        for corners, squares in patterns.items():
            masked = self.perturbation
            if corners and use_mask:
                masked = mask_expression(corners, self.mask_radius) * self.perturbation
            self._compiled[corners] = (np.array(squares), _Compiled(kinetic + masked))
        logger.debug(
            f"Hamiltonian compiled: {len(self.terms)} term(s), {len(patterns)} corner pattern(s), "
            f"mask radius {self.mask_radius}"
        )

    @classmethod
    def flat(cls, surface: TranslationSurface) -> 'Hamiltonian':
        """The unperturbed H_0 = |p|^2 / 2."""
        return cls(surface)

    @classmethod
    def from_config(cls, surface: TranslationSurface, config: Dict[str, Any]) -> 'Hamiltonian':
        """
        Build from a 'hamiltonian' config section.

        Args:
            surface: Translation surface
            config: {'terms': [{'coefficient': c, 'expr': '...'}], 'mask_radius': r, 'epsilon': e}

        Returns:
            Hamiltonian
        """
        config = config or {}
        scale = float(config.get('epsilon', 1.0))
        terms = [HamiltonianTerm.from_config(item) for item in config.get('terms', []) or []]
        terms = [HamiltonianTerm(scale * t.coefficient, t.expression) for t in terms]
        return cls(surface, tuple(terms), float(config.get('mask_radius', DEFAULT_MASK_RADIUS)))

    @property
    def is_flat(self) -> bool:
        return self.perturbation == 0

    def with_terms(self, extra: Sequence[HamiltonianTerm]) -> 'Hamiltonian':
        """A new Hamiltonian with additional terms."""
        return Hamiltonian(self.surface, self.terms + tuple(extra), self.mask_radius)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'terms': [t.to_dict() for t in self.terms],
            'mask_radius': self.mask_radius,
            'perturbation': str(self.perturbation),
        }

    # evaluation

    def _locate(self, square, x, y):
        """Move (possibly displaced) points into their squares and check the cone rule."""
        square = np.asarray(square, dtype=int)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        sq, xs, ys = translate(self.surface, square, np.zeros_like(x), np.zeros_like(y), x, y)
        if self.surface.cone_points and not self.is_flat and self.mask_radius <= 0.0:
            dist = distance_to_cone_points(self.surface, sq, xs, ys)
            if np.any(dist < SINGULARITY_EPSILON):
                raise EvaluationAtSingularity(
                    f"perturbation evaluated within {SINGULARITY_EPSILON:g} of a cone point without a mask"
                )
        return sq, xs, ys

    def _evaluate(self, which: str, square, x, y, p1, p2) -> np.ndarray:
        arrays = np.broadcast_arrays(np.asarray(square, dtype=int), *(np.asarray(a, dtype=float) for a in (x, y, p1, p2)))
        point_shape = arrays[0].shape
        square, x, y, p1, p2 = (a.ravel() for a in arrays)
        sq, xs, ys = self._locate(square, x, y)

        shape = {'value': (), 'grad': (4,), 'hess': (4, 4)}[which]
        out = np.zeros(shape + sq.shape)
        for squares, compiled in self._compiled.values():
            sel = np.isin(sq, squares)
            if not np.any(sel):
                continue
            args = (xs[sel], ys[sel], p1[sel], p2[sel])
            if which == 'value':
                out[sel] = compiled.value(*args)
            elif which == 'grad':
                for i, g in enumerate(compiled.grad):
                    out[i][sel] = g(*args)
            else:
                for i, row in enumerate(compiled.hess):
                    for j, h in enumerate(row):
                        out[i, j][sel] = h(*args)
        return out.reshape(shape + point_shape)

    def value(self, square, x, y, p1, p2) -> np.ndarray:
        """H at points (arrays broadcast together)."""
        return self._evaluate('value', square, x, y, p1, p2)

    def gradient(self, square, x, y, p1, p2) -> np.ndarray:
        """(dH/dx, dH/dy, dH/dp1, dH/dp2), shape (4, ...)."""
        return self._evaluate('grad', square, x, y, p1, p2)

    def hessian(self, square, x, y, p1, p2) -> np.ndarray:
        """Second derivatives in (x, y, p1, p2), shape (4, 4, ...)."""
        return self._evaluate('hess', square, x, y, p1, p2)


def hamiltonian_field(H: Hamiltonian, point) -> np.ndarray:
    """
    Hamiltonian vector field X_H = J grad H in the (X1, X2, d_p1, d_p2) frame.

    Args:
        H: Hamiltonian
        point: (square, x, y, p1, p2), scalars or arrays

    Returns:
        np.ndarray (4, ...): (dH/dp1, dH/dp2, -X1 H, -X2 H)

    Raises:
        EvaluationAtSingularity: Unmasked perturbation evaluated at a cone point
    """
    square, x, y, p1, p2 = point
    g = H.gradient(square, x, y, p1, p2)
    return np.stack([g[2], g[3], -g[0], -g[1]])
