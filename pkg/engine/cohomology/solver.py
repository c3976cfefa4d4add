"""
Cohomological equation solver.

Solves X_xi u + sum_i c_i chi_i = f with counterterms:
    torus:    Fourier division by 2 pi i (m xi1 + n xi2); the mean is the only
              invariant distribution.
    origamis: the Galerkin matrix of X_xi on the Friedrichs eigenbasis,
              weighted as H^{s+1} -> H^s, defines the invariant distributions
              (near-null left singular vectors) and their counterterms; u is
              the weighted least-squares solution of the pointwise equation
              X_xi u = f - sum_i c_i chi_i over the nonconstant eigenmodes.
              The reported residual is measured on the grid.
"""

import dataclasses
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from engine.errors import InsufficientRegularity, NonZeroAverage, NoSpectralGap, SmallDivisor
from engine.spectral.grid import Grid
from engine.spectral.norms import friedrichs_norm
from models.field import Field, SpectralBasis
from models.results import CohomSolution, DistributionBasis
from models.surface import Direction
from utils.helpers import make_rng
from utils.logger import get_logger

logger = get_logger('Cohomology')

DEFAULTS = {
    'n_candidates': 200,
    'gap_threshold_rel': 1e-6,
    'min_gap_ratio': 10.0,
    'max_vanishing_order': 3,
    'regularity_offset': 0.0,
    'small_divisor_rel': 1e-13,
    'average_tol': 1e-10,
    'lsq_rcond': 1e-8,
}


@dataclass(frozen=True, eq=False)
class _GalerkinSystem:
    """SVD of the weighted Lie derivative, bound to the eigenbasis it was built on."""
    key: Tuple
    distributions: DistributionBasis
    basis: SpectralBasis
    x_fields: np.ndarray
    weights_s: np.ndarray
    weights_s1: np.ndarray
    n_modes: int


@dataclass(frozen=True, eq=False)
class _LeastSquares:
    """Truncated SVD of the weighted pointwise X_xi on modes 1..n-1, optionally constrained."""
    left: np.ndarray
    sigma: np.ndarray
    right: np.ndarray
    rank: int


class CohomologySolver:
    """
    Solver for the cohomological equation in a fixed direction.

    Features:
    - Closed-form Fourier solve on the torus with small-divisor checks
    - Invariant distributions by singular-value analysis
    - Solutions vanishing to a given order at the cone points
    - Measured a priori constants
    """

    def __init__(self, grid: Grid, direction: Direction, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the solver.

        Args:
            grid: Grid of the surface
            direction: Flow direction xi
            config: The 'cohomology' config section
        """
        self.grid = grid
        self.direction = direction
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.apriori_constants: Dict[Tuple[float, float], float] = {}

        self._lock = threading.Lock()
        self._systems: Dict[Tuple, _GalerkinSystem] = {}
        self._least_squares: Dict[Tuple, _LeastSquares] = {}

    # torus

    def _solve_torus(self, f: Field, t: Optional[float]) -> CohomSolution:
        grid = self.grid
        d = self.direction
        n = grid.resolution
        kx, ky = grid.wavenumbers()
        coeffs = grid.fourier(f.values)

        divisor = d.divisor(kx, ky)
        nyquist = (np.abs(kx) == n // 2) | (np.abs(ky) == n // 2)
        nonzero = (kx != 0) | (ky != 0)

        scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
        present = np.abs(coeffs) > self.config['small_divisor_rel'] * max(scale, 1e-300)
        resonant = present & nonzero & ~nyquist & (np.abs(divisor) < d.diophantine_floor)
        if np.any(resonant):
            idx = np.argwhere(resonant)[0]
            m, k = int(kx[tuple(idx[-2:])]), int(ky[tuple(idx[-2:])])
            raise SmallDivisor(
                f"mode ({m}, {k}) has |m xi1 + n xi2| = {abs(d.divisor(m, k)):.3e} "
                f"< diophantine_floor {d.diophantine_floor:.1e}"
            )

        dropped = present & nyquist
        if np.any(dropped):
            energy = float(np.sqrt(np.sum(np.abs(np.where(nyquist, coeffs, 0.0)) ** 2)))
            logger.debug(
                f"Dropped {int(np.count_nonzero(dropped))} Nyquist coefficient(s) of the data "
                f"(L2 energy {energy:.3e}); they stay in the residual"
            )

        solvable = nonzero & ~nyquist & (np.abs(divisor) >= d.diophantine_floor)
        safe = np.where(solvable, 2j * np.pi * divisor, 1.0)
        u_hat = np.where(solvable, coeffs / safe, 0.0)
        u = Field(grid, grid.from_fourier(u_hat))
        counterterms = coeffs[..., 0, 0].real[None]

        one = Field.constant(grid, 1.0)
        residual = (grid.lie_derivative(u, d) + counterterms[0][:, :, None, None, None] - f).l2_norm()
        norm = friedrichs_norm(u, t) if t is not None else None
        logger.debug(f"Torus cohomological solve: residual {residual:.3e}, mean {counterterms.ravel()}")
        return CohomSolution(u=u, counterterms=counterterms, dual_fields=(one,), residual=residual, norm=norm)

    # origamis

    def _basis_for(self, n_candidates: int) -> Tuple[SpectralBasis, int]:
        grid = self.grid
        basis = grid.build_basis(n_candidates + 1)
        eigenvalues = basis.eigenvalues[:n_candidates]
        # do not split a degenerate eigenspace
        n = n_candidates
        while n > 1 and n < basis.n_modes and abs(basis.eigenvalues[n] - basis.eigenvalues[n - 1]) <= 1e-8 * (1.0 + eigenvalues[n - 1]):
            n -= 1
        if n < n_candidates:
            logger.debug(f"Truncation moved from {n_candidates} to {n} modes to keep eigenspaces whole")
        return basis, n

    def _system(self, s: float, n_candidates: Optional[int] = None,
                gap_threshold: Optional[float] = None) -> _GalerkinSystem:
        n_candidates = int(n_candidates or self.config['n_candidates'])
        basis, n = self._basis_for(n_candidates)
        key = (float(s), n_candidates, gap_threshold, self.grid.basis_version)
        with self._lock:
            cached = self._systems.get(key)
        if cached is not None and cached.basis is basis:
            return cached

        grid = self.grid
        d = self.direction
        fields = basis.fields[:n]
        lam = basis.eigenvalues[:n]

        x_fields = d.xi[0] * grid.derivative(fields, 'x') + d.xi[1] * grid.derivative(fields, 'y')
        galerkin = (np.tensordot(x_fields, fields, axes=([1, 2, 3], [1, 2, 3])) * grid.weight).T

        w_s = (1.0 + lam) ** (s / 2.0)
        w_s1 = (1.0 + lam) ** ((s + 1.0) / 2.0)
        weighted = w_s[:, None] * galerkin / w_s1[None, :]

        u_mat, sigma, _ = scipy.linalg.svd(weighted)
        threshold = gap_threshold if gap_threshold is not None else self.config['gap_threshold_rel'] * sigma[0]
        kept = int(np.sum(sigma >= threshold))
        null = n - kept

        gap_ratio = float('inf')
        if 0 < null and kept > 0:
            largest_null = sigma[kept]
            gap_ratio = float(sigma[kept - 1] / largest_null) if largest_null > 0 else float('inf')
            if gap_ratio < self.config['min_gap_ratio']:
                logger.error(f"No spectral gap at s={s}: ratio {gap_ratio:.3f} around threshold {threshold:.3e}")
                raise NoSpectralGap(
                    f"singular values show no gap at threshold {threshold:.3e} "
                    f"(ratio {gap_ratio:.3f} < {self.config['min_gap_ratio']})",
                    spectrum=sigma,
                )

        u0 = u_mat[:, kept:]
        # deterministic sign: largest entry positive
        for i in range(u0.shape[1]):
            j = np.argmax(np.abs(u0[:, i]))
            if u0[j, i] < 0:
                u0[:, i] = -u0[:, i]

        dual = tuple(Field(grid, np.tensordot(u0[:, i] / w_s, fields, axes=([0], [0]))[None, None])
                     for i in range(u0.shape[1]))
        distributions = DistributionBasis(
            vectors=u0,
            singular_values=sigma[kept:],
            spectrum=sigma,
            s=float(s),
            weights=w_s,
            dual_fields=dual,
            gap_ratio=gap_ratio,
            threshold=float(threshold),
        )
        system = _GalerkinSystem(
            key=key,
            distributions=distributions,
            basis=basis,
            x_fields=x_fields,
            weights_s=w_s,
            weights_s1=w_s1,
            n_modes=n,
        )
        logger.info(
            f"Invariant distributions at s={s}: h={null} of {n} candidates "
            f"(threshold {threshold:.3e}, gap ratio {gap_ratio:.3g})"
        )
        with self._lock:
            self._systems[key] = system
        return system

    def _project(self, system: _GalerkinSystem, values: np.ndarray) -> np.ndarray:
        fields = system.basis.fields[:system.n_modes]
        return np.tensordot(values, fields, axes=([-3, -2, -1], [1, 2, 3])) * self.grid.weight

    def _factor(self, system: _GalerkinSystem, constraint: Optional[np.ndarray] = None,
                tag: Any = None) -> _LeastSquares:
        """
        Factor the weighted pointwise Lie derivative on eigenmodes 1..n-1.

        Unknowns are y_k = w_s1[k] a_k; with a constraint matrix C (rows acting on
        a), the unknowns are restricted to the null space of C.
        """
        key = system.key + (tag,)
        with self._lock:
            cached = self._least_squares.get(key)
        if cached is not None:
            return cached

        grid = self.grid
        n = system.n_modes
        inv_w = 1.0 / system.weights_s1[1:n]
        columns = system.x_fields[1:n].reshape(n - 1, -1).T * np.sqrt(grid.weight)
        matrix = columns * inv_w[None, :]
        coeff_map = np.diag(inv_w)
        if constraint is not None and constraint.size:
            z = scipy.linalg.null_space(constraint * inv_w[None, :])
            matrix = matrix @ z
            coeff_map = coeff_map @ z

        left, sigma, vt = scipy.linalg.svd(matrix, full_matrices=False)
        keep = sigma > self.config['lsq_rcond'] * sigma[0] if sigma.size and sigma[0] > 0 else np.zeros(sigma.shape, bool)
        factor = _LeastSquares(
            left=left[:, keep],
            sigma=sigma[keep],
            right=coeff_map @ vt[keep].T,
            rank=int(np.count_nonzero(keep)),
        )
        logger.debug(f"Least-squares factor ({tag or 'free'}): rank {factor.rank} of {n - 1} modes")
        with self._lock:
            self._least_squares[key] = factor
        return factor

    def _origami_solve(self, system: _GalerkinSystem, factor: _LeastSquares, f: Field,
                       t: Optional[float], constraint: Optional[np.ndarray] = None) -> CohomSolution:
        grid = self.grid
        dist = system.distributions
        b = self._project(system, f.values) * system.weights_s
        counterterms = np.moveaxis(b @ dist.vectors, -1, 0)

        chi = np.zeros(f.values.shape)
        for c, dual in zip(counterterms, dist.dual_fields):
            chi = chi + c[:, :, None, None, None] * dual.values[0, 0]
        target = f.values - chi

        lead = target.shape[:-3]
        rhs = target.reshape(lead + (-1,)) * np.sqrt(grid.weight)
        a = ((rhs @ factor.left) / factor.sigma) @ factor.right.T
        u = Field(grid, np.tensordot(a, system.basis.fields[1:system.n_modes], axes=([-1], [0])))
        u = u - u.mean()[:, :, None, None, None]

        vanishing_values = None
        if constraint is not None:
            # the conditions evaluated on the unconstrained solution
            free = self._factor(system)
            a_free = ((rhs @ free.left) / free.sigma) @ free.right.T
            vanishing_values = np.moveaxis(a_free @ constraint.T, -1, 0)

        residual = (grid.lie_derivative(u, self.direction) + Field(grid, chi) - f).l2_norm()
        norm = friedrichs_norm(u, t) if t is not None else None
        return CohomSolution(u=u, counterterms=counterterms, dual_fields=dist.dual_fields,
                             residual=residual, norm=norm, vanishing_values=vanishing_values)

    # public operations

    def solve_ce(self, f: Field, s: float = 2.0, t: Optional[float] = None) -> CohomSolution:
        """
        Solve X_xi u + sum_i c_i chi_i = f.

        Args:
            f: Right-hand side (any shape)
            s: Sobolev order of the data
            t: Sobolev order of the solution; when given, ||u||_{H^t} is reported

        Returns:
            CohomSolution with zero-average u and the residual measured on the grid

        Raises:
            SmallDivisor: Torus mode present in f with a divisor below the floor
            NoSpectralGap: Origami distributions are not separated
        """
        if self.grid.is_torus:
            return self._solve_torus(f, t)

        system = self._system(s)
        solution = self._origami_solve(system, self._factor(system), f, t)
        logger.debug(f"Origami cohomological solve at s={s}: residual {solution.residual:.3e}")
        return solution

    def invariant_distributions(self, s: float, n_candidates: Optional[int] = None,
                                gap_threshold: Optional[float] = None) -> DistributionBasis:
        """
        Invariant distributions of X_xi in H^-s.

        Args:
            s: Sobolev order
            n_candidates: Size of the spectral truncation
            gap_threshold: Absolute singular-value threshold (default relative to sigma_max)

        Returns:
            DistributionBasis

        Raises:
            NoSpectralGap: Kept and rejected singular values are not separated
        """
        return self._system(s, n_candidates, gap_threshold).distributions

    def distribution_values(self, f: Field, s: float) -> np.ndarray:
        """
        D_i(f) for every invariant distribution at order s.

        Returns:
            np.ndarray of shape (count,) + f.shape
        """
        if self.grid.is_torus:
            return np.asarray(f.mean())[None]
        system = self._system(s)
        return system.distributions.apply(self._project(system, f.values))

    def _cone_constraints(self, system: _GalerkinSystem, order: int) -> Tuple[np.ndarray, List[Tuple[int, int, int]]]:
        """
        Rows a -> d^alpha u(node) for u = sum_{k>=1} a_k e_k at every cone node copy.
        """
        grid = self.grid
        surface = grid.surface
        fields = system.basis.fields[1:system.n_modes]

        rows, labels = [], []
        for total in range(order + 1):
            for alpha in range(total + 1):
                beta = total - alpha
                deriv = fields
                if not total:
                    # u is stored with its mean removed
                    deriv = fields - (np.sum(fields, axis=(1, 2, 3)) * grid.weight / surface.area)[:, None, None, None]
                if alpha:
                    deriv = grid.derivative(deriv, 'x', alpha)
                if beta:
                    deriv = grid.derivative(deriv, 'y', beta)
                for cp in surface.cone_points:
                    for sq in surface.vertex_squares[cp.vertex]:
                        rows.append(deriv[:, sq, 0, 0])
                        labels.append((sq, alpha, beta))
        return np.array(rows), labels

    def solve_ce_vanishing(self, f: Field, order: int = 0, s: float = 2.0) -> CohomSolution:
        """
        Solve the cohomological equation with u and its derivatives up to
        `order` vanishing at the cone points.

        The vanishing conditions restrict u to a subspace; the counterterms
        are the distribution counterterms of f, one block per distribution.

        Args:
            f: Right-hand side
            order: Vanishing order k
            s: Sobolev order

        Returns:
            CohomSolution with the vanishing defect

        Raises:
            InsufficientRegularity: s too small for order-k evaluation
        """
        offset = self.config['regularity_offset']
        if order > self.config['max_vanishing_order'] or order + 1 + offset >= s:
            raise InsufficientRegularity(
                f"vanishing order {order} needs s > {order + 1 + offset} "
                f"(and order <= {self.config['max_vanishing_order']}), got s={s}"
            )
        grid = self.grid
        if not grid.surface.cone_points:
            return self.solve_ce(f, s)

        system = self._system(s)
        constraint, labels = self._cone_constraints(system, order)
        factor = self._factor(system, constraint, tag=('vanishing', order))
        solution = self._origami_solve(system, factor, f, None, constraint)

        defect = 0.0
        for sq, alpha, beta in labels:
            du = grid.partial(solution.u, alpha, beta)
            defect = max(defect, float(np.max(np.abs(du.values[:, :, sq, 0, 0]))))
        logger.info(
            f"Vanishing solve (order {order}): {len(labels)} condition(s), "
            f"defect {defect:.3e}, residual {solution.residual:.3e}"
        )
        return dataclasses.replace(solution, vanishing_defect=defect)

    def random_samples(self, count: int, seed: int, band: Optional[int] = None) -> List[Field]:
        """
        Random zero-average band-limited fields.

        Args:
            count: Number of samples
            seed: RNG seed
            band: Torus: max |m|, |n|; origami: number of eigenmodes used

        Returns:
            list of scalar Fields
        """
        grid = self.grid
        rng = make_rng(seed)
        samples = []
        if grid.is_torus:
            band = band or max(grid.resolution // 8, 1)
            kx, ky = grid.wavenumbers()
            mask = (np.abs(kx) <= band) & (np.abs(ky) <= band) & ((kx != 0) | (ky != 0))
            for _ in range(count):
                spec = (rng.standard_normal(kx.shape) + 1j * rng.standard_normal(kx.shape)) * mask
                values = np.fft.ifft2(spec).real
                values = values / max(np.max(np.abs(values)), 1e-300)
                samples.append(Field(grid, values[None, None, None]))
        else:
            band = min(band or 40, grid.basis.n_modes)
            for _ in range(count):
                coeffs = np.zeros(grid.basis.n_modes)
                coeffs[1:band] = rng.standard_normal(band - 1)
                samples.append(Field(grid, grid.reconstruct(coeffs)[None, None]))
        return samples

    def apriori_probe(self, s: float, t: float, samples: Union[int, Sequence[Field]], seed: int = 0) -> float:
        """
        Measured constant max ||v||_{H^t} / ||X_xi v||_{H^s} over samples.

        Args:
            s: Order on the data side
            t: Order on the solution side
            samples: Fields with zero average, or a count of random samples
            seed: RNG seed for random samples

        Returns:
            float

        Raises:
            NonZeroAverage: A sample has nonzero mean
        """
        if isinstance(samples, int):
            samples = self.random_samples(samples, seed)

        best = 0.0
        for i, v in enumerate(samples):
            mean = float(np.max(np.abs(v.mean())))
            if mean > self.config['average_tol'] * max(v.l2_norm(), 1.0):
                raise NonZeroAverage(f"sample {i} has mean {mean:.3e}; the a priori estimate needs zero average")
            xv = self.grid.lie_derivative(v, self.direction)
            denom = friedrichs_norm(xv, s)
            if denom == 0.0:
                continue
            best = max(best, friedrichs_norm(v, t) / denom)

        self.apriori_constants[(float(s), float(t))] = best
        logger.info(f"A priori constant C(s={s}, t={t}) measured at {best:.4e} over {len(samples)} sample(s)")
        return best


def solve_ce(grid: Grid, d: Direction, f: Field, s: float = 2.0, t: Optional[float] = None,
             config: Optional[Dict[str, Any]] = None) -> CohomSolution:
    """Solve X_xi u + sum c_i chi_i = f (see CohomologySolver.solve_ce)."""
    return CohomologySolver(grid, d, config).solve_ce(f, s, t)


def invariant_distributions(grid: Grid, d: Direction, s: float, n_candidates: Optional[int] = None,
                            gap_threshold: Optional[float] = None,
                            config: Optional[Dict[str, Any]] = None) -> DistributionBasis:
    """Invariant distributions of X_xi (see CohomologySolver.invariant_distributions)."""
    return CohomologySolver(grid, d, config).invariant_distributions(s, n_candidates, gap_threshold)


def solve_ce_vanishing(grid: Grid, d: Direction, f: Field, order: int = 0, s: float = 2.0,
                       config: Optional[Dict[str, Any]] = None) -> CohomSolution:
    """Cohomological solve vanishing at the cone points (see CohomologySolver.solve_ce_vanishing)."""
    return CohomologySolver(grid, d, config).solve_ce_vanishing(f, order, s)


def apriori_probe(grid: Grid, d: Direction, s: float, t: float, samples, seed: int = 0,
                  config: Optional[Dict[str, Any]] = None) -> float:
    """Measured a priori constant (see CohomologySolver.apriori_probe)."""
    return CohomologySolver(grid, d, config).apriori_probe(s, t, samples, seed)
