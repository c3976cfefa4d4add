"""
Friedrichs Laplacian eigenbasis.

Torus: closed-form Fourier eigenfields. Origamis: generalized eigenproblem
K x = lambda M x for the gluing-aware 5-point graph Laplacian, with the k+1
copies of every cone vertex merged into one degree of freedom.
"""

from typing import List, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from engine.errors import SolverFailure
from models.field import SpectralBasis
from models.surface import TranslationSurface
from utils.logger import get_logger

logger = get_logger('Basis')

# Shift for shift-invert mode; K + M is positive definite
EIGSH_SIGMA = -1.0


def _torus_modes(n_modes: int, resolution: int) -> List[Tuple[int, int, str]]:
    half = resolution // 2
    pairs = [
        (m, n) for m in range(0, half) for n in range(-half + 1, half)
        if m > 0 or n > 0
    ]
    pairs.sort(key=lambda mn: (mn[0] ** 2 + mn[1] ** 2, mn[0], mn[1]))
    modes = [(0, 0, 'const')]
    for m, n in pairs:
        modes.append((m, n, 'cos'))
        modes.append((m, n, 'sin'))
        if len(modes) >= n_modes:
            break
    if len(modes) < n_modes:
        raise ValueError(f"torus at N={resolution} resolves only {len(modes)} modes, requested {n_modes}")
    return modes[:n_modes]


def torus_eigenbasis(n_modes: int, resolution: int) -> SpectralBasis:
    """
    Closed-form eigenbasis of the flat unit torus.

    Eigenvalues 4 pi^2 (m^2 + n^2) with eigenfields sqrt(2) cos / sin of
    2 pi (m x + n y), ordered by eigenvalue, then (m, n), cos before sin.

    Args:
        n_modes: Number of modes
        resolution: Nodes per side

    Returns:
        SpectralBasis
    """
    modes = _torus_modes(n_modes, resolution)
    axis = np.arange(resolution) / resolution
    x, y = np.meshgrid(axis, axis, indexing='ij')

    eigenvalues = np.empty(n_modes)
    fields = np.empty((n_modes, 1, resolution, resolution))
    for i, (m, n, kind) in enumerate(modes):
        eigenvalues[i] = 4.0 * np.pi ** 2 * (m * m + n * n)
        phase = 2.0 * np.pi * (m * x + n * y)
        if kind == 'const':
            fields[i, 0] = 1.0
        elif kind == 'cos':
            fields[i, 0] = np.sqrt(2.0) * np.cos(phase)
        else:
            fields[i, 0] = np.sqrt(2.0) * np.sin(phase)

    logger.debug(f"Torus eigenbasis: {n_modes} modes, lambda_max={eigenvalues[-1]:.3f}")
    return SpectralBasis(eigenvalues=eigenvalues, fields=fields, labels=tuple(modes))


def dof_map(surface: TranslationSurface, resolution: int) -> np.ndarray:
    """
    Degree-of-freedom index of every node, shape (S, N, N).

    Bottom-left corner nodes of squares sharing a cone vertex share one index.
    """
    n = resolution
    node_ids = np.arange(surface.n_squares * n * n).reshape(surface.n_squares, n, n)
    merged = node_ids.copy()
    for squares in surface.vertex_squares:
        if len(squares) > 1:
            first = node_ids[squares[0], 0, 0]
            for s in squares[1:]:
                merged[s, 0, 0] = first
    _, dof = np.unique(merged.ravel(), return_inverse=True)
    return dof.reshape(merged.shape)


def assemble_laplacian(surface: TranslationSurface, resolution: int) -> Tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
    """
    Assemble the stiffness and lumped mass matrices.

    Args:
        surface: Translation surface
        resolution: Nodes per square side

    Returns:
        (K, M, dof): graph Laplacian D - W, diagonal mass copies/N^2, node->dof map
    """
    n = resolution
    dof = dof_map(surface, n)
    n_dof = int(dof.max()) + 1
    h = np.asarray(surface.h_perm)
    v = np.asarray(surface.v_perm)

    sq, ix, iy = np.meshgrid(np.arange(surface.n_squares), np.arange(n), np.arange(n), indexing='ij')
    last_x = ix == n - 1
    last_y = iy == n - 1

    right = dof[np.where(last_x, h[sq], sq), np.where(last_x, 0, ix + 1), iy]
    up = dof[np.where(last_y, v[sq], sq), ix, np.where(last_y, 0, iy + 1)]

    rows = np.concatenate([dof.ravel(), dof.ravel()])
    cols = np.concatenate([right.ravel(), up.ravel()])
    w = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_dof, n_dof)).tocsr()
    w = w + w.T
    degree = np.asarray(w.sum(axis=1)).ravel()
    k = (sp.diags(degree) - w).tocsr()

    copies = np.bincount(dof.ravel(), minlength=n_dof).astype(float)
    m = sp.diags(copies / n ** 2).tocsr()
    return k, m, dof


def origami_eigenbasis(surface: TranslationSurface, n_modes: int, resolution: int) -> SpectralBasis:
    """
    Smallest n_modes eigenpairs of the discrete Friedrichs Laplacian.

    Args:
        surface: Translation surface
        n_modes: Number of eigenpairs
        resolution: Nodes per square side

    Returns:
        SpectralBasis with eigenfields orthonormal for the node quadrature

    Raises:
        SolverFailure: If ARPACK does not converge
    """
    k, m, dof = assemble_laplacian(surface, resolution)
    n_dof = k.shape[0]
    if n_modes >= n_dof:
        raise ValueError(f"n_modes={n_modes} exceeds the {n_dof - 1} available discrete modes")

    logger.info(f"Solving eigenproblem: {n_dof} dofs, {n_modes} modes ({surface.name}, N={resolution})")
    try:
        eigenvalues, vectors = eigsh(k, k=n_modes, M=m, sigma=EIGSH_SIGMA, which='LM')
    except (ArpackNoConvergence, ArpackError) as e:
        logger.error(f"Eigensolver failed: {e}")
        raise SolverFailure(f"eigsh did not converge for {n_modes} modes: {e}")

    order = np.argsort(eigenvalues)
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]

    # constant ground state, then M-orthonormalize the rest against it
    copies = m.diagonal() * resolution ** 2
    vectors[:, 0] = 1.0 / np.sqrt(surface.area)
    eigenvalues[0] = 0.0
    gram = vectors.T @ (m @ vectors)
    chol = scipy.linalg.cholesky(gram, lower=True)
    vectors = scipy.linalg.solve_triangular(chol, vectors.T, lower=True).T
    eigenvalues = np.maximum(eigenvalues, 0.0)

    fields = vectors[dof.ravel(), :].T.reshape((n_modes,) + dof.shape)
    logger.debug(
        f"Eigenbasis ready: lambda_1={eigenvalues[1] if n_modes > 1 else 0.0:.4f}, "
        f"lambda_max={eigenvalues[-1]:.3f}, merged copies {int(copies.max())}"
    )
    return SpectralBasis(eigenvalues=eigenvalues, fields=fields)


def laplacian_eigenbasis(surface: TranslationSurface, n_modes: int, resolution: int) -> SpectralBasis:
    """
    Friedrichs Laplacian eigenbasis of a surface.

    Args:
        surface: Translation surface
        n_modes: Number of modes
        resolution: Nodes per square side (>= 16)

    Returns:
        SpectralBasis (lambda_0 = 0 with constant e_0)
    """
    if resolution < 16:
        raise ValueError(f"eigenbasis needs resolution >= 16, got {resolution}")
    if surface.is_torus:
        return torus_eigenbasis(n_modes, resolution)
    return origami_eigenbasis(surface, n_modes, resolution)
