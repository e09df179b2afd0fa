# SPDX-License-Identifier: MIT

'''
Dense linear-algebra contracts shared by the compressors

Matrices are plain float64 numpy arrays; the functions here validate their
input and fix the conventions (ordering, signs, normalization) the rest of
the package depends on.
'''

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from hyperbench.errors import InvalidMatrixError, ShapeError, SingularMatrixError


Matrix = npt.NDArray[np.float64]

SYMMETRY_TOLERANCE = 1e-9
# reciprocal condition number under which normal equations count as singular
RCOND_LIMIT = 1e-14


def as_matrix(a: npt.ArrayLike, name: str = 'matrix') -> Matrix:
    matrix = np.asarray(a, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ShapeError(f'Expecting a non-empty 2-D {name}, got shape {matrix.shape}')
    if not np.isfinite(matrix).all():
        raise InvalidMatrixError(f'The {name} holds non-finite entries')
    return matrix


def fix_signs(vectors: Matrix) -> Matrix:
    '''
    Flips columns so that each column's largest-magnitude entry is positive
    '''
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return np.asarray(vectors * signs)


def sym_eigen(a: npt.ArrayLike) -> Tuple[npt.NDArray[np.float64], Matrix]:
    '''
    Eigen-decomposition of a symmetric matrix

    Returns the eigenvalues in descending order and the matching orthonormal
    eigenvectors as columns, with deterministic signs.
    '''
    matrix = as_matrix(a)
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidMatrixError(f'Expecting a square matrix, got shape {matrix.shape}')
    scale = max(float(np.max(np.abs(matrix))), np.finfo(np.float64).tiny)
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise InvalidMatrixError(f'Expecting a symmetric matrix (asymmetry {asymmetry:.3g})')

    values, vectors = scipy.linalg.eigh((matrix + matrix.T) / 2)
    order = np.argsort(-values, kind='stable')
    return values[order], fix_signs(vectors[:, order])


def covariance(x: npt.ArrayLike) -> Tuple[Matrix, npt.NDArray[np.float64]]:
    '''
    Unbiased sample covariance (1 / (N - 1)) and mean of an N x n sample matrix
    '''
    samples = as_matrix(x, 'sample matrix')
    if samples.shape[0] < 2:
        raise ShapeError(f'Expecting at least 2 samples, got {samples.shape[0]}')
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (samples.shape[0] - 1)
    return (cov + cov.T) / 2, mean


def solve_least_squares(a: npt.ArrayLike, b: npt.ArrayLike, ridge: float = 0.0) -> Matrix:
    '''
    Minimizes ||A X - B||_F^2 + ridge ||X||_F^2 through the normal equations
    '''
    lhs = as_matrix(a, 'design matrix')
    rhs = np.asarray(b, dtype=np.float64)
    vector = rhs.ndim == 1
    rhs = as_matrix(rhs.reshape(-1, 1) if vector else rhs, 'target matrix')
    if lhs.shape[0] != rhs.shape[0]:
        raise ShapeError(f'Row mismatch: design has {lhs.shape[0]} rows, target has {rhs.shape[0]}')
    if ridge < 0:
        raise ValueError(f'Invalid ridge: {ridge}')

    gram = lhs.T @ lhs
    if ridge:
        gram[np.diag_indices_from(gram)] += ridge
    rcond = _rcond(gram)
    if rcond < RCOND_LIMIT:
        raise SingularMatrixError(f'Rank-deficient system (reciprocal condition {rcond:.3g}); supply a ridge term')
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError:
        raise SingularMatrixError('Normal equations are not positive definite; supply a ridge term') from None
    solution = scipy.linalg.cho_solve(factor, lhs.T @ rhs)
    return np.asarray(solution[:, 0] if vector else solution)


def _rcond(gram: Matrix) -> float:
    values = np.linalg.eigvalsh(gram)
    largest = float(np.max(np.abs(values)))
    if largest == 0:
        return 0.0
    return float(np.min(values)) / largest


def inverse_sqrt(a: npt.ArrayLike, floor: Optional[float] = None) -> Matrix:
    '''
    Symmetric inverse square root, used for symmetric decorrelation
    '''
    values, vectors = sym_eigen(a)
    if floor is not None:
        values = np.maximum(values, floor)
    if np.any(values <= 0):
        raise SingularMatrixError('Matrix is not positive definite')
    return np.asarray((vectors / np.sqrt(values)) @ vectors.T)
