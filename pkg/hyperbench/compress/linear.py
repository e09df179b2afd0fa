# SPDX-License-Identifier: MIT

from __future__ import annotations

import dataclasses
import logging
import warnings

from typing import Any, Dict, Optional

import numpy as np
import numpy.typing as npt

import hyperbench.linalg

from hyperbench.compress.base import Compressor, FloatArray, State, check_samples
from hyperbench.data import Methods
from hyperbench.errors import ConfigurationError, ConvergenceWarning, RankWarning, ShapeError, SingularMatrixError


_logger = logging.getLogger(__name__)

# eigenvalues at or below this are treated as null directions
EIGEN_FLOOR = 1e-10
# rows per kernel block when encoding with KPCA
KERNEL_BLOCK = 4096
# z-score a component needs to count as non-Gaussian
GAUSSIAN_Z = 4.5


def _check_d(d: int, limit: int, what: str) -> None:
    if d < 1 or d > limit:
        raise ShapeError(f'Expecting 1 <= d <= {limit} ({what}), got d={d}')


# PCA


class PcaModel(Compressor):
    METHOD = Methods.PCA

    def __init__(self, mean: FloatArray, basis: FloatArray, eigenvalues: FloatArray) -> None:
        super().__init__(basis.shape[0], basis.shape[1])
        self._mean = mean
        self._basis = basis
        self._eigenvalues = eigenvalues

    @property
    def mean(self) -> FloatArray:
        return self._mean

    @property
    def basis(self) -> FloatArray:
        return self._basis

    @property
    def eigenvalues(self) -> FloatArray:
        return self._eigenvalues

    def _encode(self, x: FloatArray) -> FloatArray:
        return np.asarray((x - self._mean) @ self._basis)

    def _decode(self, z: FloatArray) -> FloatArray:
        return np.asarray(z @ self._basis.T + self._mean)

    def state(self) -> State:
        return {'mean': self._mean, 'basis': self._basis, 'eigenvalues': self._eigenvalues}

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> PcaModel:
        return cls(state['mean'], state['basis'], state['eigenvalues'])


def pca_fit(train: npt.ArrayLike, d: int) -> PcaModel:
    '''
    Keeps the top-d eigenvectors of the training covariance
    '''
    x = hyperbench.linalg.as_matrix(train, 'training set')
    _check_d(d, x.shape[1], 'band count')
    cov, mean = hyperbench.linalg.covariance(x)
    values, vectors = hyperbench.linalg.sym_eigen(cov)
    return PcaModel(mean, np.ascontiguousarray(vectors[:, :d]), values)


# KPCA


@dataclasses.dataclass(frozen=True)
class KpcaConfig():
    degree: int = 3
    offset: float = 1.0
    # None selects 1 / n
    gamma: Optional[float] = None
    max_anchors: int = 2000
    ridge: float = 1e-6

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.degree < 1:
            raise ConfigurationError('degree', f'expecting a positive integer, got {self.degree}')
        if self.offset < 0:
            raise ConfigurationError('offset', f'expecting a nonnegative value, got {self.offset}')
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigurationError('gamma', f'expecting a positive value, got {self.gamma}')
        if self.max_anchors < 1:
            raise ConfigurationError('max_anchors', f'expecting a positive count, got {self.max_anchors}')
        if self.ridge < 0:
            raise ConfigurationError('ridge', f'expecting a nonnegative value, got {self.ridge}')


def polynomial_kernel(x: npt.ArrayLike, y: npt.ArrayLike, gamma: float, offset: float, degree: int) -> FloatArray:
    '''
    k(x, y) = (gamma * x . y + offset) ** degree, for vectors or row batches
    '''
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    return np.asarray((gamma * (a @ b.T) + offset) ** degree)


class KpcaModel(Compressor):
    METHOD = Methods.KPCA

    def __init__(
        self,
        anchors: FloatArray,
        alphas: FloatArray,
        eigenvalues: FloatArray,
        column_means: FloatArray,
        grand_mean: float,
        preimage: FloatArray,
        intercept: FloatArray,
        gamma: float,
        offset: float,
        degree: int,
    ) -> None:
        super().__init__(anchors.shape[1], alphas.shape[1])
        self._anchors = anchors
        self._alphas = alphas
        self._eigenvalues = eigenvalues
        self._column_means = column_means
        self._grand_mean = grand_mean
        self._preimage = preimage
        self._intercept = intercept
        self._gamma = gamma
        self._offset = offset
        self._degree = degree

    @property
    def anchors(self) -> FloatArray:
        return self._anchors

    @property
    def alphas(self) -> FloatArray:
        return self._alphas

    @property
    def eigenvalues(self) -> FloatArray:
        return self._eigenvalues

    @property
    def gamma(self) -> float:
        return self._gamma

    def kernel(self, x: npt.ArrayLike, y: npt.ArrayLike) -> FloatArray:
        return polynomial_kernel(x, y, self._gamma, self._offset, self._degree)

    def centered_kernel(self, x: FloatArray) -> FloatArray:
        '''
        Kernel rows against the anchors, centered in feature space
        '''
        k = self.kernel(x, self._anchors)
        return np.asarray(k - k.mean(axis=1, keepdims=True) - self._column_means + self._grand_mean)

    def _encode(self, x: FloatArray) -> FloatArray:
        blocks = [
            self.centered_kernel(x[start:start + KERNEL_BLOCK]) @ self._alphas
            for start in range(0, x.shape[0], KERNEL_BLOCK)
        ]
        return np.vstack(blocks) if blocks else np.zeros((0, self.d))

    def _decode(self, z: FloatArray) -> FloatArray:
        return np.asarray(z @ self._preimage + self._intercept)

    def state(self) -> State:
        return {
            'anchors': self._anchors,
            'alphas': self._alphas,
            'eigenvalues': self._eigenvalues,
            'column_means': self._column_means,
            'grand_mean': self._grand_mean,
            'preimage': self._preimage,
            'intercept': self._intercept,
            'gamma': self._gamma,
            'offset': self._offset,
            'degree': self._degree,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> KpcaModel:
        return cls(
            state['anchors'],
            state['alphas'],
            state['eigenvalues'],
            state['column_means'],
            float(state['grand_mean']),
            state['preimage'],
            state['intercept'],
            float(state['gamma']),
            float(state['offset']),
            int(state['degree']),
        )


def kpca_fit(train: npt.ArrayLike, d: int, cfg: KpcaConfig = KpcaConfig(), *, seed: int = 0) -> KpcaModel:
    '''
    Polynomial-kernel PCA on a seeded subsample of anchor points

    Decoding uses a linear pre-image map fitted by ridge regression from the
    anchor encodings to the (centered) anchor spectra.
    '''
    x = hyperbench.linalg.as_matrix(train, 'training set')
    n_samples, n_bands = x.shape
    if n_samples > cfg.max_anchors:
        rng = np.random.default_rng(seed)
        anchors = x[np.sort(rng.choice(n_samples, cfg.max_anchors, replace=False))]
    else:
        anchors = x.copy()
    _check_d(d, min(anchors.shape[0], n_bands), 'anchor count')

    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / n_bands
    k = polynomial_kernel(anchors, anchors, gamma, cfg.offset, cfg.degree)
    column_means = k.mean(axis=0)
    grand_mean = float(column_means.mean())
    centered = k - column_means[None, :] - column_means[:, None] + grand_mean
    values, vectors = hyperbench.linalg.sym_eigen((centered + centered.T) / 2)

    top = values[:d]
    scale = max(float(np.max(np.abs(values))), 1.0) * EIGEN_FLOOR
    alphas = np.zeros((anchors.shape[0], d))
    keep = top > scale
    alphas[:, keep] = vectors[:, :d][:, keep] / np.sqrt(top[keep])
    if not keep.all():
        _logger.debug('kpca: %d of %d components have a null eigenvalue', int(np.sum(~keep)), d)

    encoded = np.asarray(centered @ alphas)
    intercept = anchors.mean(axis=0)
    preimage = hyperbench.linalg.solve_least_squares(encoded, anchors - intercept, ridge=cfg.ridge)

    return KpcaModel(
        anchors, alphas, values, column_means, grand_mean, preimage, intercept,
        gamma, cfg.offset, cfg.degree,
    )


# ICA


@dataclasses.dataclass(frozen=True)
class IcaConfig():
    max_iter: int = 200
    tol: float = 1e-6

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.max_iter < 1:
            raise ConfigurationError('max_iter', f'expecting a positive count, got {self.max_iter}')
        if not self.tol > 0:
            raise ConfigurationError('tol', f'expecting a positive value, got {self.tol}')


class IcaModel(Compressor):
    METHOD = Methods.ICA

    def __init__(
        self,
        mean: FloatArray,
        eigenvectors: FloatArray,
        eigenvalues: FloatArray,
        rotation: FloatArray,
        converged: bool,
        n_iter: int,
    ) -> None:
        super().__init__(eigenvectors.shape[0], rotation.shape[0])
        self._mean = mean
        self._eigenvectors = eigenvectors
        self._eigenvalues = eigenvalues
        self._rotation = rotation
        self._converged = converged
        self._n_iter = n_iter
        self._whitening = (eigenvectors / np.sqrt(eigenvalues)).T
        self._unmixing = rotation @ self._whitening
        self._mixing = (eigenvectors * np.sqrt(eigenvalues)) @ rotation.T

    @property
    def whitening(self) -> FloatArray:
        '''
        r x n map from centered spectra to white coordinates
        '''
        return np.asarray(self._whitening)

    @property
    def rotation(self) -> FloatArray:
        '''
        Orthonormal d x r unmixing matrix in the white space
        '''
        return self._rotation

    @property
    def unmixing(self) -> FloatArray:
        return np.asarray(self._unmixing)

    @property
    def mixing(self) -> FloatArray:
        return np.asarray(self._mixing)

    @property
    def converged(self) -> bool:
        return self._converged

    @property
    def n_iter(self) -> int:
        return self._n_iter

    def _encode(self, x: FloatArray) -> FloatArray:
        return np.asarray((x - self._mean) @ self._unmixing.T)

    def _decode(self, z: FloatArray) -> FloatArray:
        return np.asarray(z @ self._mixing.T + self._mean)

    def state(self) -> State:
        return {
            'mean': self._mean,
            'eigenvectors': self._eigenvectors,
            'eigenvalues': self._eigenvalues,
            'rotation': self._rotation,
            'converged': self._converged,
            'n_iter': self._n_iter,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> IcaModel:
        return cls(
            state['mean'],
            state['eigenvectors'],
            state['eigenvalues'],
            state['rotation'],
            bool(state['converged']),
            int(state['n_iter']),
        )


def _decorrelate(w: FloatArray) -> FloatArray:
    # W <- (W W^T)^(-1/2) W
    return np.asarray(hyperbench.linalg.inverse_sqrt(w @ w.T) @ w)


def _non_gaussianity(y: FloatArray) -> FloatArray:
    '''
    Per-column z-score of E[y tanh(y)] - E[1 - tanh(y) ** 2], which vanishes for
    a Gaussian with unit variance
    '''
    t = np.tanh(y)
    h = y * t - (1.0 - t ** 2)
    spread = np.maximum(h.std(axis=0), np.finfo(np.float64).tiny)
    return np.asarray(np.abs(h.mean(axis=0)) / spread * np.sqrt(y.shape[0]))


def ica_fit(train: npt.ArrayLike, d: int, cfg: IcaConfig = IcaConfig(), *, seed: int = 0) -> IcaModel:
    '''
    FastICA with symmetric decorrelation and the logcosh contrast (g = tanh)

    The data is whitened onto its top min(d, rank) principal directions first.
    Hitting the iteration cap, or settling on components that are all
    statistically indistinguishable from Gaussian, is reported with a
    ConvergenceWarning and the model keeps ``converged = False``.
    '''
    x = hyperbench.linalg.as_matrix(train, 'training set')
    _check_d(d, x.shape[1], 'band count')
    cov, mean = hyperbench.linalg.covariance(x)
    values, vectors = hyperbench.linalg.sym_eigen(cov)

    rank = int(np.sum(values > EIGEN_FLOOR))
    if rank == 0:
        raise SingularMatrixError('The training set has no variance to unmix')
    if rank < d:
        warnings.warn(RankWarning(f'Whitened rank {rank} is below d={d}, keeping {rank} components'))
    r = min(d, rank)
    eigenvalues = values[:r]
    eigenvectors = np.ascontiguousarray(vectors[:, :r])
    white = (x - mean) @ (eigenvectors / np.sqrt(eigenvalues))

    rng = np.random.default_rng(seed)
    w = _decorrelate(rng.standard_normal((r, r)))
    n_samples = white.shape[0]
    converged = False
    n_iter = cfg.max_iter
    for iteration in range(1, cfg.max_iter + 1):
        projected = np.tanh(white @ w.T)
        derivative = 1.0 - projected ** 2
        w_new = _decorrelate(projected.T @ white / n_samples - derivative.mean(axis=0)[:, None] * w)
        limit = float(np.max(np.abs(np.abs(np.einsum('ij,ij->i', w_new, w)) - 1.0)))
        w = w_new
        if limit < cfg.tol:
            converged = True
            n_iter = iteration
            break

    if not converged:
        warnings.warn(ConvergenceWarning(f'FastICA did not converge after {cfg.max_iter} iterations'))
    elif r > 1 and not np.any(_non_gaussianity(white @ w.T) > GAUSSIAN_Z):
        # every fixed point of Gaussian data is a sampling artifact
        converged = False
        warnings.warn(ConvergenceWarning(
            f'FastICA did not converge: all {r} components are indistinguishable from Gaussian'
        ))
    else:
        _logger.debug('ica: converged after %d iterations', n_iter)

    return IcaModel(mean, eigenvectors, eigenvalues, w, converged, n_iter)
