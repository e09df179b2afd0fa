# SPDX-License-Identifier: MIT

from __future__ import annotations

from typing import Any, Dict, Union

import numpy as np
import numpy.typing as npt

import hyperbench.data

from hyperbench.dataset import CompressedVector
from hyperbench.errors import ConfigurationError, InvalidMatrixError, ShapeError


FloatArray = npt.NDArray[np.float64]
State = Dict[str, Union[np.ndarray, str, float, int, bool]]  # type: ignore[type-arg]


def dims_for_rate(n_bands: int, rate: int) -> int:
    '''
    Latent dimension for a compression rate (percent of dimensions removed)

    d = max(1, round(n * (1 - rate / 100))), rounding halves up.
    '''
    if isinstance(rate, bool) or int(rate) != rate or not 1 <= rate <= 99:
        raise ConfigurationError('rate', f'expecting an integer percent in [1, 99], got {rate!r}')
    if n_bands < 1:
        raise ConfigurationError('n_bands', f'expecting at least 1 band, got {n_bands}')
    # integer form of floor(n * (100 - rate) / 100 + 1/2)
    return max(1, (n_bands * (100 - int(rate)) * 2 + 100) // 200)


def check_samples(x: npt.ArrayLike, n_features: int, what: str = 'input') -> FloatArray:
    '''
    Validates an N x n_features batch (a single vector is promoted to a batch)
    '''
    array = np.asarray(x, dtype=np.float64)
    if array.ndim == 1:
        array = array[None, :]
    if array.ndim != 2 or array.shape[1] != n_features:
        raise ShapeError(f'Expecting {what} vectors of length {n_features}, got shape {np.shape(x)}')
    if not np.isfinite(array).all():
        raise InvalidMatrixError(f'The {what} holds non-finite values')
    return array


class Compressor():
    '''
    Fitted compression model: encode maps spectra to d-dimensional vectors,
    decode maps them back to reflectance spectra

    Models are immutable once fitted. Subclasses implement ``_encode``,
    ``_decode``, ``state`` and ``from_state``.
    '''
    METHOD: int = -1

    def __init__(self, n_bands: int, d: int) -> None:
        if not 1 <= d <= n_bands:
            raise ShapeError(f'Expecting 1 <= d <= {n_bands}, got d={d}')
        self._n_bands = n_bands
        self._d = d
        self.fit_seconds = 0.0

    @property
    def method(self) -> str:
        return hyperbench.data.Methods.get_name(self.METHOD)

    @property
    def n_bands(self) -> int:
        return self._n_bands

    @property
    def d(self) -> int:
        return self._d

    def __repr__(self) -> str:
        return f'{self.__class__.__name__}(n={self._n_bands}, d={self._d})'

    def _encode(self, x: FloatArray) -> FloatArray:
        raise NotImplementedError

    def _decode(self, z: FloatArray) -> FloatArray:
        raise NotImplementedError

    def encode(self, x: npt.ArrayLike) -> FloatArray:
        single = np.ndim(x) == 1
        z = self._encode(check_samples(x, self._n_bands, 'spectrum'))
        return z[0] if single else z

    def decode(self, z: npt.ArrayLike, clip: bool = True) -> FloatArray:
        single = np.ndim(z) == 1
        x = self._decode(check_samples(z, self._d, 'encoded'))
        if clip:
            x = np.clip(x, 0.0, 1.0)
        return x[0] if single else x

    def reconstruct(self, x: npt.ArrayLike, clip: bool = True) -> FloatArray:
        return self.decode(self.encode(x), clip=clip)

    def compress(self, x: npt.ArrayLike, rate: int) -> CompressedVector:
        return CompressedVector(self.encode(np.asarray(x, dtype=np.float64).reshape(-1)), self.method, rate)

    def state(self) -> State:
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> Compressor:
        raise NotImplementedError
