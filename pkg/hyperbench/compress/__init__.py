# SPDX-License-Identifier: MIT

from __future__ import annotations

import dataclasses
import logging
import time

from typing import Any, Dict, Optional, Type

import numpy.typing as npt

import hyperbench.io

from hyperbench.compress.base import Compressor, check_samples, dims_for_rate
from hyperbench.compress.linear import (
    IcaConfig,
    IcaModel,
    KpcaConfig,
    KpcaModel,
    PcaModel,
    ica_fit,
    kpca_fit,
    pca_fit,
    polynomial_kernel,
)
from hyperbench.compress.neural import (
    AdamConfig,
    AdamState,
    AeConfig,
    AeModel,
    Mlp,
    TrainingHistory,
    adam_step,
    ae_train,
    init_mlp,
    mlp_backward,
    mlp_forward,
    tune_hidden,
)
from hyperbench.data import HCMP_MAGIC, Methods
from hyperbench.errors import ConfigurationError, ParseError


__all__ = [
    'AdamConfig',
    'AdamState',
    'AeConfig',
    'AeModel',
    'Compressor',
    'IcaConfig',
    'IcaModel',
    'KpcaConfig',
    'KpcaModel',
    'Mlp',
    'PcaModel',
    'TrainingHistory',
    'adam_step',
    'ae_train',
    'check_samples',
    'dims_for_rate',
    'dumps_model',
    'fit_compressor',
    'ica_fit',
    'init_mlp',
    'kpca_fit',
    'load_model',
    'loads_model',
    'mlp_backward',
    'mlp_forward',
    'pca_fit',
    'polynomial_kernel',
    'save_model',
    'tune_hidden',
]

_logger = logging.getLogger(__name__)

_MODELS: Dict[int, Type[Compressor]] = {
    Methods.PCA: PcaModel,
    Methods.KPCA: KpcaModel,
    Methods.ICA: IcaModel,
    Methods.AE: AeModel,
    Methods.DAE: AeModel,
}


def _options(cls: Type[Any], options: Dict[str, Any], method: str) -> Any:
    names = {field.name for field in dataclasses.fields(cls)}
    unknown = sorted(set(options) - names)
    if unknown:
        raise ConfigurationError(unknown[0], f"unknown option for method '{method}'")
    return cls(**options)


def fit_compressor(
    method: str,
    train: npt.ArrayLike,
    d: int,
    *,
    seed: int = 0,
    val: Optional[npt.ArrayLike] = None,
    **options: Any,
) -> Compressor:
    '''
    Fits a compressor by method name (pca, kpca, ica, ae, dae)

    ``options`` are fields of the method's configuration (KpcaConfig,
    IcaConfig or AeConfig); ``val`` is only used by the autoencoders.
    '''
    try:
        code = Methods.get_code(method)
    except KeyError as e:
        raise ConfigurationError('method', str(e.args[0])) from None
    if Methods.get_subdata(code) == 'baseline':
        raise ConfigurationError('method', f"'{method}' is a baseline, not a compression method")

    start = time.perf_counter()
    model: Compressor
    if code == Methods.PCA:
        if options:
            raise ConfigurationError(sorted(options)[0], "unknown option for method 'pca'")
        model = pca_fit(train, d)
    elif code == Methods.KPCA:
        model = kpca_fit(train, d, _options(KpcaConfig, options, method), seed=seed)
    elif code == Methods.ICA:
        model = ica_fit(train, d, _options(IcaConfig, options, method), seed=seed)
    else:
        variant = Methods.get_name(code)
        cfg = _options(AeConfig, dict(options, d=d, variant=variant, seed=seed), method)
        model = ae_train(train, val, cfg)
    model.fit_seconds = time.perf_counter() - start
    _logger.debug('fitted %r in %.3fs', model, model.fit_seconds)
    return model


def dumps_model(model: Compressor) -> bytes:
    return hyperbench.io.dumps_sections(HCMP_MAGIC, model.METHOD, model.state())


def loads_model(data: bytes) -> Compressor:
    code, sections = hyperbench.io.loads_sections(data, HCMP_MAGIC)
    cls = _MODELS.get(code)
    if cls is None:
        raise ParseError(f'Unknown compression method code 0x{code:02x}', offset=len(HCMP_MAGIC))
    try:
        return cls.from_state(sections)
    except KeyError as e:
        raise ParseError(f'Missing section {e.args[0]!r} for {Methods.get_name(code)}') from None


def save_model(model: Compressor, path: hyperbench.io.PathLike) -> None:
    with open(path, 'wb') as f:
        f.write(dumps_model(model))


def load_model(path: hyperbench.io.PathLike) -> Compressor:
    with open(path, 'rb') as f:
        return loads_model(f.read())
