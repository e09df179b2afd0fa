# SPDX-License-Identifier: MIT

'''
Benchmark toolkit for hyperspectral pixel compression

Compresses pixel spectra with linear (PCA, kernel PCA, FastICA) and neural
(autoencoder, denoising autoencoder) methods, classifies the compressed
vectors with gradient-boosted trees and sweeps the full methods x rates
grid into CSV reports.
'''

from hyperbench.compress import (
    AeConfig,
    AeModel,
    Compressor,
    IcaModel,
    KpcaModel,
    PcaModel,
    ae_train,
    dims_for_rate,
    fit_compressor,
    ica_fit,
    kpca_fit,
    load_model,
    pca_fit,
    save_model,
)
from hyperbench.dataset import (
    CompressedVector,
    LabeledDataset,
    Spectrum,
    SyntheticConfig,
    extract_rgb,
    generate_synthetic,
    preset_config,
    stratified_split,
)
from hyperbench.errors import (
    ConfigurationError,
    ConvergenceWarning,
    DataWarning,
    DivergenceWarning,
    HyperbenchError,
    HyperbenchWarning,
    InvalidDatasetError,
    ParseError,
    RankWarning,
    ShapeError,
    SingularMatrixError,
    TrainingError,
)
from hyperbench.gbt import GbtConfig, GbtModel, gbt_predict, gbt_train, load_classifier, save_classifier
from hyperbench.io import load_dataset, save_dataset
from hyperbench.metrics import SgConfig, classification_scores, mse, sg_filter, snr_db
from hyperbench.sweep import SweepPlan, SweepResult, classify_dataset, emit_reports, load_plan, run_sweep


__version__ = '0.1.0'

__all__ = [
    'AeConfig',
    'AeModel',
    'CompressedVector',
    'Compressor',
    'ConfigurationError',
    'ConvergenceWarning',
    'DataWarning',
    'DivergenceWarning',
    'GbtConfig',
    'GbtModel',
    'HyperbenchError',
    'HyperbenchWarning',
    'IcaModel',
    'InvalidDatasetError',
    'KpcaModel',
    'LabeledDataset',
    'ParseError',
    'PcaModel',
    'RankWarning',
    'SgConfig',
    'ShapeError',
    'SingularMatrixError',
    'Spectrum',
    'SweepPlan',
    'SweepResult',
    'SyntheticConfig',
    'TrainingError',
    'ae_train',
    'classification_scores',
    'classify_dataset',
    'dims_for_rate',
    'emit_reports',
    'extract_rgb',
    'fit_compressor',
    'gbt_predict',
    'gbt_train',
    'generate_synthetic',
    'ica_fit',
    'kpca_fit',
    'load_classifier',
    'load_dataset',
    'load_model',
    'load_plan',
    'mse',
    'pca_fit',
    'preset_config',
    'run_sweep',
    'save_classifier',
    'save_dataset',
    'sg_filter',
    'snr_db',
    'stratified_split',
]
