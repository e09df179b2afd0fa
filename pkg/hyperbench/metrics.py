# SPDX-License-Identifier: MIT

from __future__ import annotations

import dataclasses

from typing import List, Sequence

import numpy as np
import numpy.typing as npt
import scipy.signal

from hyperbench.errors import ConfigurationError, ShapeError


FloatArray = npt.NDArray[np.float64]

SNR_CAP_DB = 120.0
# residual power treated as zero
SNR_FLOOR = 1e-20


@dataclasses.dataclass(frozen=True)
class SgConfig():
    window: int = 11
    poly_order: int = 3

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigurationError('window', f'expecting an odd integer >= 3, got {self.window}')
        if not 0 <= self.poly_order < self.window:
            raise ConfigurationError('poly_order', f'expecting 0 <= order < window ({self.window}), got {self.poly_order}')


def sg_coefficients(cfg: SgConfig = SgConfig()) -> FloatArray:
    '''
    Savitzky-Golay smoothing weights (symmetric, so convolution and dot order agree)
    '''
    return np.asarray(scipy.signal.savgol_coeffs(cfg.window, cfg.poly_order))


def sg_filter(s: npt.ArrayLike, cfg: SgConfig = SgConfig(), *, clip: bool = True) -> FloatArray:
    '''
    Smooths a spectrum (or an N x n batch along its last axis)

    Each value becomes the center of the local least-squares polynomial fit;
    edges are mirror padded.
    '''
    values = np.asarray(s, dtype=np.float64)
    if values.ndim not in (1, 2):
        raise ShapeError(f'Expecting a spectrum or a batch of spectra, got shape {values.shape}')
    if values.shape[-1] < cfg.window:
        raise ShapeError(f'Spectrum length {values.shape[-1]} is shorter than the window ({cfg.window})')
    smoothed = scipy.signal.savgol_filter(values, cfg.window, cfg.poly_order, axis=-1, mode='mirror')
    if clip:
        smoothed = np.clip(smoothed, 0.0, 1.0)
    return np.asarray(smoothed)


def _pair(x: npt.ArrayLike, x_hat: npt.ArrayLike) -> FloatArray:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f'Length mismatch: {a.shape} vs {b.shape}')
    return np.asarray(b - a)


def mse(x: npt.ArrayLike, x_hat: npt.ArrayLike) -> float:
    '''
    Per-band mean squared reconstruction error
    '''
    diff = _pair(x, x_hat)
    if diff.ndim != 1 or diff.size == 0:
        raise ShapeError(f'Expecting two non-empty spectra, got shape {diff.shape}')
    return float(np.mean(diff ** 2))


def mean_mse(x: npt.ArrayLike, x_hat: npt.ArrayLike) -> float:
    '''
    Mean of the per-pixel reconstruction errors of two N x n batches
    '''
    diff = _pair(x, x_hat)
    if diff.ndim != 2 or diff.size == 0:
        raise ShapeError(f'Expecting two non-empty N x n batches, got shape {diff.shape}')
    return float(np.mean(diff ** 2))


def _snr(signal_power: FloatArray, noise_power: FloatArray) -> FloatArray:
    with np.errstate(divide='ignore'):
        snr = 10 * np.log10(signal_power / np.maximum(noise_power, SNR_FLOOR))
    snr = np.where(noise_power < SNR_FLOOR, SNR_CAP_DB, snr)
    return np.asarray(np.minimum(snr, SNR_CAP_DB))


def snr_db(s: npt.ArrayLike, cfg: SgConfig = SgConfig()) -> float:
    '''
    Signal-to-noise ratio against the Savitzky-Golay smoothed reference

    The smoothed spectrum is the signal and the residual the noise; the
    result is capped at SNR_CAP_DB, which is also returned for a zero residual.
    '''
    values = np.asarray(s, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError(f'Expecting a spectrum, got shape {values.shape}')
    return float(snr_batch(values[None, :], cfg)[0])


def snr_batch(x: npt.ArrayLike, cfg: SgConfig = SgConfig()) -> FloatArray:
    values = np.asarray(x, dtype=np.float64)
    smoothed = sg_filter(values, cfg)
    signal = np.mean(smoothed ** 2, axis=-1)
    noise = np.mean((values - smoothed) ** 2, axis=-1)
    return _snr(signal, noise)


def mean_snr_db(x: npt.ArrayLike, cfg: SgConfig = SgConfig()) -> float:
    return float(np.mean(snr_batch(x, cfg)))


def _ratio(numerator: float, denominator: float) -> float:
    # 0/0 counts as 0
    return numerator / denominator if denominator else 0.0


@dataclasses.dataclass(frozen=True)
class ClassScores():
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        precision, recall = self.precision, self.recall
        return _ratio(2 * precision * recall, precision + recall)

    @property
    def support(self) -> int:
        return self.tp + self.fn


@dataclasses.dataclass(frozen=True)
class ScoreReport():
    classes: List[ClassScores]
    # rows are true classes, columns predicted classes
    confusion: npt.NDArray[np.int64]

    @property
    def macro_f1(self) -> float:
        return float(np.mean([c.f1 for c in self.classes])) if self.classes else 0.0

    @property
    def macro_precision(self) -> float:
        return float(np.mean([c.precision for c in self.classes])) if self.classes else 0.0

    @property
    def macro_recall(self) -> float:
        return float(np.mean([c.recall for c in self.classes])) if self.classes else 0.0

    @property
    def accuracy(self) -> float:
        total = int(self.confusion.sum())
        return _ratio(float(np.trace(self.confusion)), total)


def _labels(values: Sequence[int] | npt.ArrayLike, n_classes: int, what: str) -> npt.NDArray[np.int64]:
    array = np.asarray(values, dtype=np.int64).reshape(-1)
    bad = (array < 0) | (array >= n_classes)
    if bad.any():
        raise ValueError(f'{what} label {int(array[bad][0])} out of range for {n_classes} classes')
    return array


def classification_scores(predicted: npt.ArrayLike, truth: npt.ArrayLike, n_classes: int) -> ScoreReport:
    '''
    One-vs-rest precision, recall and f1 per class plus the confusion matrix
    '''
    if n_classes < 1:
        raise ValueError(f'Invalid class count: {n_classes}')
    pred = _labels(predicted, n_classes, 'Predicted')
    true = _labels(truth, n_classes, 'True')
    if pred.size != true.size:
        raise ShapeError(f'Length mismatch: {pred.size} predictions for {true.size} labels')

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)

    classes = []
    for c in range(n_classes):
        tp = int(confusion[c, c])
        classes.append(ClassScores(
            tp=tp,
            fp=int(confusion[:, c].sum()) - tp,
            fn=int(confusion[c, :].sum()) - tp,
        ))
    return ScoreReport(classes, confusion)


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    '''
    The tp / (tp + (fp + fn) / 2) form of the f1-score
    '''
    return _ratio(tp, tp + (fp + fn) / 2)
