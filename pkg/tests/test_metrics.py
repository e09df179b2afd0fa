# SPDX-License-Identifier: MIT

import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

import hyperbench.linalg
import hyperbench.metrics

from hyperbench.errors import ConfigurationError, ShapeError
from hyperbench.metrics import SgConfig


@pytest.mark.parametrize(
    ('window', 'order', 'field'),
    [
        (4, 2, 'window'),
        (1, 0, 'window'),
        (5, 5, 'poly_order'),
        (5, -1, 'poly_order'),
    ]
)
def test_sg_config_error(window, order, field):
    with pytest.raises(ConfigurationError, match=f'Invalid {field}'):
        SgConfig(window, order)


def test_sg_coefficients():
    weights = hyperbench.metrics.sg_coefficients(SgConfig(5, 2))
    assert np.allclose(weights * 35, [-3, 12, 17, 12, -3])

    # center value of the local quadratic fit
    offsets = np.arange(-2, 3, dtype=np.float64)
    vandermonde = np.stack([offsets ** k for k in range(3)], axis=1)
    fit = hyperbench.linalg.solve_least_squares(vandermonde, np.eye(5))
    assert np.allclose(weights, fit[0], rtol=0, atol=1e-12)


def test_sg_filter_constant():
    s = np.full(301, 0.4)
    assert np.allclose(hyperbench.metrics.sg_filter(s), s, rtol=0, atol=1e-12)


def test_sg_filter_polynomial():
    t = np.linspace(0.0, 1.0, 120)
    s = 0.2 + 0.3 * t - 0.1 * t ** 2 + 0.05 * t ** 3
    smoothed = hyperbench.metrics.sg_filter(s, clip=False)
    assert np.allclose(smoothed[5:-5], s[5:-5], rtol=0, atol=1e-10)


def test_sg_filter_linear(rng):
    a = rng.uniform(size=40)
    b = rng.uniform(size=40)
    cfg = SgConfig(7, 2)
    combined = hyperbench.metrics.sg_filter(2 * a - b, cfg, clip=False)
    separate = 2 * hyperbench.metrics.sg_filter(a, cfg, clip=False) - hyperbench.metrics.sg_filter(b, cfg, clip=False)
    assert np.allclose(combined, separate, rtol=0, atol=1e-12)


def test_sg_filter_batch(rng):
    batch = rng.uniform(size=(4, 30))
    smoothed = hyperbench.metrics.sg_filter(batch)
    for row, expected in zip(batch, smoothed):
        assert np.array_equal(hyperbench.metrics.sg_filter(row), expected)


def test_sg_filter_clip():
    s = np.zeros(31)
    s[15] = 1.0
    assert hyperbench.metrics.sg_filter(s, clip=False).min() < 0
    smoothed = hyperbench.metrics.sg_filter(s)
    assert smoothed.min() == 0.0
    assert smoothed.max() <= 1.0


def test_sg_filter_error():
    with pytest.raises(ShapeError, match='shorter than the window'):
        hyperbench.metrics.sg_filter(np.zeros(10))
    with pytest.raises(ShapeError, match='batch of spectra'):
        hyperbench.metrics.sg_filter(np.zeros((2, 2, 20)))


def test_mse(rng):
    assert hyperbench.metrics.mse([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert hyperbench.metrics.mse(np.zeros(4), np.ones(4)) == 1.0

    x = rng.uniform(size=301)
    x_hat = rng.uniform(size=301)
    oracle = sum((np.longdouble(b) - np.longdouble(a)) ** 2 for a, b in zip(x, x_hat)) / 301
    assert hyperbench.metrics.mse(x, x_hat) == pytest.approx(float(oracle), rel=1e-12)


def test_mean_mse(rng):
    x = rng.uniform(size=(5, 20))
    x_hat = rng.uniform(size=(5, 20))
    expected = np.mean([hyperbench.metrics.mse(a, b) for a, b in zip(x, x_hat)])
    assert hyperbench.metrics.mean_mse(x, x_hat) == pytest.approx(expected, rel=1e-12)


def test_mse_error():
    with pytest.raises(ShapeError, match='Length mismatch'):
        hyperbench.metrics.mse(np.zeros(4), np.zeros(5))
    with pytest.raises(ShapeError, match='two non-empty spectra'):
        hyperbench.metrics.mse(np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ShapeError, match='N x n'):
        hyperbench.metrics.mean_mse(np.zeros(4), np.zeros(4))


def test_snr_smooth_bump():
    i = np.arange(301)
    s = 0.2 + 0.5 * np.exp(-((i - 150) / 30) ** 2)
    assert hyperbench.metrics.snr_db(s) >= 60


@pytest.mark.parametrize('s', [np.full(50, 0.3), np.zeros(50), np.ones(20)])
def test_snr_cap(s):
    assert hyperbench.metrics.snr_db(s) == hyperbench.metrics.SNR_CAP_DB


def test_snr_noise():
    t = np.arange(301)
    signal = 0.5 + 0.1 * np.sin(2 * np.pi * t / 150)
    sigma = 0.01
    expected = 10 * np.log10(np.mean(signal ** 2) / sigma ** 2)

    noisy = np.stack([
        signal + np.random.default_rng(seed).normal(0.0, sigma, size=301)
        for seed in range(100)
    ])
    estimates = hyperbench.metrics.snr_batch(noisy)
    assert estimates.shape == (100,)
    assert abs(estimates.mean() - expected) <= 2.0
    assert hyperbench.metrics.mean_snr_db(noisy) == pytest.approx(estimates.mean())


def test_snr_error():
    with pytest.raises(ShapeError, match='Expecting a spectrum'):
        hyperbench.metrics.snr_db(np.zeros((2, 20)))
    with pytest.raises(ShapeError, match='shorter than the window'):
        hyperbench.metrics.snr_db(np.zeros(5))


def _from_confusion(confusion):
    truth, predicted = [], []
    for i, row in enumerate(confusion):
        for j, count in enumerate(row):
            truth += [i] * count
            predicted += [j] * count
    return np.array(predicted), np.array(truth)


# (precision, recall, f1) per class, by hand
@pytest.mark.parametrize(
    ('confusion', 'expected'),
    [
        (
            [[3, 0, 0], [0, 2, 0], [0, 0, 4]],
            [(1.0, 1.0, 1.0)] * 3,
        ),
        (
            [[6, 3], [2, 5]],
            [(6 / 8, 6 / 9, 12 / 17), (5 / 8, 5 / 7, 10 / 15)],
        ),
        (
            # class 2 is never predicted and never true
            [[4, 1, 0], [2, 3, 0], [0, 0, 0]],
            [(4 / 6, 4 / 5, 8 / 11), (3 / 4, 3 / 5, 6 / 9), (0.0, 0.0, 0.0)],
        ),
        (
            # class 1 is never predicted
            [[5, 0], [3, 0]],
            [(5 / 8, 1.0, 10 / 13), (0.0, 0.0, 0.0)],
        ),
        (
            # class 0 is never true, class 1 never predicted
            [[0, 0, 0], [4, 0, 2], [1, 0, 7]],
            [(0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (7 / 9, 7 / 8, 14 / 17)],
        ),
    ]
)
def test_classification_scores(confusion, expected):
    predicted, truth = _from_confusion(confusion)
    report = hyperbench.metrics.classification_scores(predicted, truth, len(confusion))
    assert report.confusion.tolist() == confusion

    for scores, (precision, recall, f1) in zip(report.classes, expected):
        assert abs(scores.precision - precision) <= 1e-12
        assert abs(scores.recall - recall) <= 1e-12
        assert abs(scores.f1 - f1) <= 1e-12
        assert abs(hyperbench.metrics.f1_from_counts(scores.tp, scores.fp, scores.fn) - f1) <= 1e-12

    assert report.macro_f1 == pytest.approx(np.mean([e[2] for e in expected]), abs=1e-12)
    total = np.sum(confusion)
    assert report.accuracy == pytest.approx(np.trace(confusion) / total)


def test_class_scores():
    scores = hyperbench.metrics.ClassScores(tp=6, fp=2, fn=3)
    assert scores.precision == 0.75
    assert scores.recall == pytest.approx(0.6667, abs=1e-4)
    assert scores.f1 == pytest.approx(0.7059, abs=1e-4)
    assert scores.support == 9


@hypothesis.given(
    st.integers(min_value=1, max_value=1000),
    st.integers(min_value=0, max_value=1000),
    st.integers(min_value=0, max_value=1000),
)
def test_f1_bounds(tp, fp, fn):
    scores = hyperbench.metrics.ClassScores(tp=tp, fp=fp, fn=fn)
    low, high = sorted((scores.precision, scores.recall))
    assert low - 1e-12 <= scores.f1 <= high + 1e-12
    assert scores.f1 == pytest.approx(hyperbench.metrics.f1_from_counts(tp, fp, fn), rel=1e-12)


def test_classification_scores_error():
    with pytest.raises(ValueError, match='Predicted label 3 out of range for 3 classes'):
        hyperbench.metrics.classification_scores([0, 3], [0, 1], 3)
    with pytest.raises(ValueError, match='True label -1 out of range'):
        hyperbench.metrics.classification_scores([0, 1], [0, -1], 3)
    with pytest.raises(ShapeError, match='Length mismatch'):
        hyperbench.metrics.classification_scores([0, 1, 1], [0, 1], 3)
    with pytest.raises(ValueError, match='Invalid class count'):
        hyperbench.metrics.classification_scores([], [], 0)
