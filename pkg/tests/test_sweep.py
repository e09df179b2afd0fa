# SPDX-License-Identifier: MIT

import logging
import math

import numpy as np
import pandas as pd
import pytest

import hyperbench.compress
import hyperbench.dataset
import hyperbench.gbt
import hyperbench.io
import hyperbench.sweep

from hyperbench.errors import ConfigurationError, ShapeError
from hyperbench.sweep import Job, SweepPlan


TAG = 'small.hspx'


def _plan(**kwargs):
    kwargs.setdefault('datasets', (TAG,))
    kwargs.setdefault('record_timings', False)
    return SweepPlan(**kwargs)


def _run(small_dataset, out=None, **kwargs):
    return hyperbench.sweep.run_sweep(_plan(**kwargs), out, datasets={TAG: small_dataset})


@pytest.mark.parametrize(
    ('value', 'expected'),
    [
        ('90', (90,)),
        ('90,95, 97-99', (90, 95, 97, 98, 99)),
        ('1-3,', (1, 2, 3)),
        ('', ()),
    ]
)
def test_parse_rates(value, expected):
    assert hyperbench.sweep.parse_rates(value) == expected


def test_parse_rates_error():
    with pytest.raises(ConfigurationError, match="Invalid rates: invalid rate 'x'"):
        hyperbench.sweep.parse_rates('90,x')


def test_plan_defaults():
    plan = SweepPlan(datasets=['a.hspx'])
    assert plan.rates == tuple(range(1, 99))
    assert plan.methods == ('pca', 'kpca', 'ica', 'ae', 'dae')
    assert plan.n_compression_jobs == 5 * 98
    assert plan.n_jobs == 5 * 98 + 2
    assert plan.sg_config().window == 11


@pytest.mark.parametrize(
    ('kwargs', 'field'),
    [
        ({'datasets': ()}, 'datasets'),
        ({'datasets': ('a/x.hspx', 'b/x.csv')}, 'datasets'),
        ({'methods': ()}, 'methods'),
        ({'methods': ('lle',)}, 'methods'),
        ({'methods': ('rgb',)}, 'methods'),
        ({'methods': ('pca', 'PCA')}, 'methods'),
        ({'rates': ()}, 'rates'),
        ({'rates': (0, 50)}, 'rates'),
        ({'rates': (95, 90)}, 'rates'),
        ({'seed': -1}, 'seed'),
        ({'parallelism': 0}, 'parallelism'),
        ({'ae_restarts': 0}, 'ae_restarts'),
        ({'sg_window': 4}, 'sg_window'),
        ({'sg_order': 11}, 'sg_order'),
    ]
)
def test_plan_error(kwargs, field):
    kwargs.setdefault('datasets', ('a.hspx',))
    with pytest.raises(ConfigurationError, match=f'Invalid {field}') as excinfo:
        SweepPlan(**kwargs)
    assert excinfo.value.field == field


def test_plan_from_mapping():
    plan = hyperbench.sweep.plan_from_mapping({
        'datasets': 'scene.hspx, preset:urban@0.01',
        'Methods': 'PCA,ica',
        'rates': '90-92',
        'workers': '3',
        'pre_sg': 'yes',
        'seed': '5',
    })
    assert plan.datasets == ('scene.hspx', 'preset:urban@0.01')
    assert plan.methods == ('pca', 'ica')
    assert plan.rates == (90, 91, 92)
    assert plan.parallelism == 3
    assert plan.pre_sg
    assert plan.seed == 5
    assert plan.n_jobs == 2 * 2 * 3 + 2 * 2

    plan = hyperbench.sweep.plan_from_mapping({'datasets': 'scene.hspx'}, parallelism=2, record_timings=False)
    assert plan.parallelism == 2
    assert not plan.record_timings


@pytest.mark.parametrize(
    ('values', 'match'),
    [
        ({'datasets': 'a.hspx', 'colour': 'red'}, 'Invalid colour: unknown plan key'),
        ({'datasets': 'a.hspx', 'pre_sg': 'maybe'}, "Invalid pre_sg: invalid value 'maybe'"),
        ({'datasets': 'a.hspx', 'seed': '1.5'}, "Invalid seed: invalid value '1.5'"),
        ({'methods': 'pca'}, 'Invalid datasets: missing from the plan'),
    ]
)
def test_plan_from_mapping_error(values, match):
    with pytest.raises(ConfigurationError, match=match):
        hyperbench.sweep.plan_from_mapping(values)


def test_load_plan(tmp_path):
    path = tmp_path / 'plan.ini'
    path.write_text(
        '# benchmark plan\n'
        'datasets = scene.hspx, preset:forest@0.01\n'
        'methods = pca, dae  ; no kernel PCA\n'
        'rates = 90, 95-96\n'
        'include_rgb_baseline = false\n'
        'ae_hidden = 64\n',
        encoding='utf-8',
    )
    plan = hyperbench.sweep.load_plan(path, seed=9)
    assert plan.datasets == ('scene.hspx', 'preset:forest@0.01')
    assert plan.methods == ('pca', 'dae')
    assert plan.rates == (90, 95, 96)
    assert not plan.include_rgb_baseline
    assert plan.include_uncompressed_baseline
    assert plan.ae_hidden == 64
    assert plan.seed == 9


def test_load_plan_error(tmp_path):
    path = tmp_path / 'plan.ini'
    path.write_text('datasets = a.hspx\nthis line has no value\n', encoding='utf-8')
    with pytest.raises(ConfigurationError, match='Invalid plan'):
        hyperbench.sweep.load_plan(path)


@pytest.mark.parametrize(
    ('tag', 'name'),
    [
        ('data/scene.hspx', 'scene'),
        ('scene.csv', 'scene'),
        ('preset:Urban', 'urban'),
        ('preset:forest@0.5', 'forest'),
    ]
)
def test_dataset_name(tag, name):
    assert hyperbench.sweep.dataset_name(tag) == name


def test_resolve_dataset(tmp_path, small_dataset):
    ds = hyperbench.sweep.resolve_dataset('preset:forest@0.001', seed=3)
    assert ds.class_counts() == {'shadow': 18, 'tree': 15}
    assert ds == hyperbench.sweep.resolve_dataset('preset:forest@0.001', seed=3)

    path = tmp_path / 'small.hspx'
    hyperbench.io.save_dataset(small_dataset, path)
    assert hyperbench.sweep.resolve_dataset(str(path), seed=0) == small_dataset


@pytest.mark.parametrize(
    ('tag', 'field'),
    [
        ('preset:forest@big', 'datasets'),
        ('preset:lake', 'preset'),
        ('preset:forest@-1', 'scale'),
    ]
)
def test_resolve_dataset_error(tag, field):
    with pytest.raises(ConfigurationError, match=f'Invalid {field}'):
        hyperbench.sweep.resolve_dataset(tag, seed=0)


def test_job_seed():
    seed = hyperbench.sweep.job_seed(0, TAG, 'ae', 90)
    assert seed == hyperbench.sweep.job_seed(0, TAG, 'ae', 90)
    others = {
        hyperbench.sweep.job_seed(1, TAG, 'ae', 90),
        hyperbench.sweep.job_seed(0, 'other.hspx', 'ae', 90),
        hyperbench.sweep.job_seed(0, TAG, 'dae', 90),
        hyperbench.sweep.job_seed(0, TAG, 'ae', 91),
    }
    assert seed not in others
    assert len(others) == 4


def test_plan_jobs():
    plan = SweepPlan(datasets=('a.hspx', 'b.hspx'), methods=('pca', 'ica'), rates=(90, 95))
    jobs = hyperbench.sweep.plan_jobs(plan)
    assert jobs[:6] == [
        Job('a.hspx', 'rgb', 0),
        Job('a.hspx', 'hsi', 0),
        Job('a.hspx', 'pca', 90),
        Job('a.hspx', 'pca', 95),
        Job('a.hspx', 'ica', 90),
        Job('a.hspx', 'ica', 95),
    ]
    assert len(jobs) == plan.n_jobs == 12
    assert [job.is_baseline for job in jobs[:3]] == [True, True, False]

    plan = SweepPlan(
        datasets=('a.hspx', 'b.hspx'), methods=('pca', 'ica'), rates=(90, 95),
        include_rgb_baseline=False, include_uncompressed_baseline=False,
    )
    assert len(hyperbench.sweep.plan_jobs(plan)) == plan.n_jobs == 8


def test_run_sweep(small_dataset):
    results = _run(small_dataset, methods=('pca',), rates=(90, 95))
    assert [(r.method, r.rate, r.d) for r in results] == [
        ('rgb', 0, 3),
        ('hsi', 0, 301),
        ('pca', 90, hyperbench.compress.dims_for_rate(301, 90)),
        ('pca', 95, hyperbench.compress.dims_for_rate(301, 95)),
    ]
    for r in results:
        assert r.ok
        assert r.dataset == 'small'
        assert r.labels == ('grass', 'roof', 'water')
        assert 0.0 <= r.macro_f1 <= 1.0
        assert r.macro_f1 == pytest.approx(np.mean(r.f1))
        assert r.total_s == 0.0
        assert sum(map(sum, r.confusion)) == 37

    rgb, hsi, pca90, pca95 = results
    assert math.isnan(rgb.mse) and math.isnan(rgb.snr_db)
    assert hsi.mse == 0.0
    assert 0.0 < pca90.mse < pca95.mse
    assert np.isfinite(pca95.snr_db)


def test_run_sweep_timings(small_dataset):
    results = _run(small_dataset, methods=('pca',), rates=(95,), record_timings=True, include_rgb_baseline=False)
    hsi, pca = results
    assert hsi.fit_s == 0.0 and hsi.encode_s == 0.0
    assert pca.fit_s > 0.0
    assert pca.train_s > 0.0
    assert pca.total_s == pytest.approx(pca.fit_s + pca.encode_s + pca.train_s + pca.predict_s)


def test_run_sweep_pre_sg(small_dataset):
    kwargs = {'methods': ('pca',), 'rates': (95,), 'include_rgb_baseline': False}
    plain = _run(small_dataset, **kwargs)
    smoothed = _run(small_dataset, pre_sg=True, **kwargs)
    assert smoothed[0].snr_db > plain[0].snr_db


def test_run_sweep_parallel(small_dataset):
    kwargs = {'methods': ('pca', 'ica'), 'rates': (90, 95)}
    serial = _run(small_dataset, **kwargs)
    pooled = _run(small_dataset, parallelism=2, **kwargs)
    assert [(r.method, r.rate) for r in pooled] == [(r.method, r.rate) for r in serial]
    assert hyperbench.sweep.results_frame(pooled).equals(hyperbench.sweep.results_frame(serial))


def test_run_sweep_failed_job(tmp_path, small_dataset, caplog):
    # 298 components do not fit in 74 kernel anchors
    with caplog.at_level(logging.ERROR, logger='hyperbench.sweep'):
        results = _run(small_dataset, tmp_path, methods=('kpca', 'pca'), rates=(1,), include_rgb_baseline=False)
    hsi, kpca, pca = results
    assert hsi.ok and pca.ok
    assert kpca.status.startswith('failed: ShapeError')
    assert kpca.d == 298
    assert math.isnan(kpca.macro_f1)
    assert math.isnan(kpca.macro_precision)
    assert 'kpca@1 failed' in caplog.text

    frame = pd.read_csv(tmp_path / 'results.csv')
    failed = frame[frame['method'] == 'kpca']
    assert len(failed) == 3
    assert failed['status'].str.startswith('failed:').all()
    assert failed['f1'].isna().all()

    summary = pd.read_csv(tmp_path / 'mse_by_rate.csv')
    assert summary['method'].tolist() == ['pca']


def test_emit_reports(tmp_path, small_dataset):
    plan = _plan(methods=('pca', 'ae'), rates=(90, 95), ae_hidden=32, ae_restarts=2, ae_epochs=2)
    results = hyperbench.sweep.run_sweep(plan, tmp_path, datasets={TAG: small_dataset})

    assert {path.name for path in tmp_path.iterdir()} == {
        'results.csv', 'mse_by_rate.csv', 'timings.csv',
        'f1_heatmap_small.csv', 'precision_heatmap_small.csv', 'recall_heatmap_small.csv',
        'confusion_small.csv', 'f1_distribution.csv', 'best_by_rate.csv', 'scalability.csv',
        'ae_histories.csv', 'summary.md',
    }

    frame = pd.read_csv(tmp_path / 'results.csv')
    assert frame.columns.tolist() == hyperbench.sweep.RESULT_COLUMNS
    # 6 jobs x 3 classes
    assert len(frame) == 18
    assert (frame['status'] == 'ok').all()

    heatmap = pd.read_csv(tmp_path / 'f1_heatmap_small.csv', index_col='method')
    assert heatmap.index.tolist() == ['pca', 'ae']
    assert heatmap.columns.tolist() == ['90', '95']
    pca90 = next(r for r in results if r.method == 'pca' and r.rate == 90)
    assert heatmap.loc['pca', '90'] == pytest.approx(pca90.macro_f1, abs=1e-6)

    confusion = pd.read_csv(tmp_path / 'confusion_small.csv')
    assert len(confusion) == 6 * 9
    assert confusion.groupby(['method', 'rate'])['count'].sum().eq(37).all()

    best = pd.read_csv(tmp_path / 'best_by_rate.csv')
    assert best['rate'].tolist() == [90, 95]
    for _, row in best.iterrows():
        at_rate = [r.macro_f1 for r in results if r.rate == row['rate']]
        assert row['macro_f1'] == pytest.approx(max(at_rate), abs=1e-6)

    histories = pd.read_csv(tmp_path / 'ae_histories.csv')
    assert set(histories['rate']) == {90, 95}
    assert set(histories['restart']) <= {0, 1}
    assert histories.groupby('rate')['chosen'].any().all()

    summary = (tmp_path / 'summary.md').read_text(encoding='utf-8')
    assert '## small, compression rate 90%' in summary
    assert '## small, compression rate 95%' in summary
    assert '| label | method | precision | recall | f1 |' in summary
    assert 'Macro f1: RGB ' in summary


def test_emit_reports_deterministic(tmp_path, small_dataset):
    results = _run(small_dataset, methods=('pca',), rates=(95,))
    first = hyperbench.sweep.emit_reports(results, tmp_path / 'first')
    second = hyperbench.sweep.emit_reports(_run(small_dataset, methods=('pca',), rates=(95,)), tmp_path / 'second')
    assert [path.name for path in first] == [path.name for path in second]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_emit_reports_error(tmp_path):
    with pytest.raises(ValueError, match='No results'):
        hyperbench.sweep.emit_reports([], tmp_path)


def test_classify_dataset(tmp_path, small_dataset):
    train_x, train_y = small_dataset.partition('train')
    classifier = hyperbench.gbt.gbt_train(train_x, train_y, n_classes=3)
    out = tmp_path / 'predicted.csv'
    predicted = hyperbench.sweep.classify_dataset(small_dataset, classifier, out)
    assert predicted.shape == (small_dataset.n_pixels,)

    frame = pd.read_csv(out)
    assert frame.columns.tolist() == ['pixel', 'label', 'split', 'predicted']
    assert frame['pixel'].tolist() == list(range(small_dataset.n_pixels))
    assert set(frame['label']) == {'grass', 'roof', 'water'}
    assert set(frame['split']) == {'train', 'validation', 'test'}
    names = np.array(small_dataset.class_names)
    assert frame['predicted'].tolist() == names[predicted].tolist()


def test_classify_dataset_train_agreement(tmp_path):
    cfg = hyperbench.dataset.SyntheticConfig(
        seed=3,
        classes=(('asphalt', 100), ('rooftop', 100), ('vegetation', 100)),
        noise_sigma=0.005,
        mixing_jitter=0.0,
    )
    ds = hyperbench.dataset.generate_synthetic(cfg)
    train_x, train_y = ds.partition('train')
    classifier = hyperbench.gbt.gbt_train(train_x, train_y, n_classes=3)

    first, second = tmp_path / 'first.csv', tmp_path / 'second.csv'
    predicted = hyperbench.sweep.classify_dataset(ds, classifier, first)
    hyperbench.sweep.classify_dataset(ds, classifier, second)
    assert first.read_bytes() == second.read_bytes()

    train = ds.mask('train')
    assert np.mean(predicted[train] == ds.labels[train]) >= 0.99


def test_classify_dataset_compressed(small_dataset):
    train_x, train_y = small_dataset.partition('train')
    compressor = hyperbench.compress.fit_compressor('pca', train_x, 10)
    classifier = hyperbench.gbt.gbt_train(compressor.encode(train_x), train_y, n_classes=3)
    predicted = hyperbench.sweep.classify_dataset(small_dataset, classifier, compressor=compressor)
    assert np.array_equal(predicted, classifier.predict(compressor.encode(small_dataset.spectra.astype(np.float64))))

    with pytest.raises(ShapeError, match='Classifier expects 10 features, got 301'):
        hyperbench.sweep.classify_dataset(small_dataset, classifier)
    narrow = hyperbench.compress.fit_compressor('pca', train_x[:, :50], 5)
    with pytest.raises(ShapeError, match='Compressor expects 50 bands, dataset has 301'):
        hyperbench.sweep.classify_dataset(small_dataset, classifier, compressor=narrow)
