# SPDX-License-Identifier: MIT

'''
Experiment harness: compression methods x rates x datasets

Every job fits a compressor on the train split, encodes all pixels, trains
the boosted-tree classifier on the encoded train split and scores the test
split; reconstruction error and SNR are measured on the decoded test split.
'''

from __future__ import annotations

import configparser
import dataclasses
import logging
import multiprocessing
import os
import pathlib
import time
import warnings
import zlib

from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import numpy.typing as npt
import pandas as pd

import hyperbench.compress
import hyperbench.dataset
import hyperbench.gbt
import hyperbench.io
import hyperbench.metrics

from hyperbench.data import COMPRESSION_METHODS, Methods, SplitTags
from hyperbench.dataset import LabeledDataset
from hyperbench.errors import ConfigurationError, ShapeError


_logger = logging.getLogger(__name__)

T = TypeVar('T')

RESULT_COLUMNS = [
    'dataset', 'method', 'rate', 'd', 'label', 'precision', 'recall', 'f1', 'macro_f1',
    'mse', 'snr_db', 'fit_s', 'encode_s', 'train_s', 'predict_s', 'status',
]
TIMING_COLUMNS = ['fit_s', 'encode_s', 'train_s', 'predict_s']
SUMMARY_RATES = (90, 95, 97, 98)
# row order of the summary tables
SUMMARY_METHODS = ('rgb', 'pca', 'kpca', 'ica', 'ae', 'dae', 'hsi')
FLOAT_FORMAT = '%.6f'
PRESET_PREFIX = 'preset:'


# plans


@dataclasses.dataclass(frozen=True)
class SweepPlan():
    datasets: Tuple[str, ...]
    methods: Tuple[str, ...] = COMPRESSION_METHODS
    rates: Tuple[int, ...] = tuple(range(1, 99))
    include_rgb_baseline: bool = True
    include_uncompressed_baseline: bool = True
    pre_sg: bool = False
    seed: int = 0
    parallelism: int = 1
    ae_hidden: int = 256
    ae_restarts: int = 10
    ae_epochs: int = 30
    sg_window: int = 11
    sg_order: int = 3
    time_reps: int = 1
    record_timings: bool = True
    histories: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, 'datasets', tuple(str(d) for d in self.datasets))
        object.__setattr__(self, 'methods', tuple(str(m).strip().lower() for m in self.methods))
        object.__setattr__(self, 'rates', tuple(int(r) for r in self.rates))
        self.validate()

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigurationError('datasets', 'expecting at least one dataset')
        names = [dataset_name(tag) for tag in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigurationError('datasets', f'dataset names should be unique: {names}')
        if not self.methods:
            raise ConfigurationError('methods', 'expecting at least one compression method')
        for method in self.methods:
            if method not in COMPRESSION_METHODS:
                raise ConfigurationError('methods', f"unknown method '{method}' (expecting {', '.join(COMPRESSION_METHODS)})")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigurationError('methods', f'duplicated methods: {list(self.methods)}')
        if not self.rates:
            raise ConfigurationError('rates', 'expecting at least one rate')
        if any(not 1 <= rate <= 99 for rate in self.rates):
            raise ConfigurationError('rates', f'rates should lie in [1, 99]: {list(self.rates)}')
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ConfigurationError('rates', 'rates should be strictly increasing')
        if self.seed < 0:
            raise ConfigurationError('seed', f'expecting an unsigned integer, got {self.seed}')
        for field in ('parallelism', 'ae_hidden', 'ae_restarts', 'ae_epochs', 'time_reps'):
            if getattr(self, field) < 1:
                raise ConfigurationError(field, f'expecting a positive integer, got {getattr(self, field)}')
        try:
            self.sg_config()
        except ConfigurationError as e:
            raise ConfigurationError(f'sg_{e.field.replace("poly_", "")}', str(e)) from None

    def sg_config(self) -> hyperbench.metrics.SgConfig:
        return hyperbench.metrics.SgConfig(self.sg_window, self.sg_order)

    @property
    def n_compression_jobs(self) -> int:
        return len(self.datasets) * len(self.methods) * len(self.rates)

    @property
    def n_jobs(self) -> int:
        '''
        Every job of the plan, baselines included
        '''
        baselines = int(self.include_rgb_baseline) + int(self.include_uncompressed_baseline)
        return self.n_compression_jobs + len(self.datasets) * baselines


def parse_rates(value: str) -> Tuple[int, ...]:
    '''
    Parses comma-separated rates, accepting ``a-b`` inclusive ranges
    '''
    rates: List[int] = []
    for part in value.split(','):
        part = part.strip()
        if not part:
            continue
        try:
            if '-' in part:
                low, high = (int(p) for p in part.split('-', 1))
                rates.extend(range(low, high + 1))
            else:
                rates.append(int(part))
        except ValueError:
            raise ConfigurationError('rates', f"invalid rate '{part}'") from None
    return tuple(rates)


def _split_list(value: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in value.split(',') if part.strip())


def plan_from_mapping(values: Dict[str, str], **overrides: Any) -> SweepPlan:
    '''
    Builds a plan from ``key = value`` strings (the plan file syntax)
    '''
    fields = {field.name: field for field in dataclasses.fields(SweepPlan)}
    # the CLI flag name of parallelism
    aliases = {'workers': 'parallelism'}
    kwargs: Dict[str, Any] = {}
    for raw_key, raw_value in values.items():
        key = aliases.get(raw_key.strip().lower(), raw_key.strip().lower())
        if key not in fields:
            raise ConfigurationError(key, 'unknown plan key')
        value = raw_value.strip()
        try:
            if key == 'rates':
                kwargs[key] = parse_rates(value)
            elif key in ('datasets', 'methods'):
                kwargs[key] = _split_list(value)
            elif fields[key].type in ('bool', bool):
                if value.lower() not in configparser.ConfigParser.BOOLEAN_STATES:
                    raise ValueError(value)
                kwargs[key] = configparser.ConfigParser.BOOLEAN_STATES[value.lower()]
            else:
                kwargs[key] = int(value)
        except ValueError:
            raise ConfigurationError(key, f"invalid value '{value}'") from None
    kwargs.update(overrides)
    if 'datasets' not in kwargs:
        raise ConfigurationError('datasets', 'missing from the plan')
    return SweepPlan(**kwargs)


def load_plan(path: hyperbench.io.PathLike, **overrides: Any) -> SweepPlan:
    '''
    Reads a line-oriented ``key = value`` plan file

    ``#`` and ``;`` start comments; list values are comma-separated.
    '''
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    with open(path, encoding='utf-8') as f:
        try:
            parser.read_string('[plan]\n' + f.read(), source=os.fspath(path))
        except configparser.Error as e:
            raise ConfigurationError('plan', str(e)) from None
    return plan_from_mapping(dict(parser['plan']), **overrides)


# datasets


def dataset_name(tag: str) -> str:
    '''
    Report name of a dataset entry: the preset name or the file stem
    '''
    if tag.startswith(PRESET_PREFIX):
        return tag[len(PRESET_PREFIX):].split('@', 1)[0].strip().lower()
    return pathlib.Path(tag).stem


def resolve_dataset(tag: str, seed: int) -> LabeledDataset:
    '''
    Loads a dataset path or generates a ``preset:<name>[@scale]`` entry
    '''
    if tag.startswith(PRESET_PREFIX):
        name, _, scale = tag[len(PRESET_PREFIX):].partition('@')
        try:
            factor = float(scale) if scale else 1.0
        except ValueError:
            raise ConfigurationError('datasets', f"invalid scale in '{tag}'") from None
        return hyperbench.dataset.generate_synthetic(
            hyperbench.dataset.preset_config(name.strip(), seed=seed, scale=factor)
        )
    return hyperbench.io.load_dataset(tag)


# jobs


@dataclasses.dataclass(frozen=True)
class Job():
    dataset: str
    method: str
    rate: int

    @property
    def is_baseline(self) -> bool:
        return bool(Methods.get_subdata(Methods.get_code(self.method)) == 'baseline')


@dataclasses.dataclass(frozen=True)
class SweepResult():
    dataset: str
    method: str
    rate: int
    d: int
    labels: Tuple[str, ...]
    precision: Tuple[float, ...]
    recall: Tuple[float, ...]
    f1: Tuple[float, ...]
    macro_f1: float
    mse: float
    snr_db: float
    fit_s: float = 0.0
    encode_s: float = 0.0
    train_s: float = 0.0
    predict_s: float = 0.0
    status: str = 'ok'
    # rows are true classes
    confusion: Tuple[Tuple[int, ...], ...] = ()
    histories: Tuple[hyperbench.compress.TrainingHistory, ...] = ()
    chosen_restart: int = -1

    @property
    def ok(self) -> bool:
        return self.status == 'ok'

    @property
    def macro_precision(self) -> float:
        return float(np.mean(self.precision)) if self.ok else float('nan')

    @property
    def macro_recall(self) -> float:
        return float(np.mean(self.recall)) if self.ok else float('nan')

    @property
    def total_s(self) -> float:
        return self.fit_s + self.encode_s + self.train_s + self.predict_s


def job_seed(plan_seed: int, dataset: str, method: str, rate: int) -> int:
    '''
    Per-job seed derived from (plan seed, dataset tag, method, rate), so that
    values never depend on scheduling
    '''
    sequence = np.random.SeedSequence([plan_seed, zlib.crc32(dataset.encode('utf-8')), Methods.get_code(method), rate])
    return int(sequence.generate_state(1)[0])


def plan_jobs(plan: SweepPlan) -> List[Job]:
    '''
    Jobs in report order: dataset, then baselines, then method, then rate
    '''
    jobs = []
    for tag in plan.datasets:
        if plan.include_rgb_baseline:
            jobs.append(Job(tag, 'rgb', 0))
        if plan.include_uncompressed_baseline:
            jobs.append(Job(tag, 'hsi', 0))
        for method in plan.methods:
            jobs.extend(Job(tag, method, rate) for rate in plan.rates)
    return jobs


@dataclasses.dataclass(frozen=True)
class _Context():
    plan: SweepPlan
    # prepared (optionally smoothed) datasets by tag
    datasets: Dict[str, LabeledDataset]


_CONTEXT: Optional[_Context] = None


def _init_worker(context: _Context) -> None:
    global _CONTEXT
    _CONTEXT = context


def _run_pooled(job: Job) -> SweepResult:
    assert _CONTEXT is not None
    return _execute(_CONTEXT, job)


def _timed(fn: Callable[[], T], reps: int) -> Tuple[T, float]:
    start = time.perf_counter()
    for _ in range(reps):
        result = fn()
    return result, (time.perf_counter() - start) / reps


def _failed(job: Job, d: int, ds: LabeledDataset, reason: str) -> SweepResult:
    nan = tuple(float('nan') for _ in ds.class_names)
    return SweepResult(
        dataset_name(job.dataset), job.method, job.rate, d, ds.class_names,
        nan, nan, nan, float('nan'), float('nan'), float('nan'),
        status=f'failed: {reason}',
    )


def _execute(context: _Context, job: Job) -> SweepResult:
    plan = context.plan
    ds = context.datasets[job.dataset]
    name = dataset_name(job.dataset)
    sg_cfg = plan.sg_config()
    reps = plan.time_reps
    d = ds.n_bands
    _logger.info('job %s/%s@%d: started', name, job.method, job.rate)

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')

            model: Optional[hyperbench.compress.Compressor] = None
            fit_s = 0.0
            if job.method == 'rgb':
                ds = hyperbench.dataset.extract_rgb(ds)
                d = 3
            elif job.method != 'hsi':
                d = hyperbench.compress.dims_for_rate(ds.n_bands, job.rate)
                train_x, _ = ds.partition(SplitTags.TRAIN)
                val_x, _ = ds.partition(SplitTags.VALIDATION)
                options: Dict[str, Any] = {}
                if Methods.get_subdata(Methods.get_code(job.method)) == 'neural':
                    options = {'hidden_ae': plan.ae_hidden, 'restarts': plan.ae_restarts, 'epochs': plan.ae_epochs}
                seed = job_seed(plan.seed, job.dataset, job.method, job.rate)
                model, fit_s = _timed(
                    lambda: hyperbench.compress.fit_compressor(job.method, train_x, d, seed=seed, val=val_x, **options),
                    reps,
                )

            spectra = ds.spectra.astype(np.float64)
            if model is not None:
                fitted = model
                features, encode_s = _timed(lambda: fitted.encode(spectra), reps)
            else:
                features, encode_s = spectra, 0.0

            train_mask = ds.mask(SplitTags.TRAIN)
            test_mask = ds.mask(SplitTags.TEST)
            classifier, train_s = _timed(
                lambda: hyperbench.gbt.gbt_train(features[train_mask], ds.labels[train_mask], n_classes=ds.n_classes),
                reps,
            )
            predicted, predict_s = _timed(lambda: classifier.predict(features[test_mask]), reps)
            report = hyperbench.metrics.classification_scores(predicted, ds.labels[test_mask], ds.n_classes)

            test_x = spectra[test_mask]
            if model is not None:
                reconstructed = model.decode(features[test_mask])
                mse = hyperbench.metrics.mean_mse(test_x, reconstructed)
                snr = hyperbench.metrics.mean_snr_db(reconstructed, sg_cfg)
            elif job.method == 'hsi':
                mse = 0.0
                snr = hyperbench.metrics.mean_snr_db(test_x, sg_cfg)
            else:
                mse = snr = float('nan')

        for warning in caught:
            _logger.warning('job %s/%s@%d: %s', name, job.method, job.rate, warning.message)
    except Exception as e:
        _logger.error('job %s/%s@%d failed: %s: %s', name, job.method, job.rate, type(e).__name__, e)
        return _failed(job, d, ds, f'{type(e).__name__}: {e}')

    histories: Tuple[hyperbench.compress.TrainingHistory, ...] = ()
    chosen = -1
    if plan.histories and isinstance(model, hyperbench.compress.AeModel):
        histories = model.histories
        chosen = model.chosen

    timings = (fit_s, encode_s, train_s, predict_s) if plan.record_timings else (0.0, 0.0, 0.0, 0.0)
    result = SweepResult(
        name, job.method, job.rate, d, ds.class_names,
        tuple(c.precision for c in report.classes),
        tuple(c.recall for c in report.classes),
        tuple(c.f1 for c in report.classes),
        report.macro_f1, mse, snr,
        *timings,
        confusion=tuple(tuple(int(v) for v in row) for row in report.confusion),
        histories=histories,
        chosen_restart=chosen,
    )
    _logger.info('job %s/%s@%d: macro f1 %.4f, mse %.6g', name, job.method, job.rate, result.macro_f1, mse)
    return result


def prepare_datasets(plan: SweepPlan) -> Dict[str, LabeledDataset]:
    prepared = {}
    for tag in plan.datasets:
        ds = resolve_dataset(tag, plan.seed)
        if plan.pre_sg:
            ds = ds.with_spectra(hyperbench.metrics.sg_filter(ds.spectra, plan.sg_config()))
        _logger.info('dataset %s: %r', dataset_name(tag), ds)
        prepared[tag] = ds
    return prepared


def run_sweep(
    plan: SweepPlan,
    out_dir: Optional[hyperbench.io.PathLike] = None,
    datasets: Optional[Dict[str, LabeledDataset]] = None,
) -> List[SweepResult]:
    '''
    Runs every job of the plan; failed jobs become ``failed:`` rows

    ``datasets`` may supply already loaded datasets by tag. Results come back
    in job order whatever the worker count; reports are written when
    ``out_dir`` is given.
    '''
    loaded = prepare_datasets(plan) if datasets is None else {
        tag: datasets[tag] if not plan.pre_sg else datasets[tag].with_spectra(
            hyperbench.metrics.sg_filter(datasets[tag].spectra, plan.sg_config())
        )
        for tag in plan.datasets
    }
    context = _Context(plan, loaded)
    jobs = plan_jobs(plan)
    _logger.info('sweep: %d jobs on %d worker(s)', len(jobs), plan.parallelism)

    if plan.parallelism > 1:
        with multiprocessing.Pool(plan.parallelism, initializer=_init_worker, initargs=(context,)) as pool:
            results = list(pool.imap(_run_pooled, jobs, chunksize=1))
    else:
        results = [_execute(context, job) for job in jobs]

    failed = sum(not r.ok for r in results)
    if failed:
        _logger.warning('sweep: %d of %d jobs failed', failed, len(results))
    if out_dir is not None:
        emit_reports(results, out_dir, order=plan.methods)
    return results


# reports


def results_frame(results: Iterable[SweepResult]) -> pd.DataFrame:
    rows = []
    for r in results:
        for label, precision, recall, f1 in zip(r.labels, r.precision, r.recall, r.f1):
            rows.append({
                'dataset': r.dataset,
                'method': r.method,
                'rate': r.rate,
                'd': r.d,
                'label': label,
                'precision': precision,
                'recall': recall,
                'f1': f1,
                'macro_f1': r.macro_f1,
                'mse': r.mse,
                'snr_db': r.snr_db,
                'fit_s': r.fit_s,
                'encode_s': r.encode_s,
                'train_s': r.train_s,
                'predict_s': r.predict_s,
                'status': r.status,
            })
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def _jobs_frame(results: Sequence[SweepResult]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            'dataset': r.dataset,
            'method': r.method,
            'rate': r.rate,
            'd': r.d,
            'precision': r.macro_precision,
            'recall': r.macro_recall,
            'f1': r.macro_f1,
            'mse': r.mse,
            'snr_db': r.snr_db,
            'fit_s': r.fit_s,
            'encode_s': r.encode_s,
            'train_s': r.train_s,
            'predict_s': r.predict_s,
            'total_s': r.total_s,
            'status': r.status,
        }
        for r in results
    ])


def _write(frame: pd.DataFrame, path: pathlib.Path, written: List[pathlib.Path], **kwargs: Any) -> None:
    frame.to_csv(path, float_format=FLOAT_FORMAT, lineterminator='\n', **kwargs)
    written.append(path)


def _heatmap(jobs: pd.DataFrame, metric: str, methods: Sequence[str]) -> pd.DataFrame:
    table = jobs.pivot(index='method', columns='rate', values=metric)
    table = table.reindex([m for m in methods if m in table.index])
    table.columns = [str(c) for c in table.columns]
    return table


def _markdown_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    lines = ['| ' + ' | '.join(header) + ' |', '|' + '|'.join('---' for _ in header) + '|']
    lines.extend('| ' + ' | '.join(row) + ' |' for row in rows)
    return lines


def _summary(results: Sequence[SweepResult], methods: Sequence[str]) -> str:
    order = [m for m in SUMMARY_METHODS if m in ('rgb', 'hsi') or m in methods]
    lines = ['# Classification summary', '']
    for dataset in dict.fromkeys(r.dataset for r in results):
        of_dataset = [r for r in results if r.dataset == dataset and r.ok]
        baselines = {r.method: r for r in of_dataset if r.rate == 0}
        for rate in SUMMARY_RATES:
            at_rate = {r.method: r for r in of_dataset if r.rate == rate}
            if not at_rate:
                continue
            chosen = {m: at_rate.get(m, baselines.get(m)) for m in order}
            present = [(m, r) for m, r in chosen.items() if r is not None]
            if not present:
                continue
            lines += [f'## {dataset}, compression rate {rate}%', '']
            rows = []
            for index, label in enumerate(present[0][1].labels):
                best = max(r.f1[index] for _, r in present)
                for method, r in present:
                    f1 = f'{r.f1[index]:.4f}'
                    rows.append([
                        label,
                        method.upper(),
                        f'{r.precision[index]:.4f}',
                        f'{r.recall[index]:.4f}',
                        f'**{f1}**' if r.f1[index] == best else f1,
                    ])
            lines += _markdown_table(['label', 'method', 'precision', 'recall', 'f1'], rows)
            macro = ', '.join(f'{m.upper()} {r.macro_f1:.4f}' for m, r in present)
            lines += ['', f'Macro f1: {macro}', '']
    return '\n'.join(lines) + '\n'


def emit_reports(
    results: Sequence[SweepResult],
    out_dir: hyperbench.io.PathLike,
    order: Sequence[str] = COMPRESSION_METHODS,
) -> List[pathlib.Path]:
    '''
    Writes the CSV reports and summary.md; returns the written paths

    ``order`` is the method row order of the per-method tables.
    '''
    if not results:
        raise ValueError('No results to report')
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[pathlib.Path] = []
    methods = [m for m in order if any(r.method == m for r in results)]

    _write(results_frame(results), out / 'results.csv', written, index=False)

    jobs = _jobs_frame(results)
    compressed = jobs[(jobs['rate'] > 0) & (jobs['status'] == 'ok')]
    _write(
        compressed[['dataset', 'method', 'rate', 'd', 'mse', 'snr_db']],
        out / 'mse_by_rate.csv', written, index=False,
    )
    _write(
        jobs[['dataset', 'method', 'rate', 'd'] + TIMING_COLUMNS + ['total_s']],
        out / 'timings.csv', written, index=False,
    )

    for dataset in jobs['dataset'].unique():
        of_dataset = compressed[compressed['dataset'] == dataset]
        if not of_dataset.empty:
            for metric in ('f1', 'precision', 'recall'):
                _write(
                    _heatmap(of_dataset, metric, methods),
                    out / f'{metric}_heatmap_{dataset}.csv', written, index_label='method',
                )

        confusion = []
        for r in results:
            if r.dataset != dataset or not r.ok or not (r.rate == 0 or r.rate in SUMMARY_RATES):
                continue
            for t, row in enumerate(r.confusion):
                for p, count in enumerate(row):
                    confusion.append({
                        'method': r.method, 'rate': r.rate, 'true': r.labels[t], 'predicted': r.labels[p], 'count': count,
                    })
        if confusion:
            _write(pd.DataFrame(confusion), out / f'confusion_{dataset}.csv', written, index=False)

    ok_rows = results_frame([r for r in results if r.ok and r.rate > 0])
    if not ok_rows.empty:
        distribution = (
            ok_rows.groupby(['dataset', 'method', 'label'], sort=False)['f1']
            .agg(['min', 'median', 'max', 'count'])
            .reset_index()
        )
        _write(distribution, out / 'f1_distribution.csv', written, index=False)

    if not compressed.empty:
        ranked = compressed.assign(order=compressed['method'].map({m: i for i, m in enumerate(methods)}))
        ranked = ranked.sort_values(['dataset', 'rate', 'f1', 'order'], ascending=[True, True, False, True], kind='stable')
        best = ranked.groupby(['dataset', 'rate'], sort=False).head(1)
        _write(best[['dataset', 'rate', 'method', 'd', 'f1']].rename(columns={'f1': 'macro_f1'}), out / 'best_by_rate.csv',
               written, index=False)

        scalability = (
            compressed.groupby(['dataset', 'method'], sort=False)
            .agg(jobs=('rate', 'size'), **{f'{c}_sum': (c, 'sum') for c in TIMING_COLUMNS + ['total_s']})
            .reset_index()
        )
        scalability['total_per_job_s'] = scalability['total_s_sum'] / scalability['jobs']
        _write(scalability, out / 'scalability.csv', written, index=False)

    histories = []
    for r in results:
        for history in r.histories:
            for epoch, (train_mse, val_mse) in enumerate(zip(history.train_mse, history.val_mse), start=1):
                histories.append({
                    'dataset': r.dataset, 'method': r.method, 'rate': r.rate, 'restart': history.restart,
                    'epoch': epoch, 'train_mse': train_mse, 'val_mse': val_mse,
                    'diverged': history.diverged, 'chosen': history.restart == r.chosen_restart,
                })
    if histories:
        _write(pd.DataFrame(histories), out / 'ae_histories.csv', written, index=False)

    summary = out / 'summary.md'
    summary.write_text(_summary(results, methods), encoding='utf-8')
    written.append(summary)
    _logger.info('reports: wrote %d files to %s', len(written), out)
    return written


# per-pixel classification


def classify_dataset(
    ds: LabeledDataset,
    classifier: hyperbench.gbt.GbtModel,
    out: Optional[hyperbench.io.PathLike] = None,
    compressor: Optional[hyperbench.compress.Compressor] = None,
) -> npt.NDArray[np.int64]:
    '''
    Predicts a label for every pixel; writes ``pixel,label,split,predicted``
    rows with class names when ``out`` is given
    '''
    spectra = ds.spectra.astype(np.float64)
    if compressor is not None:
        if compressor.n_bands != ds.n_bands:
            raise ShapeError(f'Compressor expects {compressor.n_bands} bands, dataset has {ds.n_bands}')
        features = compressor.encode(spectra)
    else:
        features = spectra
    if classifier.n_features != features.shape[1]:
        raise ShapeError(f'Classifier expects {classifier.n_features} features, got {features.shape[1]}')
    if classifier.n_classes != ds.n_classes:
        raise ShapeError(f'Classifier knows {classifier.n_classes} classes, dataset has {ds.n_classes}')

    predicted = classifier.predict(features)
    if out is not None:
        names = np.array(ds.class_names, dtype=object)
        frame = pd.DataFrame({
            'pixel': np.arange(ds.n_pixels),
            'label': names[ds.labels],
            'split': [SplitTags.get_description(int(tag)) for tag in ds.split],
            'predicted': names[predicted],
        })
        frame.to_csv(out, index=False, lineterminator='\n')
    return predicted
