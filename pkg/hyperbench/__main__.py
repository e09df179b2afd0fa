# SPDX-License-Identifier: MIT

from __future__ import annotations

import argparse
import logging
import sys

from typing import List, Optional, Sequence

import numpy as np

import hyperbench.compress
import hyperbench.dataset
import hyperbench.gbt
import hyperbench.io
import hyperbench.metrics
import hyperbench.sweep

from hyperbench.data import COMPRESSION_METHODS, SplitTags
from hyperbench.errors import ConfigurationError, HyperbenchError


_logger = logging.getLogger('hyperbench')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expecting comma-separated integers, got '{value}'") from None


def _setup_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.captureWarnings(True)


def _features(ds: hyperbench.dataset.LabeledDataset, model_path: Optional[str]) -> np.ndarray:  # type: ignore[type-arg]
    spectra = ds.spectra.astype(np.float64)
    if model_path is None:
        return spectra
    return hyperbench.compress.load_model(model_path).encode(spectra)


def cmd_gen(args: argparse.Namespace) -> None:
    overrides = {
        'n_bands': args.bands,
        'noise_sigma': args.noise,
        'mixing_jitter': args.jitter,
    }
    if args.preset:
        cfg = hyperbench.dataset.preset_config(args.preset, seed=args.seed, scale=args.scale, **overrides)
    elif args.classes:
        cfg = hyperbench.dataset.SyntheticConfig(
            seed=args.seed, classes=hyperbench.dataset.parse_class_spec(args.classes), **overrides,
        )
    else:
        raise ConfigurationError('classes', 'expecting --classes or --preset')
    ds = hyperbench.dataset.generate_synthetic(cfg)
    hyperbench.io.save_dataset(ds, args.out)
    _logger.info('wrote %r to %s', ds, args.out)


def cmd_rgb(args: argparse.Namespace) -> None:
    ds = hyperbench.dataset.extract_rgb(hyperbench.io.load_dataset(args.input))
    hyperbench.io.save_dataset(ds, args.output)


def cmd_denoise(args: argparse.Namespace) -> None:
    ds = hyperbench.io.load_dataset(args.input)
    cfg = hyperbench.metrics.SgConfig(args.window, args.order)
    hyperbench.io.save_dataset(ds.with_spectra(hyperbench.metrics.sg_filter(ds.spectra, cfg)), args.output)


def cmd_fit(args: argparse.Namespace) -> None:
    ds = hyperbench.io.load_dataset(args.data)
    d = hyperbench.compress.dims_for_rate(ds.n_bands, args.rate)
    train, _ = ds.partition(SplitTags.TRAIN)
    val, _ = ds.partition(SplitTags.VALIDATION)
    options = {}
    if args.method in ('ae', 'dae'):
        options = {'restarts': args.restarts, 'hidden_ae': args.hidden, 'epochs': args.epochs, 'workers': args.workers}
    model = hyperbench.compress.fit_compressor(args.method, train, d, seed=args.seed, val=val, **options)
    hyperbench.compress.save_model(model, args.model)
    test, _ = ds.partition(SplitTags.TEST)
    _logger.info(
        '%s at %d%% (d=%d): test MSE %.6g, fitted in %.2fs',
        args.method, args.rate, d, hyperbench.metrics.mean_mse(test, model.reconstruct(test)), model.fit_seconds,
    )


def cmd_encode(args: argparse.Namespace) -> None:
    model = hyperbench.compress.load_model(args.model)
    ds = hyperbench.io.load_dataset(args.data)
    hyperbench.io.save_encoded(args.output, model.encode(ds.spectra.astype(np.float64)), ds)


def cmd_decode(args: argparse.Namespace) -> None:
    model = hyperbench.compress.load_model(args.model)
    encoded, names, labels, split = hyperbench.io.load_encoded(args.encoded)
    decoded = model.decode(encoded)
    hyperbench.io.save_dataset(hyperbench.dataset.LabeledDataset(decoded, labels, names, split), args.output)


def cmd_train_clf(args: argparse.Namespace) -> None:
    ds = hyperbench.io.load_dataset(args.data)
    features = _features(ds, args.model)
    mask = ds.mask(SplitTags.TRAIN)
    cfg = hyperbench.gbt.GbtConfig(n_rounds=args.rounds, max_depth=args.depth, learning_rate=args.learning_rate)
    classifier = hyperbench.gbt.gbt_train(features[mask], ds.labels[mask], cfg, n_classes=ds.n_classes)
    hyperbench.gbt.save_classifier(classifier, args.classifier)


def cmd_predict(args: argparse.Namespace) -> None:
    ds = hyperbench.io.load_dataset(args.data)
    classifier = hyperbench.gbt.load_classifier(args.classifier)
    compressor = hyperbench.compress.load_model(args.model) if args.model else None
    predicted = hyperbench.sweep.classify_dataset(ds, classifier, args.output, compressor)
    test = ds.mask(SplitTags.TEST)
    report = hyperbench.metrics.classification_scores(predicted[test], ds.labels[test], ds.n_classes)
    for name, scores in zip(ds.class_names, report.classes):
        print(f'{name}: precision {scores.precision:.4f}, recall {scores.recall:.4f}, f1 {scores.f1:.4f}')
    print(f'macro f1 {report.macro_f1:.4f}, accuracy {report.accuracy:.4f}')


def cmd_sweep(args: argparse.Namespace) -> None:
    overrides = {}
    if args.workers is not None:
        overrides['parallelism'] = args.workers
    if args.no_timings:
        overrides['record_timings'] = False
    if args.pre_sg:
        overrides['pre_sg'] = True
    plan = hyperbench.sweep.load_plan(args.plan, **overrides)
    results = hyperbench.sweep.run_sweep(plan, args.out)
    failed = sum(not r.ok for r in results)
    print(f'{len(results)} jobs, {failed} failed, reports in {args.out}')


def cmd_tune(args: argparse.Namespace) -> None:
    ds = hyperbench.io.load_dataset(args.data)
    train, _ = ds.partition(SplitTags.TRAIN)
    val, _ = ds.partition(SplitTags.VALIDATION)
    for rate in args.rates:
        d = hyperbench.compress.dims_for_rate(ds.n_bands, rate)
        cfg = hyperbench.compress.AeConfig(
            d=d, variant=args.variant, restarts=args.restarts, epochs=args.epochs, seed=args.seed, workers=args.workers,
        )
        scores = hyperbench.compress.tune_hidden(train, val, d, args.grid, cfg)
        best = min(scores, key=lambda hidden: scores[hidden])
        for hidden, score in scores.items():
            print(f'rate {rate}% (d={d}) hidden {hidden}: validation MSE {score:.6g}{" *" if hidden == best else ""}')


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hyperbench', description='Hyperspectral compression and classification benchmark')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='more logging (repeatable)')
    parser.add_argument('-q', '--quiet', action='store_true', help='only log errors')
    parser.add_argument('--version', action='version', version=f'%(prog)s {hyperbench.__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    defaults = hyperbench.dataset.SyntheticConfig(seed=0, classes=(('a', 4),))
    p = sub.add_parser('gen', help='generate a synthetic dataset')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--classes', help="class list, 'name:count,name:count'")
    p.add_argument('--preset', help='class structure of a surveyed scene (suburban, urban, forest)')
    p.add_argument('--scale', type=float, default=1.0, help='pixel count scale for --preset')
    p.add_argument('--bands', type=int, default=defaults.n_bands)
    p.add_argument('--noise', type=float, default=defaults.noise_sigma)
    p.add_argument('--jitter', type=float, default=defaults.mixing_jitter)
    p.add_argument('--out', required=True, help='output path (.hspx or .csv)')
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser('rgb', help='keep the bands nearest 670, 540 and 470 nm')
    p.add_argument('input')
    p.add_argument('output')
    p.set_defaults(func=cmd_rgb)

    sg = hyperbench.metrics.SgConfig()
    p = sub.add_parser('denoise', help='Savitzky-Golay smoothing of every spectrum')
    p.add_argument('--window', type=int, default=sg.window)
    p.add_argument('--order', type=int, default=sg.poly_order)
    p.add_argument('input')
    p.add_argument('output')
    p.set_defaults(func=cmd_denoise)

    ae = hyperbench.compress.AeConfig(d=1)
    p = sub.add_parser('fit', help='fit a compressor on the train split')
    p.add_argument('--method', choices=COMPRESSION_METHODS, required=True)
    p.add_argument('--rate', type=int, required=True, help='compression rate (percent)')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--restarts', type=int, default=ae.restarts)
    p.add_argument('--hidden', type=int, default=ae.hidden_ae)
    p.add_argument('--epochs', type=int, default=ae.epochs)
    p.add_argument('--workers', type=int, default=ae.workers, help='threads for autoencoder restarts')
    p.add_argument('data')
    p.add_argument('model')
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('encode', help='encode a dataset into a label,split,z0,... CSV')
    p.add_argument('model')
    p.add_argument('data')
    p.add_argument('output')
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser('decode', help='decode an encoded CSV back into a dataset')
    p.add_argument('model')
    p.add_argument('encoded')
    p.add_argument('output')
    p.set_defaults(func=cmd_decode)

    gbt = hyperbench.gbt.GbtConfig()
    p = sub.add_parser('train-clf', help='train the boosted-tree classifier on the train split')
    p.add_argument('--model', help='compressor applied before classification')
    p.add_argument('--rounds', type=int, default=gbt.n_rounds)
    p.add_argument('--depth', type=int, default=gbt.max_depth)
    p.add_argument('--learning-rate', type=float, default=gbt.learning_rate)
    p.add_argument('data')
    p.add_argument('classifier')
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser('predict', help='classify every pixel of a dataset')
    p.add_argument('--model', help='compressor applied before classification')
    p.add_argument('data')
    p.add_argument('classifier')
    p.add_argument('output', help='pixel,label,split,predicted CSV')
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser('sweep', help='run a methods x rates x datasets plan')
    p.add_argument('--plan', required=True)
    p.add_argument('--out', required=True, help='report directory')
    p.add_argument('--workers', type=int)
    p.add_argument('--no-timings', action='store_true', help='write zero timings (byte-identical reruns)')
    p.add_argument('--pre-sg', action='store_true', help='smooth spectra before compression')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('tune', help='grid search of the autoencoder hidden width')
    p.add_argument('--rates', type=_int_list, default=[99])
    p.add_argument('--grid', type=_int_list, default=[64, 128, 256, 512])
    p.add_argument('--variant', choices=('ae', 'dae'), default='ae')
    p.add_argument('--restarts', type=int, default=ae.restarts)
    p.add_argument('--epochs', type=int, default=ae.epochs)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--workers', type=int, default=ae.workers)
    p.add_argument('data')
    p.set_defaults(func=cmd_tune)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging(args.verbose, args.quiet)
    try:
        args.func(args)
    except (HyperbenchError, OSError) as e:
        _logger.error('%s: %s', type(e).__name__, e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
