# SPDX-License-Identifier: MIT

'''
Multiclass gradient-boosted decision trees

Softmax objective with one regression tree per class and round; splits are
found by exact greedy search over the sorted feature values.
'''

from __future__ import annotations

import dataclasses
import logging

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.special

import hyperbench.io

from hyperbench.data import HGBT_MAGIC
from hyperbench.errors import ConfigurationError, InvalidMatrixError, ParseError, ShapeError, TrainingError


_logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# container format version, stored as the HGBT1 code byte
FORMAT_VERSION = 1
# lower bound on the per-sample hessian
HESSIAN_FLOOR = 1e-16

_LEAF = -1


@dataclasses.dataclass(frozen=True)
class GbtConfig():
    '''
    Boosting hyperparameters

    Split search is exhaustive and there is no row or column subsampling, so
    training never draws random numbers. ``seed`` is accepted and validated so
    that stored configurations keep the same fields as the other trainers; it
    does not change the fitted model.
    '''
    n_rounds: int = 10
    max_depth: int = 10
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.n_rounds < 1:
            raise ConfigurationError('n_rounds', f'expecting at least 1 round, got {self.n_rounds}')
        if self.max_depth < 1:
            raise ConfigurationError('max_depth', f'expecting a positive depth, got {self.max_depth}')
        if not self.learning_rate > 0:
            raise ConfigurationError('learning_rate', f'expecting a positive value, got {self.learning_rate}')
        if self.reg_lambda < 0:
            raise ConfigurationError('reg_lambda', f'expecting a nonnegative value, got {self.reg_lambda}')
        if self.min_split_gain < 0:
            raise ConfigurationError('min_split_gain', f'expecting a nonnegative value, got {self.min_split_gain}')
        if self.min_child_weight < 0:
            raise ConfigurationError('min_child_weight', f'expecting a nonnegative value, got {self.min_child_weight}')
        if self.seed < 0:
            raise ConfigurationError('seed', f'expecting an unsigned integer, got {self.seed}')


class Tree():
    '''
    Regression tree as flat node arrays; node 0 is the root

    Internal nodes send ``x[feature] <= threshold`` to ``left``, the rest to
    ``right``; leaves have ``feature == -1`` and carry ``value``.
    '''
    def __init__(
        self,
        feature: npt.ArrayLike,
        threshold: npt.ArrayLike,
        left: npt.ArrayLike,
        right: npt.ArrayLike,
        value: npt.ArrayLike,
    ) -> None:
        self._feature = np.asarray(feature, dtype=np.int64)
        self._threshold = np.asarray(threshold, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._value = np.asarray(value, dtype=np.float64)
        size = self._feature.size
        if size == 0 or any(a.shape != (size,) for a in (self._threshold, self._left, self._right, self._value)):
            raise ShapeError('Tree arrays should be non-empty vectors of equal length')
        internal = self._feature != _LEAF
        for child in (self._left[internal], self._right[internal]):
            if child.size and (child.min() <= 0 or child.max() >= size):
                raise ShapeError('Tree child index out of range')

    @property
    def feature(self) -> IntArray:
        return self._feature

    @property
    def threshold(self) -> FloatArray:
        return self._threshold

    @property
    def left(self) -> IntArray:
        return self._left

    @property
    def right(self) -> IntArray:
        return self._right

    @property
    def value(self) -> FloatArray:
        return self._value

    @property
    def n_nodes(self) -> int:
        return int(self._feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self._feature == _LEAF))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self._feature[node] != _LEAF:
                depths[self._left[node]] = depths[node] + 1
                depths[self._right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, x: FloatArray) -> FloatArray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        while True:
            feature = self._feature[node]
            active = feature != _LEAF
            if not active.any():
                break
            goes_left = x[rows[active], feature[active]] <= self._threshold[node[active]]
            node[active] = np.where(goes_left, self._left[node[active]], self._right[node[active]])
        return self._value[node]


def split_gain(g_left: FloatArray, h_left: FloatArray, g_right: FloatArray, h_right: FloatArray, reg_lambda: float) -> FloatArray:
    '''
    1/2 [G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda)]
    '''
    g = g_left + g_right
    h = h_left + h_right
    return np.asarray(0.5 * (
        g_left ** 2 / (h_left + reg_lambda)
        + g_right ** 2 / (h_right + reg_lambda)
        - g ** 2 / (h + reg_lambda)
    ))


def best_split(
    x: FloatArray,
    grad: FloatArray,
    hess: FloatArray,
    cfg: GbtConfig,
) -> Optional[Tuple[int, float, float]]:
    '''
    Exact greedy search; returns ``(feature, threshold, gain)`` or None

    Candidate thresholds are the distinct sorted values of each feature;
    ties in gain go to the lowest feature index, then the lowest threshold.
    '''
    n_samples = x.shape[0]
    if n_samples < 2:
        return None
    order = np.argsort(x, axis=0, kind='stable')
    values = np.take_along_axis(x, order, axis=0)
    g_left = np.cumsum(grad[order], axis=0)[:-1]
    h_left = np.cumsum(hess[order], axis=0)[:-1]
    g_right = grad.sum() - g_left
    h_right = hess.sum() - h_left

    valid = (
        (values[1:] != values[:-1])
        & (h_left >= cfg.min_child_weight)
        & (h_right >= cfg.min_child_weight)
    )
    if not valid.any():
        return None
    gains = np.where(valid, split_gain(g_left, h_left, g_right, h_right, cfg.reg_lambda), -np.inf)

    # feature-major scan: lowest feature first, then lowest threshold
    flat = int(np.argmax(gains.T))
    feature, position = divmod(flat, n_samples - 1)
    gain = float(gains[position, feature])
    if not gain > cfg.min_split_gain:
        return None
    return feature, float(values[position, feature]), gain


def build_tree(x: FloatArray, grad: FloatArray, hess: FloatArray, cfg: GbtConfig) -> Tree:
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def grow(rows: IntArray, depth: int) -> int:
        node = len(feature)
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        g, h = float(grad[rows].sum()), float(hess[rows].sum())
        value.append(-g / (h + cfg.reg_lambda) * cfg.learning_rate)

        split = best_split(x[rows], grad[rows], hess[rows], cfg) if depth < cfg.max_depth else None
        if split is not None:
            column, cut, _ = split
            goes_left = x[rows, column] <= cut
            feature[node] = column
            threshold[node] = cut
            left[node] = grow(rows[goes_left], depth + 1)
            right[node] = grow(rows[~goes_left], depth + 1)
            value[node] = 0.0
        return node

    grow(np.arange(x.shape[0]), 0)
    return Tree(feature, threshold, left, right, value)


class GbtModel():
    '''
    ``trees[t][c]`` is the tree of class c in round t
    '''
    def __init__(self, n_classes: int, n_features: int, trees: Sequence[Sequence[Tree]] = (), base_score: float = 0.0) -> None:
        if n_classes < 2:
            raise ShapeError(f'Expecting at least 2 classes, got {n_classes}')
        if n_features < 1:
            raise ShapeError(f'Expecting at least 1 feature, got {n_features}')
        for round_trees in trees:
            if len(round_trees) != n_classes:
                raise ShapeError(f'Expecting {n_classes} trees per round, got {len(round_trees)}')
            for tree in round_trees:
                internal = tree.feature[tree.feature != _LEAF]
                if internal.size and internal.max() >= n_features:
                    raise ShapeError(f'Tree splits on feature {int(internal.max())} of {n_features}')
        self._n_classes = n_classes
        self._n_features = n_features
        self._trees = [list(round_trees) for round_trees in trees]
        self._base_score = base_score

    @property
    def n_classes(self) -> int:
        return self._n_classes

    @property
    def n_features(self) -> int:
        return self._n_features

    @property
    def trees(self) -> List[List[Tree]]:
        return self._trees

    @property
    def base_score(self) -> float:
        return self._base_score

    @property
    def n_rounds(self) -> int:
        return len(self._trees)

    def __repr__(self) -> str:
        return f'GbtModel(classes={self._n_classes}, features={self._n_features}, rounds={self.n_rounds})'

    def _check(self, x: npt.ArrayLike) -> FloatArray:
        array = np.asarray(x, dtype=np.float64)
        if array.ndim == 1:
            array = array[None, :]
        if array.ndim != 2 or array.shape[1] != self._n_features:
            raise ShapeError(f'Expecting feature vectors of length {self._n_features}, got shape {np.shape(x)}')
        if not np.isfinite(array).all():
            raise InvalidMatrixError('Feature vectors hold non-finite values')
        return array

    def decision_function(self, x: npt.ArrayLike) -> FloatArray:
        array = self._check(x)
        logits = np.full((array.shape[0], self._n_classes), self._base_score)
        for round_trees in self._trees:
            for c, tree in enumerate(round_trees):
                logits[:, c] += tree.predict(array)
        return logits

    def predict_proba(self, x: npt.ArrayLike) -> FloatArray:
        return np.asarray(scipy.special.softmax(self.decision_function(x), axis=1))

    def predict(self, x: npt.ArrayLike) -> IntArray:
        # argmax keeps the lowest index on ties
        return np.argmax(self.decision_function(x), axis=1).astype(np.int64)


def gbt_train(
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: GbtConfig = GbtConfig(),
    n_classes: Optional[int] = None,
) -> GbtModel:
    features = np.asarray(x, dtype=np.float64)
    labels = np.asarray(y, dtype=np.int64).reshape(-1)
    if features.ndim != 2 or features.shape[1] < 1 or features.shape[0] < 1:
        raise ShapeError(f'Expecting an N x d feature matrix, got shape {features.shape}')
    if labels.size != features.shape[0]:
        raise ShapeError(f'Expecting {features.shape[0]} labels, got {labels.size}')
    if not np.isfinite(features).all():
        raise InvalidMatrixError('Feature matrix holds non-finite values')
    if labels.min() < 0:
        raise ValueError(f'Invalid label: {int(labels.min())}')
    classes = int(labels.max()) + 1 if n_classes is None else n_classes
    if labels.max() >= classes:
        raise ValueError(f'Label {int(labels.max())} out of range for {classes} classes')
    if np.unique(labels).size < 2:
        raise TrainingError(f'Expecting at least 2 classes in the training labels, got only {int(labels[0])}')

    onehot = np.zeros((labels.size, classes))
    onehot[np.arange(labels.size), labels] = 1.0
    logits = np.zeros((labels.size, classes))
    trees: List[List[Tree]] = []
    for t in range(cfg.n_rounds):
        proba = scipy.special.softmax(logits, axis=1)
        round_trees = []
        for c in range(classes):
            grad = proba[:, c] - onehot[:, c]
            hess = np.maximum(proba[:, c] * (1.0 - proba[:, c]), HESSIAN_FLOOR)
            tree = build_tree(features, grad, hess, cfg)
            round_trees.append(tree)
        for c, tree in enumerate(round_trees):
            logits[:, c] += tree.predict(features)
        trees.append(round_trees)
        if _logger.isEnabledFor(logging.DEBUG):
            loss = -float(np.mean(np.log(np.maximum(scipy.special.softmax(logits, axis=1)[np.arange(labels.size), labels], 1e-300))))
            _logger.debug(
                'round %d/%d: %d leaves, training log-loss %.6f',
                t + 1, cfg.n_rounds, sum(tree.n_leaves for tree in round_trees), loss,
            )
    return GbtModel(classes, features.shape[1], trees)


def gbt_predict(m: GbtModel, x: npt.ArrayLike) -> Tuple[int, FloatArray]:
    '''
    Class index and class probabilities of a single feature vector
    '''
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1:
        raise ShapeError(f'Expecting a single feature vector, got shape {vector.shape}')
    proba = m.predict_proba(vector)[0]
    return int(np.argmax(proba)), proba


# persistence


def dumps_classifier(m: GbtModel) -> bytes:
    flat = [tree for round_trees in m.trees for tree in round_trees]
    offsets = np.cumsum([0] + [tree.n_nodes for tree in flat]).astype(np.int64)

    def join(attr: str, dtype: type) -> np.ndarray:  # type: ignore[type-arg]
        if not flat:
            return np.zeros(0, dtype=dtype)
        return np.concatenate([getattr(tree, attr) for tree in flat]).astype(dtype)

    sections: Dict[str, hyperbench.io.SectionValue] = {
        'n_classes': m.n_classes,
        'n_features': m.n_features,
        'n_rounds': m.n_rounds,
        'base_score': m.base_score,
        'offsets': offsets,
        'feature': join('feature', np.int64),
        'threshold': join('threshold', np.float64),
        'left': join('left', np.int64),
        'right': join('right', np.int64),
        'value': join('value', np.float64),
    }
    return hyperbench.io.dumps_sections(HGBT_MAGIC, FORMAT_VERSION, sections)


def loads_classifier(data: bytes) -> GbtModel:
    version, sections = hyperbench.io.loads_sections(data, HGBT_MAGIC)
    if version != FORMAT_VERSION:
        raise ParseError(f'Unsupported HGBT version {version}', offset=len(HGBT_MAGIC))
    try:
        n_classes = int(sections['n_classes'])  # type: ignore[arg-type]
        n_features = int(sections['n_features'])  # type: ignore[arg-type]
        n_rounds = int(sections['n_rounds'])  # type: ignore[arg-type]
        base_score = float(sections['base_score'])  # type: ignore[arg-type]
        offsets = np.asarray(sections['offsets'])
        arrays = {name: np.asarray(sections[name]) for name in ('feature', 'threshold', 'left', 'right', 'value')}
    except KeyError as e:
        raise ParseError(f'Missing section {e.args[0]!r}') from None
    if offsets.size != n_rounds * n_classes + 1:
        raise ParseError(f'Expecting {n_rounds * n_classes} trees, got {offsets.size - 1}')

    trees = []
    for t in range(n_rounds):
        round_trees = []
        for c in range(n_classes):
            start, stop = offsets[t * n_classes + c], offsets[t * n_classes + c + 1]
            round_trees.append(Tree(*(arrays[name][start:stop] for name in ('feature', 'threshold', 'left', 'right', 'value'))))
        trees.append(round_trees)
    return GbtModel(n_classes, n_features, trees, base_score)


def save_classifier(m: GbtModel, path: hyperbench.io.PathLike) -> None:
    with open(path, 'wb') as f:
        f.write(dumps_classifier(m))


def load_classifier(path: hyperbench.io.PathLike) -> GbtModel:
    with open(path, 'rb') as f:
        return loads_classifier(f.read())
