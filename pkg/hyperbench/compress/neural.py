# SPDX-License-Identifier: MIT

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import warnings

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.special

import hyperbench.metrics

from hyperbench.compress.base import Compressor, FloatArray, State, check_samples
from hyperbench.data import Methods
from hyperbench.errors import ConfigurationError, DivergenceWarning, InvalidMatrixError, ShapeError, TrainingError


_logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'identity', 'sigmoid')

# fixed denoising autoencoder widths (encoder side, the decoder mirrors them)
DAE_HIDDEN = (400, 500)


def _activate(tag: str, a: FloatArray) -> FloatArray:
    if tag == 'relu':
        return np.maximum(a, 0.0)
    if tag == 'sigmoid':
        return np.asarray(scipy.special.expit(a))
    return a


def _derivative(tag: str, out: FloatArray) -> FloatArray:
    '''
    Activation derivative expressed through the activation output
    '''
    if tag == 'relu':
        return (out > 0).astype(np.float64)
    if tag == 'sigmoid':
        return np.asarray(out * (1.0 - out))
    return np.ones_like(out)


class Mlp():
    '''
    Fully connected network; layer i maps ``a @ weights[i] + biases[i]``
    through ``activations[i]``
    '''
    def __init__(self, weights: Sequence[FloatArray], biases: Sequence[FloatArray], activations: Sequence[str]) -> None:
        if not weights or len(weights) != len(biases) or len(weights) != len(activations):
            raise ShapeError(
                f'Expecting matching layer lists, got {len(weights)} weights, {len(biases)} biases, {len(activations)} activations'
            )
        for i, (w, b, tag) in enumerate(zip(weights, biases, activations)):
            if tag not in ACTIVATIONS:
                raise ValueError(f"Unknown activation '{tag}' in layer {i}")
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f'Layer {i}: weights {w.shape} do not match biases {b.shape}')
            if i and w.shape[0] != weights[i - 1].shape[1]:
                raise ShapeError(f'Layer {i} expects {w.shape[0]} inputs, previous layer gives {weights[i - 1].shape[1]}')
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InvalidMatrixError(f'Layer {i} holds non-finite parameters')
        self._weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self._biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self._activations = tuple(activations)

    @property
    def weights(self) -> List[FloatArray]:
        return self._weights

    @property
    def biases(self) -> List[FloatArray]:
        return self._biases

    @property
    def activations(self) -> Tuple[str, ...]:
        return self._activations

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self._weights[0].shape[0],) + tuple(w.shape[1] for w in self._weights)

    @property
    def params(self) -> List[FloatArray]:
        return self._weights + self._biases

    def with_params(self, params: Sequence[FloatArray]) -> Mlp:
        n = len(self._weights)
        return Mlp(list(params[:n]), list(params[n:]), self._activations)

    def slice(self, start: int, stop: int) -> Mlp:
        return Mlp(self._weights[start:stop], self._biases[start:stop], self._activations[start:stop])

    def __repr__(self) -> str:
        return f'Mlp({"-".join(str(s) for s in self.sizes)})'


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> Mlp:
    '''
    He-uniform weights (limit sqrt(6 / fan_in)) and zero biases
    '''
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, activations)


def mlp_forward(m: Mlp, x: npt.ArrayLike) -> List[FloatArray]:
    '''
    Returns the activations of every layer, input first and output last
    '''
    a = check_samples(x, m.sizes[0], 'network input')
    outputs = [a]
    for w, b, tag in zip(m.weights, m.biases, m.activations):
        a = _activate(tag, a @ w + b)
        outputs.append(a)
    return outputs


def mlp_backward(
    m: Mlp,
    x: npt.ArrayLike,
    target: npt.ArrayLike,
    activations: Optional[List[FloatArray]] = None,
    *,
    loss_scale: float = 1.0,
) -> Tuple[float, List[FloatArray]]:
    '''
    Loss ``loss_scale * mean((output - target) ** 2)`` and its gradient

    The gradient list follows ``Mlp.params``: every weight matrix, then every
    bias vector. ``activations`` may be passed to reuse a forward pass.
    '''
    outputs = mlp_forward(m, x) if activations is None else activations
    t = check_samples(target, m.sizes[-1], 'target')
    if t.shape != outputs[-1].shape:
        raise ShapeError(f'Target shape {t.shape} does not match output {outputs[-1].shape}')

    residual = outputs[-1] - t
    loss = loss_scale * float(np.mean(residual ** 2))
    delta = (2.0 * loss_scale / residual.size) * residual * _derivative(m.activations[-1], outputs[-1])

    n_layers = len(m.weights)
    grad_w: List[FloatArray] = [np.empty(0)] * n_layers
    grad_b: List[FloatArray] = [np.empty(0)] * n_layers
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = outputs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ m.weights[i].T) * _derivative(m.activations[i - 1], outputs[i])
    return loss, grad_w + grad_b


# optimizer


@dataclasses.dataclass(frozen=True)
class AdamConfig():
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.lr > 0:
            raise ConfigurationError('lr', f'expecting a positive value, got {self.lr}')
        for name in ('beta1', 'beta2'):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ConfigurationError(name, f'expecting a value in [0, 1), got {value}')
        if not self.eps > 0:
            raise ConfigurationError('eps', f'expecting a positive value, got {self.eps}')


@dataclasses.dataclass(frozen=True)
class AdamState():
    m: Tuple[FloatArray, ...]
    v: Tuple[FloatArray, ...]
    step: int = 0

    @classmethod
    def zeros(cls, params: Sequence[FloatArray]) -> AdamState:
        return cls(tuple(np.zeros_like(p) for p in params), tuple(np.zeros_like(p) for p in params))


def adam_step(
    state: AdamState,
    params: Sequence[FloatArray],
    grads: Sequence[FloatArray],
    cfg: AdamConfig = AdamConfig(),
) -> Tuple[List[FloatArray], AdamState]:
    '''
    One bias-corrected Adam update; returns new parameters and state
    '''
    if not len(params) == len(grads) == len(state.m):
        raise ShapeError(f'Expecting {len(state.m)} parameter arrays, got {len(params)} params and {len(grads)} gradients')
    step = state.step + 1
    correction1 = 1.0 - cfg.beta1 ** step
    correction2 = 1.0 - cfg.beta2 ** step
    new_params = []
    new_m = []
    new_v = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f'Parameter shape {p.shape} does not match gradient {g.shape}')
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        new_params.append(p - cfg.lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(tuple(new_m), tuple(new_v), step)


# autoencoders


@dataclasses.dataclass(frozen=True)
class AeConfig():
    d: int
    variant: str = 'ae'
    hidden_ae: int = 256
    # encoder hidden widths, overriding the variant's architecture
    hidden_layers: Optional[Tuple[int, ...]] = None
    epochs: int = 30
    batch_size: int = 64
    restarts: int = 10
    adam: AdamConfig = AdamConfig()
    dae_noise_sigma: float = 0.05
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.hidden_layers is not None:
            object.__setattr__(self, 'hidden_layers', tuple(int(h) for h in self.hidden_layers))
        self.validate()

    def validate(self) -> None:
        if self.variant not in ('ae', 'dae'):
            raise ConfigurationError('variant', f"expecting 'ae' or 'dae', got '{self.variant}'")
        if self.d < 1:
            raise ConfigurationError('d', f'expecting a positive dimension, got {self.d}')
        if self.hidden_ae < 1:
            raise ConfigurationError('hidden_ae', f'expecting a positive width, got {self.hidden_ae}')
        if self.hidden_layers is not None and any(h < 1 for h in self.hidden_layers):
            raise ConfigurationError('hidden_layers', f'expecting positive widths, got {self.hidden_layers}')
        if self.epochs < 1:
            raise ConfigurationError('epochs', f'expecting at least 1 epoch, got {self.epochs}')
        if self.batch_size < 1:
            raise ConfigurationError('batch_size', f'expecting a positive size, got {self.batch_size}')
        if self.restarts < 1:
            raise ConfigurationError('restarts', f'expecting at least 1 restart, got {self.restarts}')
        if self.dae_noise_sigma < 0:
            raise ConfigurationError('dae_noise_sigma', f'expecting a nonnegative value, got {self.dae_noise_sigma}')
        if self.seed < 0:
            raise ConfigurationError('seed', f'expecting an unsigned integer, got {self.seed}')
        if self.workers < 1:
            raise ConfigurationError('workers', f'expecting at least 1 worker, got {self.workers}')

    @property
    def encoder_hidden(self) -> Tuple[int, ...]:
        if self.hidden_layers is not None:
            return self.hidden_layers
        return DAE_HIDDEN if self.variant == 'dae' else (self.hidden_ae,)

    def layer_sizes(self, n_bands: int) -> Tuple[int, ...]:
        hidden = self.encoder_hidden
        return (n_bands,) + hidden + (self.d,) + tuple(reversed(hidden)) + (n_bands,)

    def layer_activations(self) -> Tuple[str, ...]:
        hidden = len(self.encoder_hidden)
        return ('relu',) * hidden + ('identity',) + ('relu',) * hidden + ('sigmoid',)


@dataclasses.dataclass(frozen=True)
class TrainingHistory():
    restart: int
    # per-epoch full-pass reconstruction MSE; diverged restarts stop early
    train_mse: Tuple[float, ...]
    val_mse: Tuple[float, ...]
    diverged: bool = False

    @property
    def final_val_mse(self) -> float:
        return self.val_mse[-1] if self.val_mse and not self.diverged else float('inf')


class AeModel(Compressor):
    '''
    Autoencoder compressor; ``network`` holds encoder and decoder layers,
    the first ``bottleneck`` of them form the encoder
    '''
    def __init__(
        self,
        network: Mlp,
        bottleneck: int,
        variant: str = 'ae',
        histories: Sequence[TrainingHistory] = (),
        chosen: int = 0,
    ) -> None:
        if variant not in ('ae', 'dae'):
            raise ValueError(f"Unknown autoencoder variant '{variant}'")
        if not 1 <= bottleneck < len(network.weights):
            raise ShapeError(f'Bottleneck layer {bottleneck} out of range for {len(network.weights)} layers')
        super().__init__(network.sizes[0], network.sizes[bottleneck])
        self.METHOD = Methods.DAE if variant == 'dae' else Methods.AE
        if network.sizes[-1] != network.sizes[0]:
            raise ShapeError(f'Autoencoder output ({network.sizes[-1]}) should match its input ({network.sizes[0]})')
        self._network = network
        self._bottleneck = bottleneck
        self._variant = variant
        self._histories = tuple(histories)
        self._chosen = chosen
        self._encoder = network.slice(0, bottleneck)
        self._decoder = network.slice(bottleneck, len(network.weights))

    @property
    def network(self) -> Mlp:
        return self._network

    @property
    def encoder(self) -> Mlp:
        return self._encoder

    @property
    def decoder(self) -> Mlp:
        return self._decoder

    @property
    def variant(self) -> str:
        return self._variant

    @property
    def histories(self) -> Tuple[TrainingHistory, ...]:
        return self._histories

    @property
    def chosen(self) -> int:
        return self._chosen

    def _encode(self, x: FloatArray) -> FloatArray:
        return mlp_forward(self._encoder, x)[-1]

    def _decode(self, z: FloatArray) -> FloatArray:
        return mlp_forward(self._decoder, z)[-1]

    def state(self) -> State:
        state: State = {
            'variant': self._variant,
            'activations': ','.join(self._network.activations),
            'bottleneck': self._bottleneck,
            'chosen': self._chosen,
        }
        for i, (w, b) in enumerate(zip(self._network.weights, self._network.biases)):
            state[f'w{i}'] = w
            state[f'b{i}'] = b
        if self._histories:
            state['history_restart'] = np.array([h.restart for h in self._histories], dtype=np.int64)
            state['history_epochs'] = np.array([len(h.train_mse) for h in self._histories], dtype=np.int64)
            state['history_diverged'] = np.array([h.diverged for h in self._histories], dtype=np.bool_)
            state['history_train'] = np.array([v for h in self._histories for v in h.train_mse], dtype=np.float64)
            state['history_val'] = np.array([v for h in self._histories for v in h.val_mse], dtype=np.float64)
        return state

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> AeModel:
        activations = str(state['activations']).split(',')
        weights = [state[f'w{i}'] for i in range(len(activations))]
        biases = [state[f'b{i}'] for i in range(len(activations))]
        histories = []
        if 'history_epochs' in state:
            offset = 0
            for restart, epochs, diverged in zip(state['history_restart'], state['history_epochs'], state['history_diverged']):
                histories.append(TrainingHistory(
                    int(restart),
                    tuple(float(v) for v in state['history_train'][offset:offset + epochs]),
                    tuple(float(v) for v in state['history_val'][offset:offset + epochs]),
                    bool(diverged),
                ))
                offset += int(epochs)
        return cls(
            Mlp(weights, biases, activations),
            int(state['bottleneck']),
            str(state['variant']),
            histories,
            int(state['chosen']),
        )


def _reconstruction_mse(network: Mlp, x: FloatArray) -> float:
    return hyperbench.metrics.mean_mse(x, mlp_forward(network, x)[-1])


def _train_restart(
    train: FloatArray,
    val: FloatArray,
    cfg: AeConfig,
    restart: int,
) -> Tuple[Optional[Mlp], TrainingHistory]:
    rng = np.random.default_rng(cfg.seed + restart)
    network = init_mlp(cfg.layer_sizes(train.shape[1]), cfg.layer_activations(), rng)
    params = network.params
    state = AdamState.zeros(params)
    noisy = cfg.variant == 'dae' and cfg.dae_noise_sigma > 0

    train_mse: List[float] = []
    val_mse: List[float] = []
    with np.errstate(over='ignore', invalid='ignore'):
        for epoch in range(cfg.epochs):
            order = rng.permutation(train.shape[0])
            for start in range(0, order.size, cfg.batch_size):
                target = train[order[start:start + cfg.batch_size]]
                inputs = target
                if noisy:
                    inputs = np.clip(target + cfg.dae_noise_sigma * rng.standard_normal(target.shape), 0.0, 1.0)
                loss, grads = mlp_backward(network, inputs, target)
                if not np.isfinite(loss):
                    _logger.debug('restart %d diverged in epoch %d', restart, epoch + 1)
                    return None, TrainingHistory(restart, tuple(train_mse), tuple(val_mse), diverged=True)
                params, state = adam_step(state, params, grads, cfg.adam)
                if not all(np.isfinite(p).all() for p in params):
                    _logger.debug('restart %d diverged in epoch %d', restart, epoch + 1)
                    return None, TrainingHistory(restart, tuple(train_mse), tuple(val_mse), diverged=True)
                network = network.with_params(params)

            train_mse.append(_reconstruction_mse(network, train))
            val_mse.append(_reconstruction_mse(network, val))
            _logger.debug(
                '%s restart %d epoch %d/%d: train %.6g, validation %.6g',
                cfg.variant, restart, epoch + 1, cfg.epochs, train_mse[-1], val_mse[-1],
            )

    return network, TrainingHistory(restart, tuple(train_mse), tuple(val_mse))


def ae_train(train: npt.ArrayLike, val: Optional[npt.ArrayLike], cfg: AeConfig) -> AeModel:
    '''
    Trains ``cfg.restarts`` independent autoencoders and keeps the one with
    the lowest final validation MSE

    Restart i is seeded with ``cfg.seed + i``; the denoising variant corrupts
    each batch with clamped Gaussian noise while the target stays clean.
    Diverged restarts are discarded with a DivergenceWarning.
    '''
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f'Expecting a non-empty N x n training set, got shape {x.shape}')
    x = check_samples(x, x.shape[1], 'training spectrum')
    if cfg.d > x.shape[1]:
        raise ShapeError(f'Expecting d <= {x.shape[1]}, got d={cfg.d}')
    v = x if val is None or np.size(val) == 0 else check_samples(val, x.shape[1], 'validation spectrum')

    def run(restart: int) -> Tuple[Optional[Mlp], TrainingHistory]:
        return _train_restart(x, v, cfg, restart)

    results: Iterable[Tuple[Optional[Mlp], TrainingHistory]]
    if cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, range(cfg.restarts)))
    else:
        results = [run(restart) for restart in range(cfg.restarts)]

    networks = []
    histories = []
    for network, history in results:
        if history.diverged:
            warnings.warn(DivergenceWarning(f'{cfg.variant} restart {history.restart} diverged and was discarded'))
        networks.append(network)
        histories.append(history)

    finals = [h.final_val_mse for h in histories]
    chosen = int(np.argmin(finals))
    best = networks[chosen]
    if best is None:
        raise TrainingError(f'All {cfg.restarts} {cfg.variant} restarts diverged')
    _logger.debug('%s: chose restart %d (validation MSE %.6g)', cfg.variant, chosen, finals[chosen])
    return AeModel(best, len(cfg.encoder_hidden) + 1, cfg.variant, histories, chosen)


def tune_hidden(
    train: npt.ArrayLike,
    val: Optional[npt.ArrayLike],
    d: int,
    grid: Sequence[int] = (64, 128, 256, 512),
    cfg: Optional[AeConfig] = None,
) -> Dict[int, float]:
    '''
    Grid search over the autoencoder hidden width; maps each width to the
    validation MSE of its best restart
    '''
    base = cfg if cfg is not None else AeConfig(d=d)
    scores = {}
    for hidden in grid:
        model = ae_train(train, val, dataclasses.replace(base, d=d, hidden_ae=int(hidden), hidden_layers=None))
        scores[int(hidden)] = model.histories[model.chosen].final_val_mse
        _logger.info('hidden width %d: validation MSE %.6g', hidden, scores[int(hidden)])
    return scores
