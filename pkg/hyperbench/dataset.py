# SPDX-License-Identifier: MIT

from __future__ import annotations

import dataclasses

from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

import hyperbench.data

from hyperbench.data import BAND_STEP_NM, DEFAULT_BANDS, FIRST_BAND_NM, RGB_WAVELENGTHS_NM, SplitTags
from hyperbench.errors import ConfigurationError, InvalidDatasetError, ShapeError


FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# minimum pixels per class so that every split partition receives one
MIN_CLASS_PIXELS = 4
# absorption lines per material variant
SUBTYPE_LINES = 3


def band_grid(n_bands: int = DEFAULT_BANDS) -> FloatArray:
    '''
    Wavelengths (nm) of the default sensor grid, 400 + 2k
    '''
    if n_bands < 1:
        raise ConfigurationError('n_bands', f'expecting at least 1 band, got {n_bands}')
    return FIRST_BAND_NM + BAND_STEP_NM * np.arange(n_bands, dtype=np.float64)


def _readonly(array: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    array.setflags(write=False)
    return array


def _check_reflectance(values: np.ndarray, what: str) -> None:  # type: ignore[type-arg]
    finite = np.isfinite(values)
    if not finite.all():
        index = np.unravel_index(int(np.argmin(finite)), values.shape)
        raise InvalidDatasetError(f'{what} holds a non-finite value at {tuple(int(i) for i in index)}')
    outside = (values < 0) | (values > 1)
    if outside.any():
        index = np.unravel_index(int(np.argmax(outside)), values.shape)
        raise InvalidDatasetError(
            f'{what} holds reflectance {float(values[index])} outside [0, 1] at {tuple(int(i) for i in index)}'
        )


class Spectrum():
    def __init__(self, values: npt.ArrayLike, wavelengths: Optional[npt.ArrayLike] = None) -> None:
        array = np.array(values, dtype=np.float64)
        if array.ndim != 1 or array.size < 1:
            raise ShapeError(f'A spectrum should be a non-empty vector, got shape {array.shape}')
        _check_reflectance(array, 'Spectrum')

        if wavelengths is None:
            grid = band_grid(array.size)
        else:
            grid = np.array(wavelengths, dtype=np.float64)
            if grid.shape != array.shape:
                raise ShapeError(f'Expecting {array.size} wavelengths, got {grid.size}')

        self._values = _readonly(array)
        self._wavelengths = _readonly(grid)

    @property
    def values(self) -> FloatArray:
        return self._values

    @property
    def wavelengths(self) -> FloatArray:
        return self._wavelengths

    def __len__(self) -> int:
        return int(self._values.size)

    def __array__(self, dtype: Any = None, copy: Any = None) -> FloatArray:
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, self.__class__):
            return False
        return np.array_equal(self._values, other._values) and np.array_equal(self._wavelengths, other._wavelengths)

    def __repr__(self) -> str:
        return f'Spectrum(bands={len(self)}, range={self._wavelengths[0]:g}-{self._wavelengths[-1]:g}nm)'


class CompressedVector():
    def __init__(self, values: npt.ArrayLike, method: str, rate: int) -> None:
        array = np.array(values, dtype=np.float64)
        if array.ndim != 1 or array.size < 1:
            raise ShapeError(f'A compressed vector should be a non-empty vector, got shape {array.shape}')
        if not np.isfinite(array).all():
            raise ShapeError('A compressed vector should only hold finite values')
        self._values = _readonly(array)
        self._method = method
        self._rate = rate

    @property
    def values(self) -> FloatArray:
        return self._values

    @property
    def source_method(self) -> str:
        return self._method

    @property
    def source_rate(self) -> int:
        return self._rate

    def __len__(self) -> int:
        return int(self._values.size)

    def __repr__(self) -> str:
        return f'CompressedVector(d={len(self)}, method={self._method}, rate={self._rate}%)'


class LabeledDataset():
    '''
    Pixel spectra with class labels and a train/validation/test assignment

    Spectra are kept as a read-only float32 ``N x n`` array, the precision of
    the HSPX format, so that saving and loading is bit-exact.
    '''
    def __init__(
        self,
        spectra: npt.ArrayLike,
        labels: npt.ArrayLike,
        class_names: Sequence[str],
        split: npt.ArrayLike,
        wavelengths: Optional[npt.ArrayLike] = None,
    ) -> None:
        spectra_array = np.array(spectra, dtype=np.float32)
        if spectra_array.ndim != 2 or spectra_array.shape[1] < 1:
            raise ShapeError(f'Expecting an N x n spectra matrix, got shape {spectra_array.shape}')
        n_pixels, n_bands = spectra_array.shape
        _check_reflectance(spectra_array, 'Dataset')

        labels_array = np.array(labels, dtype=np.int64).reshape(-1)
        split_array = np.array(split, dtype=np.uint8).reshape(-1)
        if labels_array.size != n_pixels:
            raise ShapeError(f'Expecting {n_pixels} labels, got {labels_array.size}')
        if split_array.size != n_pixels:
            raise ShapeError(f'Expecting {n_pixels} split tags, got {split_array.size}')

        names = [str(name) for name in class_names]
        if not names:
            raise InvalidDatasetError('A dataset needs at least one class')
        if len(set(names)) != len(names):
            raise InvalidDatasetError(f'Duplicated class names: {names}')
        if n_pixels and (labels_array.min() < 0 or labels_array.max() >= len(names)):
            bad = int(labels_array[(labels_array < 0) | (labels_array >= len(names))][0])
            raise InvalidDatasetError(f'Label {bad} out of range for {len(names)} classes')
        if n_pixels and split_array.max() > SplitTags.TEST:
            raise InvalidDatasetError(f'Invalid split tag: {int(split_array.max())}')

        for label, name in enumerate(names):
            for tag in (SplitTags.TRAIN, SplitTags.VALIDATION, SplitTags.TEST):
                if not np.any((labels_array == label) & (split_array == tag)):
                    raise InvalidDatasetError(
                        f"Class '{name}' has no pixels in the {SplitTags.get_description(tag)} split",
                        class_name=name,
                    )

        if wavelengths is None:
            grid = band_grid(n_bands)
        else:
            grid = np.array(wavelengths, dtype=np.float64).reshape(-1)
            if grid.size != n_bands:
                raise ShapeError(f'Expecting {n_bands} wavelengths, got {grid.size}')

        self._spectra = _readonly(spectra_array)
        self._labels = _readonly(labels_array)
        self._split = _readonly(split_array)
        self._class_names = tuple(names)
        self._wavelengths = _readonly(grid)

    @property
    def spectra(self) -> npt.NDArray[np.float32]:
        return self._spectra

    @property
    def labels(self) -> IntArray:
        return self._labels

    @property
    def split(self) -> npt.NDArray[np.uint8]:
        return self._split

    @property
    def class_names(self) -> Tuple[str, ...]:
        return self._class_names

    @property
    def wavelengths(self) -> FloatArray:
        return self._wavelengths

    @property
    def n_pixels(self) -> int:
        return int(self._spectra.shape[0])

    @property
    def n_bands(self) -> int:
        return int(self._spectra.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self._class_names)

    def __len__(self) -> int:
        return self.n_pixels

    def __getitem__(self, index: int) -> Spectrum:
        return Spectrum(self._spectra[index], self._wavelengths)

    def __iter__(self) -> Iterator[Spectrum]:
        for i in range(self.n_pixels):
            yield self[i]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, self.__class__):
            return False
        return (
            self._class_names == other._class_names
            and np.array_equal(self._spectra, other._spectra)
            and np.array_equal(self._labels, other._labels)
            and np.array_equal(self._split, other._split)
            and np.array_equal(self._wavelengths, other._wavelengths)
        )

    def __repr__(self) -> str:
        return f'LabeledDataset(pixels={self.n_pixels}, bands={self.n_bands}, classes={list(self._class_names)})'

    def mask(self, split: Union[int, str]) -> npt.NDArray[np.bool_]:
        tag = SplitTags.get_code(split) if isinstance(split, str) else split
        return np.asarray(self._split == tag)

    def partition(self, split: Union[int, str]) -> Tuple[FloatArray, IntArray]:
        '''
        Spectra (as float64) and labels of one split partition
        '''
        mask = self.mask(split)
        return self._spectra[mask].astype(np.float64), self._labels[mask].copy()

    def class_counts(self) -> Dict[str, int]:
        counts = np.bincount(self._labels, minlength=self.n_classes)
        return {name: int(count) for name, count in zip(self._class_names, counts)}

    def split_counts(self) -> Dict[str, Tuple[int, int, int]]:
        counts = {}
        for label, name in enumerate(self._class_names):
            of_class = self._split[self._labels == label]
            counts[name] = tuple(int(np.sum(of_class == tag)) for tag in (SplitTags.TRAIN, SplitTags.VALIDATION, SplitTags.TEST))
        return counts  # type: ignore[return-value]

    def with_spectra(self, spectra: npt.ArrayLike, wavelengths: Optional[npt.ArrayLike] = None) -> LabeledDataset:
        return LabeledDataset(
            spectra,
            self._labels,
            self._class_names,
            self._split,
            self._wavelengths if wavelengths is None else wavelengths,
        )


@dataclasses.dataclass(frozen=True)
class SyntheticConfig():
    seed: int
    classes: Tuple[Tuple[str, int], ...]
    n_bands: int = DEFAULT_BANDS
    noise_sigma: float = 0.01
    # width (nm) of the absorption/reflection bumps
    endmember_smoothness: float = 25.0
    mixing_jitter: float = 0.5
    background_endmembers: int = 12
    contrast: float = 0.15
    shift_nm: float = 6.0
    # material variants per class, each with its own narrow absorption lines
    subtypes: int = 5
    subtype_contrast: float = 1.4
    line_width_nm: float = 8.0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'classes', tuple((str(name), int(count)) for name, count in self.classes))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError('seed', f'expecting an unsigned integer, got {self.seed!r}')
        if self.n_bands < 1:
            raise ConfigurationError('n_bands', f'expecting at least 1 band, got {self.n_bands}')
        if not self.classes:
            raise ConfigurationError('classes', 'expecting at least one class')
        names = [name for name, _ in self.classes]
        if len(set(names)) != len(names) or not all(names):
            raise ConfigurationError('classes', f'class names should be unique and non-empty: {names}')
        for name, count in self.classes:
            if count < MIN_CLASS_PIXELS:
                raise ConfigurationError('classes', f"class '{name}' has {count} pixels (minimum {MIN_CLASS_PIXELS})")
        if not 0 <= self.noise_sigma < 0.5:
            raise ConfigurationError('noise_sigma', f'expecting a value in [0, 0.5), got {self.noise_sigma}')
        if not self.endmember_smoothness > 0:
            raise ConfigurationError('endmember_smoothness', f'expecting a positive value, got {self.endmember_smoothness}')
        if not 0 <= self.mixing_jitter < 1:
            raise ConfigurationError('mixing_jitter', f'expecting a value in [0, 1), got {self.mixing_jitter}')
        if self.background_endmembers < 0:
            raise ConfigurationError('background_endmembers', f'expecting a nonnegative count, got {self.background_endmembers}')
        if self.contrast < 0:
            raise ConfigurationError('contrast', f'expecting a nonnegative value, got {self.contrast}')
        if self.shift_nm < 0:
            raise ConfigurationError('shift_nm', f'expecting a nonnegative value, got {self.shift_nm}')
        if self.subtypes < 1:
            raise ConfigurationError('subtypes', f'expecting at least 1 subtype, got {self.subtypes}')
        if self.subtype_contrast < 0:
            raise ConfigurationError('subtype_contrast', f'expecting a nonnegative value, got {self.subtype_contrast}')
        if not self.line_width_nm > 0:
            raise ConfigurationError('line_width_nm', f'expecting a positive value, got {self.line_width_nm}')


def parse_class_spec(spec: str) -> Tuple[Tuple[str, int], ...]:
    '''
    Parses ``name:count,name:count`` class lists
    '''
    classes = []
    for part in spec.split(','):
        part = part.strip()
        if not part:
            continue
        name, sep, count = part.rpartition(':')
        if not sep or not name:
            raise ConfigurationError('classes', f"expecting 'name:count', got '{part}'")
        try:
            classes.append((name.strip(), int(count)))
        except ValueError:
            raise ConfigurationError('classes', f"invalid pixel count in '{part}'") from None
    return tuple(classes)


def preset_config(name: str, *, seed: int, scale: float = 1.0, **overrides: Any) -> SyntheticConfig:
    '''
    Synthetic configuration with the class structure of one of the surveyed scenes
    '''
    try:
        classes = hyperbench.data.Presets.get_subdata(hyperbench.data.Presets.get_code(name))
    except KeyError as e:
        raise ConfigurationError('preset', str(e.args[0])) from None
    if not scale > 0:
        raise ConfigurationError('scale', f'expecting a positive value, got {scale}')
    scaled = tuple((cls, max(MIN_CLASS_PIXELS, int(round(count * scale)))) for cls, count in classes)
    return SyntheticConfig(seed=seed, classes=scaled, **overrides)


def split_sizes(count: int) -> Tuple[int, int, int]:
    '''
    Train/validation/test sizes for one class, 2:1:1 by largest remainder

    Remainder ties go to validation first, then train, then test.
    '''
    # quotas in quarters of a pixel
    quotas = (2 * count, count, count)
    floors = [q // 4 for q in quotas]
    remainders = [q % 4 for q in quotas]
    leftover = count - sum(floors)
    priority = {1: 0, 0: 1, 2: 2}
    for index in sorted(range(3), key=lambda i: (-remainders[i], priority[i]))[:leftover]:
        floors[index] += 1
    return floors[0], floors[1], floors[2]


def stratified_split(
    labels: npt.ArrayLike,
    seed: int,
    class_names: Optional[Sequence[str]] = None,
) -> npt.NDArray[np.uint8]:
    labels_array = np.asarray(labels, dtype=np.int64).reshape(-1)
    split = np.empty(labels_array.size, dtype=np.uint8)
    rng = np.random.default_rng(seed)

    n_classes = int(labels_array.max()) + 1 if labels_array.size else 0
    for label in range(n_classes):
        indices = np.flatnonzero(labels_array == label)
        if indices.size == 0:
            continue
        if indices.size < MIN_CLASS_PIXELS:
            name = class_names[label] if class_names is not None else str(label)
            raise InvalidDatasetError(
                f"Class '{name}' has {indices.size} pixels, at least {MIN_CLASS_PIXELS} are needed to split it",
                class_name=name,
            )
        n_train, n_val, _ = split_sizes(indices.size)
        order = rng.permutation(indices)
        split[order[:n_train]] = SplitTags.TRAIN
        split[order[n_train:n_train + n_val]] = SplitTags.VALIDATION
        split[order[n_train + n_val:]] = SplitTags.TEST
    return split


class _Endmember():
    def __init__(self, centers: FloatArray, widths: FloatArray, amplitudes: FloatArray) -> None:
        self.centers = centers
        self.widths = widths
        self.amplitudes = amplitudes

    def render(
        self,
        wavelengths: FloatArray,
        continuum: FloatArray,
        shift: Optional[FloatArray] = None,
        depth: Optional[FloatArray] = None,
    ) -> FloatArray:
        '''
        Continuum plus bumps; ``shift`` (m,) and ``depth`` (m, bumps) give per-pixel variants
        '''
        m = 1 if shift is None else shift.size
        offsets = np.zeros((m, 1)) if shift is None else shift[:, None]
        spectra = np.tile(continuum, (m, 1))
        for j, (center, width, amplitude) in enumerate(zip(self.centers, self.widths, self.amplitudes)):
            bump = amplitude * np.exp(-((wavelengths[None, :] - center - offsets) ** 2) / (2 * width ** 2))
            if depth is not None:
                bump = bump * depth[:, j:j + 1]
            spectra += bump
        return spectra


def _continuum(rng: np.random.Generator, wavelengths: FloatArray) -> FloatArray:
    edge = rng.uniform(680.0, 740.0)
    low = rng.uniform(0.08, 0.15)
    high = rng.uniform(0.35, 0.5)
    return np.asarray(low + (high - low) / (1 + np.exp(-(wavelengths - edge) / 20.0)))


def _endmember(rng: np.random.Generator, wavelengths: FloatArray, cfg: SyntheticConfig) -> _Endmember:
    n_bumps = int(rng.integers(3, 7))
    return _Endmember(
        centers=rng.uniform(wavelengths[0], wavelengths[-1], n_bumps),
        widths=cfg.endmember_smoothness * rng.uniform(0.5, 1.5, n_bumps),
        amplitudes=cfg.contrast * rng.uniform(0.3, 1.0, n_bumps) * rng.choice((-1.0, 1.0), n_bumps),
    )


def _subtype_transmittance(rng: np.random.Generator, wavelengths: FloatArray, cfg: SyntheticConfig) -> FloatArray:
    '''
    (subtypes, n) multiplicative factors, one row per material variant of a class
    '''
    depth = cfg.subtype_contrast * cfg.mixing_jitter
    factors = np.ones((cfg.subtypes, wavelengths.size))
    for k in range(cfg.subtypes):
        centers = rng.uniform(wavelengths[0], wavelengths[-1], SUBTYPE_LINES)
        widths = cfg.line_width_nm * rng.uniform(0.7, 1.3, SUBTYPE_LINES)
        depths = depth * rng.uniform(0.5, 1.0, SUBTYPE_LINES)
        for center, width, line in zip(centers, widths, depths):
            factors[k] -= line * np.exp(-((wavelengths - center) ** 2) / (2 * width ** 2))
    return np.clip(factors, 0.0, None)


def generate_synthetic(cfg: SyntheticConfig) -> LabeledDataset:
    '''
    Seeded endmember-mixture dataset

    Every class owns an endmember (a shared continuum plus 3 to 6 Gaussian
    bumps) and ``subtypes`` material variants, each darkened by its own
    narrow absorption lines. A pixel mixes a per-pixel variant of one of its
    class materials (abundance >= 0.6) with up to two other endmembers drawn
    from the other classes and a pool of background materials, then receives
    Gaussian noise and is clamped to [0, 1]. All within-class variation scales
    with ``mixing_jitter``.
    '''
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    wavelengths = band_grid(cfg.n_bands)
    continuum = _continuum(rng, wavelengths)

    n_classes = len(cfg.classes)
    endmembers = [_endmember(rng, wavelengths, cfg) for _ in range(n_classes + cfg.background_endmembers)]
    library = np.vstack([em.render(wavelengths, continuum) for em in endmembers])
    n_library = library.shape[0]
    jitter = cfg.mixing_jitter

    blocks: List[FloatArray] = []
    labels: List[IntArray] = []
    for label, (_, count) in enumerate(cfg.classes):
        n_others = rng.integers(0, 3, size=count)
        if n_library > 1:
            others = rng.integers(0, n_library - 1, size=(count, 2))
            others[others >= label] += 1
        else:
            others = np.zeros((count, 2), dtype=np.int64)
            n_others[:] = 0
        secondary = 0.4 * jitter * rng.uniform(size=count) * (n_others > 0)
        share = np.where(n_others == 2, rng.uniform(size=count), 1.0)
        a1 = secondary * share
        a2 = secondary - a1
        dominant = 1.0 - secondary

        own = endmembers[label]
        depth = np.clip(1.0 + 0.5 * jitter * rng.standard_normal((count, own.centers.size)), 0.0, None)
        shift = cfg.shift_nm * jitter * rng.standard_normal(count)
        brightness = 1.0 + 0.1 * jitter * rng.standard_normal(count)
        transmittance = _subtype_transmittance(rng, wavelengths, cfg)
        subtype = rng.integers(0, cfg.subtypes, size=count)

        pixels = (
            dominant[:, None] * own.render(wavelengths, continuum, shift, depth) * transmittance[subtype]
            + a1[:, None] * library[others[:, 0]]
            + a2[:, None] * library[others[:, 1]]
        )
        pixels = brightness[:, None] * pixels + cfg.noise_sigma * rng.standard_normal(pixels.shape)
        blocks.append(np.clip(pixels, 0.0, 1.0))
        labels.append(np.full(count, label, dtype=np.int64))

    all_labels = np.concatenate(labels)
    names = [name for name, _ in cfg.classes]
    split = stratified_split(all_labels, cfg.seed, names)
    return LabeledDataset(np.vstack(blocks), all_labels, names, split, wavelengths)


def rgb_indices(wavelengths: npt.ArrayLike) -> Tuple[int, int, int]:
    grid = np.asarray(wavelengths, dtype=np.float64)
    indices = []
    for target in RGB_WAVELENGTHS_NM:
        index = int(np.argmin(np.abs(grid - target)))
        if abs(grid[index] - target) > BAND_STEP_NM:
            raise InvalidDatasetError(
                f'No band within {BAND_STEP_NM:g}nm of {target:g}nm '
                f'(grid covers {grid.min():g}-{grid.max():g}nm)'
            )
        indices.append(index)
    return indices[0], indices[1], indices[2]


def extract_rgb(ds: LabeledDataset) -> LabeledDataset:
    '''
    Pseudo-color projection keeping the bands nearest 670, 540 and 470 nm (R, G, B)
    '''
    indices = list(rgb_indices(ds.wavelengths))
    return ds.with_spectra(ds.spectra[:, indices], ds.wavelengths[indices])
