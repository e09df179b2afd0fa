# SPDX-License-Identifier: MIT

from __future__ import annotations

import csv
import os
import struct
import warnings

from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from hyperbench.data import HSPX_MAGIC, SectionTypes, SplitTags
from hyperbench.dataset import LabeledDataset, band_grid
from hyperbench.errors import DataWarning, ParseError, ShapeError


PathLike = Union[str, 'os.PathLike[str]']
SectionValue = Union[np.ndarray, str, float, int, bool]  # type: ignore[type-arg]

_HEADER = struct.Struct('<III')
_NAME_LENGTH = struct.Struct('<H')
_SECTION_HEAD = struct.Struct('<BB')
_DIM = struct.Struct('<I')


def _record_dtype(n_bands: int) -> np.dtype:  # type: ignore[type-arg]
    return np.dtype([('split', 'u1'), ('label', '<u2'), ('values', '<f4', (n_bands,))])


def _is_csv(path: PathLike) -> bool:
    return os.fspath(path).lower().endswith('.csv')


def _unpack(fmt: struct.Struct, data: bytes, offset: int, what: str) -> Tuple[int, ...]:
    if offset + fmt.size > len(data):
        raise ParseError(f'Truncated {what}: expecting {fmt.size} bytes, got {len(data) - offset}', offset=offset)
    return fmt.unpack_from(data, offset)


def _unpack_text(data: bytes, offset: int, what: str) -> Tuple[str, int]:
    length, = _unpack(_NAME_LENGTH, data, offset, f'{what} length')
    offset += _NAME_LENGTH.size
    if offset + length > len(data):
        raise ParseError(f'Truncated {what}: expecting {length} bytes, got {len(data) - offset}', offset=offset)
    try:
        text = data[offset:offset + length].decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f'Invalid UTF-8 in {what}', offset=offset + e.start) from None
    return text, offset + length


def _pack_text(text: str) -> bytes:
    raw = text.encode('utf-8')
    if len(raw) > 0xffff:
        raise ValueError(f'Text too long to encode: {len(raw)} bytes')
    return _NAME_LENGTH.pack(len(raw)) + raw


# HSPX


def dumps_dataset(ds: LabeledDataset) -> bytes:
    if ds.n_classes > 0xffff:
        raise ValueError(f'Too many classes for the HSPX format: {ds.n_classes}')
    if not np.array_equal(ds.wavelengths, band_grid(ds.n_bands)):
        # HSPX implies the default grid
        warnings.warn(DataWarning(f'Wavelengths of a {ds.n_bands}-band dataset are not stored in HSPX files'))
    parts = [HSPX_MAGIC, _HEADER.pack(ds.n_pixels, ds.n_bands, ds.n_classes)]
    parts.extend(_pack_text(name) for name in ds.class_names)

    records = np.zeros(ds.n_pixels, dtype=_record_dtype(ds.n_bands))
    records['split'] = ds.split
    records['label'] = ds.labels
    records['values'] = ds.spectra
    parts.append(records.tobytes())
    return b''.join(parts)


def loads_dataset(data: bytes) -> LabeledDataset:
    if data[:len(HSPX_MAGIC)] != HSPX_MAGIC:
        raise ParseError('Invalid magic, expecting an HSPX1 file', offset=0)
    offset = len(HSPX_MAGIC)

    n_pixels, n_bands, n_classes = _unpack(_HEADER, data, offset, 'header')
    if n_bands == 0:
        raise ParseError('Invalid band count: 0', offset=offset + 4)
    if n_classes == 0:
        raise ParseError('Invalid class count: 0', offset=offset + 8)
    offset += _HEADER.size

    names = []
    for _ in range(n_classes):
        name, offset = _unpack_text(data, offset, 'class name')
        names.append(name)

    dtype = _record_dtype(n_bands)
    available = len(data) - offset
    expected = n_pixels * dtype.itemsize
    if available < expected:
        complete = available // dtype.itemsize
        raise ParseError(
            f'Truncated pixel records: expecting {n_pixels}, got {complete} complete',
            offset=offset + complete * dtype.itemsize,
        )
    if available > expected:
        raise ParseError(f'Trailing data: {available - expected} bytes', offset=offset + expected)

    records = np.frombuffer(data, dtype=dtype, count=n_pixels, offset=offset)
    values = records['values']

    invalid = ~np.isfinite(values) | (values < 0) | (values > 1)
    if invalid.any():
        pixel, band = (int(i) for i in np.argwhere(invalid)[0])
        raise ParseError(
            f'Invalid reflectance {values[pixel, band]} for pixel {pixel}, band {band}',
            offset=offset + pixel * dtype.itemsize + 3 + 4 * band,
        )
    bad_labels = records['label'] >= n_classes
    if bad_labels.any():
        pixel = int(np.argmax(bad_labels))
        raise ParseError(f'Label {records["label"][pixel]} out of range for pixel {pixel}', offset=offset + pixel * dtype.itemsize + 1)
    bad_tags = records['split'] > SplitTags.TEST
    if bad_tags.any():
        pixel = int(np.argmax(bad_tags))
        raise ParseError(f'Invalid split tag {records["split"][pixel]} for pixel {pixel}', offset=offset + pixel * dtype.itemsize)

    return LabeledDataset(values, records['label'], names, records['split'])


# CSV


def _band_column(wavelength: float) -> str:
    return f'b{wavelength:g}'


def dump_csv(ds: LabeledDataset, path: PathLike) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['label', 'split'] + [_band_column(wl) for wl in ds.wavelengths])
        for label, tag, values in zip(ds.labels, ds.split, ds.spectra):
            writer.writerow(
                [ds.class_names[label], SplitTags.get_description(int(tag))]
                + [repr(float(v)) for v in values]
            )


def _parse_split(value: str, row: int) -> int:
    value = value.strip()
    try:
        return SplitTags.get_code(value)
    except KeyError:
        pass
    if value.isdigit() and int(value) <= SplitTags.TEST:
        return int(value)
    raise ParseError(f"Invalid split '{value}'", row=row)


def _read_table(
    path: PathLike,
    prefix: str,
) -> Tuple[List[float], List[str], List[int], List[List[float]]]:
    '''
    Reads ``label,split,<prefix>...`` tables, returning the column keys and the parsed rows
    '''
    keys: List[float] = []
    labels: List[str] = []
    split: List[int] = []
    rows: List[List[float]] = []

    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError('Empty file', row=1) from None

        if [h.strip() for h in header[:2]] != ['label', 'split'] or len(header) < 3:
            raise ParseError(f"Expecting a 'label,split,{prefix}...' header", row=1)
        for column in header[2:]:
            column = column.strip()
            try:
                if not column.startswith(prefix):
                    raise ValueError
                keys.append(float(column[len(prefix):]))
            except ValueError:
                raise ParseError(f"Invalid column '{column}'", row=1) from None

        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f'Expecting {len(keys)} values, got {len(row) - 2}', row=row_number)
            try:
                values = [float(v) for v in row[2:]]
            except ValueError as e:
                raise ParseError(f'Invalid number: {e}', row=row_number) from None
            if not all(np.isfinite(values)):
                raise ParseError('Non-finite value', row=row_number)
            labels.append(row[0].strip())
            split.append(_parse_split(row[1], row_number))
            rows.append(values)

    return keys, labels, split, rows


def _class_indices(names: List[str], class_names: Optional[Sequence[str]]) -> Tuple[List[str], List[int]]:
    order = list(class_names) if class_names is not None else list(dict.fromkeys(names))
    index = {name: i for i, name in enumerate(order)}
    missing = [name for name in dict.fromkeys(names) if name not in index]
    if missing:
        raise ParseError(f'Unknown class names: {missing}')
    if class_names is not None:
        seen = list(dict.fromkeys(names))
        if seen != [name for name in order if name in seen]:
            warnings.warn(DataWarning(f'Class order {seen} in the file differs from the supplied names {order}'))
    return order, [index[name] for name in names]


def load_csv(path: PathLike, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
    '''
    Loads a ``label,split,b400,b402,...`` table

    Class indices follow ``class_names`` when given, otherwise the order of
    first appearance in the file.
    '''
    wavelengths, names, split, rows = _read_table(path, 'b')
    if not rows:
        raise ParseError('No pixel rows', row=2)
    values = np.array(rows, dtype=np.float64)
    outside = (values < 0) | (values > 1)
    if outside.any():
        raise ParseError('Reflectance outside [0, 1]', row=int(np.argmax(outside.any(axis=1))) + 2)
    order, labels = _class_indices(names, class_names)
    return LabeledDataset(values, labels, order, split, wavelengths)


# encoded vectors


def save_encoded(path: PathLike, encoded: npt.ArrayLike, ds: LabeledDataset) -> None:
    matrix = np.asarray(encoded, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != ds.n_pixels:
        raise ShapeError(f'Expecting {ds.n_pixels} encoded rows, got shape {matrix.shape}')
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['label', 'split'] + [f'z{i}' for i in range(matrix.shape[1])])
        for label, tag, values in zip(ds.labels, ds.split, matrix):
            writer.writerow(
                [ds.class_names[label], SplitTags.get_description(int(tag))]
                + [repr(float(v)) for v in values]
            )


def load_encoded(
    path: PathLike,
    class_names: Optional[Sequence[str]] = None,
) -> Tuple[npt.NDArray[np.float64], List[str], npt.NDArray[np.int64], npt.NDArray[np.uint8]]:
    '''
    Returns the encoded matrix, class names, labels and split tags
    '''
    _, names, split, rows = _read_table(path, 'z')
    order, labels = _class_indices(names, class_names)
    return (
        np.array(rows, dtype=np.float64).reshape(len(rows), -1),
        order,
        np.array(labels, dtype=np.int64),
        np.array(split, dtype=np.uint8),
    )


# dispatch


def save_dataset(ds: LabeledDataset, path: PathLike) -> None:
    if _is_csv(path):
        dump_csv(ds, path)
        return
    with open(path, 'wb') as f:
        f.write(dumps_dataset(ds))


def load_dataset(path: PathLike) -> LabeledDataset:
    if _is_csv(path):
        return load_csv(path)
    with open(path, 'rb') as f:
        return loads_dataset(f.read())


# model containers


def _section_type(value: np.ndarray) -> int:  # type: ignore[type-arg]
    kind = value.dtype
    if kind == np.bool_:
        return SectionTypes.BOOL
    if kind == np.uint8:
        return SectionTypes.UINT8
    if kind == np.float32:
        return SectionTypes.FLOAT32
    if np.issubdtype(kind, np.integer):
        return SectionTypes.INT64
    if np.issubdtype(kind, np.floating):
        return SectionTypes.FLOAT64
    raise TypeError(f'Unsupported section dtype: {kind}')


def dumps_sections(magic: bytes, code: int, sections: Dict[str, SectionValue]) -> bytes:
    '''
    Serializes named arrays as ``magic, u8 code`` followed by length-prefixed sections

    Each section is ``u16 name length, name, u8 type, u8 ndim, ndim x u32
    dims, payload``; a zero-length name terminates the container.
    '''
    parts = [magic, bytes([code])]
    for name, value in sections.items():
        if not name:
            raise ValueError('Section names should not be empty')
        if isinstance(value, str):
            raw = value.encode('utf-8')
            typ, dims, payload = SectionTypes.UTF8, (len(raw),), raw
        else:
            array = np.asarray(value)
            typ = _section_type(array)
            dims = array.shape
            payload = np.ascontiguousarray(array, dtype=SectionTypes.get_subdata(typ)).tobytes()
        parts.append(_pack_text(name))
        parts.append(_SECTION_HEAD.pack(typ, len(dims)))
        parts.extend(_DIM.pack(dim) for dim in dims)
        parts.append(payload)
    parts.append(_NAME_LENGTH.pack(0))
    return b''.join(parts)


def loads_sections(data: bytes, magic: bytes) -> Tuple[int, Dict[str, SectionValue]]:
    if data[:len(magic)] != magic:
        raise ParseError(f'Invalid magic, expecting {magic.decode()}', offset=0)
    offset = len(magic)
    if offset >= len(data):
        raise ParseError('Truncated container: missing model code', offset=offset)
    code = data[offset]
    offset += 1

    sections: Dict[str, SectionValue] = {}
    while True:
        name, offset = _unpack_text(data, offset, 'section name')
        if not name:
            break
        typ, ndim = _unpack(_SECTION_HEAD, data, offset, f"section '{name}' header")
        try:
            dtype = np.dtype(SectionTypes.get_subdata(typ))
        except KeyError:
            raise ParseError(f"Unknown type 0x{typ:02x} in section '{name}'", offset=offset) from None
        offset += _SECTION_HEAD.size
        dims = []
        for _ in range(ndim):
            dim, = _unpack(_DIM, data, offset, f"section '{name}' dimensions")
            dims.append(dim)
            offset += _DIM.size
        size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        if offset + size > len(data):
            raise ParseError(f"Truncated section '{name}': expecting {size} bytes, got {len(data) - offset}", offset=offset)
        payload = data[offset:offset + size]
        if typ == SectionTypes.UTF8:
            try:
                sections[name] = payload.decode('utf-8')
            except UnicodeDecodeError as e:
                raise ParseError(f"Invalid UTF-8 in section '{name}'", offset=offset + e.start) from None
        else:
            array = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
            if array.dtype.kind == 'f' and not np.isfinite(array).all():
                raise ParseError(f"Non-finite value in section '{name}'", offset=offset)
            sections[name] = array
        offset += size

    if offset != len(data):
        raise ParseError(f'Trailing data: {len(data) - offset} bytes', offset=offset)
    return code, sections
