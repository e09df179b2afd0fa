# SPDX-License-Identifier: MIT

import re
import struct
import warnings

import hypothesis
import hypothesis.extra.numpy as hnp
import hypothesis.strategies as st
import numpy as np
import pytest

import hyperbench.dataset
import hyperbench.io

from hyperbench.data import HCMP_MAGIC, HSPX_MAGIC
from hyperbench.errors import DataWarning, ParseError


def _dataset(n_bands=5):
    return hyperbench.dataset.LabeledDataset(
        np.linspace(0.0, 1.0, 8 * n_bands).reshape(8, n_bands),
        [0, 0, 0, 0, 1, 1, 1, 1],
        ['soil', 'water'],
        [0, 0, 1, 2, 0, 0, 1, 2],
    )


def test_hspx_layout():
    data = hyperbench.io.dumps_dataset(_dataset())
    assert data[:6] == HSPX_MAGIC
    assert struct.unpack_from('<III', data, 6) == (8, 5, 2)
    assert data[18:24] == b'\x04\x00soil'
    header = 6 + 12 + 6 + 7
    record = 1 + 2 + 4 * 5
    assert len(data) == header + 8 * record
    # first record: split 0, label 0, first value 0.0
    assert data[header:header + 3] == b'\x00\x00\x00'


def test_hspx_roundtrip(small_dataset):
    assert hyperbench.io.loads_dataset(hyperbench.io.dumps_dataset(small_dataset)) == small_dataset


@hypothesis.settings(max_examples=25, deadline=None)
@hypothesis.given(
    hnp.arrays(np.float32, (8, 3), elements=st.floats(0.0, 1.0, width=32)),
    st.permutations([0, 0, 1, 2, 0, 0, 1, 2]),
)
def test_hspx_roundtrip_property(values, split):
    hypothesis.assume(split[:4].count(1) and split[:4].count(2) and split[4:].count(1) and split[4:].count(2))
    ds = hyperbench.dataset.LabeledDataset(values, [0, 0, 0, 0, 1, 1, 1, 1], ['a', 'b'], split)
    assert hyperbench.io.loads_dataset(hyperbench.io.dumps_dataset(ds)) == ds


def test_hspx_wavelength_warning(small_dataset):
    rgb = hyperbench.dataset.extract_rgb(small_dataset)
    with pytest.warns(DataWarning, match='not stored in HSPX files'):
        hyperbench.io.dumps_dataset(rgb)


def _corrupt(data, offset, raw):
    return data[:offset] + raw + data[offset + len(raw):]


def test_hspx_error():
    data = hyperbench.io.dumps_dataset(_dataset())
    header = 6 + 12 + 6 + 7
    record = 1 + 2 + 4 * 5

    with pytest.raises(ParseError, match=re.escape('Invalid magic, expecting an HSPX1 file (offset 0)')):
        hyperbench.io.loads_dataset(b'HSPX2\n' + data[6:])

    with pytest.raises(ParseError, match=re.escape('Truncated header: expecting 12 bytes, got 4 (offset 6)')):
        hyperbench.io.loads_dataset(data[:10])

    with pytest.raises(ParseError, match=re.escape('Truncated pixel records: expecting 8, got 2 complete')) as e:
        hyperbench.io.loads_dataset(data[:header + 2 * record + 5])
    assert e.value.offset == header + 2 * record

    with pytest.raises(ParseError, match='Trailing data: 1 bytes') as e:
        hyperbench.io.loads_dataset(data + b'\x00')
    assert e.value.offset == len(data)

    bad = _corrupt(data, header + record + 3 + 4 * 2, struct.pack('<f', 1.5))
    with pytest.raises(ParseError, match='Invalid reflectance 1.5 for pixel 1, band 2') as e:
        hyperbench.io.loads_dataset(bad)
    assert e.value.offset == header + record + 3 + 8

    bad = _corrupt(data, header + 3 * record + 1, struct.pack('<H', 7))
    with pytest.raises(ParseError, match='Label 7 out of range for pixel 3') as e:
        hyperbench.io.loads_dataset(bad)
    assert e.value.offset == header + 3 * record + 1

    bad = _corrupt(data, header + 5 * record, b'\x09')
    with pytest.raises(ParseError, match='Invalid split tag 9 for pixel 5') as e:
        hyperbench.io.loads_dataset(bad)
    assert e.value.offset == header + 5 * record


def test_hspx_nan():
    data = hyperbench.io.dumps_dataset(_dataset())
    header = 6 + 12 + 6 + 7
    bad = _corrupt(data, header + 3, struct.pack('<f', float('nan')))
    with pytest.raises(ParseError, match='Invalid reflectance nan for pixel 0, band 0'):
        hyperbench.io.loads_dataset(bad)


def test_csv_roundtrip(tmp_path, small_dataset):
    path = tmp_path / 'pixels.csv'
    hyperbench.io.save_dataset(small_dataset, path)
    assert path.read_text().splitlines()[0].startswith('label,split,b400,b402,b404,')
    assert hyperbench.io.load_dataset(path) == small_dataset


def test_csv_rgb_wavelengths(tmp_path, small_dataset):
    path = tmp_path / 'rgb.csv'
    hyperbench.io.save_dataset(hyperbench.dataset.extract_rgb(small_dataset), path)
    assert path.read_text().splitlines()[0] == 'label,split,b670,b540,b470'
    assert hyperbench.io.load_dataset(path).wavelengths.tolist() == [670.0, 540.0, 470.0]


def test_csv_class_order(tmp_path):
    path = tmp_path / 'order.csv'
    rows = ['label,split,b400,b402']
    for name in ('water', 'soil'):
        rows += [f'{name},train,0.1,0.2', f'{name},train,0.1,0.2', f'{name},validation,0.3,0.4', f'{name},2,0.5,0.6']
    path.write_text('\n'.join(rows) + '\n')

    ds = hyperbench.io.load_csv(path)
    assert ds.class_names == ('water', 'soil')
    assert ds.labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    assert ds.split.tolist() == [0, 0, 1, 2, 0, 0, 1, 2]

    with pytest.warns(DataWarning, match=r"Class order \['water', 'soil'\] in the file differs"):
        ordered = hyperbench.io.load_csv(path, class_names=['soil', 'water'])
    assert ordered.class_names == ('soil', 'water')
    assert ordered.labels.tolist() == [1, 1, 1, 1, 0, 0, 0, 0]

    with warnings.catch_warnings():
        warnings.simplefilter('error')
        same = hyperbench.io.load_csv(path, class_names=['water', 'soil'])
    assert same.labels.tolist() == ds.labels.tolist()


@pytest.mark.parametrize(
    ('text', 'match'),
    [
        ('', re.escape('Empty file (row 1)')),
        ('name,split,b400\n', re.escape("Expecting a 'label,split,b...' header (row 1)")),
        ('label,split,x400\n', re.escape("Invalid column 'x400' (row 1)")),
        ('label,split,b400\n', re.escape('No pixel rows (row 2)')),
        ('label,split,b400,b402\na,train,0.1\n', re.escape('Expecting 2 values, got 1 (row 2)')),
        ('label,split,b400\na,train,0.1\na,test,abc\n', re.escape('(row 3)')),
        ('label,split,b400\na,train,0.1\na,holdout,0.1\n', re.escape("Invalid split 'holdout' (row 3)")),
        ('label,split,b400\na,train,0.1\na,test,1.1\n', re.escape('Reflectance outside [0, 1] (row 3)')),
        ('label,split,b400\na,train,inf\n', re.escape('Non-finite value (row 2)')),
    ]
)
def test_csv_error(tmp_path, text, match):
    path = tmp_path / 'bad.csv'
    path.write_text(text)
    with pytest.raises(ParseError, match=match):
        hyperbench.io.load_csv(path)


def test_encoded_roundtrip(tmp_path):
    ds = _dataset()
    encoded = np.arange(16, dtype=np.float64).reshape(8, 2) / 3
    path = tmp_path / 'z.csv'
    hyperbench.io.save_encoded(path, encoded, ds)
    assert path.read_text().splitlines()[0] == 'label,split,z0,z1'

    matrix, names, labels, split = hyperbench.io.load_encoded(path)
    assert np.array_equal(matrix, encoded)
    assert names == ['soil', 'water']
    assert labels.tolist() == ds.labels.tolist()
    assert split.tolist() == ds.split.tolist()


def test_sections_roundtrip():
    sections = {
        'mean': np.array([0.25, 0.5]),
        'basis': np.eye(2, dtype=np.float32),
        'count': 3,
        'flag': True,
        'scale': 0.5,
        'tags': np.array([1, 2], dtype=np.uint8),
        'variant': 'dae',
    }
    data = hyperbench.io.dumps_sections(HCMP_MAGIC, 0x05, sections)
    assert data[:6] == b'HCMP1\x05'
    code, loaded = hyperbench.io.loads_sections(data, HCMP_MAGIC)
    assert code == 0x05
    assert list(loaded) == list(sections)
    assert np.array_equal(loaded['mean'], sections['mean'])
    assert loaded['basis'].dtype == np.float32
    assert int(loaded['count']) == 3
    assert bool(loaded['flag']) is True
    assert float(loaded['scale']) == 0.5
    assert loaded['tags'].dtype == np.uint8
    assert loaded['variant'] == 'dae'


def test_sections_error():
    data = hyperbench.io.dumps_sections(HCMP_MAGIC, 0x01, {'mean': np.array([0.25, 0.5])})

    with pytest.raises(ParseError, match=re.escape('Invalid magic, expecting HCMP1 (offset 0)')):
        hyperbench.io.loads_sections(b'HGBT1' + data[5:], HCMP_MAGIC)

    with pytest.raises(ParseError, match=re.escape('Truncated container: missing model code (offset 5)')):
        hyperbench.io.loads_sections(data[:5], HCMP_MAGIC)

    with pytest.raises(ParseError, match=re.escape("Truncated section 'mean': expecting 16 bytes, got 8")):
        hyperbench.io.loads_sections(data[:-10], HCMP_MAGIC)

    with pytest.raises(ParseError, match='Trailing data: 2 bytes'):
        hyperbench.io.loads_sections(data + b'\x00\x00', HCMP_MAGIC)

    # name length 2 + 'mean' + type + ndim + one dimension
    payload = 6 + 2 + 4 + 2 + 4
    bad = data[:payload] + struct.pack('<d', float('inf')) + data[payload + 8:]
    with pytest.raises(ParseError, match="Non-finite value in section 'mean'") as e:
        hyperbench.io.loads_sections(bad, HCMP_MAGIC)
    assert e.value.offset == payload

    bad = data[:12] + b'\x7f' + data[13:]
    with pytest.raises(ParseError, match=re.escape("Unknown type 0x7f in section 'mean' (offset 12)")):
        hyperbench.io.loads_sections(bad, HCMP_MAGIC)
