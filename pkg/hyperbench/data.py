# SPDX-License-Identifier: MIT

from typing import Any, Dict, List, Optional, Tuple


HSPX_MAGIC = b'HSPX1\n'
HCMP_MAGIC = b'HCMP1'
HGBT_MAGIC = b'HGBT1'

FIRST_BAND_NM = 400.0
BAND_STEP_NM = 2.0
DEFAULT_BANDS = 301

# red, green, blue
RGB_WAVELENGTHS_NM = (670.0, 540.0, 470.0)


class _DataMeta(type):
    '''
    This metaclass populates _single and _names, following the structure described bellow

    The class should declare data as follows

        MY_DATA_VALUE = 0x01, 'Data description'

    or, with subdata,

        MY_DATA_VALUE = 0x01, 'Data description', OTHER_DATA

    _single and _names will then be populated with

        MY_DATA_VALUE = 0x01
        _single[0x01] = ('Data description', OTHER_DATA)
        _names['my_data_value'] = 0x01

    The lowercase attribute name is the tag used on the command line, in plan
    files and in report columns. Duplicated codes are rejected.
    '''
    def __new__(mcs, name: str, bases: Tuple[Any], dic: Dict[str, Any]):  # type: ignore
        dic['_single'] = {}
        dic['_names'] = {}

        # allow constructing data via a data dictionary as opposed to directly in the object body
        if 'data' in dic:
            data = dic.pop('data')
        else:
            data = dic

        for attr in list(data):
            if attr.startswith('_') or not isinstance(data[attr], tuple):
                continue

            if len(data[attr]) == 2:  # missing sub data
                data[attr] = data[attr] + (None,)

            if len(data[attr]) != 3:
                raise ValueError(f'Invalid field: {attr}')

            num, desc, sub = data[attr]

            if not isinstance(num, int):
                raise TypeError(f"First element of '{attr}' should be an int")
            if not isinstance(desc, str):
                raise TypeError(f"Second element of '{attr}' should be a string")
            if num in dic['_single']:
                raise ValueError(f"Duplicated value in '{attr}' ({num})")

            dic[attr] = num
            dic['_single'][num] = desc, sub
            dic['_names'][attr.lower()] = num

        return super().__new__(mcs, name, bases, dic)


class _Data(metaclass=_DataMeta):
    '''
    This class provides lookups out of _single and _names.
    See the _DataMeta documentation for more information.
    '''
    _DATA = Tuple[str, Optional[Any]]
    _single: Dict[int, _DATA]
    _names: Dict[str, int]

    @classmethod
    def _get_data(cls, num: Optional[int]) -> _DATA:
        if num is None:
            raise KeyError('Data index is not an int')

        if num in cls._single:
            return cls._single[num]

        raise KeyError(f'Data not found for index 0x{num:02x} in {cls.__name__}')

    @classmethod
    def get_description(cls, num: Optional[int]) -> str:
        return cls._get_data(num)[0]

    @classmethod
    def get_subdata(cls, num: Optional[int]) -> Any:
        subdata = cls._get_data(num)[1]

        if subdata is None:
            raise ValueError('Sub-data not available')

        return subdata

    @classmethod
    def get_code(cls, name: str) -> int:
        try:
            return cls._names[name.strip().lower()]
        except KeyError:
            raise KeyError(f"Unknown {cls.__name__} name '{name}' (expecting one of {', '.join(cls._names)})") from None

    @classmethod
    def get_name(cls, num: int) -> str:
        cls._get_data(num)
        for name, code in cls._names.items():
            if code == num:
                return name
        raise KeyError(num)  # pragma: no cover

    @classmethod
    def names(cls) -> List[str]:
        return list(cls._names)


class Methods(_Data):
    # subdata: method family
    PCA = 0x01, 'Principal Component Analysis', 'linear'
    KPCA = 0x02, 'Kernel Principal Component Analysis', 'linear'
    ICA = 0x03, 'Independent Component Analysis', 'linear'
    AE = 0x04, 'AutoEncoder', 'neural'
    DAE = 0x05, 'Denoising AutoEncoder', 'neural'
    # baselines, never fitted
    RGB = 0x10, 'RGB bands (670/540/470 nm)', 'baseline'
    HSI = 0x11, 'Uncompressed spectra', 'baseline'


COMPRESSION_METHODS = ('pca', 'kpca', 'ica', 'ae', 'dae')


class SplitTags(_Data):
    TRAIN = 0, 'train'
    VALIDATION = 1, 'validation'
    TEST = 2, 'test'


class Presets(_Data):
    # subdata: (class name, pixel count) pairs, totals of the published split tables
    SUBURBAN = 0x01, 'Suburban', (('asphalt', 18311), ('rooftop', 15820), ('shadow', 20770), ('vegetation', 30294))
    URBAN = 0x02, 'Urban', (('lawn', 6864), ('rooftop', 44647), ('shadow', 8768))
    FOREST = 0x03, 'Forest', (('shadow', 18400), ('tree', 14687))


class SectionTypes(_Data):
    # subdata: numpy dtype of the section payload
    FLOAT64 = 0x01, 'float64', '<f8'
    FLOAT32 = 0x02, 'float32', '<f4'
    INT64 = 0x03, 'int64', '<i8'
    UINT8 = 0x04, 'uint8', 'u1'
    BOOL = 0x05, 'bool', '?'
    UTF8 = 0x06, 'utf-8 text', 'u1'
