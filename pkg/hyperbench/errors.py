# SPDX-License-Identifier: MIT

from typing import Optional


class HyperbenchWarning(Warning):
    pass


class ConvergenceWarning(HyperbenchWarning):
    pass


class RankWarning(HyperbenchWarning):
    pass


class DivergenceWarning(HyperbenchWarning):
    pass


class DataWarning(HyperbenchWarning):
    pass


class HyperbenchError(Exception):
    pass


class ConfigurationError(HyperbenchError, ValueError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f'Invalid {field}: {message}')
        self.field = field


class InvalidDatasetError(HyperbenchError, ValueError):
    def __init__(self, message: str, *, class_name: Optional[str] = None) -> None:
        super().__init__(message)
        self.class_name = class_name


class ParseError(HyperbenchError):
    '''
    Malformed on-disk data

    Binary formats report the byte ``offset`` where decoding failed, CSV
    files report the 1-based ``row`` (the header is row 1).
    '''
    def __init__(self, message: str, *, offset: Optional[int] = None, row: Optional[int] = None) -> None:
        where = []
        if offset is not None:
            where.append(f'offset {offset}')
        if row is not None:
            where.append(f'row {row}')
        super().__init__(f'{message} ({", ".join(where)})' if where else message)
        self.offset = offset
        self.row = row


class ShapeError(HyperbenchError, ValueError):
    pass


class InvalidMatrixError(HyperbenchError, ValueError):
    pass


class SingularMatrixError(HyperbenchError, ArithmeticError):
    pass


class TrainingError(HyperbenchError):
    pass
