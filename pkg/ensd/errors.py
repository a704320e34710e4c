from __future__ import annotations

import functools
import sys
from typing import Callable

from accelerate import PartialState
from accelerate.logging import get_logger

logger = get_logger(__name__)

CONFIG_ERROR = 2
DATA_ERROR = 3
NUMERIC_ERROR = 4


class EnsdError(Exception):
    exit_code = 1


class ConfigError(EnsdError, ValueError):
    exit_code = CONFIG_ERROR

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DataError(EnsdError, ValueError):
    exit_code = DATA_ERROR


class UndefinedWER(DataError):
    """WER of a non-empty hypothesis against an empty reference."""


class EmptySet(DataError):
    pass


class EmptyInput(DataError):
    pass


class InvalidScore(DataError):
    pass


class InvalidArity(DataError):
    pass


class VocabError(DataError):
    pass


class ClusterError(DataError):
    pass


class InvalidLattice(DataError):
    pass


class ShapeError(DataError):
    def __init__(self, node: str, message: str):
        super().__init__(f"{node}: {message}")
        self.node = node


class GroundTruthAccessError(DataError, PermissionError):
    pass


class FeatureIOError(DataError, IOError):
    def __init__(self, utt_id: str, message: str):
        super().__init__(f"{utt_id}: {message}")
        self.utt_id = utt_id


class NumericError(EnsdError, ArithmeticError):
    exit_code = NUMERIC_ERROR


def exit_on_error(func: Callable) -> Callable:
    """Turn package errors raised by a command into process exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        # the accelerate logger refuses to log before the process state exists
        PartialState(cpu=True)
        try:
            return func(*args, **kwargs)
        except EnsdError as e:
            logger.error(f"{type(e).__name__}: {e}")
            sys.exit(e.exit_code)

    return wrapper
