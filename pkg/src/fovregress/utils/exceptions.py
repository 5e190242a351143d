"""
exceptions.py

Error hierarchy shared by every fovregress module. The command-line surface maps
each family onto an exit code:

    InputError     -> 2  (bad files, bad configs, impossible requests)
    NumericError   -> 3  (non-finite loss or gradient during training)
    SnapshotError  -> 3  (a run manifest points at a checkpoint that is gone)
"""


class FovRegressError(Exception):
    """Base class for all errors raised by fovregress."""


class InputError(FovRegressError, ValueError):
    """Malformed input data, configuration or arguments."""


class NumericError(FovRegressError, ArithmeticError):
    """
    A loss or gradient stopped being finite.

    Attributes:
        iteration (int | None): Training iteration at which it happened.
        pair_ids (list[tuple[int, int]]): Pairs of the offending batch, if known.
    """

    def __init__(self, message, iteration=None, pair_ids=None):
        super().__init__(message)
        self.iteration = iteration
        self.pair_ids = list(pair_ids or [])


class SnapshotError(FovRegressError, LookupError):
    """A snapshot listed in a run manifest cannot be read."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
