from __future__ import annotations

from typing import Optional


class StlfError(Exception):
    """Base class for every error raised by the engine."""


class ShapeError(StlfError, ValueError):
    def __init__(self, op: str, *shapes) -> None:
        self.op = op
        self.shapes = shapes
        joined = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: shape mismatch {joined}")


class EsStateError(StlfError, ValueError):
    pass


class WindowError(StlfError, IndexError):
    pass


class DataError(StlfError):
    pass


class CheckpointError(DataError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class NumericError(StlfError, ArithmeticError):
    def __init__(self, message: str, *, epoch: Optional[int] = None, update: Optional[int] = None) -> None:
        self.epoch = epoch
        self.update = update
        if epoch is not None:
            message = f"{message} (epoch={epoch} update={update})"
        super().__init__(message)


class UsageError(StlfError):
    pass


class BoundsError(StlfError, ValueError):
    pass
