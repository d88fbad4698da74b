"""Exception hierarchy shared by every stage of the pipeline."""


class MMGZSLError(Exception):
    """Base class; ``exit_code`` is used by the CLI."""

    exit_code = 1


class ConfigError(MMGZSLError, ValueError):
    exit_code = 2


class DataError(MMGZSLError, ValueError):
    exit_code = 2


class ShapeError(MMGZSLError, ValueError):
    exit_code = 2


class FeatureFormatError(DataError):
    """Malformed feature file. ``offset`` is the byte offset of the failure, if known."""

    def __init__(self, message: str, offset: int | None = None, row: int | None = None):
        parts = [message]
        if row is not None:
            parts.append(f"row {row}")
        if offset is not None:
            parts.append(f"byte offset {offset}")
        super().__init__(" at ".join(parts) if len(parts) > 1 else message)
        self.offset = offset
        self.row = row


class NumericError(MMGZSLError, ArithmeticError):
    exit_code = 4


class TrainingError(NumericError):
    """Non-finite loss during training."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class CheckpointError(MMGZSLError):
    exit_code = 3


class LeakageError(MMGZSLError):
    """Unseen-class real samples reached a training stage."""

    exit_code = 2
