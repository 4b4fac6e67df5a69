"""Exception hierarchy for tcwm."""


class TcwmError(Exception):
    """Base class for every error raised by tcwm."""


class DimensionError(TcwmError, ValueError):
    """Array shapes do not compose."""

    def __init__(self, what: str, expected: object, got: object) -> None:
        super().__init__(f"{what}: expected shape {expected}, got {got}")
        self.expected = expected
        self.got = got


class NumericError(TcwmError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""


class DomainError(TcwmError, ValueError):
    """An operation was called outside its precondition."""


class ConfigError(TcwmError):
    """Configuration failed strict validation."""

    def __init__(self, message: str, keys: list[str] | None = None) -> None:
        super().__init__(message)
        self.keys = keys or []


class DatastoreError(TcwmError, OSError):
    """Dataset or checkpoint files are missing or malformed."""


class MissingFileError(DatastoreError):
    """A required file is absent."""


class ByteLengthError(DatastoreError):
    """A raw array file does not have the byte length meta.json promises."""

    def __init__(self, array: str, expected: int, got: int) -> None:
        super().__init__(f"array '{array}': expected {expected} bytes, found {got}")
        self.array = array


class UnsupportedDtypeError(DatastoreError):
    """meta.json declares a dtype tag other than f32le."""


class MetaValidationError(DatastoreError):
    """meta.json is unreadable or inconsistent."""


class TrainingError(TcwmError):
    """Training hit a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int) -> None:
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


class PlannerError(TcwmError):
    """A planner could not produce a finite plan."""
