"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it.
"""


class AnchorSceneError(Exception):
    """Base class for all anchor-scene errors."""

    exit_code: int = 1


class ContractViolation(AnchorSceneError, ValueError):
    """A precondition, shape or invariant was violated by the caller."""

    exit_code = 3


class NumericError(AnchorSceneError, ArithmeticError):
    """A computation produced NaN or Inf."""

    exit_code = 4


class GenerationError(AnchorSceneError):
    """Procedural placement gave up after too many rejections."""

    exit_code = 3


class SceneParseError(AnchorSceneError, ValueError):
    """A scene document violates the JSON schema."""

    exit_code = 3

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptyShapeError(AnchorSceneError):
    """An occupancy grid has no voxel above threshold."""

    exit_code = 3


class UndefinedMetricError(AnchorSceneError):
    """A metric has no qualifying samples."""

    exit_code = 3


class ConfigError(AnchorSceneError):
    """The run configuration is invalid."""

    exit_code = 2


class DataError(AnchorSceneError):
    """Input data is missing or unusable."""

    exit_code = 3


class CheckpointMismatchError(DataError):
    """A checkpoint or corpus was produced by a different codec/config."""


class OutputExistsError(AnchorSceneError):
    """Refusing to overwrite an existing output without --force."""

    exit_code = 2
