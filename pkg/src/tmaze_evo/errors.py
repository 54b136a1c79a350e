"""Error types shared across the package."""


class LayoutError(ValueError):
    """Maze layout file is malformed or fails validation."""


class ConfigError(ValueError):
    """Experiment config file is malformed or contains unknown keys."""


class GenotypeLengthError(ValueError):
    """Genotype vector/file does not have the declared length."""


class CheckpointCorruptError(RuntimeError):
    """Checkpoint state hash or config hash does not match on resume."""


class UnresolvableCollisionError(RuntimeError):
    """Collision push-out exceeded one body radius without clearing."""


class NoSupportError(ValueError):
    """Expected-activity matrix has no bins with visit support."""


class EmptyTraversalError(ValueError):
    """A segment traversal contains no steps inside the segment."""


class DegenerateSamplesError(ValueError):
    """Statistical test input carries no rank/variance information."""
