"""Exception types shared across the package."""


class GroupcastError(Exception):
    """Base class for all package errors."""


class GimbalLockError(GroupcastError):
    """Pitch is too close to +/-90 deg for a well-defined yaw/roll split."""


class EmptyMeshError(GroupcastError):
    """Mesh has no triangles."""


class DanglingPrototypeError(GroupcastError):
    """Instance references a prototype index that does not exist."""


class AllInvalidError(GroupcastError):
    """Depth image has no valid pixels to inpaint from."""


class EmptyClipSetError(GroupcastError):
    """Curriculum needs at least one motion clip."""


class OutOfRangeTimeError(GroupcastError):
    """Failure time lies outside the clip duration."""


class SchemaMismatchError(GroupcastError):
    """Robot state / reference arrays disagree on joint or link counts."""


class LengthMismatchError(GroupcastError):
    """Trajectories being compared have different lengths."""


class EquivalenceFailureError(GroupcastError):
    """Grouped and naive casting disagreed; benchmark timing aborted."""


class ConfigError(GroupcastError):
    """Config file failed validation."""
