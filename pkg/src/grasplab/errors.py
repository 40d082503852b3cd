"""Exception types shared across grasplab modules."""


class GrasplabError(Exception):
    """Base class for all grasplab errors."""


class ZeroLength(GrasplabError):
    """Vector too short to normalize (|v| <= 1e-12)."""


class BadDims(GrasplabError):
    """Shape dimensions or wall thickness violate their preconditions."""


class PlacementFailure(GrasplabError):
    """Rejection sampling could not place blocks without overlap."""


class RangeError(GrasplabError):
    """Value outside the declared quantization range."""


class ShapeMismatch(GrasplabError):
    """Array shape does not match the configured resolution/spec."""


class UnsupportedResolution(GrasplabError):
    """No architecture preset exists for this input resolution."""


class EpisodeFinished(GrasplabError):
    """step() called after the episode reported done."""


class BufferUnderflow(GrasplabError):
    """Replay buffer holds fewer transitions than the requested batch."""


class BadSchedule(GrasplabError):
    """Curriculum schedule violates its monotonicity invariants."""


class NonFiniteError(GrasplabError):
    """A loss or parameter update produced NaN/Inf."""


class SpecMismatch(GrasplabError):
    """Checkpoint was written for a different network spec."""


class ConfigError(GrasplabError):
    """Run configuration is missing keys or internally inconsistent."""
