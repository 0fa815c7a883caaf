"""Exception types shared across the package."""


class SynthControlError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SynthControlError, ValueError):
    """An argument value is outside its documented domain."""


class PanelFormatError(SynthControlError, ValueError):
    """A CSV input could not be parsed; the message carries the location."""


class PanelValidationError(SynthControlError, ValueError):
    """Parsed data violates a panel invariant (duplicates, gaps, shape)."""


class WindowRangeError(SynthControlError, ValueError):
    """A requested period window falls outside the panel's range."""


class StudyError(SynthControlError):
    """A study cannot be built from the given panel and spec."""


class InferenceError(SynthControlError):
    """Placebo inference is undefined for the given inputs."""
