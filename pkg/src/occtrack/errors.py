"""Exception hierarchy shared by all modules."""


class OcctrackError(Exception):
    """Base class for library errors."""


class ZeroPhd(OcctrackError):
    """Palm conditioning on a point where the PHD vanishes."""


class UnknownMark(OcctrackError):
    """A mark does not occur in any hypothesis of the density."""


class MarkNotInHypothesis(OcctrackError):
    pass


class NeverExisting(OcctrackError):
    """The mark has zero total existence mass across hypotheses."""


class CombinationBlowup(OcctrackError):
    pass


class SpaceTooLarge(OcctrackError):
    pass


class BehindCamera(OcctrackError):
    pass


class DegenerateBox(OcctrackError):
    pass


class DegenerateBoxes(OcctrackError):
    pass


class MissingPod(OcctrackError):
    pass


class InstanceTooLarge(OcctrackError):
    pass


class SpecInvalid(OcctrackError):
    pass


class ParseError(OcctrackError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(OcctrackError):
    pass


class FrameError(OcctrackError):
    """Wraps an error raised while processing a given frame."""

    def __init__(self, frame, cause):
        self.frame = frame
        self.cause = cause
        super().__init__(f"frame {frame}: {type(cause).__name__}: {cause}")
