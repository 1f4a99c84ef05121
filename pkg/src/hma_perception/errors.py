"""Exception hierarchy shared across the perception stack."""


class PerceptionError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveDepth(PerceptionError):
    pass


class InvalidLimits(PerceptionError):
    pass


class DegenerateInput(PerceptionError):
    pass


class NoConsensus(PerceptionError):
    pass


class EmptyCluster(PerceptionError):
    pass


class StageError(PerceptionError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` holds the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class EmptyImage(PerceptionError):
    pass


class EmptyClass(PerceptionError):
    pass


class UntrainedModel(PerceptionError):
    pass


class WrongShape(PerceptionError):
    pass


class EmptyTestSet(PerceptionError):
    pass


class SignalTooShort(PerceptionError):
    pass


class BadFrameSize(PerceptionError):
    pass


class NoFrames(PerceptionError):
    pass


class NotHermitian(PerceptionError):
    pass


class TooManySources(PerceptionError):
    pass


class EmptyBand(PerceptionError):
    pass


class InvalidSpec(PerceptionError):
    pass


class ParseError(PerceptionError):
    """Malformed file or config. ``location`` is a byte offset, line number or key path."""

    def __init__(self, reason, location=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if location is not None:
            where.append(str(location))
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {reason}" if prefix else reason)
        self.reason = reason
        self.location = location
        self.path = path
