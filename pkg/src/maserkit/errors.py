"""Exception types shared across the library."""


class TruncationError(RuntimeError):
    """The requested object does not fit on the truncated Fock space."""


class ImpossibleOutcomeError(RuntimeError):
    """A state reduction was conditioned on an outcome of zero probability."""


class NormalizationUnderflowError(RuntimeError):
    """A conditional state norm fell below the floating-point floor."""


class FixedPointError(RuntimeError):
    """A fixed-point iteration failed to converge or hit a degenerate map."""


class ConfigError(ValueError):
    """A scenario configuration violated one or more preconditions.

    Collects every violation so a bad config is reported in full, not one
    complaint at a time.
    """

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))
