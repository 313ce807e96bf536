"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for invalid arguments; the classes here cover
failures that callers may want to handle distinctly (and that the CLI maps
to its exit codes).
"""


class FormatError(Exception):
    """A container file is malformed.

    ``byte_offset`` points at the first offending byte when known.
    """

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class FeasibilityError(Exception):
    """The requested white-noise-gain floor is unattainable.

    Carries ``gamma_max``, the largest feasible linear WNG floor for the
    steering vector at hand.
    """

    def __init__(self, message, gamma_max):
        super().__init__(message)
        self.gamma_max = gamma_max


class NumericalError(Exception):
    """A numerical procedure failed to converge or hit a degenerate value."""
