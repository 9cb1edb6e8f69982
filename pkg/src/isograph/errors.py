"""Exception types shared across the library.

Plain ``ValueError``/``IndexError`` cover dimension and domain mistakes;
the classes below exist where callers need to tell failure modes apart
(the CLI maps them to distinct exit codes).
"""


class CapacityError(ValueError):
    """A brute-force enumeration was requested beyond the configured limit."""


class DataFormatError(ValueError):
    """A dataset or checkpoint file failed validation; message carries context."""


class NumericalError(ArithmeticError):
    """An iterative numerical routine failed to converge.

    ``residual`` holds the last convergence measure so callers can judge
    how far off the result was.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual
