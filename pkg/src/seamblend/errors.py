"""Exception hierarchy shared by all seamblend modules.

The CLI maps these onto exit codes: validation problems exit 2, file
problems exit 3, numerical failures exit 4.
"""


class SeamblendError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SeamblendError):
    """Inputs violate a structural contract (shape, range, bounds)."""


class ImageTooSmallError(ValidationError):
    """Operation needs a larger raster than it was given."""


class UnreadableImageError(SeamblendError):
    """A file could not be opened or decoded as a PNG."""


class UnsupportedFormatError(SeamblendError):
    """The PNG decoded, but not to a supported mode / bit depth."""


class UnwritableImageError(SeamblendError):
    """An output file could not be written."""


class SolverDidNotConvergeError(SeamblendError):
    """Conjugate gradient failed to reach the requested residual."""

    def __init__(self, residual: float, max_iters: int):
        self.residual = residual
        self.max_iters = max_iters
        super().__init__(
            f"solver did not converge: relative residual {residual:.3e} "
            f"after {max_iters} iterations"
        )


class DivergedError(SeamblendError):
    """An optimization produced a non-finite loss value."""

    def __init__(self, term: str):
        self.term = term
        super().__init__(f"optimization diverged: non-finite value in '{term}' term")
