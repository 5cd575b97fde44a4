"""Shared exception types.

ValueError stays the type for bad arguments and infeasible requests;
FormatError (in ``formats``) covers malformed files.  NumericalError
marks computations that started from valid inputs but degenerated —
division by a vanishing depth, estimates that diverged, non-finite
intermediate values.
"""


class NumericalError(RuntimeError):
    """A numerically degenerate state was reached during a computation."""
