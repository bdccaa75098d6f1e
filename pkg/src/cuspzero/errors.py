"""Exception types shared across the package."""


class CuspZeroError(Exception):
    """Base class for all package errors."""


class ExactnessError(CuspZeroError):
    """An arithmetic step that must be exact (integer division, echelon pivot) was not.

    Always indicates an internal bug or corrupted input, never a tolerance issue.
    """


class InsufficientCoefficients(CuspZeroError):
    """The eigenvalue table is too short for the requested evaluation."""


class UnreachableTolerance(CuspZeroError):
    """Requested relative tolerance lies below the arithmetic precision floor."""


class OutsideRegime(CuspZeroError):
    """Evaluation point violates the validity regime of a windowed/asymptotic formula."""


class IndeterminateSign(CuspZeroError):
    """A certified value is smaller than its error bound, so its sign is unknown."""


class ZeroOnContour(CuspZeroError):
    """Winding integration could not certify the contour as zero-free."""


class DegenerateVector(CuspZeroError):
    """The random-model direction vector is identically zero for this parameter."""


class EigenvalueCollision(CuspZeroError):
    """Two Hecke eigenvalues coincide at the root-isolation resolution.

    Raised only after an automatic precision escalation has failed; at level one this
    would contradict the empirically observed separation of eigenvalues.
    """


class CacheFormatError(CuspZeroError):
    """An eigenform cache file failed validation and must be rebuilt."""


class BudgetExhausted(CuspZeroError):
    """Refinement hit its precision/iteration budget without certifying a result."""
