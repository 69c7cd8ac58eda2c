"""Exception hierarchy.

Usage problems (bad shapes, violated preconditions) derive from ``ValueError``;
numerical failures that indicate a bound or an evaluator went wrong derive from
``ComputationError``.  The CLI maps the first family to exit code 2 and the
second to exit code 1.
"""


class CharexpError(Exception):
    """Base class for every error raised by this package."""


class ComputationError(CharexpError, RuntimeError):
    """A computation finished but its certificate failed."""


class ShapeTooTall(CharexpError, ValueError):
    """The shape has more nonzero rows than the number of variables N."""


class ShapeOverflow(CharexpError, ValueError):
    """Box count beyond the supported integer range."""


class ComplexityGuard(CharexpError, RuntimeError):
    """A dynamic program exceeded its configured state budget."""


class DegenerateVandermonde(CharexpError, ValueError):
    """Coincident evaluation points with the fallback disabled."""


class DegenerateSpectrum(CharexpError, ValueError):
    """Eigenvalues closer than the spacing tolerance."""


class RadiusViolation(CharexpError, ValueError):
    """A generating-function argument is outside its disc of convergence."""


class EmptyInput(CharexpError, ValueError):
    """Reduction over an empty sequence."""


class HypothesisViolation(CharexpError, ValueError):
    """A model hypothesis failed; ``clause`` names the failing condition."""

    def __init__(self, clause, message=""):
        self.clause = clause
        super().__init__(f"{clause}: {message}" if message else clause)


class SpectralGapLost(ComputationError):
    """``1 - b_i mu_j <= 0`` for some pair; impossible under validated hypotheses."""


class NotInL(CharexpError, ValueError):
    """Measure density exceeds the cap of one (or the spacing rule failed)."""


class NonPositiveInput(CharexpError, ValueError):
    """A strictly positive argument was required."""


class DiagonalSingularity(CharexpError, ValueError):
    """Logarithmic kernel evaluated on the diagonal."""


class GridTooSmall(ComputationError):
    """Minimizer mass reaches the right edge of the grid."""


class SandwichViolation(ComputationError):
    """Cutoff sandwich inequality failed; signals an evaluator bug."""


class BoundViolation(ComputationError):
    """Jensen bracket failed; signals an evaluator bug."""


class PrecisionError(ComputationError):
    """Adaptive extended precision could not reach a stable value."""


class ConvergenceError(ComputationError):
    """Iterative solver stopped without meeting its tolerance."""
