"""Exception types raised across the library."""


class VlsfError(Exception):
    """Base class for all library-specific errors."""


class CommonMaximizerViolation(VlsfError):
    """The two subchannels are not maximized by a common input distribution.

    Downstream bounds assume a shared capacity-achieving input; when the two
    independently optimized inputs differ by more than the caller's tolerance
    the pair is rejected rather than silently approximated.
    """

    def __init__(self, gap, tolerance):
        self.gap = gap
        self.tolerance = tolerance
        super().__init__(
            f"input maximizers differ by {gap:.3e} (sup norm), tolerance {tolerance:.3e}"
        )


class GridOverflow(VlsfError):
    """A quantized distribution would need more grid cells than allowed.

    Coarsen the grid step or lower the sequence length.
    """


class TypeEnumerationOverflow(VlsfError):
    """Exact mode would have to enumerate more input compositions than the cap."""


class BracketFailure(VlsfError):
    """A bracketed root/bisection search found no sign change or lost monotonicity."""


class RecipeInfeasible(VlsfError):
    """The closed-form design recipe produced a non-positive decoding threshold."""


class NonpositiveDrift(VlsfError):
    """A random walk has non-positive mean increment and may never cross."""
