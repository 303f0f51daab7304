"""
Error types raised on precondition violations
"""


class ResolutionError(ValueError):
    """Input mesh too coarse for the oscillation at the requested frequency"""

    def __init__(self, spacing: float, required: float, lam: float):
        self.spacing = spacing
        self.required = required
        self.lam = lam
        super().__init__(
            f"Input spacing {spacing:.6g} violates the resolution rule at lambda={lam:g}; "
            f"required spacing <= {required:.6g}"
        )


class GridMismatchError(ValueError):
    """Two fields expected on the same grid live on different grids"""


class GridNestingError(ValueError):
    """Output grid nodes are not a subset of the input grid nodes"""


class PhantomDomainError(ValueError):
    """A phantom primitive leaves its domain square"""


class MollifierError(ValueError):
    """Mollifier width below the grid spacing"""


class CoverageError(ValueError):
    """A frequency lattice does not cover the averaging window"""


class RunSpecError(ValueError):
    """Invalid experiment description"""
