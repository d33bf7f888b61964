"""Exception types shared across the package."""


class AnisoGeoError(Exception):
    """Base class for all package errors."""


class InvalidSpec(AnisoGeoError):
    """Malformed body/gauge description or invalid operation parameters."""


class NoConvergence(AnisoGeoError):
    """Iterative solver hit its iteration cap before meeting tolerance."""

    def __init__(self, iterations: int, gap: float, message: str = ""):
        self.iterations = int(iterations)
        self.gap = float(gap)
        msg = message or f"no convergence after {iterations} iterations (gap={gap:.3e})"
        super().__init__(msg)


class NotOnBoundary(AnisoGeoError):
    """Point handed to a boundary-only map is not on the boundary."""


class NotSmooth(AnisoGeoError):
    """Operation requires C^2 support-function data the body cannot provide."""


class TensorAsymmetry(AnisoGeoError):
    """Relative shape tensors failed their symmetry self-check."""


class IllConditioned(AnisoGeoError):
    """Linear system condition number exceeds the trust threshold."""


class ChainViolation(AnisoGeoError):
    """Mixed-volume ratio chain violates monotonicity beyond noise."""


class NegativeMass(AnisoGeoError):
    """A fitted measure came out negative beyond the noise allowance."""


class DegenerateProfile(AnisoGeoError):
    """Measure profile too noisy or degenerate for the requested test."""


class DegenerateEdge(AnisoGeoError):
    """Geometric degeneracy (zero-length edge / zero-area facet) detected."""


class EmptyShellWarning(UserWarning):
    """A sampling shell received no hits; estimates for it are zero."""
