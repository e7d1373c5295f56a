"""Exception types shared across the package."""


class TrilocError(Exception):
    """Base class for all triloc-specific errors."""


class OffManifold(TrilocError):
    """A matrix claimed to be a triangle-manifold point violates the constraints."""


class NearSingularGram(TrilocError):
    """The 2x2 Gram system of the normal-space generators is numerically singular."""


class RetractionDomain(TrilocError):
    """The retraction argument left the feasible domain (shrink the step and retry)."""


class SingularGeometry(TrilocError):
    """Beacon geometry does not determine a position (e.g. coplanar beacons)."""


class DegenerateGeometry(TrilocError):
    """A transmitter coincides with a beacon; Fisher information is undefined."""


class SingularFIM(TrilocError):
    """Fisher information matrix is numerically singular."""


class SingularProjectedFIM(TrilocError):
    """Projected Fisher information (null-space reduced) is numerically singular."""


class RankDeficient(TrilocError):
    """Constraint Jacobian lost rank; null-space basis is not well defined."""


class NotCoprime(TrilocError):
    """Zadoff-Chu root is not coprime with the sequence length."""


class FrameOverflow(TrilocError):
    """Delayed sequence does not fit in the requested frame length."""


class NoPeak(TrilocError):
    """Correlation peak is indistinguishable from the noise floor."""


class ConfigError(TrilocError):
    """Experiment configuration is unparseable or semantically invalid."""
