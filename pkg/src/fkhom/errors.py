"""Exception types shared across the package."""


class FkhomError(Exception):
    """Base class for all package errors."""


class ConfigError(FkhomError):
    """Malformed or out-of-range run configuration."""


class EllipticityError(FkhomError):
    """Coefficient field is not uniformly elliptic (or violates a kind's
    parameter constraints); carries the offending value in args."""


class WindowError(FkhomError):
    """Geometry does not fit the grid window, or two grid objects live on
    incompatible windows."""


class EmptyMaskError(FkhomError):
    """Operation requires a nonempty occupancy mask."""


class SolverError(FkhomError):
    """Linear/eigen solver failed to reach its tolerance."""


class InternalInconsistencyError(FkhomError):
    """A certified invariant failed after a solve (e.g. ground state with a
    genuinely negative part, or an asymmetric homogenized tensor)."""


class MonotonicityError(FkhomError):
    """Volume map violated mu-monotonicity beyond the grid tolerance; treated
    as an optimizer failure, never silently accepted."""


class DegenerateGapWarning(UserWarning):
    """Spectral gap below resolution; stability certificates are vacuous."""
