"""Exception types shared across the toolkit."""


class DiffmonError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DiffmonError):
    """A domain object violates one of its defining constraints."""


class NotHermitianError(ValidationError):
    pass


class NotPSDError(ValidationError):
    pass


class OffDiagonalError(ValidationError):
    """A measurement matrix has cross-channel correlations where none are allowed."""


class EfficiencyOutOfRangeError(ValidationError):
    """A detection efficiency falls outside [0, 1]."""


class SumNotInHError(ValidationError):
    """The diagonal-block sum of an unravelling matrix is not a valid efficiency matrix."""


class OffBlockAsymmetricError(ValidationError):
    """The off-diagonal blocks of an unravelling matrix differ."""


class InternalInconsistencyError(DiffmonError):
    """A conversion produced an object that fails its own validation (should be unreachable)."""


class DimensionMismatchError(ValidationError):
    pass


class InvalidEfficientPartError(ValidationError):
    """The unit-efficiency factor of a measurement matrix is not row-orthonormal."""


class NotL1Error(DiffmonError):
    """The factorization solver only handles a single measured channel."""


class ZeroMError(DiffmonError):
    """The zero measurement matrix has no beam-splitter realization."""


class NoRootError(DiffmonError):
    """Bracketing found no solution of the factorization phase equation (indicates a bug)."""


class NotPureError(DiffmonError):
    """The purity-rate prediction requires a pure input state."""


class StateInvalidError(DiffmonError):
    """A propagated state lost positivity beyond the configured tolerance."""


class WeightUnderflowError(DiffmonError):
    """A linear-trajectory log-weight fell below the configured floor."""


class NonPositiveLagError(DiffmonError):
    """Autocorrelation lags must be strictly positive."""


class NoSnapshotsError(DiffmonError):
    """The ensemble stored no state snapshot at the requested time index."""


class InsufficientDataError(DiffmonError):
    """The ensemble does not contain enough data for the requested estimate."""


class NoCompatibleTError(DiffmonError):
    """No real factor T with T T^t = hbar U could be built (should be unreachable)."""


class ParseError(DiffmonError):
    """An input file is not readable as structured text."""


class SchemaError(DiffmonError):
    """An input file parses but does not match the expected schema."""


class IoError(DiffmonError):
    """Writing an output artifact failed."""
