"""Exception types shared by the toolkit."""


class DulacError(Exception):
    """Base class for all toolkit errors."""


class DomainError(DulacError):
    """Input lies outside the admissible domain of an operation."""


class InvalidSupportError(DulacError):
    """A series carries coefficients outside the support required here."""


class SupportRangeError(DulacError):
    """A resonant support was computed for a smaller index range than needed."""


class ConditionError(DulacError):
    """A standing smallness condition on the field fails."""


class WrongCaseError(DulacError):
    """Operation invoked in the wrong eigenvalue-ratio case (saddle vs node)."""


class PathConstructionError(DulacError):
    """No admissible integration path exists for the requested geometry."""


class PreconditionError(DulacError):
    """A structural precondition on the inputs is violated."""


class UnsupportedRatioError(PreconditionError):
    """The eigenvalue ratio is a nonnegative real number."""


class InternalConsistencyError(DulacError):
    """An internal invariant failed; indicates a bug or inconsistent inputs."""


class AsymptoticsRefusedError(DulacError):
    """Asymptotic verdicts require the strict spectral inequality."""


class LiftError(DulacError):
    """A leaf lift failed (left the polydisc, or step control gave up)."""

    def __init__(self, status: str, message: str = ""):
        self.status = status
        super().__init__(message or f"lift failed with status {status!r}")
