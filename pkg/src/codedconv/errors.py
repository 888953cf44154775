"""Exception types shared across the package."""


class CodedConvError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CodedConvError, ValueError):
    """Tensor dimensions are inconsistent with the requested operation."""


class ParameterError(CodedConvError, ValueError):
    """A partition count, worker count, or coefficient violates its precondition."""


class DecodeInfeasibleError(CodedConvError):
    """The recovery matrix is singular to working precision.

    Carries the measured condition number so callers can report how far
    from invertible the matrix was.
    """

    def __init__(self, kappa: float, worker_ids=()):
        self.kappa = kappa
        self.worker_ids = tuple(worker_ids)
        super().__init__(
            f"recovery matrix for workers {list(self.worker_ids)} is singular "
            f"to working precision (condition number {kappa:.6e})"
        )


class StarvationError(CodedConvError):
    """Fewer responsive workers than the recovery threshold requires."""

    def __init__(self, needed: int, responsive: int):
        self.needed = needed
        self.responsive = responsive
        super().__init__(
            f"need {needed} worker results but only {responsive} workers are responsive"
        )


class ConfigError(CodedConvError, ValueError):
    """A run configuration failed validation.

    Aggregates every violation found so one round trip reports all problems.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {p}" for p in self.problems))
