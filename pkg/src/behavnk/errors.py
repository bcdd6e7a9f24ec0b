"""Exception types shared across the package."""


class BehavnkError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BehavnkError, ValueError):
    """A parameter or argument violates its admissible domain."""


class SingularSystemError(BehavnkError, ArithmeticError):
    """A structural denominator or system matrix is (numerically) singular."""


class IndeterminacyError(BehavnkError, RuntimeError):
    """Too few unstable roots: the linear RE system admits multiple stable solutions."""

    def __init__(self, n_stable, n_unstable, n_predetermined):
        self.n_stable = n_stable
        self.n_unstable = n_unstable
        self.n_predetermined = n_predetermined
        super().__init__(
            f"indeterminate system: {n_stable} stable / {n_unstable} unstable "
            f"generalized eigenvalues for {n_predetermined} predetermined states"
        )


class NoStableSolutionError(BehavnkError, RuntimeError):
    """Too many unstable roots: the linear RE system has no stable solution."""

    def __init__(self, n_stable, n_unstable, n_predetermined):
        self.n_stable = n_stable
        self.n_unstable = n_unstable
        self.n_predetermined = n_predetermined
        super().__init__(
            f"no stable solution: {n_stable} stable / {n_unstable} unstable "
            f"generalized eigenvalues for {n_predetermined} predetermined states"
        )


class FilterError(BehavnkError, ArithmeticError):
    """The state-space filter hit a non-positive-definite prediction variance."""


class DataError(BehavnkError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(BehavnkError, ValueError):
    """Invalid run configuration."""
