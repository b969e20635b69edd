from typing import Optional, Sequence, Tuple


class StgofError(Exception):
    """Base class for every failure raised by the core package"""


class EdgeListParseError(StgofError, ValueError):
    """Malformed line in an edge-list file"""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class EmptyGraphError(StgofError, ValueError):
    pass


class ParameterError(StgofError, ValueError):
    """DCBM parameters violate a model invariant"""


class ParameterScaleError(ParameterError):
    """An edge probability Omega_ij falls outside [0, 1)"""

    def __init__(self, pair: Tuple[int, int], value: float):
        self.pair = pair
        self.value = value
        super().__init__(
            f"Omega[{pair[0]}, {pair[1]}] = {value:.6g} is not a probability below 1; "
            "reduce beta_n or the entries of P"
        )


class SingularMatrixError(StgofError, ArithmeticError):
    pass


class EigenSolverError(StgofError, RuntimeError):
    """Block iteration did not reach the residual tolerance"""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        self.residuals = list(residuals) if residuals is not None else []
        super().__init__(message)


class ContractError(StgofError, ValueError):
    """A precondition of an operation was not met by the caller"""


class ClusteringError(StgofError, ValueError):
    pass


class RefitError(StgofError, ArithmeticError):
    """The refitting formulas would divide by zero for some cluster"""

    def __init__(self, cluster: int, message: str):
        self.cluster = cluster
        super().__init__(f"cluster {cluster}: {message}")


class StatisticUndefinedError(StgofError, ArithmeticError):
    pass


class BootstrapError(StgofError, RuntimeError):
    pass


class ComparisonFormatError(StgofError, ValueError):
    """A comparison CSV is missing columns or holds unusable values"""
