"""Exception types shared across the package."""


class MsfError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MsfError, ValueError):
    pass


class NotPositiveDefinite(MsfError):
    def __init__(self, pivot_index, pivot_value):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot_index} = {pivot_value:.3e}"
        )


class SingularSystem(MsfError):
    def __init__(self, pivot_index, pivot_value):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"linear system is numerically singular: |pivot {pivot_index}| = {abs(pivot_value):.3e}"
        )


class SingularIterate(MsfError):
    """An iterate X could not be inverted."""


class SingularJacobian(MsfError):
    """The Newton linear system is numerically singular."""


class NoConvergence(MsfError):
    def __init__(self, iterations):
        self.iterations = iterations
        super().__init__(f"eigenvalue iteration failed to converge after {iterations} iterations")


class ZeroArgument(MsfError, ValueError):
    pass


class NotParaHermitian(MsfError, ValueError):
    pass


class InconsistentBlocks(MsfError):
    def __init__(self, max_discrepancy):
        self.max_discrepancy = max_discrepancy
        super().__init__(f"repeated blocks disagree by {max_discrepancy:.3e}")


class DegenerateInput(MsfError, ValueError):
    pass


class InsufficientData(MsfError, ValueError):
    pass


class NotRepresentable(MsfError, ArithmeticError):
    """A square root does not lie in the multi-quadratic class handled here."""


class NotPositive(MsfError, ArithmeticError):
    pass


class NoRealFactorization(MsfError, ArithmeticError):
    pass


class UnknownId(MsfError, KeyError):
    pass
