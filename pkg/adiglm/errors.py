from typing import Sequence


class DimensionMismatch(ValueError):
    """A matrix or vector does not have the shape its role requires"""

    def __init__(self, field: str, expected, actual):
        self.field = field
        self.expected = expected
        self.actual = actual
        self.message = f"'{field}' has shape {actual}, expected {expected}."
        super().__init__(self.message)

    def __str__(self):
        return self.message


class UnsupportedOrder(ValueError):
    """Stage order outside {p, p-1}"""


class MethodStructureError(ValueError):
    """An implicit/explicit pair violates the ADI-DIMSIM structure"""

    def __init__(self, method: str, prop: str):
        self.method = method
        self.prop = prop
        self.message = f"Method '{method}' violates structural property: {prop}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class WeightSolveError(ArithmeticError):
    """The W weights could not be determined from the order conditions"""

    def __init__(self, residual: float, reason: str = "inconsistent system"):
        self.residual = residual
        self.message = (
            f"Unable to solve for W ({reason}), least-squares residual {residual:.3e}"
        )
        super().__init__(self.message)

    def __str__(self):
        return self.message


class CatalogValidationError(ValueError):
    def __init__(self, method: str, residual: float):
        self.method = method
        self.residual = residual
        self.message = (
            f"Method '{method}' failed validation with residual {residual:.3e}"
        )
        super().__init__(self.message)

    def __str__(self):
        return self.message


class UnknownMethod(KeyError):
    """Method id is not in the catalog of ADI methods"""

    def __init__(self, method_id):
        self.method_id = method_id
        self.message = f"No ADI method registered for '{method_id}'."
        super().__init__(self.message)

    def __str__(self):
        return self.message


class UnknownProblem(KeyError):
    """Problem name is not registered"""

    def __init__(self, name: str):
        self.name = name
        self.message = f"No problem named '{name}' exists."
        super().__init__(self.message)

    def __str__(self):
        return self.message


class UnsupportedLayout(ValueError):
    def __init__(self, n_partitions: int, n_stiff: int):
        self.n_partitions = n_partitions
        self.n_stiff = n_stiff
        self.message = (
            f"Layout with {n_partitions} partitions and {n_stiff} stiff is not supported"
        )
        super().__init__(self.message)

    def __str__(self):
        return self.message


class InvalidPermutation(ValueError):
    def __init__(self, order: Sequence[int], size: int):
        self.order = list(order)
        self.size = size
        self.message = f"{self.order} is not a permutation of 0..{size - 1}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class SingularPivotError(ZeroDivisionError):
    """Exactly zero pivot in a tridiagonal factorization"""

    def __init__(self, index: int):
        self.index = index
        self.message = f"Zero pivot encountered at row {index}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class SingularStageSolve(ArithmeticError):
    """Directional solve for a stage failed"""

    def __init__(self, family: int, stage: int):
        self.family = family
        self.stage = stage
        self.message = f"Singular directional solve for stage family {family}, stage {stage}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class SingularResolvent(ArithmeticError):
    def __init__(self, eta):
        self.eta = eta
        self.message = f"Resolvent is singular at eta = {eta}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class EigenvalueConvergenceError(ArithmeticError):
    def __init__(self, matrix, iterations: int):
        self.matrix = matrix
        self.iterations = iterations
        self.message = (
            f"QR iteration did not converge after {iterations} iterations for matrix\n{matrix}"
        )
        super().__init__(self.message)

    def __str__(self):
        return self.message


class MissingReferenceTrajectory(ValueError):
    """No exact solution, initial state or reference to start from"""

    def __init__(self, name: str, reason: str = "no exact solution or initial state"):
        self.name = name
        self.message = f"Cannot start integration of '{name}': {reason}"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class InvalidStepCount(ValueError):
    def __init__(self, nsteps: int, order: int):
        self.nsteps = nsteps
        self.order = order
        self.message = f"{nsteps} steps requested, at least {order} are required"
        super().__init__(self.message)

    def __str__(self):
        return self.message


class ZeroNormError(ValueError):
    """Reference state has zero norm"""


class SaturatedStudyError(ValueError):
    """Convergence rows carry no usable slope information"""

    def __init__(self, usable: int, total: int, reason: str = None):
        self.usable = usable
        self.total = total
        self.message = (
            reason or f"Only {usable} of {total} rows are above the roundoff floor"
        )
        super().__init__(self.message)

    def __str__(self):
        return self.message
