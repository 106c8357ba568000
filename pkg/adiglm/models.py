from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch
from .linalg import FactoredTridiagonal, TensorGrid, Tridiagonal, apply_lines, factor_shifted, solve_lines

AffinePart = Callable[[int, float], np.ndarray]
ExactSolution = Callable[[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class DirectionalOperator:
    """A 1D tridiagonal operator acting along one axis of a tensor grid."""

    axis: int
    stencil: Tridiagonal

    def apply(self, grid: TensorGrid, y: np.ndarray) -> np.ndarray:
        return apply_lines(grid, self.axis, self.stencil, y)

    def factor(self, h: float, gamma: float) -> FactoredTridiagonal:
        return factor_shifted(self.stencil, h, gamma)

    def solve(self, grid: TensorGrid, F: FactoredTridiagonal, rhs: np.ndarray) -> np.ndarray:
        return solve_lines(grid, self.axis, F, rhs)

    def to_dense(self, grid: TensorGrid) -> np.ndarray:
        """Full Kronecker matrix I x ... x T x ... x I in the grid ordering."""
        matrix = np.ones((1, 1))
        # x fastest means the first axis is the innermost Kronecker factor
        for axis in reversed(range(grid.ndim)):
            factor = (
                self.stencil.to_dense()
                if axis == self.axis
                else np.eye(grid.shape[axis])
            )
            matrix = np.kron(matrix, factor)
        return matrix


@dataclass(frozen=True, eq=False)
class PartitionedSystem:
    """An N-way additively split linear right-hand side.

    Partition ``sigma`` contributes ``f^sigma(t, y) = L^sigma y + g^sigma(t)``
    where ``L^sigma`` is a directional operator (or zero) and ``g^sigma`` the
    affine part holding boundary lifts and sources.

    Parameters
    ----------
    grid : TensorGrid
        grid the state lives on
    operators : tuple
        one DirectionalOperator or None (zero operator) per partition
    affine : callable
        ``affine(sigma, t)`` returning the affine part of partition sigma
    exact : callable, optional
        exact solution ``exact(t)`` if known
    initial_state : np.ndarray, optional
        state at the initial time when no exact solution is known
    name : str
        label used in logs and errors
    """

    grid: TensorGrid
    operators: Tuple[Optional[DirectionalOperator], ...]
    affine: AffinePart
    exact: Optional[ExactSolution] = None
    initial_state: Optional[np.ndarray] = None
    name: str = "system"
    dtype: type = field(default=float)

    @property
    def dimension(self) -> int:
        return self.grid.size

    @property
    def n_partitions(self) -> int:
        return len(self.operators)

    def directional_operator(self, sigma: int) -> Optional[DirectionalOperator]:
        return self.operators[sigma]

    def affine_part(self, sigma: int, t: float) -> np.ndarray:
        return self.affine(sigma, t)

    def linear_part(self, sigma: int, y: np.ndarray) -> np.ndarray:
        operator = self.operators[sigma]
        if operator is None:
            return np.zeros_like(y)
        return operator.apply(self.grid, y)

    def rhs_eval(self, sigma: int, t: float, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.dimension,):
            raise DimensionMismatch("y", (self.dimension,), y.shape)
        return self.linear_part(sigma, y) + self.affine_part(sigma, t)

    def full_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return sum(self.rhs_eval(sigma, t, y) for sigma in range(self.n_partitions))

    def state_at(self, t: float) -> Optional[np.ndarray]:
        if self.exact is not None:
            return np.asarray(self.exact(t), dtype=self.dtype)
        return None
