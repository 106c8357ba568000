import enum
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, UnknownProblem, ZeroNormError
from .linalg import TensorGrid, Tridiagonal
from .models import DirectionalOperator, PartitionedSystem
from .tableau import PartitionLayout


class PartitionMode(enum.Enum):
    PER_DIRECTION = "per-direction"
    PER_DIRECTION_PLUS_EXPLICIT_FORCING = "explicit-forcing"

    @staticmethod
    def fetch_values():
        return [c.value for c in PartitionMode]


@dataclass(frozen=True)
class HeatProblemConfig:
    """Heat equation on the unit square/cube with N_p interior points per direction."""

    dims: int
    n_points: int
    t_span: Tuple[float, float] = (0.0, 1.0)
    partition_mode: PartitionMode = PartitionMode.PER_DIRECTION

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError(f"dims must be 2 or 3, got {self.dims}")
        if self.n_points < 3:
            raise ValueError(f"n_points must be at least 3, got {self.n_points}")
        object.__setattr__(self, "partition_mode", PartitionMode(self.partition_mode))

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points + 1)


def heat2d_solution(x, y, t):
    et = np.exp(t)
    return et * (1 - x) * x * (1 - y) * y + et * ((x + 1 / 3) ** 2 + (y + 1 / 4) ** 2)


def heat2d_forcing(x, y, t):
    et = np.exp(t)
    return (
        heat2d_solution(x, y, t)
        + 2 * et * (1 - x) * x
        + 2 * et * (1 - y) * y
        - 4 * et
    )


def heat3d_solution(x, y, z, t):
    et = np.exp(t)
    return et * (1 - x) * x * (1 - y) * y * (1 - z) * z + et * (
        (x + 1 / 3) ** 2 + (y + 1 / 4) ** 2 + (z + 1 / 2) ** 2
    )


def heat3d_forcing(x, y, z, t):
    et = np.exp(t)
    return (
        heat3d_solution(x, y, z, t)
        + 2
        * et
        * (
            (1 - x) * x * (1 - y) * y
            + (1 - x) * x * (1 - z) * z
            + (1 - y) * y * (1 - z) * z
        )
        - 6 * et
    )


class HeatEquation:
    """Second order finite difference discretization of a manufactured heat problem.

    Interior unknowns only; Dirichlet data taken from the exact solution enters
    each directional partition as a boundary lift. The source goes to the last
    directional partition, or to its own explicit partition.

    ``solution`` and ``forcing`` must be ``time_factor(t)`` times a spatial
    profile. Lifts and sources are tabulated once at t = 0 and rescaled.
    """

    def __init__(
        self,
        cfg: HeatProblemConfig,
        solution: Callable,
        forcing: Callable,
        time_factor: Callable[[float], float] = np.exp,
    ):
        self.cfg = cfg
        self.solution = solution
        self.forcing = forcing
        self.time_factor = time_factor
        n = cfg.n_points
        self.spacing = cfg.spacing
        self.nodes = self.spacing * np.arange(1, n + 1)
        self.grid = TensorGrid((n,) * cfg.dims)
        self.mesh = np.meshgrid(*([self.nodes] * cfg.dims), indexing="ij")
        self.stencil = Tridiagonal.second_difference(n, self.spacing)

        scale = time_factor(0.0)
        self._lifts = [
            self._tabulate_lift(axis) / scale for axis in range(cfg.dims)
        ]
        self._source = self.grid.to_vector(forcing(*self.mesh, 0.0)) / scale
        self._profile = self.grid.to_vector(solution(*self.mesh, 0.0)) / scale
        self._affine = [self._static_affine(sigma) for sigma in range(self.n_partitions)]

    @property
    def explicit_forcing(self) -> bool:
        return (
            self.cfg.partition_mode
            is PartitionMode.PER_DIRECTION_PLUS_EXPLICIT_FORCING
        )

    @property
    def n_partitions(self) -> int:
        return self.cfg.dims + (1 if self.explicit_forcing else 0)

    def _tabulate_lift(self, axis: int) -> np.ndarray:
        lift = np.zeros(self.grid.shape)
        for position, index in ((0.0, 0), (1.0, -1)):
            coords = [np.take(m, index, axis=axis) for m in self.mesh]
            coords[axis] = np.full_like(coords[axis], position)
            slicer = [slice(None)] * self.cfg.dims
            slicer[axis] = index
            lift[tuple(slicer)] += self.solution(*coords, 0.0) / self.spacing**2
        return self.grid.to_vector(lift)

    def _static_affine(self, sigma: int) -> np.ndarray:
        dims = self.cfg.dims
        if sigma == dims:
            return self._source
        part = self._lifts[sigma]
        if sigma == dims - 1 and not self.explicit_forcing:
            part = part + self._source
        return part

    def boundary_lift(self, axis: int, t: float) -> np.ndarray:
        return self.time_factor(t) * self._lifts[axis]

    def source(self, t: float) -> np.ndarray:
        return self.time_factor(t) * self._source

    def affine_part(self, sigma: int, t: float) -> np.ndarray:
        return self.time_factor(t) * self._affine[sigma]

    def exact(self, t: float) -> np.ndarray:
        return self.time_factor(t) * self._profile

    def operators(self):
        directional = tuple(
            DirectionalOperator(axis=axis, stencil=self.stencil)
            for axis in range(self.cfg.dims)
        )
        return directional + ((None,) if self.explicit_forcing else ())

    def system(self, name: str) -> PartitionedSystem:
        return PartitionedSystem(
            grid=self.grid,
            operators=self.operators(),
            affine=self.affine_part,
            exact=self.exact,
            initial_state=self.exact(self.cfg.t_span[0]),
            name=name,
        )


def build_heat2d(cfg: HeatProblemConfig) -> PartitionedSystem:
    """Two dimensional heat problem, split per direction.

    Parameters
    ----------
    cfg : HeatProblemConfig
        configuration with dims = 2

    Returns
    -------
    PartitionedSystem
        x and y partitions with the source on y, or x, y and an explicit
        source partition
    """
    if cfg.dims != 2:
        raise ValueError(f"heat2d requires dims = 2, got {cfg.dims}")
    equation = HeatEquation(cfg, heat2d_solution, heat2d_forcing)
    suffix = "-3part" if equation.explicit_forcing else ""
    logging.debug(f"Built heat2d{suffix} with N_p = {cfg.n_points}")
    return equation.system(f"heat2d{suffix}")


def build_heat3d(cfg: HeatProblemConfig) -> PartitionedSystem:
    """Three dimensional heat problem with x, y, z partitions, source on z."""
    if cfg.dims != 3:
        raise ValueError(f"heat3d requires dims = 3, got {cfg.dims}")
    if cfg.partition_mode is not PartitionMode.PER_DIRECTION:
        raise ValueError("heat3d only supports per-direction partitioning")
    equation = HeatEquation(cfg, heat3d_solution, heat3d_forcing)
    logging.debug(f"Built heat3d with N_p = {cfg.n_points}")
    return equation.system("heat3d")


PROBLEMS: Dict[str, Tuple[int, PartitionMode, PartitionLayout]] = {
    "heat2d": (2, PartitionMode.PER_DIRECTION, PartitionLayout(2, 2)),
    "heat3d": (3, PartitionMode.PER_DIRECTION, PartitionLayout(3, 3)),
    "heat2d-3part": (
        2,
        PartitionMode.PER_DIRECTION_PLUS_EXPLICIT_FORCING,
        PartitionLayout(3, 2),
    ),
}


def build_problem(name: str, n_points: int) -> Tuple[PartitionedSystem, PartitionLayout]:
    """Build a named benchmark problem and the layout it is integrated with."""
    if name not in PROBLEMS:
        raise UnknownProblem(name)
    dims, mode, layout = PROBLEMS[name]
    cfg = HeatProblemConfig(dims=dims, n_points=n_points, partition_mode=mode)
    builder = build_heat2d if dims == 2 else build_heat3d
    return builder(cfg), layout


def _scalar_operator(value: complex) -> DirectionalOperator:
    return DirectionalOperator(
        axis=0,
        stencil=Tridiagonal(sub=np.zeros(0), diag=np.array([value]), sup=np.zeros(0)),
    )


def build_scalar_test(lambdas: Sequence[complex], y0: complex = 1.0) -> PartitionedSystem:
    """Linear test equation u' = sum_sigma lambda_sigma u, one partition per lambda."""
    lambdas = np.asarray(lambdas)
    dtype = complex if np.iscomplexobj(lambdas) or np.iscomplexobj(y0) else float
    total = lambdas.sum()
    zero = np.zeros(1, dtype=dtype)

    return PartitionedSystem(
        grid=TensorGrid((1,)),
        operators=tuple(_scalar_operator(value) for value in lambdas),
        affine=lambda sigma, t: zero,
        exact=lambda t: np.array([y0 * np.exp(total * t)], dtype=dtype),
        initial_state=np.array([y0], dtype=dtype),
        name="scalar-test",
        dtype=dtype,
    )


def build_prothero_robinson(lambdas: Sequence[float]) -> PartitionedSystem:
    """Stiff scalar problem u' = sum_sigma lambda_sigma (u - cos t) - sin t.

    The exact solution is cos t regardless of stiffness, which exposes the
    accuracy of the internal stages.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    last = len(lambdas) - 1

    def affine(sigma: int, t: float) -> np.ndarray:
        value = -lambdas[sigma] * np.cos(t)
        if sigma == last:
            value -= np.sin(t)
        return np.array([value])

    return PartitionedSystem(
        grid=TensorGrid((1,)),
        operators=tuple(_scalar_operator(value) for value in lambdas),
        affine=affine,
        exact=lambda t: np.array([np.cos(t)]),
        initial_state=np.array([1.0]),
        name="prothero-robinson",
    )


def relative_l2_error(numeric: np.ndarray, exact: np.ndarray) -> float:
    """Relative l2 error ||numeric - exact|| / ||exact||.

    Raises
    ------
    ZeroNormError
        if the reference state is identically zero
    """
    numeric = np.asarray(numeric)
    exact = np.asarray(exact)
    if numeric.shape != exact.shape:
        raise DimensionMismatch("numeric", exact.shape, numeric.shape)
    norm = np.linalg.norm(exact)
    if norm == 0:
        raise ZeroNormError("Reference state has zero l2 norm")
    return float(np.linalg.norm(numeric - exact) / norm)
