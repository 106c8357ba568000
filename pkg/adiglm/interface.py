import logging
from typing import Optional, Tuple

from .integrator import AdiIntegrator, IntegrationResult
from .methods import get_method_by_order
from .models import PartitionedSystem
from .problems import PROBLEMS, PartitionMode, build_heat2d, build_heat3d, build_problem
from .schema import HeatProblemConfigSchema
from .tableau import AdiMethod, PartitionLayout


class AdiExperiment:
    """An adapter bundling a method, a benchmark problem and the integrator.

    Parameters
    ----------
    problem : str
        registered problem name, one of heat2d, heat3d, heat2d-3part
    order : int
        method order, selects ADI-DIMSIM2/3/4
    n_points : int
        interior points per direction

    Components available
    --------------------
    method :
        the implicit/explicit DIMSIM pair of the requested order.
    layout :
        partition layout the problem is integrated with.
    system :
        the semi-discrete partitioned system.
    integrator :
        stepper with its factorization cache, shared by every run.

    Components are built on first access and reused afterwards.
    """

    def __init__(
        self,
        problem: str,
        order: int,
        n_points: int,
        t_span: Tuple[float, float] = (0.0, 1.0),
    ) -> None:
        self._method = None
        self._layout = None
        self._system = None
        self._integrator = None
        self.problem = problem
        self.order = order
        self.n_points = n_points
        self.t_span = tuple(t_span)

    @classmethod
    def from_config(cls, config: dict, order: int) -> "AdiExperiment":
        """Build an experiment for a custom heat configuration.

        ``config`` is validated with HeatProblemConfigSchema, so dims,
        n_points, t_span and partition_mode may all be set.
        """
        cfg = HeatProblemConfigSchema().load(config)
        explicit = cfg.partition_mode is PartitionMode.PER_DIRECTION_PLUS_EXPLICIT_FORCING
        name = f"heat{cfg.dims}d" + ("-3part" if explicit else "")
        experiment = cls(name, order, cfg.n_points, cfg.t_span)
        builder = build_heat2d if cfg.dims == 2 else build_heat3d
        experiment._system = builder(cfg)
        experiment._layout = PROBLEMS[name][2]
        return experiment

    def _build_problem(self):
        self._system, self._layout = build_problem(self.problem, self.n_points)

    @property
    def method(self) -> AdiMethod:
        if not self._method:
            self._method = get_method_by_order(self.order)
        return self._method

    @property
    def layout(self) -> PartitionLayout:
        if not self._layout:
            self._build_problem()
        return self._layout

    @property
    def system(self) -> PartitionedSystem:
        if not self._system:
            self._build_problem()
        return self._system

    @property
    def integrator(self) -> AdiIntegrator:
        if not self._integrator:
            self._integrator = AdiIntegrator(self.method, self.layout, self.system)
        return self._integrator

    def integrate(self, nsteps: int) -> IntegrationResult:
        t0, tf = self.t_span
        return self.integrator.integrate(t0, tf, nsteps)

    def describe(self, nsteps: Optional[int] = None) -> str:
        label = f"{self.problem} order={self.order} N_p={self.n_points}"
        return label if nsteps is None else f"{label} nsteps={nsteps}"

    def run(self, nsteps: int) -> IntegrationResult:
        """Integrate once, logging the failing configuration before re-raising."""
        try:
            return self.integrate(nsteps)
        except Exception:
            logging.error(f"Integration failed for {self.describe(nsteps)}")
            raise
