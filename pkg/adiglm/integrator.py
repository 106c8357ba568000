import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DimensionMismatch,
    InvalidStepCount,
    MissingReferenceTrajectory,
    SingularPivotError,
    SingularStageSolve,
)
from .linalg import FactoredTridiagonal
from .models import PartitionedSystem
from .problems import relative_l2_error
from .tableau import AdiMethod, PartitionLayout, block_matrices

REFERENCE_RTOL = 1e-12
REFERENCE_ATOL = 1e-14


@dataclass(frozen=True, eq=False)
class ExternalStages:
    """External stages xi[mu, i] of every computed stage family after ``step`` steps."""

    xi: np.ndarray
    step: int = 0

    @property
    def families(self) -> int:
        return self.xi.shape[0]

    @property
    def r(self) -> int:
        return self.xi.shape[1]


@dataclass(frozen=True, eq=False)
class StepReport:
    stages: np.ndarray
    external: ExternalStages
    solves: int
    rhs_evals: int


@dataclass(frozen=True, eq=False)
class IntegrationResult:
    state: np.ndarray
    error: Optional[float]
    nsteps: int
    h: float
    solves: int
    rhs_evals: int
    factorizations: int
    start_rhs_evals: int


def finite_difference_weights(p: int) -> np.ndarray:
    """Weights D with ``H**m f^(m)(t0) ~ sum_k D[m, k] f(t0 + k H)``.

    One-sided differences on the nodes k = 0..p-1, exact for polynomials of
    degree p - 1.
    """
    nodes = np.arange(p, dtype=float)
    taylor = np.array(
        [nodes**j / np.prod(np.arange(1, j + 1, dtype=float)) for j in range(p)]
    )
    return np.linalg.solve(taylor.T, np.eye(p))


class AdiIntegrator:
    """Fixed-step ADI-GLM integrator for one method, layout and system.

    Parameters
    ----------
    method : AdiMethod
        implicit/explicit DIMSIM pair
    layout : PartitionLayout
        partition layout, must match the system's partition count
    system : PartitionedSystem
        split right-hand side with directional operators

    Notes
    -----
    Stiff stage solves are linear: ``(I - h gamma L^mu) Y = rhs`` is factored
    once per direction and step size and reused for every stage and step.
    """

    def __init__(
        self, method: AdiMethod, layout: PartitionLayout, system: PartitionedSystem
    ) -> None:
        if system.n_partitions != layout.n_partitions:
            raise DimensionMismatch(
                "system partitions", layout.n_partitions, system.n_partitions
            )
        self.method = method
        self.layout = layout
        self.system = system
        self._A = block_matrices(method, layout, "A")
        self._B = block_matrices(method, layout, "B")
        self._W = block_matrices(method, layout, "W")
        self._fd_weights = finite_difference_weights(method.order)
        self._factors: Dict[int, Optional[FactoredTridiagonal]] = {}
        self._factor_h = None
        self.factorizations = 0
        self.start_rhs_evals = 0

    def _factor(self, sigma: int, h: float) -> Optional[FactoredTridiagonal]:
        if h != self._factor_h:
            self._factors = {}
            self._factor_h = h
        if sigma not in self._factors:
            operator = self.system.directional_operator(sigma)
            if operator is None:
                self._factors[sigma] = None
            else:
                self._factors[sigma] = operator.factor(h, self.method.gamma)
                self.factorizations += 1
                logging.debug(f"Factored direction {sigma} for h={h:.6e}")
        return self._factors[sigma]

    def _solve_stage(
        self, mu: int, i: int, h: float, affine: np.ndarray, rhs: np.ndarray
    ) -> np.ndarray:
        rhs = rhs + (h * self.method.gamma) * affine
        operator = self.system.directional_operator(mu)
        if operator is None:
            return rhs
        try:
            F = self._factor(mu, h)
        except SingularPivotError as e:
            raise SingularStageSolve(mu, i) from e
        return operator.solve(self.system.grid, F, rhs)

    def _trajectory(
        self, times: np.ndarray, h: float, reference: Optional[Callable]
    ) -> np.ndarray:
        system = self.system
        if reference is not None:
            return np.array([reference(t) for t in times])
        if system.exact is not None:
            return np.array([system.state_at(t) for t in times])
        if system.initial_state is None:
            raise MissingReferenceTrajectory(system.name)
        y0 = np.asarray(system.initial_state)
        if len(times) == 1 or h == 0:
            return np.tile(y0, (len(times), 1))
        logging.info(f"Computing reference start trajectory for {system.name}")
        solution = solve_ivp(
            system.full_rhs,
            (times[0], times[-1]),
            y0,
            method="DOP853",
            t_eval=times,
            rtol=REFERENCE_RTOL,
            atol=REFERENCE_ATOL,
            max_step=h / 100,
        )
        if not solution.success:
            raise MissingReferenceTrajectory(system.name, reason=solution.message)
        return solution.y.T

    def start_external_stages(
        self, t0: float, h: float, reference: Optional[Callable] = None
    ) -> ExternalStages:
        """Initial external stages from finite differences of the partitions.

        Parameters
        ----------
        t0 : float
            initial time
        h : float
            step size, also used as the finite difference spacing
        reference : callable, optional
            trajectory ``reference(t)``; the exact solution is used when
            omitted, else a high accuracy reference solve from the initial state

        Returns
        -------
        ExternalStages
        """
        m, system = self.method, self.system
        p = m.order
        N = self.layout.n_partitions
        families = self.layout.stage_row_count
        times = t0 + h * np.arange(p)
        trajectory = self._trajectory(times, h, reference)

        fvals = np.array(
            [
                [system.rhs_eval(sigma, times[k], trajectory[k]) for k in range(p)]
                for sigma in range(N)
            ]
        )
        self.start_rhs_evals = N * p
        # derivatives[sigma, k] ~ h**k times the k-th derivative of f^sigma
        derivatives = np.einsum("mk,skd->smd", self._fd_weights, fvals)

        dtype = np.result_type(trajectory, fvals)
        xi = np.zeros((families, m.implicit.r, system.dimension), dtype=dtype)
        for mu in range(families):
            xi[mu] = np.outer(self._W[mu][0][:, 0], trajectory[0])
            for sigma in range(N):
                W = self._W[mu][sigma]
                for k in range(1, p + 1):
                    xi[mu] += h * np.outer(W[:, k], derivatives[sigma, k - 1])
        return ExternalStages(xi=xi, step=0)

    def adi_step(self, t: float, h: float, xi: ExternalStages) -> StepReport:
        """Advance the external stages by one step of size ``h`` from time ``t``.

        Stages are computed in the order Y_1 of every family, then Y_2 of
        every family and so on, each implicit only in its own direction.
        """
        m, layout, system = self.method, self.layout, self.system
        families = layout.stage_row_count
        N = layout.n_partitions
        s, r, d = m.s, m.implicit.r, system.dimension
        if xi.xi.shape != (families, r, d):
            raise DimensionMismatch("xi", (families, r, d), xi.xi.shape)

        dtype = np.result_type(xi.xi, system.dtype)
        Y = np.zeros((families, s, d), dtype=dtype)
        fv = np.zeros((N, s, d), dtype=dtype)
        solves = 0
        rhs_evals = 0
        for i in range(s):
            t_stage = t + m.c[i] * h
            affine = [system.affine_part(sigma, t_stage) for sigma in range(N)]
            for mu in range(families):
                acc = m.U[i] @ xi.xi[mu]
                for sigma in range(N):
                    row = self._A[mu][sigma][i]
                    known = i + 1 if sigma < mu else i
                    for j in range(known):
                        if row[j] != 0.0:
                            acc = acc + (h * row[j]) * fv[sigma, j]
                Y[mu, i] = self._solve_stage(mu, i, h, affine[mu], acc)
                solves += 1
                fv[mu, i] = system.linear_part(mu, Y[mu, i]) + affine[mu]
                rhs_evals += 1
            for sigma in range(families, N):
                Y_family = Y[layout.family(sigma), i]
                fv[sigma, i] = system.linear_part(sigma, Y_family) + affine[sigma]
                rhs_evals += 1

        updated = np.empty_like(xi.xi, dtype=dtype)
        for mu in range(families):
            acc = m.V @ xi.xi[mu]
            for sigma in range(N):
                acc = acc + h * (self._B[mu][sigma] @ fv[sigma])
            updated[mu] = acc
        return StepReport(
            stages=Y,
            external=ExternalStages(xi=updated, step=xi.step + 1),
            solves=solves,
            rhs_evals=rhs_evals,
        )

    @staticmethod
    def finish(report: StepReport) -> np.ndarray:
        """Last stage of the last computed family, an approximation at t + h since c_s = 1."""
        return report.stages[-1, -1].copy()

    def integrate(self, t0: float, tf: float, nsteps: int) -> IntegrationResult:
        """Integrate from t0 to tf with nsteps uniform steps.

        Returns
        -------
        IntegrationResult
            final state, relative l2 error against the exact solution when
            known, and cumulative solve/evaluation/factorization counters
        """
        if nsteps < self.method.order:
            raise InvalidStepCount(nsteps, self.method.order)
        h = (tf - t0) / nsteps
        logging.info(
            f"Integrating {self.system.name} with {self.method.name}: "
            f"{nsteps} steps, h={h:.6e}"
        )
        xi = self.start_external_stages(t0, h)
        solves = 0
        rhs_evals = 0
        report = None
        for n in range(nsteps):
            report = self.adi_step(t0 + n * h, h, xi)
            xi = report.external
            solves += report.solves
            rhs_evals += report.rhs_evals
        logging.debug(
            f"{self.system.name}: {solves} solves, {rhs_evals} rhs evaluations, "
            f"{self.factorizations} factorizations"
        )
        state = self.finish(report)

        error = None
        if self.system.exact is not None:
            error = relative_l2_error(state, self.system.state_at(tf))
            logging.info(f"{self.system.name} nsteps={nsteps} relative error {error:.6e}")
        return IntegrationResult(
            state=state,
            error=error,
            nsteps=nsteps,
            h=h,
            solves=solves,
            rhs_evals=rhs_evals,
            factorizations=self.factorizations,
            start_rhs_evals=self.start_rhs_evals,
        )


def _default_layout(system: PartitionedSystem) -> PartitionLayout:
    return PartitionLayout(system.n_partitions, system.n_partitions)


def start_external_stages(
    m: AdiMethod,
    system: PartitionedSystem,
    t0: float,
    h: float,
    layout: PartitionLayout = None,
    reference: Optional[Callable] = None,
) -> ExternalStages:
    layout = layout or _default_layout(system)
    return AdiIntegrator(m, layout, system).start_external_stages(t0, h, reference)


def adi_step(
    m: AdiMethod,
    layout: PartitionLayout,
    system: PartitionedSystem,
    t: float,
    h: float,
    xi: ExternalStages,
) -> StepReport:
    return AdiIntegrator(m, layout, system).adi_step(t, h, xi)


def finish(m: AdiMethod, report: StepReport) -> np.ndarray:
    return AdiIntegrator.finish(report)


def integrate(
    m: AdiMethod,
    layout: PartitionLayout,
    system: PartitionedSystem,
    t0: float,
    tf: float,
    nsteps: int,
) -> IntegrationResult:
    return AdiIntegrator(m, layout, system).integrate(t0, tf, nsteps)
