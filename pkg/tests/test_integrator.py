import numpy as np
import pytest

from adiglm.errors import (
    DimensionMismatch,
    InvalidStepCount,
    MissingReferenceTrajectory,
    SingularStageSolve,
)
from adiglm.integrator import (
    AdiIntegrator,
    ExternalStages,
    adi_step,
    finish,
    finite_difference_weights,
    integrate,
    start_external_stages,
)
from adiglm.methods import MethodId, get_method
from adiglm.models import PartitionedSystem
from adiglm.problems import build_problem, build_prothero_robinson, build_scalar_test
from adiglm.stability import adi_stability_matrix, imex_stability_matrix
from adiglm.tableau import PartitionLayout, block_matrices

LAYOUTS = [PartitionLayout(2, 2), PartitionLayout(3, 3), PartitionLayout(3, 2), PartitionLayout(2, 1)]


def random_eta(rng, n):
    """Complex values with Re <= 0 and modulus below 3."""
    radius = 3.0 * rng.random(n)
    angle = np.pi / 2 + np.pi * rng.random(n)
    return radius * np.exp(1j * angle)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_finite_difference_weights_exact_on_polynomials(p):
    D = finite_difference_weights(p)
    coefficients = np.arange(1.0, p + 1.0)
    H = 0.5

    def f(t):
        return sum(a * t**k for k, a in enumerate(coefficients))

    samples = np.array([f(k * H) for k in range(p)])
    for m in range(p):
        derivative = coefficients[m] * np.prod(np.arange(1, m + 1))
        assert D[m] @ samples == pytest.approx(H**m * derivative, abs=1e-12)


@pytest.mark.parametrize("layout", LAYOUTS, ids=lambda l: f"{l.n_partitions}-{l.n_stiff}")
def test_step_matches_stability_matrix(method, layout, rng):
    N, families, r = layout.n_partitions, layout.stage_row_count, method.implicit.r
    for _ in range(20):
        eta = random_eta(rng, N)
        system = build_scalar_test(eta)
        xi = rng.standard_normal((families, r)) + 1j * rng.standard_normal((families, r))
        report = adi_step(method, layout, system, 0.0, 1.0, ExternalStages(xi[:, :, None]))
        updated = report.external.xi[:, :, 0]

        # the elided family carries the same external stages as the last stiff one
        full = np.concatenate([xi[layout.family(mu)] for mu in range(N)])
        expected = adi_stability_matrix(method, eta, layout).matrix @ full
        scale = max(1.0, np.abs(expected).max())
        assert np.max(np.abs(updated.ravel() - expected[: families * r])) <= 1e-12 * scale


def test_imex_layout_matches_imex_matrix(method, rng):
    layout = PartitionLayout(2, 1)
    for _ in range(5):
        eta = random_eta(rng, 2)
        xi = rng.standard_normal(method.implicit.r) + 0j
        system = build_scalar_test(eta)
        report = adi_step(method, layout, system, 0.0, 1.0, ExternalStages(xi[None, :, None]))
        expected = imex_stability_matrix(method, eta[0], eta[1]) @ xi
        assert np.allclose(report.external.xi[0, :, 0], expected, rtol=0, atol=1e-12)


def exact_start(m, layout, lambdas, h, y0=1.0):
    """External stages from analytic derivatives of f^sigma = lambda_sigma y."""
    total = sum(lambdas)
    W = block_matrices(m, layout, "W")
    xi = []
    for mu in range(layout.stage_row_count):
        value = W[mu][0][:, 0] * y0
        for sigma, lam in enumerate(lambdas):
            for k in range(1, m.order + 1):
                value = value + W[mu][sigma][:, k] * h**k * lam * total ** (k - 1) * y0
        xi.append(value)
    return np.array(xi)


@pytest.mark.parametrize("layout", [PartitionLayout(2, 2), PartitionLayout(3, 3)], ids=["2-way", "3-way"])
def test_starting_procedure_rate(method, layout):
    lambdas = [-0.2, -0.3, -0.1][: layout.n_partitions]
    system = build_scalar_test(lambdas)
    steps = [0.2, 0.1, 0.05, 0.025]
    errors = []
    for h in steps:
        xi = start_external_stages(method, system, 0.0, h, layout=layout)
        exact = exact_start(method, layout, lambdas, h)
        errors.append(np.max(np.abs(xi.xi[:, :, 0] - exact)))
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert slope == pytest.approx(method.order + 1, abs=0.3)


def test_starting_procedure_with_reference_trajectory(method):
    lambdas = [-0.4, -0.6]
    system = build_scalar_test(lambdas)
    integrator = AdiIntegrator(method, PartitionLayout(2, 2), system)
    from_exact = integrator.start_external_stages(0.0, 0.1)
    from_reference = integrator.start_external_stages(0.0, 0.1, reference=lambda t: np.array([np.exp(-t)]))
    assert np.allclose(from_exact.xi, from_reference.xi, rtol=0, atol=1e-14)
    assert integrator.start_rhs_evals == 2 * method.order


def test_starting_procedure_falls_back_to_reference_solve():
    m = get_method(MethodId.ADI_DIMSIM3)
    exact_system = build_scalar_test([-0.5, -1.5])
    blind = PartitionedSystem(
        grid=exact_system.grid,
        operators=exact_system.operators,
        affine=exact_system.affine,
        initial_state=np.array([1.0]),
        name="blind",
    )
    layout = PartitionLayout(2, 2)
    expected = start_external_stages(m, exact_system, 0.0, 0.05, layout=layout)
    computed = start_external_stages(m, blind, 0.0, 0.05, layout=layout)
    assert np.allclose(computed.xi, expected.xi.real, rtol=0, atol=1e-10)


def test_missing_reference_trajectory():
    m = get_method(MethodId.ADI_DIMSIM2)
    scalar = build_scalar_test([-1.0, -1.0])
    bare = PartitionedSystem(grid=scalar.grid, operators=scalar.operators, affine=scalar.affine, name="bare")
    with pytest.raises(MissingReferenceTrajectory) as excinfo:
        start_external_stages(m, bare, 0.0, 0.1)
    assert excinfo.value.message == (
        "Cannot start integration of 'bare': no exact solution or initial state"
    )


def test_integrate_rejects_short_runs():
    m = get_method(MethodId.ADI_DIMSIM4)
    system, layout = build_problem("heat2d", 4)
    with pytest.raises(InvalidStepCount):
        integrate(m, layout, system, 0.0, 1.0, 3)


def test_layout_must_match_system():
    m = get_method(MethodId.ADI_DIMSIM2)
    system, _ = build_problem("heat2d", 4)
    with pytest.raises(DimensionMismatch):
        AdiIntegrator(m, PartitionLayout(3, 3), system)


def test_step_rejects_wrong_external_stage_shape():
    m = get_method(MethodId.ADI_DIMSIM2)
    system = build_scalar_test([-1.0, -1.0])
    with pytest.raises(DimensionMismatch):
        adi_step(m, PartitionLayout(2, 2), system, 0.0, 0.1, ExternalStages(np.zeros((1, 2, 1))))


def test_singular_stage_solve():
    m = get_method(MethodId.ADI_DIMSIM4)
    # 1 - h * gamma * lambda vanishes for h = 1, gamma = 0.4, lambda = 2.5
    system = build_scalar_test([2.5, -1.0])
    xi = ExternalStages(np.ones((2, 4, 1)))
    with pytest.raises(SingularStageSolve) as excinfo:
        adi_step(m, PartitionLayout(2, 2), system, 0.0, 1.0, xi)
    assert (excinfo.value.family, excinfo.value.stage) == (0, 0)


def test_counters_and_factorization_cache():
    m = get_method(MethodId.ADI_DIMSIM3)
    system, layout = build_problem("heat2d-3part", 5)
    integrator = AdiIntegrator(m, layout, system)
    result = integrator.integrate(0.0, 1.0, 6)
    assert result.solves == 6 * m.s * layout.stage_row_count
    assert result.rhs_evals == 6 * m.s * layout.n_partitions
    assert result.factorizations == 2
    assert result.start_rhs_evals == layout.n_partitions * m.order
    integrator.integrate(0.0, 1.0, 6)
    assert integrator.factorizations == 2
    integrator.integrate(0.0, 1.0, 12)
    assert integrator.factorizations == 4


def test_finish_returns_last_stage():
    m = get_method(MethodId.ADI_DIMSIM2)
    system = build_scalar_test([-1.0, -2.0])
    layout = PartitionLayout(2, 2)
    xi = start_external_stages(m, system, 0.0, 0.01, layout=layout)
    report = adi_step(m, layout, system, 0.0, 0.01, xi)
    assert np.array_equal(finish(m, report), report.stages[1, -1])
    assert report.stages.shape == (2, 2, 1)


def test_scalar_integration_accuracy(method):
    system = build_scalar_test([-1.0, -0.5, -0.5])
    result = integrate(method, PartitionLayout(3, 3), system, 0.0, 1.0, 40)
    assert result.error < 5e-3
    assert result.state[0] == pytest.approx(np.exp(-2.0), rel=5e-3)


def observed_slope(method, system, layout, steps):
    errors = [integrate(method, layout, system, 0.0, 1.0, n).error for n in steps]
    return np.polyfit(np.log(1.0 / np.array(steps)), np.log(errors), 1)[0]


def test_stiff_prothero_robinson_keeps_order(method):
    system = build_prothero_robinson([-50.0, -50.0])
    slope = observed_slope(method, system, PartitionLayout(2, 2), [10, 20, 40, 80])
    assert slope >= method.order - 0.5


def exact_external_stages(method, layout, t0, h):
    """External stages from exact derivatives of the Prothero-Robinson partitions.

    Along u = cos t the first partition vanishes and the last one is -sin t.
    """
    p = method.order
    W = block_matrices(method, layout, "W")
    families = layout.stage_row_count
    xi = np.zeros((families, method.implicit.r, 1))
    for mu in range(families):
        xi[mu, :, 0] = W[mu][0][:, 0] * np.cos(t0)
        for k in range(1, p + 1):
            derivative = -np.sin(t0 + (k - 1) * np.pi / 2)
            xi[mu, :, 0] += h**k * W[mu][-1][:, k] * derivative
    return ExternalStages(xi)


def test_internal_stages_reach_stage_order(method):
    layout = PartitionLayout(2, 2)
    system = build_prothero_robinson([-1.0, -2.0])
    t0 = 0.3
    steps = np.array([0.1, 0.05, 0.025, 0.0125])
    errors = []
    for h in steps:
        report = adi_step(method, layout, system, t0, h, exact_external_stages(method, layout, t0, h))
        exact = np.cos(t0 + method.c * h)
        errors.append(np.max(np.abs(report.stages[:, :, 0] - exact)))
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert slope >= method.implicit.q + 1 - 0.3


@pytest.mark.parametrize("layout", LAYOUTS, ids=lambda l: f"{l.n_partitions}-{l.n_stiff}")
def test_zero_step_keeps_external_stages(method, layout, rng):
    system = build_prothero_robinson([-3.0] * layout.n_partitions)
    xi = ExternalStages(rng.standard_normal((layout.stage_row_count, method.implicit.r, 1)))
    report = adi_step(method, layout, system, 0.2, 0.0, xi)
    for mu in range(layout.stage_row_count):
        assert np.allclose(report.stages[mu], method.U @ xi.xi[mu], rtol=0, atol=1e-15)
        assert np.allclose(report.external.xi[mu], method.V @ xi.xi[mu], rtol=0, atol=1e-15)


def test_affine_part_evaluated_once_per_partition_and_stage():
    m = get_method(MethodId.ADI_DIMSIM3)
    system, layout = build_problem("heat2d-3part", 5)
    calls = []

    def counting(sigma, t):
        calls.append((sigma, t))
        return system.affine(sigma, t)

    counted = PartitionedSystem(
        grid=system.grid, operators=system.operators, affine=counting, exact=system.exact
    )
    xi = start_external_stages(m, counted, 0.0, 0.1, layout=layout)
    calls.clear()
    adi_step(m, layout, counted, 0.0, 0.1, xi)
    assert len(calls) == m.s * layout.n_partitions
    assert len(set(calls)) == len(calls)
