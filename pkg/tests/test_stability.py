import csv

import numpy as np
import pytest

from adiglm.errors import DimensionMismatch, SingularResolvent
from adiglm.linalg import spectral_radius
from adiglm.methods import MethodId, get_method
from adiglm.stability import (
    RegionKind,
    ScanGrid,
    adi_stability_matrix,
    base_stability_matrix,
    c_matrix,
    imex_stability_matrix,
    limit_block,
    limit_structure,
    m_hat,
    mu_matrix,
    point_rho,
    real_axis_crossings,
    scan_region,
    tableau_stability_matrix,
    wedge_angle,
    write_region_csv,
)
from adiglm.tableau import BaseTableau, PartitionLayout, assemble_adi, computation_order, permute_tableau


def euler(implicit: bool) -> BaseTableau:
    value = 1.0 if implicit else 0.0
    return BaseTableau(A=[[value]], U=[[1.0]], B=[[1.0]], V=[[1.0]], W=[[1.0, 0.0]], c=[value], p=1, q=1)


def test_mu_and_c_matrices():
    assert np.array_equal(mu_matrix(3), [[1.0, 1.0, 0.5], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    C = c_matrix(np.array([0.0, 0.5, 1.0]), 3)
    assert np.array_equal(C[:, 0], np.ones(3))
    assert np.array_equal(C[:, 2], [0.0, 0.125, 0.5])


def test_m_hat_at_origin(method):
    for n_partitions in (2, 3):
        evaluation = m_hat(method, 0.0, n_partitions)
        assert evaluation.rho == pytest.approx(1.0, abs=1e-12)
        assert evaluation.member
        assert evaluation.marginal


def test_explicit_euler_crosses_at_minus_two():
    base = euler(implicit=False)
    brackets = real_axis_crossings(
        lambda x: spectral_radius(base_stability_matrix(base, x)), eta_min=-10.0, eta_max=-1e-3, n=400
    )
    assert len(brackets) == 1
    low, high = brackets[0]
    assert low <= -2.0 <= high


def test_implicit_euler_pole():
    with pytest.raises(SingularResolvent):
        base_stability_matrix(euler(implicit=True), 1.0)


@pytest.mark.parametrize("method_id", [MethodId.ADI_DIMSIM2, MethodId.ADI_DIMSIM3])
def test_implicit_base_stable_on_negative_real_axis(method_id):
    m = get_method(method_id)
    for eta in -np.logspace(-2, 8, 200):
        assert spectral_radius(base_stability_matrix(m.implicit, eta)) <= 1 + 1e-8


@pytest.mark.parametrize("alpha", [80.0, 82.0, 83.0])
def test_order_four_implicit_base_stable_along_rays(alpha):
    m = get_method(MethodId.ADI_DIMSIM4)
    direction = -np.cos(np.radians(alpha)) + 1j * np.sin(np.radians(alpha))
    for radius in np.logspace(-2, 8, 200):
        for eta in (radius * direction, radius * np.conj(direction)):
            assert spectral_radius(base_stability_matrix(m.implicit, eta)) <= 1 + 1e-8


def test_dimsim2_implicit_wedge():
    m = get_method(MethodId.ADI_DIMSIM2)
    assert wedge_angle(m, RegionKind.IMPLICIT, angles=[0.0, 40.0, 80.0]) == 80.0
    with pytest.raises(ValueError):
        wedge_angle(m, RegionKind.REAL)
    with pytest.raises(ValueError):
        wedge_angle(m, RegionKind.IMPLICIT, max_radius=1e-3)


def test_dimsim2_cplx_wedge_near_sixty_degrees():
    m = get_method(MethodId.ADI_DIMSIM2)
    assert wedge_angle(m, RegionKind.CPLX, angles=[50.0, 59.0, 61.0]) == 59.0
    radii = np.logspace(-2, 4, 80)
    assert wedge_angle(m, RegionKind.CPLX, radii=radii, angles=[50.0, 59.0, 61.0]) == 59.0


def test_dimsim3_cplx_wedge_near_fifty_five_degrees():
    m = get_method(MethodId.ADI_DIMSIM3)
    alpha = wedge_angle(
        m, RegionKind.CPLX, angles=[50.0, 54.0, 55.0, 56.0, 58.0], max_radius=1e2
    )
    assert alpha is not None
    assert 54.0 <= alpha <= 57.0


def test_dimsim4_cplx_wedge_depends_on_radius_cap():
    # far from the origin rho - 1 exceeds the membership tolerance
    m = get_method(MethodId.ADI_DIMSIM4)
    assert wedge_angle(m, RegionKind.CPLX, angles=[45.0, 47.0], max_radius=10.0) == 45.0
    assert wedge_angle(m, RegionKind.CPLX, angles=[0.0], max_radius=1e2) is None


def test_explicit_base_stable_near_origin(method):
    assert spectral_radius(base_stability_matrix(method.explicit, -0.1)) <= 1 + 1e-8


def test_dimsim2_implicit_base_damps_stiff_modes():
    m = get_method(MethodId.ADI_DIMSIM2)
    assert spectral_radius(base_stability_matrix(m.implicit, -1e6)) <= 1e-3


def test_m_hat_approaches_limit_spectrum(method):
    # with both directions infinitely stiff the matrix is block triangular
    # with diagonal blocks X and M^I(-inf)
    eta = -1e10
    limit = np.polymul(
        np.poly(limit_block(method)), np.poly(base_stability_matrix(method.implicit, eta))
    )
    coefficients = np.poly(m_hat(method, eta, 2).matrix)
    scale = max(1.0, np.abs(limit).max())
    assert np.allclose(coefficients, limit, rtol=0, atol=1e-6 * scale)


def test_limit_structure(method):
    structure = limit_structure(method)
    p = method.order
    X = structure.block
    assert np.array_equal(X, limit_block(method))
    assert structure.similarity_residual <= 1e-10
    assert structure.defect_rank == p - 1
    # coefficient k of the characteristic polynomial scales like |X|**k
    scale = max(1.0, np.abs(X).max()) ** (p - 1)
    assert structure.eigenvalue_residual <= 1e-8 * scale


def test_dimsim2_limit_block_values():
    X = limit_block(get_method(MethodId.ADI_DIMSIM2))
    assert np.trace(X) == pytest.approx(2.0, abs=1e-12)
    assert np.linalg.det(X) == pytest.approx(1.0, abs=1e-12)


def test_imex_matrix_reduces_to_implicit_base(method, rng):
    for eta in -5.0 * rng.random(5) + 2j * rng.standard_normal(5):
        assert np.allclose(
            imex_stability_matrix(method, eta, 0.0),
            base_stability_matrix(method.implicit, eta),
            rtol=0,
            atol=1e-13,
        )


def test_stability_matrix_is_permutation_invariant(method, rng):
    layout = PartitionLayout(3, 3)
    t = assemble_adi(method, layout)
    permuted = permute_tableau(t, computation_order(layout, t.s))
    for _ in range(5):
        eta = -3.0 * rng.random(3) + 1j * rng.standard_normal(3)
        stage_eta = np.repeat(eta, t.s)
        order = list(permuted.order)
        original = tableau_stability_matrix(t.bigA, t.bigU, t.bigB, t.bigV, stage_eta)
        reordered = tableau_stability_matrix(
            permuted.bigA, permuted.bigU, permuted.bigB, permuted.bigV, stage_eta[order]
        )
        assert np.allclose(original, reordered, rtol=0, atol=1e-12)


def test_m_hat_matches_uniform_adi_matrix(method):
    eta = -1.5 + 0.5j
    assert np.allclose(
        m_hat(method, eta, 2).matrix, adi_stability_matrix(method, [eta, eta]).matrix
    )


def test_adi_stability_matrix_checks_eta_length(method):
    with pytest.raises(DimensionMismatch):
        adi_stability_matrix(method, [-1.0, -1.0], PartitionLayout(3, 3))


def test_dimsim2_real_region_contains_negative_quadrant():
    m = get_method(MethodId.ADI_DIMSIM2)
    grid = ScanGrid(re=(-50.0, 0.0), im=(-50.0, 0.0), n=11)
    points = list(scan_region(m, RegionKind.REAL, grid))
    assert len(points) == 121
    assert all(point.member for point in points)


def test_point_rho_real_kind_two_partitions(method):
    rho = point_rho(method, RegionKind.REAL, -2.0, -3.0, n_partitions=2)
    assert rho == pytest.approx(adi_stability_matrix(method, [-2.0, -3.0]).rho)


def test_write_region_csv(tmp_path):
    m = get_method(MethodId.ADI_DIMSIM2)
    path = tmp_path / "region.csv"
    grid = ScanGrid(re=(-1.0, 0.0), im=(0.0, 1.0), n=3)
    counts = write_region_csv(scan_region(m, RegionKind.CPLX, grid), RegionKind.CPLX, str(path))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["re", "im", "rho", "member"]
    assert len(rows) == 10
    assert rows[1][:2] == ["-1", "0"]
    assert counts["points"] == 9
    assert counts["members"] == sum(int(row[3]) for row in rows[1:])

    real_path = tmp_path / "real.csv"
    write_region_csv(scan_region(m, "real", ScanGrid((-1.0, 0.0), (-1.0, 0.0), 2)), "real", str(real_path))
    with open(real_path, newline="") as f:
        assert next(csv.reader(f)) == ["eta_x", "eta_y", "rho", "member"]


def test_scan_grid_requires_points():
    with pytest.raises(ValueError):
        ScanGrid(re=(0.0, 1.0), im=(0.0, 1.0), n=0)
