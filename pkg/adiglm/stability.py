import csv
import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, SingularResolvent
from .linalg import characteristic_polynomial, spectral_radius
from .tableau import AdiMethod, AssembledTableau, BaseTableau, PartitionLayout, assemble_adi

MEMBERSHIP_TOL = 1e-10
MARGINAL_TOL = 1e-6
LIMIT_RANK_TOL = 1e-8
# Extent of the region scans, |eta| <= 50 on every axis.
WEDGE_MAX_RADIUS = 50.0
WEDGE_RADII = 80


def is_member(rho: float) -> bool:
    return rho <= 1.0 + MEMBERSHIP_TOL


def is_marginal(rho: float) -> bool:
    """Within the defectiveness band just below the membership threshold."""
    return 1.0 - MARGINAL_TOL < rho <= 1.0 + MEMBERSHIP_TOL


@dataclass(frozen=True, eq=False)
class StabilityEvaluation:
    eta: np.ndarray
    matrix: np.ndarray
    rho: float

    @property
    def member(self) -> bool:
        return is_member(self.rho)

    @property
    def marginal(self) -> bool:
        return is_marginal(self.rho)


def mu_matrix(p: int) -> np.ndarray:
    """Upper triangular shift matrix with mu[i, j] = 1/(j - i)! for i <= j."""
    mu = np.zeros((p, p))
    for i in range(p):
        for j in range(i, p):
            mu[i, j] = 1.0 / factorial(j - i)
    return mu


def c_matrix(c: np.ndarray, p: int) -> np.ndarray:
    """Columns 1, c, c**2/2, ..., c**(p-1)/(p-1)!."""
    c = np.asarray(c, dtype=float)
    return np.column_stack([c**k / factorial(k) for k in range(p)])


def base_stability_matrix(t: BaseTableau, eta: complex) -> np.ndarray:
    """V + eta B (I - eta A)^-1 U for a single GLM."""
    identity = np.eye(t.s)
    try:
        resolvent = np.linalg.solve(identity - eta * t.A, t.U)
    except np.linalg.LinAlgError as e:
        raise SingularResolvent(eta) from e
    return t.V + eta * (t.B @ resolvent)


def tableau_stability_matrix(
    bigA: np.ndarray,
    bigU: np.ndarray,
    bigB: np.ndarray,
    bigV: np.ndarray,
    stage_eta: Sequence[complex],
) -> np.ndarray:
    """V + B Z (I - A Z)^-1 U with Z = diag(stage_eta), one entry per stage."""
    Z = np.diag(np.asarray(stage_eta, dtype=complex))
    identity = np.eye(bigA.shape[0])
    try:
        resolvent = np.linalg.solve(identity - bigA @ Z, bigU)
    except np.linalg.LinAlgError as e:
        raise SingularResolvent(tuple(np.unique(np.asarray(stage_eta)))) from e
    return bigV + bigB @ Z @ resolvent


@lru_cache(maxsize=64)
def _assembled(m: AdiMethod, layout: PartitionLayout) -> AssembledTableau:
    return assemble_adi(m, layout)


def adi_stability_matrix(
    m: AdiMethod, eta: Sequence[complex], layout: Optional[PartitionLayout] = None
) -> StabilityEvaluation:
    """Stability matrix of the N-way ADI method for per-direction values eta.

    Parameters
    ----------
    m : AdiMethod
        method to analyze
    eta : sequence of complex
        h * lambda for every partition
    layout : PartitionLayout, optional
        block pattern to use, by default all partitions stiff

    Returns
    -------
    StabilityEvaluation
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=complex))
    layout = layout or PartitionLayout(len(eta), len(eta))
    if eta.shape != (layout.n_partitions,):
        raise DimensionMismatch("eta", (layout.n_partitions,), eta.shape)
    t = _assembled(m, layout)
    matrix = tableau_stability_matrix(
        t.bigA, t.bigU, t.bigB, t.bigV, np.repeat(eta, t.s)
    )
    return StabilityEvaluation(eta=eta, matrix=matrix, rho=spectral_radius(matrix))


def m_hat(m: AdiMethod, eta: complex, n_partitions: int = 3) -> StabilityEvaluation:
    """Stability matrix with the same eigenvalue in every direction."""
    return adi_stability_matrix(m, [eta] * n_partitions)


def imex_stability_matrix(
    m: AdiMethod, eta_implicit: complex, eta_explicit: complex
) -> np.ndarray:
    """V + (eta_I B^I + eta_E B^E)(I - eta_I A^I - eta_E A^E)^-1 U."""
    I, E = m.implicit, m.explicit
    try:
        resolvent = np.linalg.solve(
            np.eye(m.s) - eta_implicit * I.A - eta_explicit * E.A, m.U
        )
    except np.linalg.LinAlgError as e:
        raise SingularResolvent((eta_implicit, eta_explicit)) from e
    return m.V + (eta_implicit * I.B + eta_explicit * E.B) @ resolvent


def limit_block(m: AdiMethod) -> np.ndarray:
    """Upper-left block of the stability matrix when every direction is infinitely stiff."""
    difference = m.implicit.A - m.explicit.A
    try:
        solved = np.linalg.solve(difference, m.U)
    except np.linalg.LinAlgError as e:
        raise SingularResolvent("infinite stiffness") from e
    return m.V - (m.implicit.B - m.explicit.B) @ solved


@dataclass(frozen=True, eq=False)
class LimitStructure:
    block: np.ndarray
    weight_difference: np.ndarray
    mu: np.ndarray

    @property
    def order(self) -> int:
        return self.mu.shape[0]

    @property
    def similarity_residual(self) -> float:
        D = self.weight_difference
        return float(np.max(np.abs(self.block @ D - D @ self.mu)))

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.weight_difference))

    @property
    def defect_rank(self) -> int:
        """Rank of X - I."""
        shifted = self.block - np.eye(self.block.shape[0])
        return int(np.linalg.matrix_rank(shifted, tol=LIMIT_RANK_TOL))

    @property
    def eigenvalue_residual(self) -> float:
        """Largest coefficient difference between charpoly(X) and (z - 1)**p."""
        p = self.block.shape[0]
        target = np.array([comb(p, k) * (-1.0) ** k for k in range(p + 1)])
        return float(np.max(np.abs(characteristic_polynomial(self.block) - target)))


def limit_structure(m: AdiMethod) -> LimitStructure:
    p = m.order
    difference = m.implicit.W[:, 1 : p + 1] - m.explicit.W[:, 1 : p + 1]
    structure = LimitStructure(
        block=limit_block(m), weight_difference=difference, mu=mu_matrix(p)
    )
    logging.info(
        f"{m.name} limit block: similarity residual {structure.similarity_residual:.3e}, "
        f"cond(W^I - W^E) = {structure.condition:.3e}"
    )
    return structure


class RegionKind(enum.Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"
    CPLX = "cplx"
    REAL = "real"

    @staticmethod
    def fetch_values():
        return [c.value for c in RegionKind]


@dataclass(frozen=True)
class ScanGrid:
    """Rectangle [re_min, re_max] x [im_min, im_max] sampled n x n."""

    re: Tuple[float, float]
    im: Tuple[float, float]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Scan grid needs at least one point, got n={self.n}")

    def re_values(self) -> np.ndarray:
        return np.linspace(self.re[0], self.re[1], self.n)

    def im_values(self) -> np.ndarray:
        return np.linspace(self.im[0], self.im[1], self.n)


class RegionPoint(NamedTuple):
    a: float
    b: float
    rho: float

    @property
    def member(self) -> bool:
        return is_member(self.rho)


def point_rho(
    m: AdiMethod, kind: RegionKind, a: float, b: float, n_partitions: int = 3
) -> float:
    """Spectral radius at one scan point; resolvent poles give +inf.

    For the real kind (a, b) are the x and y values, the third direction
    takes max(a, b). Otherwise a + ib is a complex eta.
    """
    try:
        if kind is RegionKind.REAL:
            eta = [a, b] if n_partitions == 2 else [a, b, max(a, b)]
            return adi_stability_matrix(m, eta).rho
        eta = complex(a, b)
        if kind is RegionKind.CPLX:
            return m_hat(m, eta, n_partitions).rho
        base = m.implicit if kind is RegionKind.IMPLICIT else m.explicit
        return spectral_radius(base_stability_matrix(base, eta))
    except SingularResolvent:
        return float("inf")


def scan_region(
    m: AdiMethod, kind: RegionKind, grid: ScanGrid, n_partitions: int = 3
) -> Iterator[RegionPoint]:
    """Stream spectral radii over a grid, column by column."""
    kind = RegionKind(kind)
    im_values = grid.im_values()
    for a in grid.re_values():
        for b in im_values:
            yield RegionPoint(float(a), float(b), point_rho(m, kind, a, b, n_partitions))


def region_header(kind: RegionKind) -> List[str]:
    if RegionKind(kind) is RegionKind.REAL:
        return ["eta_x", "eta_y", "rho", "member"]
    return ["re", "im", "rho", "member"]


def write_region_csv(points: Iterable[RegionPoint], kind: RegionKind, path: str) -> dict:
    """Write scan points as CSV and return member/marginal counts."""
    counts = {"points": 0, "members": 0, "marginal": 0}
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(region_header(kind))
        for point in points:
            counts["points"] += 1
            counts["members"] += int(point.member)
            counts["marginal"] += int(is_marginal(point.rho))
            writer.writerow(
                [f"{point.a:.12g}", f"{point.b:.12g}", f"{point.rho:.12g}", int(point.member)]
            )
    if counts["marginal"]:
        logging.warning(
            f"{counts['marginal']} scan points lie in the marginal band below rho = 1"
        )
    logging.info(
        f"Wrote {counts['points']} {RegionKind(kind).value} points to {path}, "
        f"{counts['members']} members"
    )
    return counts


def wedge_angle(
    m: AdiMethod,
    kind: RegionKind,
    radii: Optional[Sequence[float]] = None,
    angles: Optional[Sequence[float]] = None,
    n_partitions: int = 3,
    max_radius: float = WEDGE_MAX_RADIUS,
) -> Optional[float]:
    """Largest sampled half-angle (degrees) of a stable wedge about the negative real axis.

    Parameters
    ----------
    m : AdiMethod
        method to analyze
    kind : RegionKind
        any complex region kind
    radii : sequence of float, optional
        ray radii to test, by default 80 log-spaced values in [1e-2, max_radius]
    angles : sequence of float, optional
        candidate half-angles in degrees, by default 0 to 90 in steps of 0.5
    n_partitions : int
        partition count for the Cplx kind
    max_radius : float
        largest |eta| sampled when ``radii`` is omitted, by default the
        extent of the plotted region scans

    Returns
    -------
    float or None
        None when even the negative real axis leaves the region. Only the
        upper ray is sampled: for real tableaux rho(conj(eta)) = rho(eta).
    """
    kind = RegionKind(kind)
    if kind is RegionKind.REAL:
        raise ValueError("wedge angles are defined for complex regions only")
    if radii is None:
        if max_radius <= 1e-2:
            raise ValueError(f"max_radius must exceed 1e-2, got {max_radius}")
        radii = np.logspace(-2, np.log10(max_radius), WEDGE_RADII)
    radii = np.asarray(radii, dtype=float)
    angles = np.arange(0.0, 90.5, 0.5) if angles is None else np.sort(angles)
    best = None
    for alpha in angles:
        direction = -np.cos(np.radians(alpha)) + 1j * np.sin(np.radians(alpha))
        etas = radii * direction
        if not all(
            is_member(point_rho(m, kind, eta.real, eta.imag, n_partitions)) for eta in etas
        ):
            break
        best = float(alpha)
    logging.debug(f"{m.name} {kind.value} wedge up to |eta| = {radii.max():.3g}: {best}")
    return best


def real_axis_crossings(
    rho_of: Callable[[float], float],
    eta_min: float = -1e3,
    eta_max: float = -1e-3,
    n: int = 400,
) -> List[Tuple[float, float]]:
    """Brackets along the negative real axis where rho - 1 changes sign.

    Samples are log-spaced in |eta| between eta_max and eta_min (both negative).
    """
    etas = -np.logspace(np.log10(-eta_max), np.log10(-eta_min), n)
    sign = np.sign([rho_of(eta) - 1.0 - MEMBERSHIP_TOL for eta in etas])
    brackets = []
    for k in range(n - 1):
        if sign[k] != sign[k + 1]:
            brackets.append((float(etas[k + 1]), float(etas[k])))
    return brackets
