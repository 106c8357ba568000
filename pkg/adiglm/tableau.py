import logging
from dataclasses import dataclass, field
from math import factorial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidPermutation,
    MethodStructureError,
    UnsupportedLayout,
    UnsupportedOrder,
    WeightSolveError,
)

PRECONSISTENCY_TOL = 1e-12
STRUCTURE_TOL = 1e-12
WEIGHT_SOLVE_TOL = 1e-10


def _scaled_power(c: np.ndarray, k: int) -> np.ndarray:
    """c**k / k! elementwise, with c**0 = 1."""
    return c**k / factorial(k)


@dataclass(frozen=True, eq=False)
class BaseTableau:
    """A single general linear method.

    Parameters
    ----------
    A : np.ndarray
        s x s stage coefficients
    U : np.ndarray
        s x r coupling of external stages into internal stages
    B : np.ndarray
        r x s stage contributions to the new external stages
    V : np.ndarray
        r x r propagation of external stages
    W : np.ndarray
        r x (p + 1) weights relating external stages to derivatives,
        columns w_0 .. w_p
    c : np.ndarray
        abscissae, length s
    p : int
        order
    q : int
        stage order, p or p - 1
    """

    A: np.ndarray
    U: np.ndarray
    B: np.ndarray
    V: np.ndarray
    W: np.ndarray
    c: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        for name in ("A", "U", "B", "V", "W", "c"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        self.validate()

    @property
    def s(self) -> int:
        return self.c.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[0]

    @property
    def w0(self) -> np.ndarray:
        return self.W[:, 0]

    def validate(self) -> None:
        if self.c.ndim != 1:
            raise DimensionMismatch("c", "(s,)", self.c.shape)
        s = self.c.shape[0]
        r = self.V.shape[0] if self.V.ndim == 2 else -1
        expected = {
            "A": (s, s),
            "U": (s, r),
            "B": (r, s),
            "V": (r, r),
            "W": (r, self.p + 1),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionMismatch(name, shape, actual)
        if self.q not in (self.p, self.p - 1):
            raise UnsupportedOrder(
                f"Stage order {self.q} not supported for order {self.p}"
            )


@dataclass(frozen=True)
class OrderConditionReport:
    """Max-abs residuals of the stage (k = 1..q) and step (k = 1..p) conditions."""

    stage: Tuple[float, ...]
    external: Tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.stage + self.external, default=0.0)

    def satisfied(self, tol: float) -> bool:
        return self.max_residual <= tol


def check_order_conditions(t: BaseTableau) -> OrderConditionReport:
    """Evaluate the order conditions of a GLM with the W weights it carries.

    Parameters
    ----------
    t : BaseTableau
        tableau to check

    Returns
    -------
    OrderConditionReport
        one residual per condition, max-abs over the vector entries
    """
    t.validate()
    A, U, B, V, W, c = t.A, t.U, t.B, t.V, t.W, t.c
    stage = []
    for k in range(1, t.q + 1):
        residual = _scaled_power(c, k) - A @ _scaled_power(c, k - 1) - U @ W[:, k]
        stage.append(float(np.max(np.abs(residual))))
    external = []
    for k in range(1, t.p + 1):
        lhs = sum(W[:, k - l] / factorial(l) for l in range(k + 1))
        residual = lhs - B @ _scaled_power(c, k - 1) - V @ W[:, k]
        external.append(float(np.max(np.abs(residual))))
    return OrderConditionReport(stage=tuple(stage), external=tuple(external))


def preconsistency_residual(t: BaseTableau) -> Tuple[float, float]:
    w0 = t.w0
    first = float(np.max(np.abs(t.U @ w0 - 1.0)))
    second = float(np.max(np.abs(t.V @ w0 - w0)))
    return first, second


def solve_W(
    A: np.ndarray,
    U: np.ndarray,
    B: np.ndarray,
    V: np.ndarray,
    c: np.ndarray,
    p: int,
    tol: float = WEIGHT_SOLVE_TOL,
) -> np.ndarray:
    """Compute the weights W from the order conditions with w_0 = 1.

    Both condition families are stacked into one linear system in the
    unknown columns w_1 .. w_p and solved in the least-squares sense.

    Parameters
    ----------
    A, U, B, V : np.ndarray
        tableau matrices, p = q = r = s
    c : np.ndarray
        abscissae
    p : int
        order
    tol : float, optional
        largest accepted residual, by default 1e-10

    Returns
    -------
    np.ndarray
        r x (p + 1) weight matrix

    Raises
    ------
    WeightSolveError
        if the system is rank deficient or inconsistent
    """
    A, U, B, V, c = (np.asarray(x, dtype=float) for x in (A, U, B, V, c))
    s = c.shape[0]
    r = V.shape[0]
    if U.shape != (s, r):
        raise DimensionMismatch("U", (s, r), U.shape)
    w0 = np.ones(r)
    n_unknown = p * r

    def columns(k: int) -> slice:
        return slice((k - 1) * r, k * r)

    blocks: List[np.ndarray] = []
    rhs: List[np.ndarray] = []
    for k in range(1, p + 1):
        block = np.zeros((s, n_unknown))
        block[:, columns(k)] = U
        blocks.append(block)
        rhs.append(_scaled_power(c, k) - A @ _scaled_power(c, k - 1))
    for k in range(1, p + 1):
        block = np.zeros((r, n_unknown))
        block[:, columns(k)] = np.eye(r) - V
        for l in range(1, k):
            block[:, columns(k - l)] += np.eye(r) / factorial(l)
        blocks.append(block)
        rhs.append(B @ _scaled_power(c, k - 1) - w0 / factorial(k))

    system = np.vstack(blocks)
    target = np.concatenate(rhs)
    solution, _, rank, _ = np.linalg.lstsq(system, target, rcond=None)
    residual = float(np.max(np.abs(system @ solution - target)))
    if rank < n_unknown:
        raise WeightSolveError(residual, reason=f"rank {rank} < {n_unknown}")
    if residual > tol:
        raise WeightSolveError(residual)
    return np.column_stack([w0] + [solution[columns(k)] for k in range(1, p + 1)])


@dataclass(frozen=True, eq=False)
class AdiMethod:
    """Implicit/explicit pair of DIMSIMs sharing c, U and V."""

    implicit: BaseTableau
    explicit: BaseTableau
    gamma: float
    name: str
    order: int

    def __post_init__(self):
        self._check_structure()

    @property
    def c(self) -> np.ndarray:
        return self.implicit.c

    @property
    def U(self) -> np.ndarray:
        return self.implicit.U

    @property
    def V(self) -> np.ndarray:
        return self.implicit.V

    @property
    def v(self) -> np.ndarray:
        return self.implicit.V[0]

    @property
    def s(self) -> int:
        return self.implicit.s

    def _fail(self, prop: str):
        raise MethodStructureError(self.name, prop)

    def _check_structure(self) -> None:
        I, E = self.implicit, self.explicit
        if not (
            np.array_equal(I.c, E.c)
            and np.array_equal(I.U, E.U)
            and np.array_equal(I.V, E.V)
        ):
            self._fail("implicit and explicit bases must share c, U and V")
        s = I.s
        if not (I.p == I.q == I.r == s == self.order and E.p == E.q == self.order):
            self._fail("p = q = r = s")
        if np.any(np.triu(I.A, 1) != 0) or not np.allclose(
            np.diag(I.A), self.gamma, rtol=0, atol=STRUCTURE_TOL
        ):
            self._fail("implicit A lower triangular with constant diagonal gamma")
        if np.any(np.triu(E.A) != 0):
            self._fail("explicit A strictly lower triangular")
        if not np.array_equal(I.U, np.eye(s)):
            self._fail("U = I")
        if np.any(I.V != I.V[0]) or abs(I.V[0].sum() - 1.0) > STRUCTURE_TOL:
            self._fail("V = 1 v^T with v^T 1 = 1")
        if I.c[-1] != 1.0:
            self._fail("c_s = 1")


@dataclass(frozen=True)
class PartitionLayout:
    """How N partitions are split into implicitly and explicitly treated ones.

    The first ``n_stiff`` partitions each get their own implicit stage
    family; the remaining partition (if any) only ever appears through
    explicit blocks, so its stage family is identical to the last stiff
    one and is never computed.
    """

    n_partitions: int
    n_stiff: int

    def __post_init__(self):
        if self.n_partitions not in (2, 3) or self.n_stiff not in (
            self.n_partitions,
            self.n_partitions - 1,
        ):
            raise UnsupportedLayout(self.n_partitions, self.n_stiff)

    @property
    def stage_row_count(self) -> int:
        return self.n_stiff

    def family(self, mu: int) -> int:
        """Computed stage family that stands in for family ``mu``."""
        return min(mu, self.stage_row_count - 1)

    def is_implicit_block(self, mu: int, sigma: int) -> bool:
        return sigma <= min(mu, self.n_stiff - 1)


@dataclass(frozen=True, eq=False)
class AssembledTableau:
    bigA: np.ndarray
    bigU: np.ndarray
    bigB: np.ndarray
    bigV: np.ndarray
    c_full: np.ndarray
    layout: PartitionLayout
    s: int
    r: int
    order: Tuple[int, ...] = field(default=())

    def block(self, name: str, mu: int, sigma: int) -> np.ndarray:
        """Block (mu, sigma) of bigA or bigB in the unpermuted stage order."""
        if name == "A":
            return self.bigA[mu * self.s : (mu + 1) * self.s, sigma * self.s : (sigma + 1) * self.s]
        if name == "B":
            return self.bigB[mu * self.r : (mu + 1) * self.r, sigma * self.s : (sigma + 1) * self.s]
        raise KeyError(name)


def block_matrices(m: AdiMethod, layout: PartitionLayout, name: str) -> List[List[np.ndarray]]:
    """Per (mu, sigma) base matrix ``name`` (one of A, B, W) for a layout."""
    rows = []
    for mu in range(layout.n_partitions):
        row = []
        for sigma in range(layout.n_partitions):
            base = m.implicit if layout.is_implicit_block(mu, sigma) else m.explicit
            row.append(getattr(base, name))
        rows.append(row)
    return rows


def assemble_adi(m: AdiMethod, layout: PartitionLayout) -> AssembledTableau:
    """Build the N-way block tableau of an ADI method.

    Parameters
    ----------
    m : AdiMethod
        implicit/explicit pair
    layout : PartitionLayout
        number of partitions and how many are stiff

    Returns
    -------
    AssembledTableau
        block tableau with the full N stage families; the elided family of
        a layout with an explicit partition is kept in the matrices and
        skipped by the stepper through ``layout.stage_row_count``
    """
    N = layout.n_partitions
    bigA = np.block(block_matrices(m, layout, "A"))
    bigB = np.block(block_matrices(m, layout, "B"))
    bigU = np.kron(np.eye(N), m.U)
    bigV = np.kron(np.eye(N), m.V)
    c_full = np.tile(m.c, N)
    logging.debug(f"Assembled {m.name} for {N} partitions ({layout.n_stiff} stiff)")
    return AssembledTableau(
        bigA=bigA,
        bigU=bigU,
        bigB=bigB,
        bigV=bigV,
        c_full=c_full,
        layout=layout,
        s=m.s,
        r=m.implicit.r,
    )


def _validate_permutation(P: Sequence[int], size: int) -> np.ndarray:
    order = np.asarray(P)
    if order.ndim != 1 or order.shape[0] != size or sorted(order.tolist()) != list(range(size)):
        raise InvalidPermutation(list(np.ravel(order)), size)
    return order


def permute_tableau(t: AssembledTableau, P: Sequence[int]) -> AssembledTableau:
    """Reorder the internal stages of an assembled tableau.

    ``P`` is 0-based: stage ``k`` of the result is stage ``P[k]`` of ``t``.
    Returns (A[P, P], U[P, :], B[:, P], V, c[P]).
    """
    order = _validate_permutation(P, t.bigA.shape[0])
    return AssembledTableau(
        bigA=t.bigA[np.ix_(order, order)],
        bigU=t.bigU[order, :],
        bigB=t.bigB[:, order],
        bigV=t.bigV,
        c_full=t.c_full[order],
        layout=t.layout,
        s=t.s,
        r=t.r,
        order=tuple(int(k) for k in order),
    )


def inverse_permutation(P: Sequence[int]) -> List[int]:
    order = _validate_permutation(P, len(P))
    return [int(k) for k in np.argsort(order)]


def computation_order(layout: PartitionLayout, s: int) -> List[int]:
    """Stage order Y_1^(1), Y_1^(2), ..., Y_1^(N), Y_2^(1), ... as indices."""
    N = layout.n_partitions
    return [mu * s + i for i in range(s) for mu in range(N)]


def _format_matrix(label: str, values: np.ndarray) -> List[str]:
    matrix = np.atleast_2d(values)
    lines = [label]
    for row in matrix:
        lines.append("  " + "  ".join(f"{float(x):.17g}" for x in row))
    return lines


def format_tableau(m: AdiMethod) -> str:
    """Plain-text dump of every block of an ADI method."""
    lines = [f"# {m.name} (order {m.order}, gamma = {m.gamma:.17g})"]
    lines += _format_matrix("c", m.c)
    lines += _format_matrix("U", m.U)
    lines += _format_matrix("V", m.V)
    for kind, base in (("I", m.implicit), ("E", m.explicit)):
        lines += _format_matrix(f"A^{kind}", base.A)
        lines += _format_matrix(f"B^{kind}", base.B)
        lines += _format_matrix(f"W^{kind}", base.W)
    return "\n".join(lines) + "\n"


def base_tableau(
    A: np.ndarray,
    B: np.ndarray,
    v: np.ndarray,
    c: np.ndarray,
    order: int,
    W: Optional[np.ndarray] = None,
) -> BaseTableau:
    """DIMSIM base tableau with U = I and V = 1 v^T; W solved for if absent."""
    s = len(c)
    U = np.eye(s)
    V = np.outer(np.ones(s), v)
    if W is None:
        W = solve_W(A, U, B, V, c, order)
    return BaseTableau(A=A, U=U, B=B, V=V, W=W, c=c, p=order, q=order)
