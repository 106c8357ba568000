import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import DimensionMismatch, EigenvalueConvergenceError, SingularPivotError

MAX_EIGEN_DIM = 64
QR_ITERATIONS_PER_EIGENVALUE = 100
# gttrs needs room for the second superdiagonal
LAPACK_MIN_ROWS = 3


def _column(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (ndim - 1))


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Tridiagonal matrix stored by its three diagonals.

    Parameters
    ----------
    sub : np.ndarray
        subdiagonal, length n - 1
    diag : np.ndarray
        main diagonal, length n
    sup : np.ndarray
        superdiagonal, length n - 1
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = np.shape(self.diag)[0] if np.ndim(self.diag) == 1 else None
        if n is None or n < 1:
            raise DimensionMismatch("diag", "(n,) with n >= 1", np.shape(self.diag))
        for name in ("sub", "sup"):
            value = getattr(self, name)
            if np.shape(value) != (n - 1,):
                raise DimensionMismatch(name, (n - 1,), np.shape(value))
        object.__setattr__(self, "sub", np.asarray(self.sub))
        object.__setattr__(self, "diag", np.asarray(self.diag))
        object.__setattr__(self, "sup", np.asarray(self.sup))

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    @classmethod
    def second_difference(cls, n: int, spacing: float) -> "Tridiagonal":
        """Standard three point second difference (1/spacing**2) * tridiag(1, -2, 1)."""
        scale = 1.0 / spacing**2
        return cls(
            sub=np.full(n - 1, scale),
            diag=np.full(n, -2.0 * scale),
            sup=np.full(n - 1, scale),
        )

    @classmethod
    def zeros(cls, n: int) -> "Tridiagonal":
        return cls(sub=np.zeros(n - 1), diag=np.zeros(n), sup=np.zeros(n - 1))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply the matrix along the first axis of ``x``."""
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise DimensionMismatch("x", self.n, x.shape[0])
        out = _column(self.diag, x.ndim) * x
        out[1:] += _column(self.sub, x.ndim) * x[:-1]
        out[:-1] += _column(self.sup, x.ndim) * x[1:]
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.diag(self.diag).astype(np.result_type(self.sub, self.diag, self.sup))
        if self.n > 1:
            dense += np.diag(self.sub, -1) + np.diag(self.sup, 1)
        return dense


@dataclass(frozen=True, eq=False)
class FactoredTridiagonal:
    """LU factors with partial pivoting of ``I - h*gamma*T``.

    The layout follows the LAPACK ``gttrf`` convention: ``dl`` holds the
    multipliers, ``d``/``du``/``du2`` the three nonzero diagonals of U and
    ``ipiv[i]`` is ``i`` or ``i + 1`` depending on whether rows were swapped.
    """

    dl: np.ndarray
    d: np.ndarray
    du: np.ndarray
    du2: np.ndarray
    ipiv: np.ndarray
    h: float
    gamma: float

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(I - h*gamma*T) x = b`` for every column of ``b``."""
        x = np.array(b, dtype=np.result_type(b, self.d), copy=True)
        n = self.n
        if x.shape[0] != n:
            raise DimensionMismatch("rhs", n, x.shape[0])
        if n >= LAPACK_MIN_ROWS:
            return self._lapack_solve(x)
        return self._sweep(x)

    def _lapack_solve(self, x: np.ndarray) -> np.ndarray:
        gttrs = get_lapack_funcs("gttrs", (self.d, x))
        dtype = gttrs.dtype
        solution, info = gttrs(
            self.dl.astype(dtype),
            self.d.astype(dtype),
            self.du.astype(dtype),
            self.du2.astype(dtype),
            (self.ipiv + 1).astype(np.int32),
            x.reshape(self.n, -1).astype(dtype),
        )
        if info != 0:
            raise ValueError(f"gttrs rejected argument {-info}")
        return solution.reshape(x.shape)

    def _sweep(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        dl, d, du, du2 = self.dl, self.d, self.du, self.du2
        for i in range(n - 1):
            if self.ipiv[i] == i:
                x[i + 1] -= dl[i] * x[i]
            else:
                temp = x[i].copy()
                x[i] = x[i + 1]
                x[i + 1] = temp - dl[i] * x[i]

        x[n - 1] /= d[n - 1]
        if n > 1:
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
        for i in range(n - 3, -1, -1):
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
        return x


def factor_shifted(T: Tridiagonal, h: float, gamma: float) -> FactoredTridiagonal:
    """Factorize ``I - h*gamma*T`` once so it can be reused for every stage.

    Parameters
    ----------
    T : Tridiagonal
        one dimensional directional operator
    h : float
        step size
    gamma : float
        diagonal coefficient of the implicit stage matrix

    Returns
    -------
    FactoredTridiagonal

    Raises
    ------
    SingularPivotError
        if an exactly zero pivot remains after pivoting
    """
    shift = h * gamma
    dtype = np.result_type(T.sub, T.diag, T.sup, float)
    d = (1.0 - shift * T.diag).astype(dtype)
    dl = (-shift * T.sub).astype(dtype)
    du = (-shift * T.sup).astype(dtype)
    n = d.shape[0]
    du2 = np.zeros(max(n - 2, 0), dtype=dtype)
    ipiv = np.arange(n)

    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] != 0:
                fact = dl[i] / d[i]
                dl[i] = fact
                d[i + 1] -= fact * du[i]
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            ipiv[i] = i + 1

    zero_pivots = np.flatnonzero(d == 0)
    if zero_pivots.size:
        raise SingularPivotError(int(zero_pivots[0]))
    return FactoredTridiagonal(dl=dl, d=d, du=du, du2=du2, ipiv=ipiv, h=h, gamma=gamma)


@dataclass(frozen=True)
class TensorGrid:
    """Tensor-product grid of interior unknowns, ordered with x fastest."""

    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def to_field(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.size != self.size:
            raise DimensionMismatch("state", (self.size,), y.shape)
        return y.reshape(self.shape, order="F")

    def to_vector(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field).ravel(order="F")


def _lines(grid: TensorGrid, axis: int, y: np.ndarray, n: int):
    if not 0 <= axis < grid.ndim:
        raise DimensionMismatch("axis", f"0..{grid.ndim - 1}", axis)
    field = grid.to_field(y)
    if field.shape[axis] != n:
        raise DimensionMismatch("factorization", field.shape[axis], n)
    lines = np.moveaxis(field, axis, 0)
    return lines.reshape(n, -1), lines.shape


def solve_lines(
    grid: TensorGrid, axis: int, F: FactoredTridiagonal, rhs: np.ndarray
) -> np.ndarray:
    """Apply the 1D factorization along every grid line of ``axis``.

    Equivalent to solving with ``I - h*gamma*(I x ... x T x ... x I)``.
    """
    lines, shape = _lines(grid, axis, rhs, F.n)
    solved = F.solve(lines).reshape(shape)
    return grid.to_vector(np.moveaxis(solved, 0, axis))


def apply_lines(
    grid: TensorGrid, axis: int, T: Tridiagonal, y: np.ndarray
) -> np.ndarray:
    lines, shape = _lines(grid, axis, y, T.n)
    result = T.matvec(lines).reshape(shape)
    return grid.to_vector(np.moveaxis(result, 0, axis))


def hessenberg(M: np.ndarray) -> np.ndarray:
    """Reduce ``M`` to upper Hessenberg form with Householder reflections."""
    H = np.array(M, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _eig2(block: np.ndarray) -> Tuple[complex, complex]:
    a, b, c, d = block[0, 0], block[0, 1], block[1, 0], block[1, 1]
    half_trace = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    big = half_trace + disc
    if abs(half_trace - disc) > abs(big):
        big = half_trace - disc
    if big == 0:
        return complex(0.0), complex(0.0)
    small = (a * d - b * c) / big
    return complex(big), complex(small)


def _wilkinson_shift(block: np.ndarray) -> complex:
    first, second = _eig2(block)
    corner = block[1, 1]
    return first if abs(first - corner) < abs(second - corner) else second


def _qr_sweep(H: np.ndarray, lo: int, hi: int, shift: complex) -> None:
    B = H[lo : hi + 1, lo : hi + 1]
    m = B.shape[0]
    idx = np.arange(m)
    B[idx, idx] -= shift
    rotations = []
    for k in range(m - 1):
        x, y = B[k, k], B[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0 + 0.0j, 0.0j
        else:
            c, s = x / r, y / r
        G = np.array([[np.conj(c), np.conj(s)], [-s, c]])
        B[k : k + 2, k:] = G @ B[k : k + 2, k:]
        rotations.append(G)
    for k, G in enumerate(rotations):
        B[: k + 2, k : k + 2] = B[: k + 2, k : k + 2] @ G.conj().T
    B[idx, idx] += shift


def eigenvalues(M: np.ndarray) -> np.ndarray:
    """All eigenvalues of a small dense matrix.

    Hessenberg reduction followed by single-shift complex QR with Wilkinson
    shifts and deflation on negligible subdiagonal entries.

    Parameters
    ----------
    M : np.ndarray
        square matrix, at most 64 x 64

    Returns
    -------
    np.ndarray
        complex eigenvalues, no particular order

    Raises
    ------
    EigenvalueConvergenceError
        if an eigenvalue fails to deflate within the iteration cap
    """
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("M", "square matrix", A.shape)
    n = A.shape[0]
    if n > MAX_EIGEN_DIM:
        raise DimensionMismatch("M", f"at most {MAX_EIGEN_DIM} rows", A.shape)
    values = np.empty(n, dtype=complex)
    if n == 0:
        return values

    H = hessenberg(A)
    eps = np.finfo(float).eps
    scale = max(float(np.abs(H).max()), np.finfo(float).tiny)
    hi = n - 1
    iterations = 0
    total = 0
    while hi >= 0:
        lo = hi
        while lo > 0:
            local = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if local == 0.0:
                local = scale
            if abs(H[lo, lo - 1]) <= eps * local:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1

        if lo == hi:
            values[hi] = H[hi, hi]
            hi -= 1
            iterations = 0
            continue
        if lo == hi - 1:
            values[hi - 1], values[hi] = _eig2(H[hi - 1 : hi + 1, hi - 1 : hi + 1])
            hi -= 2
            iterations = 0
            continue

        if iterations >= QR_ITERATIONS_PER_EIGENVALUE:
            raise EigenvalueConvergenceError(A, total)
        iterations += 1
        total += 1
        if iterations % 11 == 0:
            # exceptional shift to break cycles
            shift = H[hi, hi] + abs(H[hi, hi - 1])
        else:
            shift = _wilkinson_shift(H[hi - 1 : hi + 1, hi - 1 : hi + 1])
        _qr_sweep(H, lo, hi, shift)

    logging.debug(f"Eigenvalues of {n}x{n} matrix after {total} QR sweeps")
    return values


def spectral_radius(M: np.ndarray) -> float:
    values = eigenvalues(M)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def characteristic_polynomial(M: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest degree first.

    Faddeev-LeVerrier recursion; only meant for the small matrices of
    the stability analysis where it avoids going through eigenvalues.
    """
    A = np.asarray(M)
    n = A.shape[0]
    identity = np.eye(n, dtype=A.dtype)
    coefficients = [np.ones((), dtype=np.result_type(A, float))[()]]
    previous = np.zeros_like(identity)
    for k in range(1, n + 1):
        current = A @ previous + coefficients[-1] * identity
        coefficients.append(-np.trace(A @ current) / k)
        previous = current
    return np.array(coefficients)


def matches_as_multiset(
    first: Sequence[complex], second: Sequence[complex], tol: float
) -> bool:
    """Every value has a partner within ``tol`` in the other collection."""
    a = np.asarray(first, dtype=complex)
    b = np.asarray(second, dtype=complex)
    if a.shape != b.shape:
        return False
    distance = np.abs(a[:, None] - b[None, :])
    return bool(np.all(distance.min(axis=1) <= tol) and np.all(distance.min(axis=0) <= tol))
