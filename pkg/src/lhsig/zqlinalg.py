"""Exact integer, rational and mod-q linear algebra.

Every lattice basis in this package is a square matrix whose *columns* are the
basis vectors.  Integer matrices that can carry unbounded entries are stored as
numpy arrays with ``dtype=object`` holding Python ints; residues modulo a small
prime live in :class:`ZqMatrix` with an int64 payload.

Gram-Schmidt data is computed exactly.  Each orthogonalised column is kept as
an integer numerator vector over a common integer denominator, so squared
norms come out as :class:`fractions.Fraction` values and every norm inequality
can be decided without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class LinalgError(ValueError):
    pass


class RankError(LinalgError):
    """Columns are linearly dependent; ``column`` is the first offending index."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column} is linearly dependent on earlier columns")


class MembershipError(LinalgError):
    pass


class NoSolutionError(LinalgError):
    pass


class ParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# conversions

def int_matrix(data) -> np.ndarray:
    """Return ``data`` as a 2-d object array of Python ints."""
    arr = np.asarray(data, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise LinalgError(f"expected a matrix, got array of shape {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, x in np.ndenumerate(arr):
        if isinstance(x, (float, np.floating)) or isinstance(x, Fraction):
            if x != int(x):
                raise LinalgError(f"non-integer entry {x!r}")
        out[idx] = int(x)
    return out


def identity(n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    return out * 1


def columns(M) -> list[list[int]]:
    M = np.asarray(M, dtype=object)
    return [[int(x) for x in M[:, j]] for j in range(M.shape[1])]


def from_columns(cols: Sequence[Sequence[int]], rows: int | None = None) -> np.ndarray:
    if not cols:
        if rows is None:
            raise LinalgError("cannot infer shape of an empty column list")
        return np.zeros((rows, 0), dtype=object)
    out = np.empty((len(cols[0]), len(cols)), dtype=object)
    for j, c in enumerate(cols):
        for i, x in enumerate(c):
            out[i, j] = int(x)
    return out


def _rows(M) -> list[list[int]]:
    M = np.asarray(M, dtype=object)
    return [[int(x) for x in row] for row in M]


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, u, v)`` with ``u*a + v*b == g == gcd(a, b) >= 0``."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        return -old_r, -old_s, -old_t
    return old_r, old_s, old_t


# ---------------------------------------------------------------------------
# residues

def centered(x, q: int):
    """Map residues into ``[-(q-1)/2, (q-1)/2]`` (q odd)."""
    if isinstance(x, (int, np.integer)):
        r = int(x) % q
        return r - q if r > q // 2 else r
    arr = np.asarray(x)
    r = arr % q
    return np.where(r > q // 2, r - q, r)


def _mod_dtype(q: int, inner: int):
    # int64 products stay exact while inner * (q-1)^2 < 2^63
    return np.int64 if inner * (q - 1) ** 2 < 2**62 else object


def matmul_mod(A, B, q: int) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    inner = A.shape[-1]
    dt = _mod_dtype(q, inner)
    if dt is np.int64:
        return (np.asarray(A, dtype=np.int64) % q) @ (np.asarray(B, dtype=np.int64) % q) % q
    A = np.asarray(A, dtype=object) % q
    B = np.asarray(B, dtype=object) % q
    return A.dot(B) % q


@dataclass(frozen=True, eq=False)
class ZqMatrix:
    """Matrix over Z_q with entries stored as least non-negative residues."""

    entries: np.ndarray
    q: int

    def __post_init__(self):
        if self.q <= 2:
            raise ParameterError(f"modulus must exceed 2, got {self.q}")
        arr = np.asarray(self.entries)
        if arr.ndim != 2:
            raise LinalgError("ZqMatrix needs a 2-d array")
        dt = _mod_dtype(self.q, max(arr.shape))
        object.__setattr__(self, "entries", np.asarray(arr % self.q, dtype=dt))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self) -> "ZqMatrix":
        return ZqMatrix(self.entries.T.copy(), self.q)

    def centered(self) -> np.ndarray:
        return centered(self.entries, self.q)

    def __matmul__(self, other):
        if isinstance(other, ZqMatrix):
            if other.q != self.q:
                raise LinalgError("moduli differ")
            return ZqMatrix(matmul_mod(self.entries, other.entries, self.q), self.q)
        other = np.asarray(other)
        prod = matmul_mod(self.entries, other, self.q)
        return prod

    def __eq__(self, other):
        return (
            isinstance(other, ZqMatrix)
            and self.q == other.q
            and self.shape == other.shape
            and bool(np.all(self.entries == other.entries))
        )

    def __hash__(self):
        return hash((self.q, self.shape, self.entries.tobytes()))

    def rank(self) -> int:
        return len(rref_mod_q(self.entries, self.q)[1])


# ---------------------------------------------------------------------------
# determinants and ranks

def det(M) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    A = _rows(M)
    n = len(A)
    if any(len(r) != n for r in A):
        raise LinalgError("determinant of a non-square matrix")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for r in range(k + 1, n):
                if A[r][k]:
                    A[k], A[r] = A[r], A[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = A[k][k]
        for i in range(k + 1, n):
            aik = A[i][k]
            row_i, row_k = A[i], A[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
        prev = akk
    return sign * A[n - 1][n - 1]


def pivot_columns(M) -> list[int]:
    """Indices of a maximal set of linearly independent columns (greedy, left to right)."""
    A = _rows(M)
    if not A:
        return []
    nrows, ncols = len(A), len(A[0])
    pivots = []
    r = 0
    prev = 1
    for c in range(ncols):
        if r >= nrows:
            break
        p = next((i for i in range(r, nrows) if A[i][c]), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        arc = A[r][c]
        for i in range(r + 1, nrows):
            aic = A[i][c]
            row_i, row_r = A[i], A[r]
            for j in range(c + 1, ncols):
                row_i[j] = (row_i[j] * arc - aic * row_r[j]) // prev
            row_i[c] = 0
        prev = arc
        pivots.append(c)
        r += 1
    return pivots


# ---------------------------------------------------------------------------
# Gram-Schmidt

def _gso(cols: Sequence[Sequence[int]]):
    """Exact GSO.  Returns ``(nums, dens, dirs, dir_sq)``.

    Column ``i`` of the orthogonalisation is ``nums[i] / dens[i]``; ``dirs[i]``
    is the primitive integer vector parallel to it and ``dir_sq[i]`` its squared
    length.
    """
    nums, dens, dirs, dir_sq = [], [], [], []
    for i, b in enumerate(cols):
        num = [int(x) for x in b]
        den = 1
        for w, nn in zip(dirs, dir_sq):
            a = _dot(b, w)
            if a == 0:
                continue
            ad = a * den
            num = [x * nn - ad * y for x, y in zip(num, w)]
            den *= nn
            g = math.gcd(math.gcd(*num), den)
            if g > 1:
                num = [x // g for x in num]
                den //= g
        g = math.gcd(*num)
        if g == 0:
            raise RankError(i)
        w = [x // g for x in num]
        nums.append(num)
        dens.append(den)
        dirs.append(w)
        dir_sq.append(_dot(w, w))
    return nums, dens, dirs, dir_sq


def gram_schmidt(B) -> np.ndarray:
    """Gram-Schmidt orthogonalisation of the columns of ``B`` as exact rationals."""
    B = np.asarray(B, dtype=object)
    nums, dens, _, _ = _gso(columns(B))
    out = np.empty(B.shape, dtype=object)
    for j, (num, den) in enumerate(zip(nums, dens)):
        for i, x in enumerate(num):
            out[i, j] = Fraction(x, den)
    return out


def gs_sqnorms(B) -> list[Fraction]:
    nums, dens, _, _ = _gso(columns(B))
    return [Fraction(_dot(num, num), den * den) for num, den in zip(nums, dens)]


def gs_norm_sq(B) -> Fraction:
    return max(gs_sqnorms(B), default=Fraction(0))


def gs_norm(B) -> float:
    """Largest Gram-Schmidt column norm.

    The squared value is exact; the square root is the correctly rounded double
    of the exact rational's root (``math.sqrt`` of the nearest double).
    """
    return math.sqrt(gs_norm_sq(B))


def matrix_norm_sq(B) -> int:
    return max((_dot(c, c) for c in columns(B)), default=0)


def matrix_norm(B) -> float:
    """Largest column l2 norm."""
    return math.sqrt(matrix_norm_sq(B))


# ---------------------------------------------------------------------------
# Kronecker products and Hadamard matrices

def kronecker(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    m, n = A.shape
    p, r = B.shape
    out = np.empty((m * p, n * r), dtype=object)
    for i in range(m):
        for j in range(n):
            out[i * p:(i + 1) * p, j * r:(j + 1) * r] = A[i, j] * B
    return out


_H2 = int_matrix([[1, 1], [1, -1]])
_H4 = int_matrix([[1, 1, 1, 1],
                  [1, 1, -1, -1],
                  [1, -1, 1, -1],
                  [1, -1, -1, 1]])


def _is_power_of(n: int, base: int) -> bool:
    if n < 1:
        return False
    while n % base == 0:
        n //= base
    return n == 1


def _hadamard_any(n: int) -> np.ndarray:
    if n == 1:
        return int_matrix([[1]])
    if n == 2:
        return _H2.copy()
    if n == 4:
        return _H4.copy()
    if not _is_power_of(n, 2):
        raise ParameterError(f"no Kronecker-built Hadamard matrix of order {n}")
    if _is_power_of(n, 4):
        return kronecker(_H4, _hadamard_any(n // 4))
    return kronecker(_H2, _hadamard_any(n // 2))


def hadamard(n: int, *, internal: bool = False) -> np.ndarray:
    """Deterministic Hadamard matrix of order ``n`` built by Kronecker products.

    Order 4 is the base block; ``4^l`` is the ``l``-fold Kronecker power of it.
    With ``internal=True`` any power of two is accepted (order ``2*4^l`` is
    ``H_2 (x) H_{4^l}``).
    """
    if internal:
        if not _is_power_of(n, 2):
            raise ParameterError(f"Hadamard order must be a power of 2, got {n}")
    elif n < 4 or not _is_power_of(n, 4):
        raise ParameterError(f"Hadamard order must be a power of 4 (>= 4), got {n}")
    return _hadamard_any(n)


def is_hadamard(H) -> bool:
    H = np.asarray(H, dtype=object)
    n = H.shape[0]
    if H.shape != (n, n):
        return False
    if not all(x in (1, -1) for x in H.flat):
        return False
    return bool(np.all(H.dot(H.T) == n * identity(n)))


# ---------------------------------------------------------------------------
# linear algebra modulo q

def rref_mod_q(B, q: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form over Z_q (q prime).  Returns ``(R, pivot_columns)``."""
    A = [[int(x) % q for x in row] for row in np.asarray(B, dtype=object)]
    if not A:
        return A, []
    nrows, ncols = len(A), len(A[0])
    pivots = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        p = next((i for i in range(r, nrows) if A[i][c]), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = pow(A[r][c], -1, q)
        A[r] = [x * inv % q for x in A[r]]
        row_r = A[r]
        for i in range(nrows):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [(x - f * y) % q for x, y in zip(A[i], row_r)]
        pivots.append(c)
        r += 1
    return A, pivots


def rank_mod_q(B, q: int) -> int:
    return len(rref_mod_q(B, q)[1])


def solve_mod_q(B, alpha, q: int) -> np.ndarray:
    """Particular solution ``t`` of ``B t = alpha (mod q)`` with entries in ``[0, q)``."""
    B = np.asarray(B.entries if isinstance(B, ZqMatrix) else B, dtype=object)
    alpha = np.asarray(alpha, dtype=object).reshape(-1)
    h, n = B.shape
    if alpha.shape[0] != h:
        raise LinalgError(f"right-hand side has length {alpha.shape[0]}, expected {h}")
    aug = np.concatenate([B, alpha.reshape(-1, 1)], axis=1)
    R, pivots = rref_mod_q(aug, q)
    if pivots and pivots[-1] == n:
        raise NoSolutionError("right-hand side is not in the column span mod q")
    t = np.zeros(n, dtype=object)
    for r, c in enumerate(pivots):
        t[c] = R[r][n]
    return t


# ---------------------------------------------------------------------------
# Hermite normal form (columns generate the lattice; result is lower triangular)

def _hnf_modular(A: list[list[int]], D: int) -> list[list[int]]:
    """HNF modulo a multiple ``D`` of the lattice determinant (Cohen, Alg. 2.4.8).

    ``A`` is row-major with full row rank ``m``.  Returns the ``m x m`` result
    row-major.
    """
    m = len(A)
    ncols = len(A[0])
    A = [[x % D for x in row] for row in A]
    W = [[0] * m for _ in range(m)]
    R = D
    for i in range(m):
        k = i
        for j in range(k + 1, ncols):
            aij = A[i][j]
            if aij == 0:
                continue
            aik = A[i][k]
            g, u, v = xgcd(aik, aij)
            a_g, b_g = aik // g, aij // g
            for r in range(i, m):
                x, y = A[r][k], A[r][j]
                A[r][k] = (u * x + v * y) % R
                A[r][j] = (a_g * y - b_g * x) % R
        g, u, _ = xgcd(A[i][k], R)
        for r in range(i, m):
            W[r][i] = u * A[r][k] % R
        if W[i][i] == 0:
            W[i][i] = R
        wii = W[i][i]
        for j in range(i):
            f = W[i][j] // wii
            if f:
                for r in range(i, m):
                    W[r][j] -= f * W[r][i]
        R //= g
    return W


def _hnf_classic(A: list[list[int]]) -> list[list[int]]:
    """Plain extended-gcd column reduction.  Works for any rank; returns
    ``m x rank`` row-major."""
    m = len(A)
    ncols = len(A[0]) if A else 0
    A = [list(row) for row in A]
    k = 0
    for i in range(m):
        if k >= ncols:
            break
        for j in range(k + 1, ncols):
            aij = A[i][j]
            if aij == 0:
                continue
            aik = A[i][k]
            g, u, v = xgcd(aik, aij)
            a_g, b_g = aik // g, aij // g
            for r in range(m):
                x, y = A[r][k], A[r][j]
                A[r][k] = u * x + v * y
                A[r][j] = a_g * y - b_g * x
        piv = A[i][k]
        if piv == 0:
            continue
        if piv < 0:
            for r in range(m):
                A[r][k] = -A[r][k]
            piv = -piv
        for j in range(k):
            f = A[i][j] // piv
            if f:
                for r in range(m):
                    A[r][j] -= f * A[r][k]
        k += 1
    return [row[:k] for row in A]


def hnf(M, det_multiple: int | None = None) -> np.ndarray:
    """Column-style Hermite normal form of the lattice generated by ``M``.

    The result is lower triangular with positive diagonal, and every entry left
    of the diagonal lies in ``[0, diagonal)`` of its row.  Full-dimensional
    lattices are reduced modulo a multiple of their determinant; lower-rank
    lattices fall back to plain integer elimination and return ``n x rank``.
    """
    A = _rows(M)
    if not A or not A[0] or all(x == 0 for row in A for x in row):
        raise LinalgError("the zero lattice has no Hermite normal form")
    m = len(A)
    if det_multiple is None:
        piv = pivot_columns(M)
        if len(piv) == m:
            sub = [[row[c] for c in piv] for row in A]
            det_multiple = abs(det(sub))
    if det_multiple:
        return int_matrix(_hnf_modular(A, det_multiple))
    return int_matrix(_hnf_classic(A))


def lattice_coordinates(B, S) -> np.ndarray:
    """Integer matrix ``X`` with ``B X = S`` for a square full-rank basis ``B``.

    Raises :class:`MembershipError` if some column of ``S`` is not in the
    lattice spanned by ``B``.
    """
    Bfr = [[Fraction(x) for x in row] for row in _rows(B)]
    return from_columns([_solve_rational(Bfr, col) for col in columns(S)])


def _triangular_solve(H: list[list[int]], cols: Iterable[Sequence[int]]) -> list[list[int]]:
    n = len(H)
    out = []
    for idx, s in enumerate(cols):
        x = [0] * n
        for i in range(n):
            acc = int(s[i]) - sum(H[i][j] * x[j] for j in range(i))
            qt, rem = divmod(acc, H[i][i])
            if rem:
                raise MembershipError(f"column {idx} is not in the lattice")
            x[i] = qt
        out.append(x)
    return out


def _solve_rational(M: list[list[Fraction]], b: Sequence[int]) -> list[int]:
    n = len(M)
    A = [row[:] + [Fraction(b[i])] for i, row in enumerate(M)]
    for c in range(n):
        p = next(i for i in range(c, n) if A[i][c] != 0)
        A[c], A[p] = A[p], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for i in range(n):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[c])]
    sol = [A[i][n] for i in range(n)]
    if any(x.denominator != 1 for x in sol):
        raise MembershipError("non-integral lattice coordinates")
    return [int(x) for x in sol]


def kernel_basis_mod_q(B, q: int) -> "LatticeBasis":
    """Basis (in Hermite normal form) of ``{x in Z^n : B x = 0 mod q}``."""
    B = np.asarray(B.entries if isinstance(B, ZqMatrix) else B, dtype=object)
    n = B.shape[1]
    R, pivots = rref_mod_q(B, q)
    if not pivots:
        return LatticeBasis(identity(n))
    pivset = set(pivots)
    gens = []
    for j in range(n):
        v = [0] * n
        if j in pivset:
            v[j] = q
        else:
            v[j] = 1
            for r, c in enumerate(pivots):
                v[c] = (-R[r][j]) % q
        gens.append(v)
    H = hnf(from_columns(gens), det_multiple=q ** len(pivots))
    return LatticeBasis(H)


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Square full-rank integer basis (columns) with lazily cached GSO data."""

    basis: np.ndarray

    def __post_init__(self):
        B = int_matrix(self.basis)
        n, m = B.shape
        if n != m:
            raise LinalgError(f"lattice basis must be square, got {n}x{m}")
        object.__setattr__(self, "basis", B)
        self._gso_data  # raises RankError on dependent columns

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def columns(self) -> list[list[int]]:
        return columns(self.basis)

    @cached_property
    def _gso_data(self):
        return _gso(self.columns)

    @cached_property
    def gso(self) -> np.ndarray:
        nums, dens, _, _ = self._gso_data
        out = np.empty(self.basis.shape, dtype=object)
        for j, (num, den) in enumerate(zip(nums, dens)):
            for i, x in enumerate(num):
                out[i, j] = Fraction(x, den)
        return out

    @cached_property
    def gs_sqnorms(self) -> list[Fraction]:
        nums, dens, _, _ = self._gso_data
        return [Fraction(_dot(num, num), den * den) for num, den in zip(nums, dens)]

    @cached_property
    def gs_norm_sq(self) -> Fraction:
        return max(self.gs_sqnorms)

    @property
    def gs_norm(self) -> float:
        return math.sqrt(self.gs_norm_sq)

    @cached_property
    def gso_float(self) -> np.ndarray:
        nums, dens, _, _ = self._gso_data
        out = np.empty(self.basis.shape, dtype=np.float64)
        for j, (num, den) in enumerate(zip(nums, dens)):
            out[:, j] = [x / den for x in num]
        return out

    @cached_property
    def gs_sqnorms_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.gs_sqnorms])

    @cached_property
    def det(self) -> int:
        return det(self.basis)

    @cached_property
    def hnf(self) -> np.ndarray:
        return hnf(self.basis, det_multiple=abs(self.det))

    def contains(self, v) -> bool:
        try:
            _triangular_solve(_rows(self.hnf), [list(np.asarray(v, dtype=object).reshape(-1))])
        except MembershipError:
            return False
        return True

    def same_lattice(self, other: "LatticeBasis") -> bool:
        return bool(np.array_equal(self.hnf, other.hnf))

    def scaled(self, factor: int) -> "LatticeBasis":
        return LatticeBasis(self.basis * int(factor))

    @cached_property
    def _int64(self) -> np.ndarray:
        if any(abs(x) >= 2**40 for x in self.basis.flat):
            raise LinalgError("basis entries too large for the float sampler")
        return np.asarray(self.basis, dtype=np.int64)

    def as_int64(self) -> np.ndarray:
        return self._int64
