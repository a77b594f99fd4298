"""Trapdoor generation, full-rank-set to basis conversion, orthogonal tag
matrices and basis delegation to tagged q-ary lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .sampler import RandomStream
from .zqlinalg import (
    LatticeBasis,
    LinalgError,
    ParameterError,
    RankError,
    ZqMatrix,
    _gso,
    _hnf_modular,
    _triangular_solve,
    centered,
    columns,
    det,
    from_columns,
    hnf,
    is_hadamard,
    kernel_basis_mod_q,
    rank_mod_q,
)


class GenerationError(RuntimeError):
    pass


class DelegationError(RuntimeError):
    pass


class ContractError(AssertionError):
    """A norm inequality promised by :func:`to_basis` failed."""


# Running tally of to_basis calls and contract checks, read by the acceptance suite.
TO_BASIS_STATS = {"calls": 0, "gs_ok": 0, "norm_ok": 0}


@dataclass(frozen=True, eq=False)
class TrapdoorPair:
    A: ZqMatrix
    T_A: LatticeBasis
    gadget_base: int

    @property
    def q(self) -> int:
        return self.A.q


@dataclass(frozen=True, eq=False)
class TagContext:
    tau: np.ndarray
    H: ZqMatrix
    B: ZqMatrix
    t_unit: int

    @property
    def tag_string(self) -> str:
        return tag_to_str(self.tau)


def tag_to_str(tau) -> str:
    return "".join("1" if int(b) else "0" for b in np.asarray(tau).reshape(-1))


def tag_from_str(text: str) -> np.ndarray:
    text = text.strip()
    if not text or any(ch not in "01" for ch in text):
        raise ValueError(f"tag must be a non-empty 0/1 string, got {text!r}")
    return np.array([int(ch) for ch in text], dtype=np.int8)


# ---------------------------------------------------------------------------
# full-rank set -> basis

def _dot(u, v) -> int:
    return sum(a * b for a, b in zip(u, v))


def _size_reduce(vec, basis_cols, dirs, ips):
    """Subtract integer multiples of earlier columns so each GS coefficient lies in [-1/2, 1/2]."""
    v = list(vec)
    for j in range(len(basis_cols) - 1, -1, -1):
        a = _dot(v, dirs[j])
        b = ips[j]
        mu = (2 * a + b) // (2 * b)
        if mu:
            tj = basis_cols[j]
            v = [x - mu * y for x, y in zip(v, tj)]
    return v


def to_basis(S, B0: LatticeBasis, *, check: bool = True) -> LatticeBasis:
    """Turn a full-rank set ``S`` of lattice vectors into a basis of ``L(B0)``.

    The result ``T`` satisfies ``gs_norm(T) <= gs_norm(S)`` and
    ``matrix_norm(T) <= matrix_norm(S) * max(1, sqrt(n) / 2)``; both are verified in
    exact arithmetic unless ``check=False``.

    Method: write ``S = H W`` with ``H = hnf(B0)`` and factor ``W = V R`` with
    ``V`` unimodular and ``R`` upper triangular (the transpose of the Hermite
    form of ``W^T``, computed modulo ``det W``).  Then ``T = S R^-1 = H V`` is a
    basis of the lattice with ``span(t_1..t_i) = span(s_1..s_i)``, so
    ``|t~_i| = |s~_i| / |R_ii|``.  Each column is finally size-reduced, or
    swapped for the matching column of ``S`` when ``|R_ii| = 1`` and that is
    shorter.
    """
    S_cols = columns(S)
    n = B0.dim
    if len(S_cols) != n or any(len(c) != n for c in S_cols):
        raise LinalgError(f"S must be {n}x{n}")
    s_nums, s_dens, _, _ = _gso(S_cols)  # RankError when S is not full rank
    Hrows = [[int(x) for x in row] for row in B0.hnf]
    W_cols = _triangular_solve(Hrows, S_cols)  # MembershipError when S is outside L(B0)
    index = abs(det(from_columns(S_cols))) // abs(B0.det)
    # rows of W^T are the columns of W
    L = _hnf_modular([list(c) for c in W_cols], index)
    R = [[L[j][i] for j in range(n)] for i in range(n)]
    T_cols = []
    for j in range(n):
        acc = list(S_cols[j])
        for i in range(j):
            r = R[i][j]
            if r:
                ti = T_cols[i]
                acc = [a - r * b for a, b in zip(acc, ti)]
        d = R[j][j]
        if any(a % d for a in acc):
            raise LinalgError("inexact division while solving T R = S")
        T_cols.append([a // d for a in acc])
    _, _, dirs, _ = _gso(T_cols)
    ips = [_dot(T_cols[j], dirs[j]) for j in range(n)]
    out = []
    for i in range(n):
        cands = [_size_reduce(T_cols[i], out, dirs, ips)]
        if R[i][i] == 1:
            cands.append(S_cols[i])
            cands.append(_size_reduce(S_cols[i], out, dirs, ips))
        best = min(cands, key=lambda v: (_dot(v, v), v))
        out.append(best)
        ips[i] = _dot(best, dirs[i])
    T = LatticeBasis(from_columns(out))
    if check:
        _check_contract(T, S_cols, s_nums, s_dens, B0)
    return T


def _check_contract(T: LatticeBasis, S_cols, s_nums, s_dens, B0: LatticeBasis) -> None:
    n = T.dim
    TO_BASIS_STATS["calls"] += 1
    gs_S = max(Fraction(_dot(v, v), d * d) for v, d in zip(s_nums, s_dens))
    norm_S = max(_dot(c, c) for c in S_cols)
    norm_T = max(_dot(c, c) for c in T.columns)
    gs_ok = T.gs_norm_sq <= gs_S
    # the sqrt(n)/2 factor is floored at 1: below n = 4 it would demand T shorter than a shortest S
    norm_ok = 4 * norm_T <= norm_S * max(n, 4)
    TO_BASIS_STATS["gs_ok"] += int(gs_ok)
    TO_BASIS_STATS["norm_ok"] += int(norm_ok)
    if abs(T.det) != abs(B0.det):
        raise ContractError(f"determinant changed: {abs(T.det)} != {abs(B0.det)}")
    if not gs_ok:
        raise ContractError(f"gs_norm^2 grew: {T.gs_norm_sq} > {gs_S}")
    if not norm_ok:
        raise ContractError(f"|T|^2={norm_T} exceeds |S|^2 * max(n, 4)/4 = {Fraction(norm_S * max(n, 4), 4)}")


# ---------------------------------------------------------------------------
# trapdoor generation (gadget construction)

def _ceil_log(q: int, base: int) -> int:
    k, power = 0, 1
    while power < q:
        power *= base
        k += 1
    return max(k, 1)


def gadget_base(q: int, h: int, n: int) -> int:
    """Smallest base ``b >= 2`` whose gadget leaves at least ``h`` random columns."""
    for b in range(2, q + 1):
        if n - h * _ceil_log(q, b) >= h:
            return b
    raise ParameterError(f"n={n} too small for rank h={h} (need n >= 2h)")


def _digits(x: int, base: int, k: int) -> list[int]:
    out = []
    for _ in range(k):
        out.append(x % base)
        x //= base
    return out


def gadget_basis(q: int, base: int) -> list[list[int]]:
    """Columns of a basis of ``{x : g.x = 0 mod q}`` for ``g = (1, b, ..., b^(k-1))``."""
    k = _ceil_log(q, base)
    cols = []
    for i in range(k - 1):
        c = [0] * k
        c[i] = base
        c[i + 1] = -1
        cols.append(c)
    cols.append(_digits(q, base, k))
    return cols


def trap_gen(q: int, h: int, n: int, rng: RandomStream, *, max_tries: int = 8) -> TrapdoorPair:
    """Near-uniform ``A`` in Z_q^{h x n} of rank ``h`` with a basis of its q-ary kernel lattice.

    ``A = [Abar | G - Abar R]`` with uniform ``Abar``, ternary ``R`` (no zero
    columns, so every column of ``A`` is uniform) and gadget ``G = I_h (x) g``.
    """
    if q <= 2:
        raise ParameterError("q must be an odd prime")
    if h < 1 or n < 2 * h:
        raise ParameterError(f"need h >= 1 and n >= 2h, got h={h}, n={n}")
    base = gadget_base(q, h, n)
    k = _ceil_log(q, base)
    w = h * k
    mbar = n - w
    for _ in range(max_tries):
        Abar = rng.randbelow(q, h * mbar).reshape(h, mbar)
        R = np.zeros((mbar, w), dtype=np.int64)
        for j in range(w):
            col = rng.randbelow(3, mbar) - 1
            while not col.any():
                col = rng.randbelow(3, mbar) - 1
            R[:, j] = col
        G = np.zeros((h, w), dtype=np.int64)
        for i in range(h):
            G[i, i * k:(i + 1) * k] = [base**e for e in range(k)]
        A = np.concatenate([Abar, (G - Abar @ R) % q], axis=1) % q
        if rank_mod_q(A, q) != h:
            continue
        # basis of the kernel of [Abar | G]: columns [e_i; w_i] and [0; S_G]
        Wd = np.zeros((w, mbar), dtype=object)
        for i in range(mbar):
            for r in range(h):
                Wd[r * k:(r + 1) * k, i] = _digits(int(-Abar[r, i]) % q, base, k)
        Sg = gadget_basis(q, base)
        S = np.zeros((w, w), dtype=object)
        for r in range(h):
            for j, c in enumerate(Sg):
                S[r * k:(r + 1) * k, r * k + j] = c
        Ro = R.astype(object)
        top = np.concatenate([np.eye(mbar, dtype=np.int64).astype(object) + Ro.dot(Wd), Ro.dot(S)], axis=1)
        bottom = np.concatenate([Wd, S], axis=1)
        T0 = np.concatenate([top, bottom], axis=0)
        Az = ZqMatrix(A, q)
        B0 = kernel_basis_mod_q(A, q)
        T_A = to_basis(T0, B0)
        return TrapdoorPair(Az, T_A, base)
    raise GenerationError(f"no rank-{h} matrix after {max_tries} attempts")


# ---------------------------------------------------------------------------
# orthogonal tag matrices

def _log4(n: int) -> int:
    l = 0
    m = n
    while m > 1 and m % 4 == 0:
        m //= 4
        l += 1
    if m != 1 or n < 4:
        raise ParameterError(f"n must be a power of 4, got {n}")
    return l


def sqrt_unit(n: int, q: int) -> int:
    """``t`` with ``t^2 n = 1 (mod q)``, namely ``t = 2^-l`` for ``n = 4^l``."""
    if q % 2 == 0:
        raise ParameterError("q must be odd")
    l = _log4(n)
    return pow(2**l, -1, q)


def otr_gen(q: int, n: int, tau, H_n) -> ZqMatrix:
    """Orthogonal matrix ``H = t H_n D (mod q)`` with ``D = diag(2 tau - 1)``."""
    tau = np.asarray(tau, dtype=np.int64).reshape(-1)
    if tau.shape[0] != n or not np.all((tau == 0) | (tau == 1)):
        raise ParameterError(f"tag must be a 0/1 vector of length {n}")
    Hn = np.asarray(H_n, dtype=np.int64)
    if Hn.shape != (n, n) or not np.all(np.abs(Hn) == 1) or not np.array_equal(Hn @ Hn.T, n * np.eye(n, dtype=np.int64)):
        raise ParameterError("H_n is not a Hadamard matrix of the stated order")
    t = sqrt_unit(n, q)
    return ZqMatrix((t * Hn * (2 * tau - 1)[None, :]) % q, q)


def tag_context(A: ZqMatrix, H_n, tau) -> TagContext:
    n = A.cols
    H = otr_gen(A.q, n, tau, H_n)
    B = ZqMatrix(A.entries @ H.entries.T % A.q, A.q)
    return TagContext(np.asarray(tau, dtype=np.int8).reshape(-1).copy(), H, B, sqrt_unit(n, A.q))


# ---------------------------------------------------------------------------
# delegation

def new_basis(A: ZqMatrix, H: ZqMatrix, T_A: LatticeBasis, *, lift: str = "centered", H_n=None, tau=None) -> LatticeBasis:
    """Basis of the q-ary kernel lattice of ``B = A H^T`` from a basis of A's.

    ``lift`` picks the integer representative of ``H T_A (mod q)``:
    ``"centered"`` (default, falls back to ``[0, q)`` once on rank failure) or
    ``"hadamard"``, which uses the exact product ``H_n D T_A`` (needs ``H_n``
    and ``tau``) and so keeps the Gram-Schmidt norm within ``sqrt(n)`` of T_A's.
    """
    q = A.q
    n = A.cols
    B = ZqMatrix(A.entries @ H.entries.T % q, q)
    if lift == "hadamard":
        if H_n is None or tau is None:
            raise ParameterError("hadamard lift needs H_n and tau")
        d = 2 * np.asarray(tau, dtype=object).reshape(-1) - 1
        candidates = [np.asarray(H_n, dtype=object).dot(d[:, None] * T_A.basis)]
    elif lift == "centered":
        TA_mod = np.asarray(T_A.basis % q, dtype=np.int64)
        prod = H.entries.astype(np.int64) @ TA_mod % q
        candidates = [centered(prod, q), prod]
    else:
        raise ParameterError(f"unknown lift {lift!r}")
    B0 = kernel_basis_mod_q(B, q)
    for S in candidates:
        try:
            T_B = to_basis(np.asarray(S, dtype=object), B0)
        except RankError:
            continue
        h = rank_mod_q(A.entries, q)
        if abs(T_B.det) != q**h:
            raise DelegationError(f"|det T_B| = {abs(T_B.det)}, expected q^{h}")
        return T_B
    raise DelegationError(f"H T_A lift is rank deficient for every representative (n={n})")


def trapdoor_quality(T_A: LatticeBasis, q: int, h: int) -> float:
    """Measured ``gs_norm(T_A) / sqrt(h log2 q)`` (reported, never asserted)."""
    return T_A.gs_norm / math.sqrt(h * math.log2(q))
