from fractions import Fraction
from itertools import product
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy.matrices.normalforms import smith_normal_form

from lhsig import zqlinalg as zl
from lhsig.zqlinalg import LatticeBasis, ZqMatrix

# 4x4 and 8x8 example Hadamard matrices as printed in the reference text
REF_B = [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]]
REF_C = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, -1, -1, 1, 1, -1, -1],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [1, -1, -1, 1, 1, -1, -1, 1],
    [1, 1, 1, 1, -1, -1, -1, -1],
    [1, 1, -1, -1, -1, -1, 1, 1],
    [1, -1, 1, -1, -1, 1, -1, 1],
    [1, -1, -1, 1, -1, 1, 1, -1],
]


def cols(*vs):
    return zl.from_columns([list(v) for v in vs])


def gso_oracle(vectors):
    """Textbook Gram-Schmidt in Fractions, written independently of the library."""
    out = []
    for b in vectors:
        v = [Fraction(x) for x in b]
        for u in out:
            uu = sum(x * x for x in u)
            mu = sum(Fraction(a) * c for a, c in zip(b, u)) / uu
            v = [x - mu * c for x, c in zip(v, u)]
        out.append(v)
    return out


def lattice_det_oracle(M):
    """|det| of the lattice spanned by the columns, via Smith form."""
    S = smith_normal_form(sympy.Matrix(np.asarray(M, dtype=object).tolist()), domain=sympy.ZZ)
    return abs(math.prod(S[i, i] for i in range(min(S.shape)) if S[i, i] != 0))


small_ints = st.integers(min_value=-6, max_value=6)


def square_matrices(n):
    return st.lists(st.lists(small_ints, min_size=n, max_size=n), min_size=n, max_size=n)


# --- Gram-Schmidt -------------------------------------------------------------

def test_gso_identity_unchanged():
    G = zl.gram_schmidt(zl.identity(2))
    assert G.tolist() == [[1, 0], [0, 1]]


def test_gso_shear_becomes_orthonormal():
    G = zl.gram_schmidt(cols((1, 0), (1, 1)))
    assert G.tolist() == [[1, 0], [0, 1]]
    assert [list(c) for c in G.T] == gso_oracle([(1, 0), (1, 1)])


def test_gso_of_orthogonal_columns_is_identity_map():
    H = zl.int_matrix(REF_B)
    assert np.array_equal(zl.gram_schmidt(H), H)


@settings(max_examples=40, deadline=None)
@given(square_matrices(4))
def test_gso_matches_oracle_and_determinant(rows):
    M = zl.int_matrix(rows)
    if zl.det(M) == 0:
        with pytest.raises(zl.RankError):
            LatticeBasis(M)
        return
    L = LatticeBasis(M)
    expect = gso_oracle(zl.columns(M))
    assert [list(c) for c in L.gso.T] == expect
    # product of squared GS lengths equals det^2
    assert math.prod(L.gs_sqnorms) == zl.det(M) ** 2


def test_gso_columns_orthogonal_at_32():
    M = np.random.default_rng(32).integers(-5, 6, size=(32, 32))
    G = LatticeBasis(M).gso
    ips = G.T.dot(G)
    assert all(ips[i, j] == 0 for i in range(32) for j in range(32) if i != j)


@settings(max_examples=40, deadline=None)
@given(square_matrices(4), st.permutations(range(4)), st.lists(st.sampled_from([1, -1]), min_size=4, max_size=4))
def test_signed_permutation_preserves_norms(rows, perm, signs):
    M = zl.int_matrix(rows)
    if zl.det(M) == 0:
        return
    P = np.zeros((4, 4), dtype=object)
    for i, (j, sgn) in enumerate(zip(perm, signs)):
        P[i, j] = sgn
    PM = P.dot(M)
    assert zl.matrix_norm_sq(PM) == zl.matrix_norm_sq(M)
    assert zl.gs_norm_sq(PM) == zl.gs_norm_sq(M)


@pytest.mark.parametrize(
    "M, expected",
    [(zl.identity(3), 1), (cols((1, 0), (1, 1)), 1), (2 * zl.identity(2), 2)],
)
def test_gs_norm_values(M, expected):
    assert zl.gs_norm(M) == expected


@pytest.mark.parametrize(
    "M, expected",
    [(cols((3, 0), (0, 4)), 4), (np.zeros((2, 2), dtype=object), 0), (cols((3, 4), (1, 0)), 5)],
)
def test_matrix_norm_values(M, expected):
    assert zl.matrix_norm(M) == expected


def test_rank_error_names_the_dependent_column():
    with pytest.raises(zl.RankError) as info:
        LatticeBasis(cols((1, 2), (2, 4)))
    assert info.value.column == 1


# --- Hadamard ------------------------------------------------------------------

def test_kronecker_identity_left():
    X = zl.int_matrix([[1, 2], [3, 4]])
    assert np.array_equal(zl.kronecker(zl.identity(1), X), X)


def test_kronecker_of_hadamards_is_hadamard():
    H8 = zl.kronecker(zl.hadamard(2, internal=True), zl.hadamard(4))
    assert zl.is_hadamard(H8)
    assert np.array_equal(H8.dot(H8.T), 8 * zl.identity(8))


def test_h2_kron_h2_is_reference_4x4_up_to_row_swap():
    H2 = zl.hadamard(2, internal=True)
    K = zl.kronecker(H2, H2)
    # the product orders the middle rows the other way round
    assert not np.array_equal(K, zl.int_matrix(REF_B))
    assert np.array_equal(K[[0, 2, 1, 3]], zl.int_matrix(REF_B))


def test_hadamard_4_and_8_match_reference():
    assert zl.hadamard(4).tolist() == REF_B
    assert zl.hadamard(8, internal=True).tolist() == REF_C


@pytest.mark.parametrize("n", [16, 64, 256])
def test_hadamard_orthogonal(n):
    H = zl.hadamard(n)
    assert np.array_equal(H.dot(H.T), n * zl.identity(n))


@pytest.mark.parametrize("n", [2, 8, 12, 3])
def test_hadamard_rejects_non_power_of_four(n):
    with pytest.raises(zl.ParameterError):
        zl.hadamard(n)


# --- linear algebra mod q ------------------------------------------------------

def test_kernel_basis_of_single_row():
    L = zl.kernel_basis_mod_q(zl.int_matrix([[1, 0]]), 5)
    assert abs(L.det) == 5
    # brute force: the lattice meets [0,5)^2 in exactly 5 points
    pts = [v for v in product(range(5), repeat=2) if v[0] % 5 == 0]
    assert len(pts) == 5
    assert all(L.contains(v) for v in pts)
    assert L.hnf.tolist() == [[5, 0], [0, 1]]


def test_kernel_basis_of_zero_matrix_is_whole_lattice():
    L = zl.kernel_basis_mod_q(np.zeros((2, 3), dtype=object), 7)
    assert np.array_equal(L.basis, zl.identity(3))


@pytest.mark.parametrize("seed", range(5))
def test_kernel_basis_index_matches_count(seed):
    q, h, n = 5, 2, 4
    A = np.random.default_rng(seed).integers(0, q, size=(h, n))
    L = zl.kernel_basis_mod_q(A, q)
    # index of the kernel lattice = q^n / #solutions in the box [0,q)^n
    sols = sum(1 for v in product(range(q), repeat=n) if not np.any(A.dot(v) % q))
    assert abs(L.det) == q**n // sols
    assert abs(L.det) == lattice_det_oracle(L.basis)
    for c in L.columns:
        assert not np.any(A.dot(c) % q)


@pytest.mark.parametrize("q, h, n", [(7, 1, 4), (97, 2, 8), (257, 2, 16)])
def test_kernel_basis_membership_and_index_random(q, h, n):
    r = np.random.default_rng(q * n)
    for _ in range(100):
        B = r.integers(0, q, size=(h, n))
        if _ % 10 == 0:
            B[-1] = B[0] * 3 % q  # include rank-deficient cases
        L = zl.kernel_basis_mod_q(B, q)
        assert not np.any(B.astype(object).dot(L.basis) % q)
        assert abs(L.det) == q ** zl.rank_mod_q(B, q)


def test_solve_mod_q_zero_rhs():
    B = zl.int_matrix([[1, 2, 3], [4, 5, 6]])
    assert not np.any(zl.solve_mod_q(B, [0, 0], 7))


def test_solve_mod_q_identity_block():
    B = zl.int_matrix([[1, 0, 0, 0], [0, 1, 0, 0]])
    assert zl.solve_mod_q(B, [3, 9], 11).tolist() == [3, 9, 0, 0]


def test_solve_mod_q_no_solution():
    with pytest.raises(zl.NoSolutionError):
        zl.solve_mod_q(zl.int_matrix([[1, 1], [2, 2]]), [1, 0], 7)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([7, 97, 257]))
def test_solve_mod_q_residual(seed, q):
    r = np.random.default_rng(seed)
    B = r.integers(0, q, size=(2, 6))
    if zl.rank_mod_q(B, q) < 2:
        return
    alpha = r.integers(0, q, size=2)
    t = zl.solve_mod_q(B, alpha, q)
    assert np.array_equal(B.astype(object).dot(t) % q, alpha % q)


def test_zq_matrix_matmul_and_transpose():
    A = ZqMatrix(zl.int_matrix([[1, 2], [3, 4]]), 5)
    assert (A @ A).entries.tolist() == [[2, 0], [0, 2]]
    assert A.T.entries.tolist() == [[1, 3], [2, 4]]
    assert A.centered().tolist() == [[1, 2], [-2, -1]]


# --- HNF -----------------------------------------------------------------------

def test_hnf_identity():
    assert np.array_equal(zl.hnf(zl.identity(3)), zl.identity(3))


def test_hnf_of_generating_set():
    H = zl.hnf(cols((2, 0), (1, 1), (0, 2)))
    assert H.tolist() == [[1, 0], [1, 2]]
    assert abs(zl.det(H)) == lattice_det_oracle(cols((2, 0), (1, 1), (0, 2)))


def test_hnf_of_unimodular_is_identity():
    U = cols((2, 1), (1, 1))
    assert np.array_equal(zl.hnf(U), zl.identity(2))


@settings(max_examples=40, deadline=None)
@given(square_matrices(4))
def test_hnf_idempotent(rows):
    M = zl.int_matrix(rows)
    if zl.det(M) == 0:
        return
    H = zl.hnf(M)
    assert np.array_equal(zl.hnf(H), H)


def test_hnf_rejects_zero_lattice():
    with pytest.raises(zl.LinalgError):
        zl.hnf(np.zeros((2, 2), dtype=object))


@settings(max_examples=40, deadline=None)
@given(square_matrices(3), st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), small_ints), max_size=6))
def test_hnf_invariant_under_column_operations(rows, ops):
    M = zl.int_matrix(rows)
    if zl.det(M) == 0:
        return
    N = M.copy()
    for i, j, c in ops:
        if i != j:
            N[:, i] = N[:, i] + c * N[:, j]
    H = zl.hnf(M)
    assert np.array_equal(H, zl.hnf(N))
    # lower triangular, positive diagonal, reduced entries left of the diagonal
    for i in range(3):
        assert H[i, i] > 0
        for j in range(3):
            if j > i:
                assert H[i, j] == 0
            elif j < i:
                assert 0 <= H[i, j] < H[i, i]
    assert abs(zl.det(H)) == abs(zl.det(M))


@settings(max_examples=30, deadline=None)
@given(square_matrices(4))
def test_det_matches_sympy(rows):
    assert zl.det(zl.int_matrix(rows)) == sympy.Matrix(rows).det()


@given(st.integers(-10**6, 10**6), st.sampled_from([3, 97, 257]))
def test_centered_range(x, q):
    c = zl.centered(x, q)
    assert -q // 2 <= c <= q // 2 and (c - x) % q == 0


def test_lattice_coordinates_membership():
    B = cols((2, 0), (0, 2))
    assert zl.lattice_coordinates(B, cols((4, 2))).tolist() == [[2], [1]]
    with pytest.raises(zl.MembershipError):
        zl.lattice_coordinates(B, cols((1, 0)))
