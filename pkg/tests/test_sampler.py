import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lhsig import _kernels, zqlinalg as zl
from lhsig.sampler import (
    NumericalRangeError,
    RandomStream,
    degraded,
    quality_threshold,
    sample_dom,
    sample_gaussian,
    sample_pre,
    sample_vec,
    sample_z,
)
from lhsig.zqlinalg import LatticeBasis, ParameterError


def exact_pmf(s, c, support):
    """Oracle: normalised rho_{s,c} over a window wide enough to hold the tail cut."""
    lo, hi = math.floor(c - 13 * s) - 1, math.ceil(c + 13 * s) + 1
    xs = np.arange(lo, hi + 1)
    w = np.exp(-math.pi * (xs - c) ** 2 / s**2)
    w[np.abs(xs - c) > 12 * s] = 0
    w /= w.sum()
    return {int(x): float(p) for x, p in zip(xs, w) if int(x) in support}


# --- the uniform stream ----------------------------------------------------------

def test_stream_is_deterministic():
    a, b = RandomStream(b"k"), RandomStream(b"k")
    assert np.array_equal(a.uniforms(100), b.uniforms(100))
    assert a.counter == b.counter == 100


def test_peek_does_not_consume():
    r = RandomStream(b"k")
    u = r.peek_uniforms(10)
    assert r.counter == 0
    assert np.array_equal(u, r.uniforms(10))


def test_counter_addresses_the_same_words():
    r = RandomStream(b"k")
    full = r.uniforms(10)
    assert np.array_equal(RandomStream(b"k", counter=7).uniforms(3), full[7:])


def test_spawn_gives_distinct_streams():
    r = RandomStream(b"k")
    assert not np.array_equal(r.spawn("a").uniforms(4), r.spawn("b").uniforms(4))
    assert r.counter == 0


def test_from_hex_accepts_odd_length_and_rejects_garbage():
    assert RandomStream.from_hex("1").seed == b"\x01"
    with pytest.raises(ValueError):
        RandomStream.from_hex("xyz")


def test_randbelow_uniform():
    draws = RandomStream(b"u").randbelow(97, 20000)
    assert draws.min() >= 0 and draws.max() < 97
    assert stats.chisquare(np.bincount(draws, minlength=97)).pvalue > 0.001


# --- scalar sampler --------------------------------------------------------------

def test_sample_z_mean_near_zero():
    x = sample_dom(100_000, 4.0, RandomStream(b"mean"))
    assert abs(x.mean()) < 0.1


def test_sample_z_tail_cut():
    x = sample_dom(100_000, 4.0, RandomStream(b"tail"))
    assert np.abs(x).max() <= 48


def test_sample_z_repeatable():
    a = [sample_z(4.0, 0.3, r) for r in [RandomStream(b"rep")] for _ in range(50)]
    b = [sample_z(4.0, 0.3, r) for r in [RandomStream(b"rep")] for _ in range(50)]
    assert a == b


def test_sample_z_rejects_nonpositive_width():
    with pytest.raises(ParameterError):
        sample_z(0.0, 0.0, RandomStream(b"x"))


@pytest.mark.parametrize("s, c", [(4.0, 0.0), (4.0, 0.37), (1.5, -2.5), (0.6, 0.2), (0.3, 0.55)])
def test_sample_z_matches_exact_distribution(s, c):
    draws = sample_vec(s, np.full(100_000, c), RandomStream(f"{s}/{c}".encode()))
    values, counts = np.unique(draws, return_counts=True)
    pmf = exact_pmf(s, c, set(range(int(c - 13 * s) - 2, int(c + 13 * s) + 3)))
    # pool the tails so every bucket expects at least 5 hits
    keys = sorted(pmf)
    expected = np.array([pmf[k] for k in keys]) * len(draws)
    observed = np.array([counts[values == k].sum() for k in keys])
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    if exp[-1] < 5:
        obs[-2] += obs[-1]
        exp[-2] += exp[-1]
        obs, exp = obs[:-1], exp[:-1]
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 0.001


def test_sample_vec_matches_scalar_calls():
    centers = [0.0, 2.5, -7.25]
    a = sample_vec(2.0, centers, RandomStream(b"vec"))
    r = RandomStream(b"vec")
    assert a.tolist() == [sample_z(2.0, c, r) for c in centers]


def test_sample_dom_tail_bound():
    r = RandomStream(b"dom")
    norms = [np.linalg.norm(sample_dom(16, 4.0, r)) for _ in range(10_000)]
    assert np.mean(np.array(norms) <= 4.0 * 4) >= 0.99


def test_sample_dom_one_dimension_is_sample_z():
    a = sample_dom(1, 3.0, RandomStream(b"one"))
    b = sample_z(3.0, 0.0, RandomStream(b"one"))
    assert int(a[0]) == b


@pytest.mark.parametrize("target", [np.zeros(16, dtype=int), np.arange(16) % 3 - 1])
def test_fixed_target_rarely_hit(target):
    r = RandomStream(b"hit")
    hits = sum(np.array_equal(sample_dom(16, 4.0, r), target) for _ in range(20_000))
    assert hits / 20_000 <= 1e-2


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 40.0), st.floats(-50, 50), st.binary(min_size=1, max_size=8))
def test_backends_agree_on_scalars(s, c, seed):
    a = sample_z(s, c, RandomStream(seed), backend="numpy")
    b = sample_z(s, c, RandomStream(seed), backend="numba")
    assert a == b
    assert abs(a - c) <= 12 * s + 1


def test_backend_flag_validated(monkeypatch):
    monkeypatch.setenv("LHSIG_BACKEND", "fortran")
    with pytest.raises(ValueError):
        _kernels._pick_backend()
    monkeypatch.setenv("LHSIG_BACKEND", "numpy")
    assert _kernels._pick_backend() == "numpy"


# --- lattice sampler -------------------------------------------------------------

def test_identity_basis_matches_sample_dom_distribution():
    I = LatticeBasis(zl.identity(4))
    r1, r2 = RandomStream(b"L1"), RandomStream(b"L2")
    a = np.array([sample_gaussian(I, 3.0, np.zeros(4), r1) for _ in range(4000)]).ravel()
    b = np.concatenate([sample_dom(4, 3.0, r2) for _ in range(4000)])
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_even_lattice_outputs_even():
    L = LatticeBasis(zl.int_matrix([[2]]))
    r = RandomStream(b"even")
    xs = [int(sample_gaussian(L, 10.0, [0.0], r)[0]) for _ in range(500)]
    assert all(x % 2 == 0 for x in xs)


def test_coset_parity_kept():
    L = LatticeBasis(zl.int_matrix([[2]]))
    r = RandomStream(b"odd")
    assert all(int(sample_pre(L, [1], 10.0, r)[0]) % 2 == 1 for _ in range(500))


def test_coset_of_lattice_point_stays_in_lattice():
    L = LatticeBasis(zl.from_columns([[3, 1, 0], [0, 2, 1], [1, 0, 4]]))
    t = L.basis.dot([1, -2, 1]).astype(np.int64)
    r = RandomStream(b"in")
    s = quality_threshold(L) * 2
    assert all(L.contains(sample_pre(L, t, s, r)) for _ in range(100))


def test_random_basis_tail_bound():
    rng = np.random.default_rng(8)
    while True:
        M = rng.integers(-3, 4, size=(8, 8))
        if round(np.linalg.det(M)) != 0:
            break
    L = LatticeBasis(M)
    s = quality_threshold(L)
    c = rng.normal(0, 5, size=8)
    r = RandomStream(b"tail8")
    ok = sum(np.linalg.norm(sample_gaussian(L, s, c, r) - c) <= s * math.sqrt(8) for _ in range(10_000))
    assert ok / 10_000 >= 0.99


def test_lattice_backends_agree():
    L = LatticeBasis(zl.from_columns([[5, 1, 0], [1, 4, 1], [0, 2, 6]]))
    s = quality_threshold(L)
    for seed in range(20):
        a = sample_gaussian(L, s, [0.5, -1.0, 2.0], RandomStream(bytes([seed])), backend="numpy")
        b = sample_gaussian(L, s, [0.5, -1.0, 2.0], RandomStream(bytes([seed])), backend="numba")
        assert np.array_equal(a, b)


def test_quality_check_and_unchecked_mode():
    L = LatticeBasis(zl.int_matrix([[10, 0], [0, 10]]))
    assert degraded(L, 1.0)
    with pytest.raises(ParameterError):
        sample_gaussian(L, 1.0, [0, 0], RandomStream(b"q"))
    v = sample_gaussian(L, 1.0, [0, 0], RandomStream(b"q"), unchecked=True)
    assert L.contains(v)


def test_unbalanced_profile_refused():
    L = LatticeBasis(zl.from_columns([[1, 0], [2**40, 1]]))
    with pytest.raises(NumericalRangeError):
        sample_gaussian(L, 2.0**35, [0.0, 0.0], RandomStream(b"u"), unchecked=True)
