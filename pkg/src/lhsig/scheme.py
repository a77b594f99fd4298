"""Linearly homomorphic signatures over Z^n: setup, key generation, signing,
evaluation and verification.

A data set is ``k`` messages in ``Z_p^n`` signed under one tag.  A signature is
a short ``sigma`` in the coset ``{x : x = m (mod p), B_tau x = alpha_i (mod q)}``
so integer combinations of signatures under the same tag verify against the
same combination of messages.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import sympy

from . import config
from .sampler import RandomStream, degraded, sample_pre
from .trapdoor import TagContext, new_basis, tag_context, trap_gen
from .zqlinalg import LatticeBasis, ParameterError, ZqMatrix, hadamard, solve_mod_q


class FormatError(ValueError):
    """Inputs have the wrong shape or range (as opposed to a failed verification)."""


class InfeasibleParameters(ParameterError):
    pass


def _is_power_of_4(n: int) -> bool:
    return n >= 4 and (n & (n - 1)) == 0 and (n.bit_length() - 1) % 2 == 0


@dataclass(frozen=True)
class PublicParams:
    n: int
    k: int
    p: int
    q: int
    h: int
    V: float
    profile: str = "toy"
    V_eff: float = 0.0
    lift: str = "hadamard"

    @property
    def verify_bound(self) -> float:
        """``k * (p/2) * V_eff * sqrt(n)``."""
        return self.k * self.p / 2 * self.V_eff * math.sqrt(self.n)

    @property
    def sis_bound(self) -> float:
        """``k * p * V_eff * sqrt(n)``."""
        return self.k * self.p * self.V_eff * math.sqrt(self.n)

    def deviations(self) -> list[str]:
        return config.deviation_lines(self.profile, self.lift)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "p": self.p, "q": self.q, "h": self.h,
            "V": self.V, "V_eff": self.V_eff, "profile": self.profile, "lift": self.lift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PublicParams":
        pp = cls(
            n=int(d["n"]), k=int(d["k"]), p=int(d["p"]), q=int(d["q"]), h=int(d["h"]),
            V=float(d["V"]), profile=d.get("profile", "toy"),
            V_eff=float(d.get("V_eff", d["V"])), lift=d.get("lift", "hadamard"),
        )
        _validate(pp)
        return pp


def paper_V(n: int, p: int, q: int) -> float:
    """``p * sqrt(2 n log q) * log n`` with base-2 logarithms."""
    return p * math.sqrt(2 * n * math.log2(q)) * math.log2(n)


def _validate(pp: PublicParams) -> None:
    if not _is_power_of_4(pp.n):
        raise ParameterError(f"n must be a power of 4, got {pp.n}")
    if pp.k < 1:
        raise ParameterError(f"k must be >= 1, got {pp.k}")
    if not sympy.isprime(pp.p):
        raise ParameterError(f"p must be prime, got {pp.p}")
    if pp.q <= 2 or not sympy.isprime(pp.q):
        raise ParameterError(f"q must be an odd prime, got {pp.q}")
    if math.gcd(pp.p, pp.q) != 1:
        raise ParameterError("p and q must be coprime")
    if pp.h < 1:
        raise ParameterError(f"h must be >= 1, got {pp.h}")
    if pp.lift not in ("centered", "hadamard"):
        raise ParameterError(f"unknown lift {pp.lift!r}")
    if pp.profile == "paper":
        if pp.q < (pp.n * pp.k * pp.p) ** 2:
            raise ParameterError("paper profile needs q >= (nkp)^2")
        if pp.h != pp.n // (6 * math.log2(pp.q)):
            raise ParameterError("paper profile needs h = floor(n / (6 log q))")


def setup(n: int, k: int, profile: str = "toy", *, p: int = 3, q: int | None = None,
          h: int | None = None, lift: str = "hadamard") -> PublicParams:
    """Public parameters.

    ``profile="paper"`` derives ``q`` as the least prime ``>= (nkp)^2`` and
    ``h = floor(n / (6 log2 q))``; ``profile="toy"`` takes ``q`` and ``h`` as given
    (defaults 97/257 and 2).
    """
    if not _is_power_of_4(n):
        raise ParameterError(f"n must be a power of 4, got {n}")
    if profile == "paper":
        q_min = (n * k * p) ** 2
        q = q if q is not None else int(sympy.nextprime(q_min - 1))
        h_val = int(n // (6 * math.log2(q)))
        if h_val == 0:
            raise InfeasibleParameters(
                f"h = floor(n / (6 log2 q)) = 0 for n={n}, q={q}: need n >= 6 log2 q = {6 * math.log2(q):.1f}"
            )
        if h is not None and h != h_val:
            raise ParameterError(f"paper profile fixes h = {h_val}")
        h = h_val
    elif profile == "toy":
        q = q if q is not None else (97 if n <= 16 else 257)
        h = 2 if h is None else h
        if n < 2 * h:
            raise ParameterError(f"toy profile needs n >= 2h, got n={n}, h={h}")
    else:
        raise ParameterError(f"unknown profile {profile!r}")
    V = paper_V(n, p, q)
    pp = PublicParams(n=n, k=k, p=p, q=q, h=h, V=V, profile=profile, V_eff=V, lift=lift)
    _validate(pp)
    return pp


def setup_profile(name: str) -> PublicParams:
    kw = dict(config.PROFILES[name])
    return setup(kw.pop("n"), kw.pop("k"), kw.pop("profile"), **kw)


# ---------------------------------------------------------------------------

class _LRU:
    def __init__(self, size: int):
        self.size = size
        self.data: OrderedDict = OrderedDict()

    def get(self, key, build):
        try:
            self.data.move_to_end(key)
            return self.data[key]
        except KeyError:
            value = build()
            self.data[key] = value
            if len(self.data) > self.size:
                self.data.popitem(last=False)
            return value


def _tag_key(tau) -> bytes:
    return np.asarray(tau, dtype=np.int8).reshape(-1).tobytes()


@dataclass(eq=False)
class PublicKey:
    params: PublicParams
    A: ZqMatrix
    H_n: np.ndarray
    alpha: np.ndarray  # h x k, column i is alpha_{i+1}
    _tags: _LRU = field(default_factory=lambda: _LRU(config.TAG_CACHE_SIZE), repr=False)

    def alpha_i(self, i: int) -> np.ndarray:
        return self.alpha[:, i - 1]


@dataclass(eq=False)
class SecretKey:
    T_A: LatticeBasis
    _bases: _LRU = field(default_factory=lambda: _LRU(config.TAG_CACHE_SIZE), repr=False)


@dataclass(frozen=True)
class LinearFunc:
    """Coefficients ``(c_1..c_k)``, each an integer in ``(-p/2, p/2]``."""

    coeffs: tuple
    p: int

    def __post_init__(self):
        cs = tuple(int(c) for c in self.coeffs)
        for c in cs:
            if not (-self.p < 2 * c <= self.p):
                raise ParameterError(f"coefficient {c} outside (-p/2, p/2] for p={self.p}")
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def projection(cls, i: int, k: int, p: int) -> "LinearFunc":
        if not 1 <= i <= k:
            raise ParameterError(f"index {i} outside 1..{k}")
        return cls(tuple(int(j == i) for j in range(1, k + 1)), p)

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def apply(self, messages: Sequence) -> np.ndarray:
        """``sum c_i m_i (mod p)`` in ``[0, p)``."""
        if len(messages) != self.k:
            raise FormatError(f"expected {self.k} messages, got {len(messages)}")
        acc = sum(c * np.asarray(m, dtype=np.int64) for c, m in zip(self.coeffs, messages))
        return np.asarray(acc % self.p, dtype=np.int64)

    def describe(self) -> str:
        return ",".join(str(c) for c in self.coeffs)


@dataclass(frozen=True, eq=False)
class Signature:
    sigma: np.ndarray
    index: int | None = None
    func: LinearFunc | None = None
    degraded: bool = False

    @property
    def provenance(self) -> str:
        if self.index is not None:
            return f"fresh:{self.index}"
        if self.func is not None:
            return f"evaluated:{self.func.describe()}"
        return "unknown"

    def __eq__(self, other):
        return (
            isinstance(other, Signature)
            and np.array_equal(self.sigma, other.sigma)
            and self.provenance == other.provenance
        )

    def __hash__(self):
        return hash((self.sigma.tobytes(), self.provenance))


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    failed: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.accepted


# ---------------------------------------------------------------------------

def derive_matrix(pk: PublicKey, tau) -> TagContext:
    """Tag matrices ``H_tau`` and ``B_tau = A H_tau^T`` (cached, deterministic)."""
    tau = np.asarray(tau, dtype=np.int8).reshape(-1)
    if tau.shape[0] != pk.params.n or not np.all((tau == 0) | (tau == 1)):
        raise FormatError(f"tag must be a 0/1 vector of length {pk.params.n}")
    return pk._tags.get(_tag_key(tau), lambda: tag_context(pk.A, pk.H_n, tau))


def tag_basis(sk: SecretKey, pk: PublicKey, tau) -> LatticeBasis:
    """Basis ``p T_B`` of the signing lattice for ``tau`` (cached)."""
    ctx = derive_matrix(pk, tau)
    pp = pk.params

    def build():
        T_B = new_basis(pk.A, ctx.H, sk.T_A, lift=pp.lift, H_n=pk.H_n, tau=ctx.tau)
        return LatticeBasis(T_B.basis * pp.p)

    return sk._bases.get(_tag_key(ctx.tau), build)


def probe_tags(n: int, rng: RandomStream, count: int = config.PROBE_TAGS) -> list[np.ndarray]:
    return [rng.bits(n) for _ in range(count)]


def measure_V_eff(pp: PublicParams, pk: PublicKey, sk: SecretKey, rng: RandomStream) -> float:
    """``max(V, 1.5 sqrt(ln n) * gs_norm(p T_B))`` over a few probe tags."""
    worst = max(tag_basis(sk, pk, tau).gs_norm for tau in probe_tags(pp.n, rng))
    return max(pp.V, config.QUALITY_FACTOR * math.sqrt(math.log(pp.n)) * worst)


def _finish_keys(pp: PublicParams, A: ZqMatrix, T_A: LatticeBasis, alpha: np.ndarray,
                 rng: RandomStream) -> tuple[PublicKey, SecretKey]:
    pk = PublicKey(pp, A, np.asarray(hadamard(pp.n), dtype=np.int64), alpha)
    sk = SecretKey(T_A)
    V_eff = measure_V_eff(pp, pk, sk, rng.spawn("probe"))
    pk.params = replace(pp, V_eff=V_eff)
    return pk, sk


def key_gen(pp: PublicParams, rng: RandomStream) -> tuple[PublicKey, SecretKey]:
    """Trapdoor pair, uniform ``alpha_1..alpha_k`` and the order-n Hadamard matrix."""
    pair = trap_gen(pp.q, pp.h, pp.n, rng.spawn("trapdoor"))
    alpha = rng.spawn("alpha").randbelow(pp.q, pp.h * pp.k).reshape(pp.h, pp.k)
    return _finish_keys(pp, pair.A, pair.T_A, alpha, rng)


def _check_message(m, pp: PublicParams) -> np.ndarray:
    m = np.asarray(m)
    if m.shape != (pp.n,):
        raise FormatError(f"message must have length {pp.n}, got shape {m.shape}")
    m = m.astype(np.int64)
    if np.any(m < 0) or np.any(m >= pp.p):
        raise FormatError(f"message entries must lie in [0, {pp.p})")
    return m


def crt_target(m, alpha_i, B_tau: ZqMatrix, p: int, q: int) -> np.ndarray:
    """``t`` in ``[0, pq)^n`` with ``t = m (mod p)`` and ``B_tau t = alpha_i (mod q)``."""
    if math.gcd(p, q) != 1:
        raise ParameterError("p and q must be coprime")
    t_q = np.asarray(solve_mod_q(B_tau, alpha_i, q), dtype=np.int64)
    m = np.asarray(m, dtype=np.int64) % p
    q_inv = pow(q, -1, p)
    return t_q + q * (((m - t_q) * q_inv) % p)


def sign(sk: SecretKey, pk: PublicKey, tau, m, i: int, rng: RandomStream) -> Signature:
    """Signature on message ``m`` at position ``i`` (1-based) of the data set tagged ``tau``."""
    pp = pk.params
    if not 1 <= i <= pp.k:
        raise ParameterError(f"index {i} outside 1..{pp.k}")
    m = _check_message(m, pp)
    ctx = derive_matrix(pk, tau)
    T = tag_basis(sk, pk, ctx.tau)
    t = crt_target(m, pk.alpha_i(i), ctx.B, pp.p, pp.q)
    sigma = sample_pre(T, t, pp.V_eff, rng, unchecked=True)
    return Signature(sigma, index=i, degraded=degraded(T, pp.V_eff))


def evaluate(pk: PublicKey, tau, f: LinearFunc, sigs: Sequence[Signature]) -> Signature:
    """``sigma = sum c_i sigma_i`` over the integers."""
    pp = pk.params
    if len(sigs) != pp.k or f.k != pp.k:
        raise FormatError(f"need exactly k={pp.k} signatures and coefficients")
    if f.p != pp.p:
        raise ParameterError("function modulus differs from p")
    acc = np.zeros(pp.n, dtype=np.int64)
    for c, s in zip(f.coeffs, sigs):
        if s.sigma.shape != (pp.n,):
            raise FormatError(f"signature must have length {pp.n}")
        acc = acc + c * s.sigma
    return Signature(acc, func=f, degraded=any(s.degraded for s in sigs))


def verify(pk: PublicKey, tau, m, sig: Signature, f: LinearFunc | None = None) -> VerifyResult:
    """Check the norm bound, ``sigma = m (mod p)`` and ``B_tau sigma = sum c_i alpha_i (mod q)``."""
    pp = pk.params
    if f is None:
        if sig.func is not None:
            f = sig.func
        elif sig.index is not None:
            f = LinearFunc.projection(sig.index, pp.k, pp.p)
        else:
            raise FormatError("no function given and the signature carries no provenance")
    if f.k != pp.k:
        raise FormatError(f"function has {f.k} coefficients, expected {pp.k}")
    m = _check_message(m, pp)
    sigma = np.asarray(sig.sigma)
    if sigma.shape != (pp.n,):
        raise FormatError(f"signature must have length {pp.n}, got shape {sigma.shape}")
    ctx = derive_matrix(pk, tau)
    norm_sq = sum(int(x) * int(x) for x in sigma)
    if norm_sq > pp.verify_bound ** 2:
        return VerifyResult(False, 1, f"|sigma| = {math.sqrt(norm_sq):.1f} > {pp.verify_bound:.1f}")
    if not np.array_equal(sigma % pp.p, m):
        return VerifyResult(False, 2, "sigma mod p differs from m")
    target = (pk.alpha.astype(np.int64) @ np.array(f.coeffs, dtype=np.int64)) % pp.q
    if not np.array_equal(ctx.B @ (sigma % pp.q), target):
        return VerifyResult(False, 3, "B_tau sigma differs from sum c_i alpha_i mod q")
    return VerifyResult(True)
