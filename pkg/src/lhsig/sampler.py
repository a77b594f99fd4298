"""Discrete Gaussian sampling over Z, Z^n and arbitrary full-rank lattices.

``rho_{s,c}(x) = exp(-pi |x - c|^2 / s^2)`` throughout.  Lattice sampling is the
randomized nearest-plane walk over the exact Gram-Schmidt data of a
:class:`~lhsig.zqlinalg.LatticeBasis`; only the per-level centres and widths
are rounded to doubles.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from . import _kernels
from .config import QUALITY_FACTOR
from .zqlinalg import LatticeBasis, ParameterError


class RandomStream:
    """Deterministic uniform stream addressed by ``(seed, counter)``.

    ``counter`` counts 64-bit words consumed so far.  Two streams with the same
    seed and counter produce the same future draws.
    """

    def __init__(self, seed: bytes | str | int = b"", counter: int = 0):
        if isinstance(seed, int):
            seed = seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
        elif isinstance(seed, str):
            seed = seed.encode()
        self.seed = bytes(seed)
        self.counter = int(counter)
        digest = hashlib.sha256(b"lhsig-stream:" + self.seed).digest()
        self._key = int.from_bytes(digest[:16], "little")

    @classmethod
    def from_hex(cls, hexseed: str) -> "RandomStream":
        text = hexseed.strip().removeprefix("0x")
        if len(text) % 2:
            text = "0" + text
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise ValueError(f"seed must be a hex string, got {hexseed!r}") from exc

    def spawn(self, label: str) -> "RandomStream":
        """Independent child stream keyed by ``label`` (does not consume draws)."""
        return RandomStream(hashlib.sha256(self.seed + b"/" + label.encode()).digest())

    def _raw_at(self, offset: int, k: int) -> np.ndarray:
        bitgen = np.random.Philox(key=self._key)
        bitgen.advance(offset // 4)
        skip = offset % 4
        raw = bitgen.random_raw(k + skip)
        return raw[skip:]

    def raw(self, k: int) -> np.ndarray:
        out = self._raw_at(self.counter, k)
        self.counter += k
        return out

    def peek_uniforms(self, k: int, start: int = 0) -> np.ndarray:
        """``k`` doubles in [0, 1) beginning ``start`` words ahead, without consuming."""
        raw = self._raw_at(self.counter + start, k)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def consume(self, k: int) -> None:
        self.counter += k

    def uniforms(self, k: int) -> np.ndarray:
        out = self.peek_uniforms(k)
        self.consume(k)
        return out

    def randbelow(self, bound: int, size: int | None = None):
        """Uniform integers in ``[0, bound)`` by rejection on 64-bit words."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        count = 1 if size is None else int(size)
        limit = (1 << 64) - ((1 << 64) % bound)
        out = []
        while len(out) < count:
            for w in self.raw(count - len(out)):
                w = int(w)
                if w < limit:
                    out.append(w % bound)
        if size is None:
            return out[0]
        return np.array(out, dtype=np.int64)

    def bits(self, n: int) -> np.ndarray:
        return self.randbelow(2, n).astype(np.int8)

    def state(self) -> tuple[bytes, int]:
        return self.seed, self.counter


# Per-level widths beyond this lose the integer part of nearest-plane centres in doubles.
MAX_LEVEL_WIDTH = 2.0**30
_MAX_BUFFER = 1 << 26


class NumericalRangeError(ParameterError):
    pass


def _run(kernel, args, rng: RandomStream, estimate: int):
    """Run a buffer-driven kernel, growing the buffer until it completes."""
    size = max(16, estimate)
    while True:
        u = rng.peek_uniforms(size)
        out, used = kernel(*args, u)
        if used >= 0:
            rng.consume(used)
            return out
        size *= 2
        if size > _MAX_BUFFER:
            raise NumericalRangeError("sampler did not terminate within the uniform budget")


def sample_z(s: float, c: float, rng: RandomStream, *, backend: str | None = None) -> int:
    """One integer from D_{Z,s,c}, tail-cut at ``|x - c| <= 12 s``."""
    if s <= 0:
        raise ParameterError(f"Gaussian parameter must be positive, got {s}")
    sample_vec, _ = _kernels.kernels(backend)
    out = _run(sample_vec, (float(s), np.array([float(c)])), rng, 8)
    return int(out[0])


def sample_vec(s: float, centers, rng: RandomStream, *, backend: str | None = None) -> np.ndarray:
    """Independent draws from D_{Z,s,c_j}, one per entry of ``centers``."""
    if s <= 0:
        raise ParameterError(f"Gaussian parameter must be positive, got {s}")
    centers = np.asarray(centers, dtype=np.float64).reshape(-1)
    sample, _ = _kernels.kernels(backend)
    return _run(sample, (float(s), centers), rng, 4 * centers.shape[0])


def sample_dom(n: int, s: float, rng: RandomStream, *, backend: str | None = None) -> np.ndarray:
    """``n`` independent draws from D_{Z,s} (centre 0)."""
    if s <= 0:
        raise ParameterError(f"Gaussian parameter must be positive, got {s}")
    sample_vec, _ = _kernels.kernels(backend)
    return _run(sample_vec, (float(s), np.zeros(n)), rng, 4 * n)


def quality_threshold(basis: LatticeBasis) -> float:
    """Smallest admissible width: ``gs_norm * 1.5 * sqrt(ln n)``."""
    n = basis.dim
    return basis.gs_norm * QUALITY_FACTOR * math.sqrt(math.log(max(n, 2)))


def degraded(basis: LatticeBasis, s: float) -> bool:
    """True when ``s`` is below the quality threshold (output still lies in the lattice coset)."""
    return s < quality_threshold(basis)


def _check_quality(basis: LatticeBasis, s: float, unchecked: bool) -> None:
    if s <= 0:
        raise ParameterError(f"Gaussian parameter must be positive, got {s}")
    if not unchecked and degraded(basis, s):
        raise ParameterError(
            f"s={s:.4g} below quality threshold {quality_threshold(basis):.4g} "
            f"(gs_norm={basis.gs_norm:.4g}); pass unchecked=True to sample anyway"
        )


def sample_gaussian(
    basis: LatticeBasis,
    s: float,
    c,
    rng: RandomStream,
    *,
    unchecked: bool = False,
    backend: str | None = None,
) -> np.ndarray:
    """Lattice point of L(basis) from D_{L,s,c} by randomized nearest plane."""
    _check_quality(basis, s, unchecked)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.shape[0] != basis.dim:
        raise ParameterError(f"centre has length {c.shape[0]}, basis dimension is {basis.dim}")
    widest = s / math.sqrt(float(min(basis.gs_sqnorms)))
    if widest > MAX_LEVEL_WIDTH:
        raise NumericalRangeError(
            f"Gram-Schmidt profile too unbalanced for double precision: level width {widest:.3g}"
        )
    _, nearest_plane = _kernels.kernels(backend)
    B = basis.as_int64()
    bstar = basis.gso_float
    return _run(nearest_plane, (B, bstar, basis.gs_sqnorms_float, float(s), c), rng, 4 * basis.dim)


def sample_pre(
    basis: LatticeBasis,
    t,
    s: float,
    rng: RandomStream,
    *,
    unchecked: bool = False,
    backend: str | None = None,
) -> np.ndarray:
    """Point of the coset ``t + L(basis)`` from D_{L+t,s}: ``t + D_{L,s,-t}``."""
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    y = sample_gaussian(basis, s, -t.astype(np.float64), rng, unchecked=unchecked, backend=backend)
    return t + y
