"""Hot sampling loops with a numba backend and a plain numpy/Python fallback.

Both backends consume a caller-supplied buffer of uniforms in exactly the same
order, so a fixed random stream yields the same samples on either backend.
A kernel that runs out of uniforms returns ``-1`` as its "used" count; the
caller extends the buffer and reruns from the start.

Select the backend with ``LHSIG_BACKEND=numba`` (default when importable) or
``LHSIG_BACKEND=numpy``.
"""

from __future__ import annotations

import math
import os

import numpy as np

TAIL_CUT = 12.0
# below this per-level width the rounded-normal proposal loses efficiency
SMALL_S = 1.0
UNIFORMS_PER_ATTEMPT = 3

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _sample_z_py(s, c, u, pos):
    """One draw from D_{Z,s,c}; returns ``(x, new_pos)`` with ``new_pos = -1`` on exhaustion."""
    nu = u.shape[0]
    if s < SMALL_S:
        lo = math.ceil(c - TAIL_CUT * s)
        hi = math.floor(c + TAIL_CUT * s)
        mode = math.floor(c + 0.5)
        lo = min(lo, mode)
        hi = max(hi, mode)
        width = hi - lo + 1
        rho_mode = math.exp(-math.pi * (mode - c) ** 2 / (s * s))
        while True:
            if pos + 2 > nu:
                return 0, -1
            x = lo + int(u[pos] * width)
            if x > hi:
                x = hi
            acc = u[pos + 1]
            pos += 2
            if acc * rho_mode < math.exp(-math.pi * (x - c) ** 2 / (s * s)):
                return x, pos
    sigma = s / math.sqrt(2.0 * math.pi)
    scale = sigma * math.sqrt(2.0)
    log_m = math.log(s) + math.pi / (12.0 * s * s)
    while True:
        if pos + UNIFORMS_PER_ATTEMPT > nu:
            return 0, -1
        u1 = 1.0 - u[pos]
        u2 = u[pos + 1]
        acc = u[pos + 2]
        pos += UNIFORMS_PER_ATTEMPT
        y = c + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        x = math.floor(y + 0.5)
        d = x - c
        if abs(d) > TAIL_CUT * s:
            continue
        if d >= 0:
            g = 0.5 * (math.erfc((d - 0.5) / scale) - math.erfc((d + 0.5) / scale))
        else:
            g = 0.5 * (math.erfc(-(d + 0.5) / scale) - math.erfc(-(d - 0.5) / scale))
        if g <= 0.0:
            continue
        log_rho = -math.pi * d * d / (s * s)
        if acc < math.exp(log_rho - log_m - math.log(g)):
            return x, pos


def _sample_vec_py(s, centers, u):
    n = centers.shape[0]
    out = np.zeros(n, dtype=np.int64)
    pos = 0
    for i in range(n):
        x, pos = _sample_z_py(s, centers[i], u, pos)
        if pos < 0:
            return out, -1
        out[i] = x
    return out, pos


def _nearest_plane_py(B, bstar, bsq, s, c, u):
    n = B.shape[0]
    cur = c.astype(np.float64).copy()
    v = np.zeros(n, dtype=np.int64)
    pos = 0
    Bf = B.astype(np.float64)
    for i in range(n - 1, -1, -1):
        ci = float(np.dot(cur, bstar[:, i])) / bsq[i]
        si = s / math.sqrt(bsq[i])
        z, pos = _sample_z_py(si, ci, u, pos)
        if pos < 0:
            return v, -1
        if z != 0:
            cur -= z * Bf[:, i]
            v += z * B[:, i]
    return v, pos


if HAVE_NUMBA:
    _sample_z_nb = njit(cache=True)(_sample_z_py)

    @njit(cache=True)
    def _sample_vec_nb(s, centers, u):
        n = centers.shape[0]
        out = np.zeros(n, dtype=np.int64)
        pos = 0
        for i in range(n):
            x, pos = _sample_z_nb(s, centers[i], u, pos)
            if pos < 0:
                return out, -1
            out[i] = x
        return out, pos

    @njit(cache=True)
    def _nearest_plane_nb(B, bstar, bsq, s, c, u):
        n = B.shape[0]
        cur = c.astype(np.float64).copy()
        v = np.zeros(n, dtype=np.int64)
        pos = 0
        for i in range(n - 1, -1, -1):
            acc = 0.0
            for r in range(n):
                acc += cur[r] * bstar[r, i]
            ci = acc / bsq[i]
            si = s / math.sqrt(bsq[i])
            z, pos = _sample_z_nb(si, ci, u, pos)
            if pos < 0:
                return v, -1
            if z != 0:
                for r in range(n):
                    cur[r] -= z * B[r, i]
                    v[r] += z * B[r, i]
        return v, pos


def _pick_backend() -> str:
    want = os.environ.get("LHSIG_BACKEND", "numba" if HAVE_NUMBA else "numpy").lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"LHSIG_BACKEND must be 'numba' or 'numpy', got {want!r}")
    if want == "numba" and not HAVE_NUMBA:
        return "numpy"
    return want


BACKEND = _pick_backend()


def kernels(backend: str | None = None):
    """Return ``(sample_vec, nearest_plane)`` for ``backend`` (default: the env choice)."""
    backend = backend or BACKEND
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _sample_vec_nb, _nearest_plane_nb
    if backend == "numpy":
        return _sample_vec_py, _nearest_plane_py
    raise ValueError(f"unknown backend {backend!r}")
