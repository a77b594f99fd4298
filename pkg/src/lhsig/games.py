"""Executable unforgeability and privacy games, the key-generation simulator
with forgery-to-SIS extraction, and statistical probes.

White-box adversaries receive the secret key from the harness.  They exist to
drive the extraction path end to end and are reduction exercises, not attacks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import config
from .sampler import RandomStream, sample_dom
from .scheme import (
    FormatError,
    LinearFunc,
    PublicKey,
    PublicParams,
    SecretKey,
    Signature,
    _finish_keys,
    derive_matrix,
    evaluate,
    sign,
    verify,
)
from .trapdoor import trap_gen
from .zqlinalg import ZqMatrix, centered


class PreconditionError(ValueError):
    pass


class ProtocolViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# simulator and extraction

@dataclass(eq=False)
class SimulatorState:
    pp: PublicParams
    pk: PublicKey
    sk: SecretKey
    x: list
    s: float
    issued: list = field(default_factory=list)

    def x_norms(self) -> list[float]:
        return [float(np.linalg.norm(v)) for v in self.x]


def simulate_keygen(pp: PublicParams, rng: RandomStream) -> SimulatorState:
    """Keys whose ``alpha_i = A x_i (mod q)`` for short ``x_i`` drawn at width ``sqrt(n)``."""
    pair = trap_gen(pp.q, pp.h, pp.n, rng.spawn("trapdoor"))
    s = math.sqrt(pp.n)
    xrng = rng.spawn("x")
    xs = [sample_dom(pp.n, s, xrng) for _ in range(pp.k)]
    alpha = np.stack([pair.A @ x for x in xs], axis=1) % pp.q
    pk, sk = _finish_keys(pp, pair.A, pair.T_A, alpha, rng)
    return SimulatorState(pk.params, pk, sk, xs, s)


@dataclass(frozen=True, eq=False)
class Forgery:
    tau: np.ndarray
    m: np.ndarray
    func: LinearFunc
    sig: Signature


@dataclass(frozen=True)
class Extraction:
    z: tuple
    norm: float
    raw_norm: float
    bound: float
    collision: bool
    sis_ok: bool


def sis_check(A: ZqMatrix, z, beta: float) -> bool:
    """``z != 0``, ``A z = 0 (mod q)`` and ``|z| <= beta``."""
    z = [int(v) for v in np.asarray(z, dtype=object).reshape(-1)]
    if not any(z):
        return False
    if np.any(A @ np.array([v % A.q for v in z], dtype=np.int64) != 0):
        return False
    return sum(v * v for v in z) <= beta * beta


def extract_sis(state: SimulatorState, forgery: Forgery) -> Extraction:
    """Witness ``z = centered(H_tau^T sigma* mod q) - x'`` with ``x' = sum c_i x_i``."""
    pk = state.pk
    pp = pk.params
    res = verify(pk, forgery.tau, forgery.m, forgery.sig, forgery.func)
    if not res:
        raise PreconditionError(f"forgery does not verify: {res.reason}")
    ctx = derive_matrix(pk, forgery.tau)
    sigma = np.asarray(forgery.sig.sigma, dtype=np.int64)
    x_prime = sum(c * x for c, x in zip(forgery.func.coeffs, state.x))
    w = ctx.H.T @ (sigma % pp.q)
    z = np.asarray(centered(w, pp.q), dtype=np.int64) - x_prime
    raw = centered(ctx.H.entries, pp.q).T.astype(object).dot(sigma.astype(object)) - x_prime.astype(object)
    collision = not np.any(z)
    beta = pp.sis_bound
    return Extraction(
        z=tuple(int(v) for v in z),
        norm=float(np.linalg.norm(z)),
        raw_norm=math.sqrt(sum(int(v) ** 2 for v in raw)),
        bound=beta,
        collision=collision,
        sis_ok=(not collision) and sis_check(pk.A, z, beta),
    )


# ---------------------------------------------------------------------------
# adversaries

@dataclass(eq=False)
class QueryRecord:
    tau: np.ndarray
    messages: list
    sigs: list


class Adversary:
    """Callback contract.  All hooks default to doing nothing."""

    name = "base"
    needs_secret_key = False

    def begin(self, pk: PublicKey, rng: RandomStream, sk: SecretKey | None = None) -> None:
        self.pk, self.rng, self.sk = pk, rng, sk

    def next_query(self, history: list[QueryRecord]):
        """Return the next data set (k messages) or ``None`` to stop querying."""
        return None

    def commit(self, tags: list[np.ndarray], pp: PublicParams, rng: RandomStream):
        """Selective game: data sets for every issued tag plus the target index."""
        k, n, p = pp.k, pp.n, pp.p
        data = [[rng.randbelow(p, n) for _ in range(k)] for _ in tags]
        return data, 0

    def forge(self, history: list[QueryRecord]) -> Forgery | None:
        return None


class NullAdversary(Adversary):
    name = "null"


class ReplayAdversary(Adversary):
    """Queries one data set and replays a derived signature on it."""

    name = "replay"

    def next_query(self, history):
        if history:
            return None
        pp = self.pk.params
        return [self.rng.randbelow(pp.p, pp.n) for _ in range(pp.k)]

    def forge(self, history):
        if not history:
            return None
        pp = self.pk.params
        rec = history[0]
        f = LinearFunc(tuple(int(c) - (pp.p // 2) for c in self.rng.randbelow(pp.p, pp.k)), pp.p)
        return Forgery(rec.tau, f.apply(rec.messages), f, evaluate(self.pk, rec.tau, f, rec.sigs))


class WhiteBoxTypeI(Adversary):
    """Signs a random message under a tag that was never issued (uses sk)."""

    name = "whitebox-1"
    needs_secret_key = True

    def next_query(self, history):
        if len(history) >= 2:
            return None
        pp = self.pk.params
        return [self.rng.randbelow(pp.p, pp.n) for _ in range(pp.k)]

    def forge(self, history):
        pp = self.pk.params
        seen = {rec.tau.tobytes() for rec in history}
        tau = self.rng.bits(pp.n)
        while tau.tobytes() in seen:
            tau = self.rng.bits(pp.n)
        i = 1 + self.rng.randbelow(pp.k)
        m = self.rng.randbelow(pp.p, pp.n)
        sig = sign(self.sk, self.pk, tau, m, i, self.rng)
        return Forgery(tau, m, LinearFunc.projection(i, pp.k, pp.p), sig)


class WhiteBoxTypeII(Adversary):
    """Signs a wrong message under an issued tag (the target tag in the selective game)."""

    name = "whitebox-2"
    needs_secret_key = True
    target = 0

    def next_query(self, history):
        if history:
            return None
        pp = self.pk.params
        return [self.rng.randbelow(pp.p, pp.n) for _ in range(pp.k)]

    def commit(self, tags, pp, rng):
        data, _ = super().commit(tags, pp, rng)
        self.target = rng.randbelow(len(tags))
        return data, self.target

    def forge(self, history):
        pp = self.pk.params
        rec = history[self.target] if self.target < len(history) else history[0]
        i = 1 + self.rng.randbelow(pp.k)
        m = np.array(rec.messages[i - 1], dtype=np.int64)
        m[self.rng.randbelow(pp.n)] += 1 + self.rng.randbelow(pp.p - 1)
        m %= pp.p
        sig = sign(self.sk, self.pk, rec.tau, m, i, self.rng)
        return Forgery(rec.tau, m, LinearFunc.projection(i, pp.k, pp.p), sig)


ADVERSARIES = {cls.name: cls for cls in (NullAdversary, ReplayAdversary, WhiteBoxTypeI, WhiteBoxTypeII)}


# ---------------------------------------------------------------------------
# games

@dataclass(eq=False)
class GameResult:
    game: str
    adversary: str
    winner: str
    forgery_class: str
    verified: bool = False
    queries: int = 0
    extraction: Extraction | None = None
    aborted: str = ""
    timings: dict = field(default_factory=dict)

    def key(self) -> tuple:
        """Everything except wall-clock timings."""
        return (self.game, self.adversary, self.winner, self.forgery_class, self.verified,
                self.queries, self.extraction, self.aborted)

    def __eq__(self, other):
        return isinstance(other, GameResult) and self.key() == other.key()

    def lines(self) -> list[str]:
        out = [
            f"game={self.game}", f"adversary={self.adversary}", f"winner={self.winner}",
            f"forgery_class={self.forgery_class}", f"verified={int(self.verified)}",
            f"queries={self.queries}",
        ]
        if self.aborted:
            out.append(f"aborted={self.aborted}")
        if self.extraction is not None:
            e = self.extraction
            out += [f"witness_norm={e.norm:.3f}", f"witness_raw_norm={e.raw_norm:.3f}",
                    f"witness_bound={e.bound:.3f}", f"collision={int(e.collision)}",
                    f"sis_ok={int(e.sis_ok)}"]
        return out


def _check_dataset(data, pp: PublicParams) -> list[np.ndarray]:
    if data is None or len(data) != pp.k:
        raise ProtocolViolation(f"data set must hold exactly k={pp.k} messages")
    out = []
    for m in data:
        m = np.asarray(m, dtype=np.int64)
        if m.shape != (pp.n,) or np.any(m < 0) or np.any(m >= pp.p):
            raise ProtocolViolation("message outside Z_p^n")
        out.append(m)
    return out


def _sign_set(state: SimulatorState, tau, messages, rng: RandomStream) -> list[Signature]:
    return [sign(state.sk, state.pk, tau, m, i + 1, rng) for i, m in enumerate(messages)]


def _finish(game: str, adv: Adversary, state: SimulatorState, history, forgery, classify,
            t_start: float) -> GameResult:
    pk = state.pk
    if forgery is None:
        return GameResult(game, adv.name, "challenger", "none", queries=len(history),
                          timings={"total": time.perf_counter() - t_start})
    try:
        ok = bool(verify(pk, forgery.tau, forgery.m, forgery.sig, forgery.func))
    except (FormatError, ValueError) as exc:
        return GameResult(game, adv.name, "challenger", "none", queries=len(history),
                          aborted=f"malformed forgery: {exc}",
                          timings={"total": time.perf_counter() - t_start})
    cls = classify(forgery) if ok else "none"
    winner = "adversary" if ok and cls != "none" else "challenger"
    extraction = extract_sis(state, forgery) if winner == "adversary" else None
    return GameResult(game, adv.name, winner, cls, verified=ok, queries=len(history),
                      extraction=extraction, timings={"total": time.perf_counter() - t_start})


def run_euf_cma(adversary: Adversary, pp: PublicParams, rng: RandomStream, *,
                state: SimulatorState | None = None, max_queries: int = 64) -> GameResult:
    """Adaptive game: adversary queries data sets, gets fresh uniform tags and signatures."""
    t0 = time.perf_counter()
    state = state if state is not None else simulate_keygen(pp, rng.spawn("keys"))
    adversary.begin(state.pk, rng.spawn("adversary"), state.sk if adversary.needs_secret_key else None)
    crng = rng.spawn("challenger")
    history: list[QueryRecord] = []
    try:
        while len(history) < max_queries:
            data = adversary.next_query(history)
            if data is None:
                break
            messages = _check_dataset(data, state.pp)
            tau = crng.bits(state.pp.n)
            history.append(QueryRecord(tau, messages, _sign_set(state, tau, messages, crng)))
        forgery = adversary.forge(history)
    except ProtocolViolation as exc:
        return GameResult("euf-cma", adversary.name, "challenger", "none", queries=len(history),
                          aborted=str(exc), timings={"total": time.perf_counter() - t0})

    def classify(fg: Forgery) -> str:
        matches = [rec for rec in history if np.array_equal(rec.tau, fg.tau)]
        if not matches:
            return "I"
        m_star = np.asarray(fg.m) % state.pp.p
        if all(not np.array_equal(m_star, fg.func.apply(rec.messages)) for rec in matches):
            return "II"
        return "none"

    return _finish("euf-cma", adversary, state, history, forgery, classify, t0)


def run_ust_scma(adversary: Adversary, pp: PublicParams, n_s: int, rng: RandomStream, *,
                 state: SimulatorState | None = None) -> GameResult:
    """Selective game: tags first, then committed data sets and a target tag, then keys."""
    t0 = time.perf_counter()
    crng = rng.spawn("challenger")
    tags = [crng.bits(pp.n) for _ in range(n_s)]
    arng = rng.spawn("adversary")
    try:
        data, g = adversary.commit([t.copy() for t in tags], pp, arng)
        if len(data) != n_s:
            raise ProtocolViolation(f"expected {n_s} data sets, got {len(data)}")
        if not 0 <= int(g) < n_s:
            raise ProtocolViolation(f"target index {g} outside the issued tags")
        sets = [_check_dataset(d, pp) for d in data]
    except ProtocolViolation as exc:
        return GameResult("ust-scma", adversary.name, "challenger", "none",
                          aborted=str(exc), timings={"total": time.perf_counter() - t0})
    state = state if state is not None else simulate_keygen(pp, rng.spawn("keys"))
    adversary.begin(state.pk, arng, state.sk if adversary.needs_secret_key else None)
    history = [QueryRecord(tau, msgs, _sign_set(state, tau, msgs, crng)) for tau, msgs in zip(tags, sets)]
    try:
        forgery = adversary.forge(history)
    except ProtocolViolation as exc:
        return GameResult("ust-scma", adversary.name, "challenger", "none", queries=n_s,
                          aborted=str(exc), timings={"total": time.perf_counter() - t0})
    target = tags[int(g)]

    def classify(fg: Forgery) -> str:
        if not any(np.array_equal(t, fg.tau) for t in tags):
            return "I"
        if np.array_equal(fg.tau, target):
            if not np.array_equal(np.asarray(fg.m) % state.pp.p, fg.func.apply(sets[int(g)])):
                return "II"
        return "none"

    return _finish("ust-scma", adversary, state, history, forgery, classify, t0)


# ---------------------------------------------------------------------------
# statistical probes

@dataclass
class ProbeReport:
    name: str
    statistic: float
    p_value: float
    passed: bool
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"probe={self.name}", f"statistic={self.statistic:.6g}",
               f"p_value={self.p_value:.6g}", f"passed={int(self.passed)}"]
        out += [f"{k}={v}" for k, v in self.details.items()]
        out += [f"WARNING {w}" for w in self.warnings]
        return out


def uniformity_of_vectors(vectors: np.ndarray, q: int, alpha: float = config.CHI2_ALPHA,
                          name: str = "uniformity") -> ProbeReport:
    """Chi-square of vectors in Z_q^h against uniform.

    Uses the joint q^h buckets when each expects at least 5 hits, otherwise one
    test per coordinate combined by Bonferroni.
    """
    V = np.asarray(vectors, dtype=np.int64) % q
    if V.ndim == 1:
        V = V[:, None]
    trials, h = V.shape
    if trials / q**h >= 5:
        idx = np.zeros(trials, dtype=np.int64)
        for j in range(h):
            idx = idx * q + V[:, j]
        counts = np.bincount(idx, minlength=q**h)
        stat, p = stats.chisquare(counts)
        mode = "joint"
    else:
        ps, st = [], []
        for j in range(h):
            s_j, p_j = stats.chisquare(np.bincount(V[:, j], minlength=q))
            st.append(s_j)
            ps.append(p_j)
        stat = float(max(st))
        p = min(1.0, min(ps) * h)
        mode = "per-coordinate-bonferroni"
    return ProbeReport(name, float(stat), float(p), bool(p > alpha),
                       {"trials": trials, "buckets": mode, "q": q, "h": h})


def uniformity_probe(pp: PublicParams, trials: int, rng: RandomStream, *, A: ZqMatrix | None = None,
                     s: float | None = None) -> ProbeReport:
    """Chi-square of ``A x (mod q)`` for ``x`` from D_{Z^n,s} (default ``s = sqrt(n)``)."""
    if A is None:
        A = trap_gen(pp.q, pp.h, pp.n, rng.spawn("trapdoor")).A
    s = math.sqrt(pp.n) if s is None else s
    xrng = rng.spawn("x")
    X = np.stack([sample_dom(A.cols, s, xrng) for _ in range(trials)], axis=1)
    alphas = (A @ X).T
    return uniformity_of_vectors(alphas, A.q)


def _dz_mass(s: float, c: int) -> float:
    """Probability that a draw from D_{Z,s} (tail-cut at 12s) equals ``c``."""
    r = int(math.ceil(12 * s))
    xs = np.arange(-r, r + 1)
    rho = np.exp(-math.pi * xs.astype(float) ** 2 / (s * s))
    if abs(c) > 12 * s:
        return 0.0
    return float(math.exp(-math.pi * c * c / (s * s)) / rho.sum())


def collision_bound(n: int) -> float:
    """``1 / (e^{-1/2} (4/3 n^3 - 2 n^2 + 8/3 n))``."""
    return 1.0 / (math.exp(-0.5) * (4 / 3 * n**3 - 2 * n**2 + 8 / 3 * n))


def collision_probe(n: int, s: float, trials: int, rng: RandomStream, target=None) -> ProbeReport:
    """Rate at which D_{Z^n,s} hits ``target`` (default 0), with the exact predicted probability."""
    target = np.zeros(n, dtype=np.int64) if target is None else np.asarray(target, dtype=np.int64)
    hits = 0
    for _ in range(trials):
        if np.array_equal(sample_dom(n, s, rng), target):
            hits += 1
    rate = hits / trials
    predicted = math.prod(_dz_mass(s, int(c)) for c in target)
    bound = collision_bound(n)
    p_two = stats.binomtest(hits, trials, predicted).pvalue if predicted > 0 else float(hits == 0)
    if s >= math.sqrt(n):
        # the lemma's regime: a rate more than ten times the bound (with binomial slack) fails
        slack = 3 * math.sqrt(max(bound, 1.0 / trials) / trials)
        passed = rate <= 10 * bound + slack
        rule = "lemma"
    else:
        # below sqrt(n) the bound does not apply; check the rate against the exact mass
        passed = p_two > config.CHI2_ALPHA
        rule = "exact"
    return ProbeReport("collision", float(hits), float(p_two), passed,
                       {"n": n, "s": s, "trials": trials, "hits": hits, "rate": rate,
                        "predicted": predicted, "lemma_bound": bound, "rule": rule})


def context_hiding_threshold(pp: PublicParams, s: int) -> float:
    """``p (pk)^s * 1.5 sqrt(1 + ln n)``."""
    return pp.p * (pp.p * pp.k) ** s * config.QUALITY_FACTOR * math.sqrt(1 + math.log(pp.n))


def context_hiding_test(pp: PublicParams, keys: tuple[PublicKey, SecretKey], m0: Sequence, m1: Sequence,
                        funcs: Sequence[LinearFunc], trials: int, rng: RandomStream,
                        alpha: float = config.KS_ALPHA) -> ProbeReport:
    """Two-sample KS test between derived-signature matrices of two data sets.

    Each trial draws a tag, signs both data sets under it with independent
    randomness and evaluates every function.  Each of the ``s * n`` coordinates
    is compared by KS; the aggregate p-value is the Bonferroni-adjusted minimum.
    """
    pk, sk = keys
    pp = pk.params
    for j, f in enumerate(funcs):
        if not np.array_equal(f.apply(m0), f.apply(m1)):
            raise PreconditionError(f"function {j} separates the two data sets")
    warnings = []
    thr = context_hiding_threshold(pp, len(funcs))
    if pp.V_eff <= thr:
        warnings.append(f"V_eff={pp.V_eff:.1f} below privacy threshold {thr:.1f}")
    D = [[], []]
    trng, r0, r1 = rng.spawn("tags"), rng.spawn("b0"), rng.spawn("b1")
    for _ in range(trials):
        tau = trng.bits(pp.n)
        for b, (msgs, r) in enumerate(((m0, r0), (m1, r1))):
            sigs = [sign(sk, pk, tau, m, i + 1, r) for i, m in enumerate(msgs)]
            D[b].append(np.concatenate([evaluate(pk, tau, f, sigs).sigma for f in funcs]))
    D0, D1 = np.array(D[0]), np.array(D[1])
    pvals = []
    stat = 0.0
    for c in range(D0.shape[1]):
        if np.array_equal(D0[:, c], D1[:, c]):
            pvals.append(1.0)
            continue
        res = stats.ks_2samp(D0[:, c], D1[:, c])
        pvals.append(float(res.pvalue))
        stat = max(stat, float(res.statistic))
    p = min(1.0, min(pvals) * len(pvals))
    return ProbeReport("context-hiding", stat, p, bool(p > alpha),
                       {"trials": trials, "coordinates": len(pvals), "functions": len(funcs),
                        "threshold": round(thr, 3), "V_eff": round(pp.V_eff, 3)}, warnings)
