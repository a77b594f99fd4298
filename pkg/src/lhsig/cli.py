"""Command-line front end: ``lhsig <command> [options]``.

Exit status is 0 for accept/pass, 1 for reject/fail and 2 for usage or input
errors.  Every report starts with the DEVIATION lines of the active profile.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config, games, scheme, serialize
from .sampler import RandomStream
from .trapdoor import tag_from_str, tag_to_str
from .zqlinalg import LinalgError

PK_PARAMS = "pk.json"
PK_FILE = "pk.lhs"
SK_FILE = "sk.lhs"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _profile(arg: str | None) -> config.ProfileConfig:
    if arg is None:
        return config.ProfileConfig.from_env()
    if arg in config.PROFILES:
        return config.ProfileConfig.named(arg)
    if os.path.exists(arg):
        return config.ProfileConfig.load(arg)
    raise UsageError(f"unknown profile {arg!r}; known: {', '.join(sorted(config.PROFILES))} or a JSON path")


def _params(args) -> scheme.PublicParams:
    if getattr(args, "params", None):
        return serialize.load_params(Path(args.params).read_text())
    cfg = _profile(args.profile)
    return scheme.setup(**cfg.params)


def _rng(args, label: str) -> RandomStream:
    seed = args.seed if args.seed is not None else _profile(getattr(args, "profile", None)).seed
    return RandomStream.from_hex(seed).spawn(label)


def _load_keys(keydir: str, need_secret: bool = False):
    d = Path(keydir)
    pp = serialize.load_params((d / PK_PARAMS).read_text())
    pk = serialize.load_public_key((d / PK_FILE).read_text(), pp)
    sk = serialize.load_secret_key((d / SK_FILE).read_text(), pp) if need_secret else None
    return pp, pk, sk


def _parse_ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t != ""]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {text!r}") from None


def _message(text: str, pp: scheme.PublicParams) -> np.ndarray:
    if text.startswith("@"):
        return serialize.load_message(Path(text[1:]).read_text(), pp)
    vals = _parse_ints(text, "message")
    if len(vals) != pp.n:
        raise UsageError(f"message has {len(vals)} entries, expected n={pp.n}")
    return np.array(vals, dtype=np.int64)


def _tag(text: str, pp: scheme.PublicParams) -> np.ndarray:
    tau = tag_from_str(text)
    if tau.shape[0] != pp.n:
        raise UsageError(f"tag has length {tau.shape[0]}, expected n={pp.n}")
    return tau


def _emit(lines, pp: scheme.PublicParams | None = None, out=None) -> None:
    out = out or sys.stdout
    if pp is not None:
        for d in pp.deviations():
            print(f"DEVIATION {d}", file=out)
    for line in lines:
        print(line, file=out)


def _write(path, text: str, inputs=()) -> None:
    serialize.write_text(Path(path), text, [Path(p) for p in inputs if p])


# ---------------------------------------------------------------------------
# commands

def cmd_params(args) -> int:
    pp = _params(args)
    if args.out:
        _write(args.out, serialize.dump_params(pp), [getattr(args, "params", None)])
    _emit([f"{k}={v}" for k, v in pp.to_dict().items()], pp)
    return 0


def cmd_keygen(args) -> int:
    pp = _params(args)
    pk, sk = scheme.key_gen(pp, _rng(args, "keygen"))
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    inputs = [getattr(args, "params", None)]
    _write(d / PK_PARAMS, serialize.dump_params(pk.params), inputs)
    _write(d / PK_FILE, serialize.dump_public_key(pk), inputs)
    _write(d / SK_FILE, serialize.dump_secret_key(sk), inputs)
    _emit([f"keys={d}", f"V_eff={pk.params.V_eff:.6f}"], pk.params)
    return 0


def cmd_tag(args) -> int:
    n = args.n if args.n else _params(args).n
    print(tag_to_str(_rng(args, "tag").bits(n)))
    return 0


def cmd_sign(args) -> int:
    pp, pk, sk = _load_keys(args.keys, need_secret=True)
    tau = _tag(args.tag, pp)
    m = _message(args.message, pp)
    sig = scheme.sign(sk, pk, tau, m, args.index, _rng(args, "sign"))
    inputs = [Path(args.keys) / SK_FILE, Path(args.keys) / PK_FILE]
    if args.message.startswith("@"):
        inputs.append(args.message[1:])
    _write(args.out, serialize.dump_signature(sig), inputs)
    _emit([f"signature={args.out}", f"provenance={sig.provenance}", f"degraded={int(sig.degraded)}",
           f"norm={float(np.linalg.norm(sig.sigma)):.3f}"], pp)
    return 0


def cmd_eval(args) -> int:
    pp, pk, _ = _load_keys(args.keys)
    f = scheme.LinearFunc(tuple(_parse_ints(args.coeffs, "coefficients")), pp.p)
    sigs = [serialize.load_signature(Path(p).read_text(), pp) for p in args.sigs]
    tau = _tag(args.tag, pp) if args.tag else None
    sig = scheme.evaluate(pk, tau, f, sigs)
    _write(args.out, serialize.dump_signature(sig), args.sigs)
    _emit([f"signature={args.out}", f"provenance={sig.provenance}",
           f"norm={float(np.linalg.norm(sig.sigma)):.3f}"], pp)
    return 0


def cmd_verify(args) -> int:
    pp, pk, _ = _load_keys(args.keys)
    sig = serialize.load_signature(Path(args.sig).read_text(), pp)
    f = scheme.LinearFunc(tuple(_parse_ints(args.coeffs, "coefficients")), pp.p) if args.coeffs else None
    res = scheme.verify(pk, _tag(args.tag, pp), _message(args.message, pp), sig, f)
    lines = [f"accepted={int(res.accepted)}"]
    if not res.accepted:
        lines += [f"failed_condition={res.failed}", f"reason={res.reason}"]
    _emit(lines, pp)
    return 0 if res.accepted else 1


def cmd_game(args) -> int:
    pp = _params(args)
    if args.adversary not in games.ADVERSARIES:
        raise UsageError(f"unknown adversary {args.adversary!r}; known: {', '.join(games.ADVERSARIES)}")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    rng = _rng(args, f"game/{args.game}/{args.adversary}")
    results = []
    alphas = []
    for t in range(args.trials):
        trng = rng.spawn(f"trial{t}")
        state = games.simulate_keygen(pp, trng.spawn("keys"))
        alphas.append(state.pk.alpha.T)
        adv = games.ADVERSARIES[args.adversary]()
        if args.game == "euf-cma":
            res = games.run_euf_cma(adv, pp, trng, state=state)
        else:
            res = games.run_ust_scma(adv, pp, args.datasets, trng, state=state)
        results.append(res)
    wins = [r for r in results if r.winner == "adversary"]
    ext = [r.extraction for r in wins if r.extraction is not None]
    classes = {c: sum(r.forgery_class == c for r in results) for c in ("I", "II", "none")}
    lines = [f"game={args.game}", f"adversary={args.adversary}", f"trials={args.trials}",
             f"adversary_wins={len(wins)}", f"class_I={classes['I']}", f"class_II={classes['II']}",
             f"class_none={classes['none']}", f"aborted={sum(bool(r.aborted) for r in results)}"]
    if ext:
        norms = [e.norm for e in ext]
        lines += [f"extraction_success={sum(e.sis_ok for e in ext) / len(ext):.4f}",
                  f"collisions={sum(e.collision for e in ext)}",
                  f"witness_norm_max={max(norms):.3f}", f"witness_norm_mean={np.mean(norms):.3f}",
                  f"witness_bound={ext[0].bound:.3f}"]
    probe = games.uniformity_of_vectors(np.concatenate(alphas), pp.q, name="alpha-uniformity")
    lines += [f"alpha_uniformity_p={probe.p_value:.6g}"]
    _emit(lines, state.pp)
    return 0 if all(e.sis_ok or e.collision for e in ext) else 1


def cmd_probe(args) -> int:
    pp = _params(args)
    rng = _rng(args, f"probe/{args.kind}")
    if args.kind == "uniformity":
        rep = games.uniformity_probe(pp, args.trials, rng)
    elif args.kind == "collision":
        rep = games.collision_probe(pp.n, args.s if args.s else 1.0, args.trials, rng)
    else:
        pp = replace(pp, k=3)
        pk, sk = scheme.key_gen(pp, rng.spawn("keys"))
        m0, m1, funcs = context_hiding_inputs(pp, rng.spawn("messages"))
        rep = games.context_hiding_test(pp, (pk, sk), m0, m1, funcs, args.trials, rng)
        pp = pk.params
    _emit(rep.lines(), pp)
    return 0 if rep.passed else 1


def context_hiding_inputs(pp: scheme.PublicParams, rng: RandomStream):
    """Data sets ``m1 = m0 + (d, d, d)`` and functions ``(1,1,1)``, ``(1,-1,0)``.

    Both functions agree on the two data sets when ``3 d = 0 (mod p)``, which
    holds for every ``d`` at ``p = 3``.
    """
    if pp.k != 3 or pp.p != 3:
        raise UsageError("context-hiding inputs need k = 3 and p = 3")
    m0 = [rng.randbelow(pp.p, pp.n) for _ in range(3)]
    d = rng.randbelow(pp.p, pp.n)
    m1 = [(m + d) % pp.p for m in m0]
    funcs = [scheme.LinearFunc((1, 1, 1), pp.p), scheme.LinearFunc((1, -1, 0), pp.p)]
    return m0, m1, funcs


def cmd_sizes(args) -> int:
    if args.keys:
        pp, pk, sk = _load_keys(args.keys, need_secret=True)
    else:
        pp = _params(args)
        pk, sk = scheme.key_gen(pp, _rng(args, "keygen"))
        pp = pk.params
    rng = _rng(args, "sizes")
    tau = rng.bits(pp.n)
    sig = scheme.sign(sk, pk, tau, rng.randbelow(pp.p, pp.n), 1, rng)
    rep = serialize.size_report(pk, sk, sig)
    lines = [
        f"pk_objects=1 matrix {pp.h}x{pp.n} mod q + 1 Hadamard descriptor order {pp.n} + {pp.k} vectors length {pp.h} mod q",
        f"sk_objects=1 integer matrix {pp.n}x{pp.n}",
        f"sig_objects=1 integer vector length {rep['sig_length']}",
        f"compared_sig_length={rep['compared_sig_length']}",
    ]
    for key in ("pk_bytes_A", "pk_bytes_H_descriptor", "pk_bytes_H_dense_bits", "pk_bytes_alpha",
                "sk_bytes", "sig_bytes"):
        lines.append(f"{key}={rep[key]:g}")
    lines.append(f"pk_bytes_total={rep['pk_bytes_A'] + rep['pk_bytes_alpha']:g}")
    if args.json:
        lines.append("json=" + json.dumps(rep, sort_keys=True))
    _emit(lines, pp)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lhsig", description="Linearly homomorphic lattice signatures.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, *, params=True, seed=False):
        p = sub.add_parser(name, help=help_text, description=help_text)
        if params:
            p.add_argument("--profile", help=f"profile name or JSON path (default: ${config.PROFILE_ENV} or {config.DEFAULT_PROFILE})")
            p.add_argument("--params", help="params JSON written by the params command")
        if seed:
            p.add_argument("--seed", help="hex seed")
        p.set_defaults(func=func)
        return p

    p = add("params", cmd_params, "Print (and optionally write) public parameters.")
    p.add_argument("--out")

    p = add("keygen", cmd_keygen, "Generate a key pair into a directory.", seed=True)
    p.add_argument("--out", required=True, help="output directory")

    p = add("tag", cmd_tag, "Print a uniform 0/1 tag.", seed=True)
    p.add_argument("--n", type=int)

    p = add("sign", cmd_sign, "Sign one message of a data set.", params=False, seed=True)
    p.add_argument("--profile", help=argparse.SUPPRESS)
    p.add_argument("--keys", required=True)
    p.add_argument("--tag", required=True, help="0/1 string of length n")
    p.add_argument("--index", type=int, required=True, help="position i in 1..k")
    p.add_argument("--message", required=True, help="comma-separated residues or @file")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "Combine k signatures with integer coefficients.", params=False)
    p.add_argument("--keys", required=True)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--sigs", nargs="+", required=True)
    p.add_argument("--tag")
    p.add_argument("--out", required=True)

    p = add("verify", cmd_verify, "Verify a signature; exit 0 on accept, 1 on reject.", params=False)
    p.add_argument("--keys", required=True)
    p.add_argument("--tag", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--sig", required=True)
    p.add_argument("--coeffs", help="function coefficients (default: from the signature)")

    p = add("game", cmd_game, "Run a security game against a harness adversary.", seed=True)
    p.add_argument("--game", choices=["euf-cma", "ust-scma"], default="euf-cma")
    p.add_argument("--adversary", default="null", help=", ".join(games.ADVERSARIES))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--datasets", type=int, default=2, help="data sets committed in ust-scma")

    p = add("probe", cmd_probe, "Run a statistical probe.", seed=True)
    p.add_argument("--kind", choices=["uniformity", "collision", "context-hiding"], required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--s", type=float, help="Gaussian width for the collision probe")

    p = add("sizes", cmd_sizes, "Report object counts and canonical byte sizes.", seed=True)
    p.add_argument("--keys", help="key directory (default: generate from the profile)")
    p.add_argument("--json", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, serialize.FormatError, scheme.FormatError, LinalgError, games.PreconditionError,
            OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
