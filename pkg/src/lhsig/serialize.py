"""LHS1 text format.

A file is a sequence of blocks.  Each block is a header line
``LHS1 <kind> <rows> <cols> [extra...]`` followed by ``rows * cols`` decimal
integers in row-major order.  Writers put one matrix row per line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scheme import LinearFunc, PublicKey, PublicParams, SecretKey, Signature
from .zqlinalg import LatticeBasis, ZqMatrix

MAGIC = "LHS1"


class FormatError(ValueError):
    pass


@dataclass
class Block:
    kind: str
    data: np.ndarray  # object array of Python ints
    extra: list

    @property
    def modulus(self) -> int | None:
        if self.extra and self.extra[0].isdigit():
            return int(self.extra[0])
        return None


def format_block(kind: str, M, extra: list | None = None) -> str:
    M = np.asarray(M, dtype=object)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    rows, cols = M.shape
    header = " ".join([MAGIC, kind, str(rows), str(cols)] + [str(e) for e in (extra or [])])
    body = "\n".join(" ".join(str(int(x)) for x in row) for row in M)
    return header + "\n" + body + "\n"


def parse_blocks(text: str) -> list[Block]:
    lines = [ln.strip() for ln in text.splitlines()]
    blocks = []
    i = 0
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        head = lines[i].split()
        if head[0] != MAGIC:
            raise FormatError(f"line {i + 1}: expected '{MAGIC}' header, got {lines[i][:40]!r}")
        if len(head) < 4:
            raise FormatError(f"line {i + 1}: header needs kind, rows and cols")
        kind = head[1]
        try:
            rows, cols = int(head[2]), int(head[3])
        except ValueError:
            raise FormatError(f"line {i + 1}: rows/cols must be integers") from None
        if rows <= 0 or cols <= 0:
            raise FormatError(f"line {i + 1}: dimensions must be positive")
        need = rows * cols
        vals: list[int] = []
        i += 1
        while len(vals) < need and i < len(lines):
            if lines[i].startswith(MAGIC):
                break
            for tok in lines[i].split():
                try:
                    vals.append(int(tok))
                except ValueError:
                    raise FormatError(f"line {i + 1}: non-integer token {tok!r}") from None
            i += 1
        if len(vals) != need:
            raise FormatError(f"block '{kind}': expected {need} integers, found {len(vals)}")
        data = np.empty((rows, cols), dtype=object)
        for idx, v in enumerate(vals):
            data[idx // cols, idx % cols] = v
        blocks.append(Block(kind, data, head[4:]))
    if not blocks:
        raise FormatError("no LHS1 blocks found")
    return blocks


def _one(blocks: list[Block], kind: str) -> Block:
    found = [b for b in blocks if b.kind == kind]
    if len(found) != 1:
        raise FormatError(f"expected exactly one '{kind}' block, found {len(found)}")
    return found[0]


def _residues(block: Block, q: int) -> np.ndarray:
    if block.modulus != q:
        raise FormatError(f"block '{block.kind}' has modulus {block.modulus}, expected {q}")
    arr = block.data
    if any(not 0 <= int(x) < q for x in arr.flat):
        raise FormatError(f"block '{block.kind}' has entries outside [0, {q})")
    return np.asarray(arr, dtype=np.int64)


# ---------------------------------------------------------------------------

def dump_params(pp: PublicParams) -> str:
    d = pp.to_dict()
    d["deviations"] = pp.deviations()
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def load_params(text: str) -> PublicParams:
    try:
        return PublicParams.from_dict(json.loads(text))
    except (KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed params: {exc}") from None


def dump_public_key(pk: PublicKey) -> str:
    q = pk.params.q
    return (
        format_block("A", pk.A.entries, [q])
        + format_block("H", pk.H_n)
        + format_block("alpha", pk.alpha, [q])
    )


def load_public_key(text: str, pp: PublicParams) -> PublicKey:
    blocks = parse_blocks(text)
    A = _residues(_one(blocks, "A"), pp.q)
    H = np.asarray(_one(blocks, "H").data, dtype=np.int64)
    alpha = _residues(_one(blocks, "alpha"), pp.q)
    if A.shape != (pp.h, pp.n):
        raise FormatError(f"A has shape {A.shape}, expected {(pp.h, pp.n)}")
    if H.shape != (pp.n, pp.n):
        raise FormatError(f"H has shape {H.shape}, expected {(pp.n, pp.n)}")
    if alpha.shape != (pp.h, pp.k):
        raise FormatError(f"alpha has shape {alpha.shape}, expected {(pp.h, pp.k)}")
    return PublicKey(pp, ZqMatrix(A, pp.q), H, alpha)


def dump_secret_key(sk: SecretKey) -> str:
    return format_block("T_A", sk.T_A.basis)


def load_secret_key(text: str, pp: PublicParams) -> SecretKey:
    T = _one(parse_blocks(text), "T_A").data
    if T.shape != (pp.n, pp.n):
        raise FormatError(f"T_A has shape {T.shape}, expected {(pp.n, pp.n)}")
    return SecretKey(LatticeBasis(T))


def dump_signature(sig: Signature) -> str:
    extra = [sig.provenance]
    if sig.degraded:
        extra.append("degraded")
    return format_block("sig", sig.sigma, extra)


def load_signature(text: str, pp: PublicParams) -> Signature:
    b = _one(parse_blocks(text), "sig")
    if b.data.shape != (1, pp.n):
        raise FormatError(f"signature has shape {b.data.shape}, expected (1, {pp.n})")
    sigma = np.asarray(b.data[0], dtype=np.int64)
    index, func = None, None
    prov = b.extra[0] if b.extra else ""
    if prov.startswith("fresh:"):
        index = int(prov.split(":", 1)[1])
    elif prov.startswith("evaluated:"):
        func = LinearFunc(tuple(int(c) for c in prov.split(":", 1)[1].split(",")), pp.p)
    elif prov:
        raise FormatError(f"unknown signature provenance {prov!r}")
    return Signature(sigma, index=index, func=func, degraded="degraded" in b.extra[1:])


def dump_message(m, p: int) -> str:
    return format_block("msg", np.asarray(m).reshape(1, -1), [p])


def load_message(text: str, pp: PublicParams) -> np.ndarray:
    b = _one(parse_blocks(text), "msg")
    m = _residues(b, pp.p)
    if m.shape != (1, pp.n):
        raise FormatError(f"message has shape {m.shape}, expected (1, {pp.n})")
    return m[0]


# ---------------------------------------------------------------------------

def residue_bytes(q: int) -> float:
    """Canonical packed size of one residue mod q: ceil(log2 q) / 8."""
    return math.ceil(math.log2(q)) / 8


def int_bytes(values) -> float:
    """Packed size per entry for signed integers of the largest magnitude present."""
    mx = max((abs(int(v)) for v in np.asarray(values, dtype=object).flat), default=0)
    return (mx.bit_length() + 1) / 8


def size_report(pk: PublicKey, sk: SecretKey, sig: Signature) -> dict:
    """Object counts and canonical byte counts for keys and one signature."""
    pp = pk.params
    rb = residue_bytes(pp.q)
    pk_objects = {"matrix_hxn": 1, "hadamard_nxn": 1, "vectors_len_h": pp.k}
    return {
        "pk_objects": pk_objects,
        "pk_shapes": {"A": list(pk.A.shape), "H_n": list(pk.H_n.shape), "alpha": [pp.h] * pp.k},
        "pk_bytes_A": pp.h * pp.n * rb,
        "pk_bytes_H_descriptor": 0,
        "pk_bytes_H_dense_bits": pp.n * pp.n / 8,
        "pk_bytes_alpha": pp.k * pp.h * rb,
        "sk_objects": {"matrix_nxn": 1},
        "sk_bytes": pp.n * pp.n * int_bytes(sk.T_A.basis),
        "sig_objects": {"vector_len_n": 1},
        "sig_length": int(np.asarray(sig.sigma).shape[0]),
        "sig_bytes": pp.n * int_bytes(sig.sigma),
        "compared_sig_length": 2 * pp.n,
    }


def write_text(path: Path, text: str, inputs: list[Path] = ()) -> None:
    path = Path(path)
    for src in inputs:
        if src is not None and Path(src).exists() and path.exists() and path.resolve() == Path(src).resolve():
            raise FormatError(f"refusing to overwrite input file {path}")
    path.write_text(text)
