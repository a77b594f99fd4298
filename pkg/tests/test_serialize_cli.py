import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lhsig import cli, scheme, serialize
from lhsig.sampler import RandomStream
from lhsig.scheme import LinearFunc, Signature


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def keydir(tmp_path_factory):
    d = tmp_path_factory.mktemp("keys")
    assert cli.main(["keygen", "--profile", "toy16", "--seed", "a1", "--out", str(d)]) == 0
    return d


# --- format round trips ----------------------------------------------------------

@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_block_round_trip(rows, cols, data):
    M = np.array(data.draw(st.lists(st.integers(-10**30, 10**30), min_size=rows * cols,
                                    max_size=rows * cols)), dtype=object).reshape(rows, cols)
    (b,) = serialize.parse_blocks(serialize.format_block("X", M, [7]))
    assert b.kind == "X" and b.modulus == 7
    assert b.data.tolist() == M.tolist()


def test_key_and_param_round_trip(toy16):
    pp, pk, sk = toy16
    pp2 = serialize.load_params(serialize.dump_params(pp))
    assert pp2 == pp
    pk2 = serialize.load_public_key(serialize.dump_public_key(pk), pp2)
    assert pk2.A == pk.A and np.array_equal(pk2.H_n, pk.H_n) and np.array_equal(pk2.alpha, pk.alpha)
    sk2 = serialize.load_secret_key(serialize.dump_secret_key(sk), pp2)
    assert np.array_equal(sk2.T_A.basis, sk.T_A.basis)


@pytest.mark.parametrize("sig", [
    Signature(np.arange(16, dtype=np.int64) - 8, index=2),
    Signature(np.arange(16, dtype=np.int64), func=LinearFunc((1, -1, 0, 1), 3)),
    Signature(np.zeros(16, dtype=np.int64), index=1, degraded=True),
])
def test_signature_round_trip(toy16, sig):
    pp, _, _ = toy16
    back = serialize.load_signature(serialize.dump_signature(sig), pp)
    assert back == sig and back.degraded == sig.degraded


def test_message_round_trip(toy16):
    pp, _, _ = toy16
    m = RandomStream(b"m").randbelow(3, 16)
    assert np.array_equal(serialize.load_message(serialize.dump_message(m, 3), pp), m)


@pytest.mark.parametrize("text, fragment", [
    ("", "no LHS1 blocks"),
    ("LHS2 sig 1 16\n", "expected 'LHS1' header"),
    ("LHS1 sig 1\n", "header needs kind, rows and cols"),
    ("LHS1 sig one 16\n", "rows/cols must be integers"),
    ("LHS1 sig 0 16\n", "dimensions must be positive"),
    ("LHS1 sig 1 16\n1 2 x\n", "non-integer token"),
    ("LHS1 sig 1 16\n1 2 3\n", "expected 16 integers, found 3"),
    ("LHS1 sig 1 4 fresh:1\n1 2 3 4\n", "signature has shape (1, 4), expected (1, 16)"),
    ("LHS1 sig 1 16 weird\n" + " ".join(["0"] * 16) + "\n", "unknown signature provenance"),
    ("LHS1 msg 1 16 3\n" + " ".join(["0"] * 16) + "\n", "expected exactly one 'sig' block"),
])
def test_malformed_signature_messages(toy16, text, fragment):
    pp, _, _ = toy16
    with pytest.raises(serialize.FormatError) as info:
        serialize.load_signature(text, pp)
    assert fragment in str(info.value)


def test_public_key_errors_are_specific(toy16):
    pp, pk, _ = toy16
    text = serialize.dump_public_key(pk)
    with pytest.raises(serialize.FormatError, match="modulus 98, expected 97"):
        serialize.load_public_key(text.replace("LHS1 A 2 16 97", "LHS1 A 2 16 98"), pp)
    bad = pk.A.entries.copy()
    bad[0, 0] = 500
    with pytest.raises(serialize.FormatError, match=r"outside \[0, 97\)"):
        serialize.load_public_key(serialize.format_block("A", bad, [97]) + serialize.format_block("H", pk.H_n)
                                  + serialize.format_block("alpha", pk.alpha, [97]), pp)
    with pytest.raises(serialize.FormatError, match="expected exactly one 'alpha' block"):
        serialize.load_public_key(text.split("LHS1 alpha")[0], pp)


def test_size_report_object_counts(toy16):
    pp, pk, sk = toy16
    r = RandomStream(b"size")
    sig = scheme.sign(sk, pk, r.bits(16), r.randbelow(3, 16), 1, r)
    rep = serialize.size_report(pk, sk, sig)
    assert rep["pk_objects"] == {"matrix_hxn": 1, "hadamard_nxn": 1, "vectors_len_h": pp.k}
    assert rep["sk_objects"] == {"matrix_nxn": 1}
    assert rep["sig_objects"] == {"vector_len_n": 1} and rep["sig_length"] == pp.n
    assert rep["compared_sig_length"] == 2 * pp.n
    assert rep["pk_bytes_A"] == pp.h * pp.n * 7 / 8  # ceil(log2 97) = 7 bits per residue


# --- command line ----------------------------------------------------------------

def test_keygen_is_byte_identical(tmp_path, keydir, capsys):
    code, out, _ = run(capsys, "keygen", "--profile", "toy16", "--seed", "a1", "--out", tmp_path)
    assert code == 0 and "DEVIATION" in out
    for name in (cli.PK_PARAMS, cli.PK_FILE, cli.SK_FILE):
        assert (tmp_path / name).read_bytes() == (keydir / name).read_bytes()


def test_sign_eval_verify_pipeline(tmp_path, keydir, capsys):
    pp = serialize.load_params((keydir / cli.PK_PARAMS).read_text())
    code, tag, _ = run(capsys, "tag", "--profile", "toy16", "--seed", "07")
    tag = tag.strip()
    assert code == 0 and len(tag) == 16
    r = RandomStream(b"cli-msgs")
    msgs = [r.randbelow(pp.p, pp.n) for _ in range(pp.k)]
    before = {p.name: digest(p) for p in keydir.iterdir()}
    sig_paths = []
    for i, m in enumerate(msgs, start=1):
        path = tmp_path / f"s{i}.lhs"
        code, _, err = run(capsys, "sign", "--keys", keydir, "--tag", tag, "--index", i,
                           "--message", ",".join(map(str, m)), "--seed", f"0{i}", "--out", path)
        assert code == 0, err
        sig_paths.append(path)
    sig_digests = [digest(p) for p in sig_paths]
    coeffs = (1, -1, 0, 1)
    out_path = tmp_path / "e.lhs"
    code, _, err = run(capsys, "eval", "--keys", keydir, "--coeffs", "1,-1,0,1", "--sigs", *sig_paths,
                       "--out", out_path)
    assert code == 0, err
    f_m = LinearFunc(coeffs, pp.p).apply(msgs)
    code, out, _ = run(capsys, "verify", "--keys", keydir, "--tag", tag, "--message",
                       ",".join(map(str, f_m)), "--sig", out_path)
    assert code == 0 and "accepted=1" in out
    # wrong message is rejected with exit 1
    code, out, _ = run(capsys, "verify", "--keys", keydir, "--tag", tag, "--message",
                       ",".join(map(str, (f_m + 1) % pp.p)), "--sig", out_path)
    assert code == 1 and "failed_condition=2" in out
    # no input was touched
    assert {p.name: digest(p) for p in keydir.iterdir()} == before
    assert [digest(p) for p in sig_paths] == sig_digests


def test_message_file_input(tmp_path, keydir, capsys):
    pp = serialize.load_params((keydir / cli.PK_PARAMS).read_text())
    m = np.arange(pp.n) % pp.p
    (tmp_path / "m.lhs").write_text(serialize.dump_message(m, pp.p))
    tag = "01" * 8
    code, _, err = run(capsys, "sign", "--keys", keydir, "--tag", tag, "--index", 1,
                       "--message", f"@{tmp_path / 'm.lhs'}", "--out", tmp_path / "s.lhs", "--seed", "0")
    assert code == 0, err
    code, _, _ = run(capsys, "verify", "--keys", keydir, "--tag", tag, "--message",
                     f"@{tmp_path / 'm.lhs'}", "--sig", tmp_path / "s.lhs")
    assert code == 0


def test_refuses_to_overwrite_input(tmp_path, keydir, capsys):
    sig = tmp_path / "s.lhs"
    run(capsys, "sign", "--keys", keydir, "--tag", "1" * 16, "--index", 1, "--message",
        ",".join(["0"] * 16), "--out", sig, "--seed", "0")
    before = digest(sig)
    code, _, err = run(capsys, "eval", "--keys", keydir, "--coeffs", "1,0,0,0",
                       "--sigs", sig, sig, sig, sig, "--out", sig)
    assert code == 2 and "refusing to overwrite" in err
    assert digest(sig) == before


@pytest.mark.parametrize("argv, fragment", [
    (["verify", "--keys", "/nonexistent", "--tag", "0", "--message", "0", "--sig", "x"], "No such file"),
    (["params", "--profile", "nosuch"], "unknown profile"),
    (["keygen", "--profile", "toy16", "--seed", "zz", "--out", "/tmp/unused-lhsig"], "hex string"),
])
def test_errors_exit_2_with_distinct_messages(argv, fragment, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2 and fragment in err


def test_bad_tag_and_dimension(keydir, tmp_path, capsys):
    code, _, err = run(capsys, "sign", "--keys", keydir, "--tag", "0101", "--index", 1,
                       "--message", ",".join(["0"] * 16), "--out", tmp_path / "s")
    assert code == 2 and "tag has length 4, expected n=16" in err
    code, _, err = run(capsys, "sign", "--keys", keydir, "--tag", "0" * 16, "--index", 1,
                       "--message", "0,1", "--out", tmp_path / "s")
    assert code == 2 and "message has 2 entries, expected n=16" in err


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--bogus"])
    assert info.value.code == 2


def test_sizes_report(keydir, capsys):
    code, out, _ = run(capsys, "sizes", "--keys", keydir)
    assert code == 0
    assert "sig_objects=1 integer vector length 16" in out
    assert "sk_objects=1 integer matrix 16x16" in out
    assert "pk_objects=1 matrix 2x16 mod q + 1 Hadamard descriptor order 16 + 4 vectors length 2 mod q" in out
    assert "compared_sig_length=32" in out
    assert out.splitlines()[0].startswith("DEVIATION")


def test_params_file_and_env_profile(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "profile.json"
    cfg.write_text('{"name": "toy16-257", "seed": "beef"}')
    monkeypatch.setenv("LHSIG_PROFILE", str(cfg))
    code, out, _ = run(capsys, "params", "--out", tmp_path / "p.json")
    assert code == 0 and "q=257" in out
    assert serialize.load_params((tmp_path / "p.json").read_text()).q == 257


def test_game_report(capsys):
    code, out, _ = run(capsys, "game", "--game", "ust-scma", "--adversary", "whitebox-2",
                       "--trials", 2, "--seed", "0c", "--profile", "toy16")
    assert code == 0
    lines = dict(l.split("=", 1) for l in out.splitlines() if "=" in l and not l.startswith("DEVIATION"))
    assert lines["class_II"] == "2" and lines["extraction_success"] == "1.0000"
    code2, out2, _ = run(capsys, "game", "--game", "ust-scma", "--adversary", "whitebox-2",
                         "--trials", 2, "--seed", "0c", "--profile", "toy16")
    assert out2 == out


def test_probe_reports(capsys):
    code, out, _ = run(capsys, "probe", "--kind", "uniformity", "--trials", 3000, "--seed", "1")
    assert code == 0 and "passed=1" in out
    code, out, _ = run(capsys, "probe", "--kind", "context-hiding", "--trials", 60, "--seed", "1")
    assert code == 0 and "WARNING" in out
