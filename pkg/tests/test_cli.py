import subprocess
import sys

import pytest

from makekex.cli import main, parse_records, squaring_multiplications
from makekex.paramgen import load_params, validate_params


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    recs = parse_records(out)
    merged = {}
    for r in recs:
        merged.update(r)
    return code, merged, recs


def test_gen_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    assert run(capsys, "gen", "--bits", "16", "--seed", "7", "--out", str(a))[0] == 0
    code, rec, _ = run(capsys, "gen", "--bits", "16", "--seed", "7", "--out", str(b))
    assert code == 0 and rec["valid"] == "true"
    assert a.read_bytes() == b.read_bytes()
    params = load_params(a.read_bytes())
    assert params.p.bit_length() == 16 and not validate_params(params)


def test_gen_hex_roundtrip(tmp_path, capsys):
    out = tmp_path / "p.hex"
    run(capsys, "gen", "--bits", "20", "--dim", "2", "--seed", "3", "--hex", "--out", str(out))
    text = out.read_text()
    assert all(len(line) <= 64 for line in text.splitlines())
    assert load_params(text.encode()).dim == 2


def test_gen_builtin_prime(tmp_path, capsys):
    out = tmp_path / "big.bin"
    code, rec, _ = run(capsys, "gen", "--builtin-prime", "--seed", "1", "--out", str(out))
    assert code == 0 and rec["prime_bits"] == "2000"


def test_gen_weak_params_flagged(tmp_path, capsys):
    code, rec, _ = run(capsys, "gen", "--bits", "20", "--seed", "1", "--allow-invertible-h", "--out", str(tmp_path / "w"))
    assert code == 0 and rec["valid"] == "false"
    assert "det(H1)_!=_0" in rec["violations"]


def test_exchange(capsys):
    code, rec, _ = run(capsys, "exchange", "--bits", "32", "--seed", "5")
    assert code == 0 and rec["key_agree"] == "true"
    assert rec["alice_digest"] == rec["bob_digest"] and len(rec["alice_digest"]) == 64


def test_exchange_from_file(tmp_path, capsys):
    path = tmp_path / "p.bin"
    run(capsys, "gen", "--bits", "24", "--dim", "2", "--seed", "2", "--out", str(path))
    code, rec, _ = run(capsys, "exchange", "--params", str(path))
    assert code == 0 and rec["dim"] == "2"


def test_attack_det_on_compliant_params(capsys):
    code, rec, _ = run(capsys, "attack", "det", "--bits", "16", "--seed", "1")
    assert code == 3
    assert rec["applicable"] == "false" and rec["reason"] == "det(H1H2)=0"


def test_attack_det_on_weak_params(capsys):
    code, rec, _ = run(capsys, "attack", "det", "--bits", "20", "--seed", "4", "--allow-invertible-h")
    assert code == 0
    assert rec["recovered_exponent"] == rec["secret"]
    assert rec["key_matches_honest"] == "true"


def test_attack_brute(capsys):
    code, rec, _ = run(capsys, "attack", "brute", "--bits", "16", "--seed", "2", "--secret", "300")
    assert code == 0 and rec["recovered_exponent"] == "300" and rec["key_matches_honest"] == "true"
    code, rec, _ = run(capsys, "attack", "brute", "--bits", "16", "--seed", "2", "--secret", "300", "--bound", "100")
    assert code == 3 and rec["success"] == "false"


def test_attack_dlreduce(capsys):
    code, rec, _ = run(capsys, "attack", "dlreduce", "--prime", "2027", "--g", "2", "--k", "1234", "--seed", "0")
    assert code == 0
    assert pow(2, int(rec["recovered_k"]), 2027) == pow(2, 1234, 2027)


def test_stats_entry_and_pair(tmp_path, capsys):
    csv = tmp_path / "e.csv"
    code, rec, recs = run(capsys, "stats", "entry", "--bits", "24", "--trials", "120", "--seed", "1", "--csv", str(csv))
    assert code == 0
    row = next(r for r in recs if "test" in r)
    assert row["test"] == "entry(0,0)" and row["cells"] == "10"
    lines = csv.read_text().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count" and len(lines) == 11
    code, _, recs = run(capsys, "stats", "pair", "--bits", "24", "--trials", "1000", "--seed", "1")
    assert code == 0 and next(r for r in recs if "test" in r)["cells"] == "100"


def test_stats_suite_writes_csv_dir(tmp_path, capsys):
    out = tmp_path / "hist"
    code, _, recs = run(capsys, "stats", "suite", "--bits", "24", "--dim", "2", "--trials", "1000", "--seed", "3", "--csv", str(out))
    assert code == 0
    rows = [r for r in recs if "test" in r]
    assert len(rows) == len(list(out.iterdir()))
    assert {"entry(0,0)", "mean(all)", "mean(col0)", "mean(row1)"} <= {r["test"] for r in rows}


def test_stats_undersampled_is_usage_error(capsys):
    assert main(["stats", "pair", "--bits", "24", "--trials", "50", "--seed", "1"]) == 2


def test_bench_small(capsys):
    code, rec, recs = run(capsys, "bench", "--bits", "32,64", "--trials", "1", "--seed", "1")
    assert code == 0
    rows = [r for r in recs if "ratio" in r]
    assert [r["bits"] for r in rows] == ["32", "64"]
    assert rec["stated_mults_per_squaring"] == "24"
    assert rec["zp_mults_per_sd_squaring"] == "108"


def test_squaring_multiplication_count():
    assert squaring_multiplications(3) == (108, 27)
    assert squaring_multiplications(2) == (32, 8)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["gen"],
        ["gen", "--bits", "2", "--out", "x"],
        ["stats", "entry", "--pos", "0,1", "--trials", "10"],
        ["stats", "mean", "--select", "diag", "--bits", "16", "--trials", "100"],
        ["attack", "det", "--prime", "15"],
        ["connect", "--remote", "nowhere"],
    ],
)
def test_usage_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_serve_connect_processes(tmp_path):
    cmd = [sys.executable, "-m", "makekex.cli"]
    server = subprocess.Popen(
        cmd + ["serve", "--listen", "127.0.0.1:0", "--bits", "32", "--seed", "1", "--timeout", "30"],
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        first = server.stdout.readline().strip()
        assert first.startswith("listening=")
        addr = first.split("=", 1)[1]
        client = subprocess.run(cmd + ["connect", "--remote", addr, "--seed", "2"], capture_output=True, text=True, timeout=60)
        out, _ = server.communicate(timeout=60)
    finally:
        server.kill()
    assert client.returncode == 0 and server.returncode == 0
    c, s = parse_records(client.stdout), parse_records(out)
    c_digest = next(r["digest"] for r in c if "digest" in r)
    s_digest = next(r["digest"] for r in s if "digest" in r)
    assert c_digest == s_digest
