import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cbplab import cli

BALL = '{"family":"euclidean_ball","n":3}'


def run(argv):
    buf = io.StringIO()
    code = cli.run(argv, stdout=buf)
    return code, buf.getvalue()


def test_volume_record(tmp_path):
    p = tmp_path / "ball.json"
    p.write_text(BALL)
    code, out = run(["volume", "--body", str(p)])
    assert code == 0
    rec = json.loads(out)
    assert rec["value"] == pytest.approx(math.pi**3 / 6, rel=1e-12)
    assert rec["seed"] == 0 and rec["body"] and rec["command"] == "volume"


def test_frac_action_record():
    code, out = run(["frac-action", "--body", BALL, "--p", "0", "--q", "1"])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(23.3246, rel=1e-5)


def test_lemma4_csv_row():
    code, out = run(["lemma4", "--n", "3", "--alpha", "-0.5", "--N", "1e4"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["negative"] == "true" and rows[0]["status"] == "negative"


def test_json_and_csv_same_numbers():
    _, j = run(["lemma4", "--n", "3", "--alpha", "-0.5", "--N", "1,100", "--format", "json"])
    _, c = run(["lemma4", "--n", "3", "--alpha", "-0.5", "--N", "1,100", "--format", "csv"])
    jrows = [json.loads(x) for x in j.splitlines()]
    crows = list(csv.DictReader(io.StringIO(c)))
    for a, b in zip(jrows, crows):
        assert float(b["integral_value"]) == a["integral_value"]
        assert float(b["err"]) == a["err"]


def test_float_format_roundtrips():
    _, out = run(["volume", "--body", BALL])
    text = out.split('"value":')[1].split(",")[0]
    assert len(text.replace(".", "").lstrip("0")) >= 16


@pytest.mark.parametrize(
    "argv, code",
    [
        (["frobnicate"], 64),
        (["volume", "--body", BALL, "--bogus"], 64),
        (["volume"], 64),
        (["lemma4", "--n", "3", "--alpha", "-0.5"], 64),
        (["lemma4", "--n", "3", "--alpha", "1.0", "--N", "1"], 2),
        (["volume", "--body", '{"family":"cube","n":3}'], 2),
        (["volume", "--body", "/no/such/file.json"], 2),
        (["ft-norm", "--body", BALL, "--q", "5"], 2),
        (["theorem-pos", "--K", BALL, "--L", BALL, "--alpha", "-1"], 2),
    ],
)
def test_exit_codes(argv, code):
    assert run(argv)[0] == code


def test_indeterminate_exit_code(monkeypatch):
    from cbplab.counterexample import CertificateResult

    fake = CertificateResult(3, -0.5, 1.0, 2.5, 1, 1, 1, -1, "closed_form", 0.0, 1.0, 0.0, "indeterminate")
    monkeypatch.setattr(cli, "lemma4_certificate", lambda *a, **k: fake)
    assert run(["lemma4", "--n", "3", "--alpha", "-0.5", "--N", "1"])[0] == 3


def test_output_file_and_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("CBPLAB_SEED", "7")
    out = tmp_path / "r.jsonl"
    code, text = run(["volume", "--body", '{"family":"complex_lp","n":2,"r":3}', "--output", str(out)])
    assert code == 0 and text == ""
    assert json.loads(out.read_text())["seed"] == 7


def test_every_subcommand_runs():
    ce = '{"family":"counterexample","n":3,"alpha":-0.5,"N":100}'
    cmds = [
        ["section", "--body", BALL, "--psi", "0.3"],
        ["afunction", "--body", ce, "--t", "0,0.1"],
        ["ft-norm", "--body", ce, "--q", "1", "--p", "0.5", "--psi", "1.0"],
        ["frac-laplace", "--body", ce, "--alpha", "1"],
        ["posdef-scan", "--body", BALL, "--q", "1", "--psi-points", "3"],
        ["brunn", "--body", ce, "--q", "1"],
        ["parseval", "--K", BALL, "--L", BALL, "--p", "2", "--psi-order", "8"],
        ["scaling", "--n", "3", "--alpha", "-0.5", "--lo", "1", "--hi", "1e4", "--per-decade", "1"],
        ["mixed-integral", "--K", ce, "--L", BALL, "--a", "2", "--b", "4"],
        ["theorem-pos", "--K", '{"family":"dilate","lambda":0.9,"inner":' + BALL + "}", "--L", BALL, "--alpha", "0",
         "--psi-points", "3"],
        ["theorem-neg", "--n", "3", "--alpha", "-0.5", "--N", "1e4"],
    ]
    for c in cmds:
        code, out = run(c)
        assert code == 0, c
        assert out.strip()


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "cbplab.cli", "volume", "--body", BALL], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["value"] == pytest.approx(math.pi**3 / 6)
