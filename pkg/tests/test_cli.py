import io
import json

import pytest

from umdlpq.cli import EXIT_INPUT, EXIT_OK, EXIT_VERIFY, run


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def record(*argv):
    code, out = call(*argv)
    assert code == EXIT_OK, out
    return json.loads(out)


def test_constant_endpoint():
    rec = record("constant", "c", "--p", "inf", "--q", "1")
    assert rec["outputs"]["estimate"]["value"] == pytest.approx(1.5, abs=1e-6)
    assert rec["outputs"]["estimate"]["p"] == "inf"
    assert rec["seed"] == rec["config"]["optimizer"]["master_seed"]
    assert rec["command"][:2] == ["constant", "c"]


def test_determinism_modulo_wall_time():
    a = record("constant", "kappa", "--p", "2", "--q", "4", "--seed", "3", "--restarts", "2")
    b = record("constant", "kappa", "--p", "2", "--q", "4", "--seed", "3", "--restarts", "2")
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


@pytest.mark.parametrize("argv", [
    ("constant", "c", "--p", "0.5", "--q", "2"),
    ("constant", "c", "--p", "2"),
    ("constant", "kappa", "--p", "2", "--q", "2"),
    ("lower-bound", "--p", "2", "--q", "4", "--n", "0"),
    ("seq", "reduce", "1", "2"),
    ("verify", "/nonexistent/cert.json"),
    ("umd-search", "--s", "1"),
])
def test_invalid_input_exit_code(argv):
    assert call(*argv)[0] == EXIT_INPUT


def test_argparse_errors_use_input_code():
    assert call("constant", "zeta", "--p", "2", "--q", "4")[0] == EXIT_INPUT
    assert call("--version")[0] == EXIT_OK


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "opt.cfg"
    cfg.write_text("# optimizer\nmaster_seed = 9\nrestarts = 2  # few\n")
    rec = record("constant", "c", "--p", "2", "--q", "4", "--config", str(cfg))
    assert rec["seed"] == 9 and rec["config"]["optimizer"]["restarts"] == 2
    rec = record("constant", "c", "--p", "2", "--q", "4", "--config", str(cfg), "--seed", "4")
    assert rec["seed"] == 4
    cfg.write_text("not a pair\n")
    assert call("constant", "c", "--p", "2", "--q", "4", "--config", str(cfg))[0] == EXIT_INPUT


def test_csv_and_table_formats():
    code, out = call("seq", "reduce", "2", "3", "4", "--format", "csv")
    assert code == 0 and out.splitlines() == ["index,p", "0,2.0", "1,4.0"]
    code, out = call("seq", "reduce", "2", "3", "4", "--format", "table")
    assert code == 0 and out.splitlines()[0].split() == ["index", "p"]


def test_seq_commands():
    assert record("seq", "reduce", "2", "3", "4")["outputs"]["reduced"] == [2.0, 4.0]
    rec = record("seq", "diagnose", "3", "3", "3")
    assert rec["outputs"]["partial_products"] == [1.0, 1.0]


def test_lower_bound_and_verify(tmp_path):
    cert = tmp_path / "lb.json"
    rec = record("lower-bound", "--p", "2", "--q", "4", "--n", "2", "--out", str(cert))
    row = rec["rows"][0]
    assert row["n"] == 2 and row["slack"] >= -1e-6
    v = record("verify", str(cert))
    assert v["outputs"]["ok"] and v["outputs"]["recomputed"] >= row["ratio"] - 1e-9
    d = json.loads(cert.read_text())
    d["claimed_ratio"] += 0.01
    cert.write_text(json.dumps(d))
    assert call("verify", str(cert))[0] == EXIT_VERIFY


def test_umd_search_certificate(tmp_path):
    cert = tmp_path / "m.json"
    rec = record("umd-search", "--p", "2", "--q", "2", "--s", "2", "--depth", "2",
                 "--restarts", "2", "--max-iters", "150", "--out", str(cert))
    assert rec["outputs"]["estimate"]["value"] == pytest.approx(1.0, abs=1e-6)
    assert record("verify", str(cert))["outputs"]["type"] == "martingale"


def test_stein_and_hardy():
    rec = record("stein", "--s", "2", "--depth", "2", "--samples", "4")
    assert len(rec["rows"]) == 4 and rec["outputs"]["max_ratio"] <= 1 + 1e-12
    rec = record("hardy", "--p", "2", "--q", "4", "--u", "1", "--v", "1", "--w", "0.2", "--t", "0.9", "--N", "64")
    assert rec["outputs"]["two_atom_value"] == pytest.approx(1.0)
