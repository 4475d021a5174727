import json

import numpy as np
import pytest

from bvlab import cli
from bvlab import localcoeffs as lc
from conftest import TAU_CACHE


@pytest.fixture(autouse=True)
def _env(monkeypatch, tmp_path):
    monkeypatch.setenv("BVLAB_TAU_CACHE", str(TAU_CACHE))
    monkeypatch.delenv("BVLAB_SEED", raising=False)
    monkeypatch.chdir(tmp_path)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_all_passes(capsys, tau):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "suite,check,passed"
    assert len(lines) > 15 and all(line.endswith(",1") for line in lines[1:])


def test_verify_catches_sign_flip(capsys, monkeypatch, tau, tmp_path):
    real = lc.mu_pk

    def broken(params, k):
        v = real(params, k)
        return -v if k == 1 else v

    monkeypatch.setattr(lc, "mu_pk", broken)
    code, out, _ = run(capsys, "verify", "inequalities", "--manifest", str(tmp_path / "m.json"))
    assert code != 0
    payload = json.loads(out)
    assert not payload["passed"]
    dumps = [f["counterexample"] for f in payload["failures"] if f.get("counterexample")]
    assert any(d["inequality_id"] == "ineq-pk" for d in dumps)
    assert json.loads((tmp_path / "m.json").read_text())["status"] == "failed"


def test_bv_deterministic_across_threads(capsys, tau, tmp_path):
    args = ("bv", "--pi", "delta", "--ladder", "1e3,1e4", "--seed", "5")
    code1, out1, _ = run(capsys, *args, "--threads", "1")
    code2, out2, _ = run(capsys, *args, "--threads", "3")
    assert code1 == code2 == 0
    assert out1 == out2
    assert out1.splitlines()[0] == "x,Q,D,D_over_x,pi,eta,B,A"


def test_bv_out_and_manifest(capsys, tau, tmp_path):
    out = tmp_path / "curve.json"
    code, _, _ = run(capsys, "bv", "--pi", "zeta", "--x", "1e3", "--format", "json", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["columns"][:3] == ["x", "Q", "D"]
    man = json.loads((tmp_path / "curve.json.manifest.json").read_text())
    assert man["status"] == "ok" and man["outputs"] == [str(out)]
    assert man["config"]["experiment"]["pi"] == "zeta"
    assert man["finished"] is not None


def test_usage_error_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "titchmarsh", "--x", "1e3")
    assert code == 2 and "--pi" in err
    man = json.loads((tmp_path / "bvlab-titchmarsh.manifest.json").read_text())
    assert man["status"] == "usage-error"
    with pytest.raises(SystemExit) as e:
        cli.main(["bv", "--pi", "nonsense"])
    assert e.value.code == 2


def test_manifest_records_tau(capsys, tau, tmp_path):
    code, _, _ = run(capsys, "titchmarsh", "--pi", "delta", "--x", "1e3", "--manifest", "t.json")
    assert code == 0
    man = json.loads((tmp_path / "t.json").read_text())
    assert man["versions"]["tau_sha256"] == tau.digest()
    assert man["versions"]["tau_N"] == 10**6


def test_config_precedence(tmp_path, monkeypatch):
    ini = tmp_path / "c.ini"
    ini.write_text("seed = 11\npi = sym2-delta\neta = 1.5\n")
    parser = cli.build_parser()
    opts = cli.resolve(parser.parse_args(["bv", "--config", str(ini), "--eta", "2.5"]), parser)
    assert opts["seed"] == 11 and opts["pi"] == "sym2-delta" and opts["eta"] == 2.5
    monkeypatch.setenv("BVLAB_SEED", "7")
    assert cli.resolve(parser.parse_args(["bv"]), parser)["seed"] == 7
    assert cli.resolve(parser.parse_args(["bv", "--seed", "3", "--config", str(ini)]), parser)["seed"] == 3
    monkeypatch.delenv("BVLAB_SEED")
    assert cli.resolve(parser.parse_args(["bv"]), parser)["seed"] == 0


def test_lfunc_eval_schema(capsys, tau):
    code, out, _ = run(capsys, "lfunc", "eval", "--s", "1", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["columns"] == ["d", "s_re", "s_im", "value_re", "value_im", "truncation", "est_error"]
    row = rep["rows"][0]
    assert row["value_re"] == pytest.approx(0.8393455120319421, abs=1e-10)
    assert rep["meta"]["root_number"] == pytest.approx([1.0, 0.0], abs=1e-8)
    code, out, _ = run(capsys, "lfunc", "eval", "--s", "0.5", "--d", "-3", "--format", "json")
    assert code == 0 and abs(json.loads(out)["rows"][0]["value_re"]) < 1e-8  # root number -1
    code, _, _ = run(capsys, "lfunc", "eval", "--s", "0.5", "--d", "9")
    assert code == 2


def test_lfunc_second_moment_range(capsys, tau):
    code, out, _ = run(capsys, "lfunc", "second-moment", "--Q", "1,3,4")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "Q,t,moment,bound,ratio" and len(lines) == 4
    assert cli._int_range("10..40") == [10, 20, 30, 40]
    m = np.array([float(l.split(",")[2]) for l in lines[1:]])
    assert np.all(np.diff(m) >= 0)
