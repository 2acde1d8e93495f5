import csv

import numpy as np
import pytest

from l1bp.cli import main
from l1bp.instance_gen import load_instance


def run(capsys, *args):
    code = main(list(args))
    return code, capsys.readouterr()


def test_gen_then_bp(tmp_path, capsys):
    path = tmp_path / "inst.txt"
    code, _ = run(capsys, "gen", "--n", "400", "--j", "10", "--k", "20", "--rho", "0.1",
                  "--seed", "2", "--out", str(path))
    assert code == 0
    F, x, y = load_instance(path)
    assert F.n == 400 and F.m == 200
    code, out = run(capsys, "bp", "--in", str(path), "--out", str(tmp_path / "xhat.txt"))
    assert code == 0 and "success=True" in out.out
    np.testing.assert_allclose(np.loadtxt(tmp_path / "xhat.txt"), x.values, atol=1e-4)


def test_amp_generated(capsys):
    code, out = run(capsys, "amp", "--n", "400", "--rho", "0.05", "--seed", "1")
    assert code == 0 and "success=True" in out.out


def test_oracle(capsys):
    code, out = run(capsys, "oracle", "--n", "12", "--rho", "0.2", "--seed", "4")
    assert code == 0 and "certificate_ok=True" in out.out


def test_sweep_writes_outputs(tmp_path, capsys):
    agg, rec, chart = (tmp_path / n for n in ("a.csv", "r.csv", "c.svg"))
    code, out = run(capsys, "sweep", "--solver", "amp", "--n", "100", "--rho", "0", "0.1",
                    "--trials", "2", "--out", str(agg), "--records", str(rec),
                    "--chart", str(chart))
    assert code == 0
    assert out.out.splitlines()[0] == "solver,n,alpha,rho,trials,successes,p_success,stderr"
    rows = list(csv.DictReader(open(agg)))
    assert [r["rho"] for r in rows] == ["0.0", "0.1"] and rows[0]["p_success"] == "1.0"
    assert len(list(csv.DictReader(open(rec)))) == 4
    assert "<svg" in chart.read_text()


def test_de_with_range(capsys):
    code, out = run(capsys, "de", "--n", "200", "--j", "3", "--k", "6", "--rho-min", "0",
                    "--rho-max", "0.1", "--rho-step", "0.05", "--trials", "1")
    assert code == 0 and len(out.out.splitlines()) == 4


def test_se(tmp_path, capsys):
    path = tmp_path / "traj.csv"
    code, out = run(capsys, "se", "--alpha", "0.5", "--method", "closed", "--bisect-tol", "0.01",
                    "--rho", "0.1", "--iters", "4", "--out", str(path))
    assert code == 0 and "rho_c=" in out.out
    assert len(path.read_text().splitlines()) == 5


@pytest.mark.parametrize("args", [
    ("sweep", "--rho", "2"),
    ("sweep", "--trials", "0", "--rho", "0.1"),
    ("sweep", "--rho", "0.1", "--rho-min", "0"),
    ("sweep",),
    ("bp", "--j", "3"),
    ("amp", "--j", "3", "--k", "6"),
    ("gen", "--n", "10"),
    ("oracle", "--n", "40"),
])
def test_usage_errors_exit_1(capsys, args):
    code, out = run(capsys, *args)
    assert code == 1 and "error" in out.err


def test_argparse_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bp", "--n", "many"])
    assert exc.value.code == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    code, out = run(capsys, "bp", "--in", str(tmp_path / "missing.txt"))
    assert code == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("sparse 3 2 1\n")
    code, out = run(capsys, "bp", "--in", str(bad))
    assert code == 2 and "line" in out.err
    code, out = run(capsys, "sweep", "--n", "100", "--rho", "0.1", "--trials", "1",
                    "--out", str(tmp_path / "no" / "dir.csv"))
    assert code == 2
