import json
import math

import numpy as np
import pytest

import bspec.cli as cli
from bspec.cli import main, parse_angle
from bspec.regularity import IRREGULAR
from bspec.serialize import dumps, fmt_float


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name, code", [("dirichlet", 0), ("cauchy0", 2), ("periodic", 0), ("malformed", 1)])
def test_analyze_exit_codes(capsys, problems_dir, name, code):
    rc, out, err = run(capsys, "analyze", problems_dir / f"{name}.json")
    assert rc == code
    if code == 1:
        assert "malformed JSON" in err
    else:
        doc = json.loads(out)
        assert doc["regularity"]["classification"] in ("strongly-regular", "regular", "irregular")


def test_analyze_dirichlet_content(capsys, problems_dir):
    _, out, _ = run(capsys, "analyze", problems_dir / "dirichlet.json")
    doc = json.loads(out)
    reg = doc["regularity"]
    assert reg["classification"] == "strongly-regular"
    assert reg["theta_forward"] == {"re": 1.0, "im": 0.0}
    assert doc["dissipativity"]["verdict"] == "self-adjoint"


def test_theta_csv(capsys, problems_dir):
    rc, out, _ = run(capsys, "theta", problems_dir / "periodic.json", "--format", "csv")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("p,")
    assert len(lines) == 4


def test_ray_sweep_csv_single_point(capsys, problems_dir):
    rc, out, _ = run(capsys, "ray-sweep", problems_dir / "dirichlet.json", "--format", "csv",
                     "--rho-grid", "40", "--no-resolvent")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0].split(",")[:2] == ["abs_rho", "arg_rho"]
    assert len(lines) == 3
    assert lines[-1].startswith("# summary fitted_order=none p=1")
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(row["A_01_re"]) == pytest.approx(1 / (2 * np.pi), rel=1e-6)
    assert row["status"] == "ok"


def test_ray_sweep_json_fit(capsys, problems_dir):
    rc, out, _ = run(capsys, "ray-sweep", problems_dir / "dirichlet.json", "--rho-grid", "20,40,80", "--format", "json",
                     "--no-resolvent")
    doc = json.loads(out)
    assert rc == 0 and doc["summary"]["points"] == 3
    devs = [r["a_deviation"] for r in doc["rows"]]
    assert devs[0] > devs[1] > devs[2]


def test_ray_sweep_irregular(capsys, problems_dir):
    rc, _, err = run(capsys, "ray-sweep", problems_dir / "cauchy0.json")
    assert rc == 2 and "irregular" in err


def test_ray_sweep_bad_grid(capsys, problems_dir):
    rc, _, err = run(capsys, "ray-sweep", problems_dir / "dirichlet.json", "--rho-grid", "40,20")
    assert rc == 1 and "increasing" in err


def test_eig_json(capsys, problems_dir):
    rc, out, _ = run(capsys, "eig", problems_dir / "dirichlet.json", "--rect=0.5,10,-1,1")
    assert rc == 0
    items = json.loads(out)
    lam = [e["lambda"]["re"] for e in items]
    np.testing.assert_allclose(lam, [(k * np.pi) ** 2 for k in (1, 2, 3)], rtol=1e-8)
    assert all(e["multiplicity"] == 1 for e in items)


def test_eig_cauchy_empty(capsys, problems_dir):
    rc, out, _ = run(capsys, "eig", problems_dir / "cauchy0.json")
    assert rc == 0 and json.loads(out) == []


def test_green_points(capsys, problems_dir):
    rc, out, _ = run(capsys, "green", problems_dir / "dirichlet.json", "--lambda", "-1", "--x", "0.25",
                     "--xi", "0.5")
    assert rc == 0
    doc = json.loads(out)
    G = doc["values"][0]["G"]["re"]
    assert G == pytest.approx(math.sinh(0.25) * math.sinh(0.5) / math.sinh(1), rel=1e-12)


def test_green_at_eigenvalue(capsys, problems_dir):
    rc, _, err = run(capsys, "green", problems_dir / "dirichlet.json", "--lambda", str(np.pi**2))
    assert rc == 1 and "near-eigenvalue" in err


def test_dissip_sample_and_test(capsys, tmp_path):
    rc, out, _ = run(capsys, "dissip", "sample", "--orders", "2,4", "--samples", "2", "--seed", "5")
    assert rc == 0
    docs = json.loads(out)
    assert len(docs) == 4
    assert docs[0]["meta"]["seed"] == 5 and docs[0]["meta"]["mode"] == "dissipative"
    path = tmp_path / "s.json"
    path.write_text(json.dumps(docs[3]))
    rc, out, _ = run(capsys, "dissip", "test", path)
    assert rc == 0
    assert json.loads(out)["dissipativity"]["verdict"] in ("dissipative", "self-adjoint")


def test_dissip_test_needs_problem(capsys):
    rc, _, err = run(capsys, "dissip", "test")
    assert rc == 1


def test_verify_krein_deterministic(capsys, monkeypatch):
    monkeypatch.setenv("BSPEC_THREADS", "2")
    rc1, out1, _ = run(capsys, "verify-krein", "--samples", "20")
    monkeypatch.setenv("BSPEC_THREADS", "1")
    rc2, out2, _ = run(capsys, "verify-krein", "--samples", "20")
    assert rc1 == rc2 == 0
    assert out1 == out2
    doc = json.loads(out1)
    assert doc["total_irregular"] == 0
    assert [o["samples"] for o in doc["orders"]] == [20, 20]


def test_verify_krein_counterexample(capsys, monkeypatch):
    real = cli.classify

    def broken(bc, tol):
        rep = real(bc, tol)
        rep.classification = IRREGULAR
        return rep

    monkeypatch.setattr(cli, "classify", broken)
    rc, out, err = run(capsys, "verify-krein", "--samples", "2", "--orders", "2")
    assert rc == 3
    assert "irregular sample" in err
    assert len(json.loads(out)["counterexamples"]) == 2


def test_verify_krein_rejects_odd(capsys):
    rc, _, err = run(capsys, "verify-krein", "--orders", "3", "--samples", "1")
    assert rc == 1 and "even" in err


def test_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("BSPEC_THREADS", "many")
    rc, _, err = run(capsys, "verify-krein", "--samples", "1")
    assert rc == 1 and "BSPEC_THREADS" in err


def test_parse_angle():
    assert parse_angle("3pi/2") == pytest.approx(1.5 * np.pi)
    assert parse_angle("-pi") == pytest.approx(-np.pi)
    assert parse_angle("0.25") == 0.25


def test_seventeen_digit_output():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(2.0) == "2.0"
    assert fmt_float(float("nan")) == "NaN"
    text = dumps({"z": 1 / 3 + 2j})
    assert '"re": 0.33333333333333331' in text
    assert json.loads(text)["z"]["im"] == 2.0


def test_out_file(capsys, problems_dir, tmp_path):
    target = tmp_path / "theta.json"
    rc, out, _ = run(capsys, "theta", problems_dir / "dirichlet.json", "--out", target)
    assert rc == 0 and out == ""
    assert json.loads(target.read_text())
