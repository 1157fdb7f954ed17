import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lpsantalo import cli, functions as F


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_mahler_json(capsys):
    code, out, _ = run(["mahler", "--function", "quadratic:dim=1", "--p", "1"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["value"] == pytest.approx(4 * math.pi, rel=1e-10)


def test_mahler_closed_form_conflicts_with_quadrature_flags(capsys):
    code, _, err = run(["mahler", "--function", "l1", "--p", "1", "--method", "closed_form",
                        "--quad-scheme", "adaptive"], capsys)
    assert code == 2 and "usage error" in err


def test_output_is_deterministic(capsys):
    args = ["transform", "--function", "funcsimplex", "--p", "2", "--y", "0.1;-1.5;1.4"]
    _, a, _ = run(args, capsys)
    _, b, _ = run(args, capsys)
    assert a == b
    assert list(json.loads(a)) == sorted(json.loads(a))


def test_infinite_values_are_strings(capsys):
    code, out, _ = run(["transform", "--function", "l1", "--p", "1", "--y", "0.5;3"], capsys)
    assert code == 0
    assert '"inf"' in out


def test_transform_csv(capsys):
    code, out, _ = run(["transform", "--function", "quadratic", "--p", "1", "--y", "0;1", "--out", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "y1,value" and len(lines) == 3
    assert float(lines[2].split(",")[1]) == pytest.approx(0.25 - 0.5 * math.log(2))


def test_volume_with_moments(capsys):
    code, out, _ = run(["volume", "--function", "translate(quadratic:dim=2, a=[1,-1])", "--moments"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["volume"] == pytest.approx(2 * math.pi)
    assert np.allclose(rep["barycenter"], [-1.0, 1.0], atol=1e-9)


def test_santalo(capsys):
    code, out, _ = run(["santalo", "--function", "translate(l1, a=[0.5])", "--p", "2"], capsys)
    assert code == 0
    assert json.loads(out)["point"][0] == pytest.approx(-0.5, abs=1e-8)


def test_flow_csv_columns(capsys):
    code, out, _ = run(["flow", "--function", "l1", "--p", "1", "--t-grid", "0,0.5", "--out", "csv"], capsys)
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header[:3] == ["t", "V", "Mp"] and "g" in header


def test_ball_asymptotics(capsys):
    code, out, _ = run(["ball-asymptotics", "--p", "1", "--n-max", "5"], capsys)
    assert code == 0
    rows = json.loads(out)["rows"] if isinstance(json.loads(out), dict) else json.loads(out)
    assert len(rows) == 3
    assert all(r["bracket_ok"] for r in rows)


def test_scan(capsys):
    code, out, _ = run(["scan", "--family", "l1;cube", "--p", "1"], capsys)
    assert code == 0
    recs = json.loads(out)
    recs = recs["records"] if isinstance(recs, dict) else recs
    assert [r["violation"] for r in recs] == [False, False]


def test_verify_quick_module(capsys):
    code, out, err = run(["verify", "--suite", "specfun"], capsys)
    assert code == 0
    assert "PASS" in err


def test_unknown_function_is_usage_error(capsys):
    code, _, err = run(["mahler", "--function", "hexagon", "--p", "1"], capsys)
    assert code == 2 and "unknown function" in err


@pytest.mark.parametrize("spec", ["translate(l1", "l1:dim=x", "cube:width=2", "translate(l1, a=[1,2)"])
def test_malformed_specs(spec):
    with pytest.raises(cli.UsageError):
        cli.parse_function(spec)


def test_function_grammar():
    f = cli.parse_function("tensor(funcsimplex, scale(l1, l=2), cube:half_width=0.5)")
    assert f.dim == 3
    assert f([0.0, 2.0, 0.1]) == pytest.approx(0.0 + 2 * (2.0 / 2) + 0.0)
    g = cli.parse_function("ball:dim=2,radius=2")
    assert g([1.5, 1.0]) == 0.0


def test_grid_function_file(tmp_path, capsys):
    path = tmp_path / "g.csv"
    F.write_grid_csv(F.GridSampled.sample(F.Quadratic(1), F.GridSpec.cube(1, 12.0, 2401)), path)
    code, out, _ = run(["volume", "--function", f"grid@{path}"], capsys)
    assert code == 0
    assert json.loads(out)["volume"] == pytest.approx(math.sqrt(2 * math.pi), rel=1e-4)
    code, _, _ = run(["volume", "--function", f"grid@{tmp_path / 'missing.csv'}"], capsys)
    assert code == 2


def test_domain_error_exit_code(capsys):
    code, _, err = run(["mahler", "--function", "l1", "--p", "-1"], capsys)
    assert code == 1 and "DomainError" in err


def test_precedence_flag_env_config(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.conf"
    cfg.write_text("# settings\np = 2\nfunction = l1\n")
    _, out, _ = run(["mahler", "--config", str(cfg)], capsys)
    at_two = json.loads(out)["value"]
    monkeypatch.setenv("LPS_P", "1")
    _, out, _ = run(["mahler", "--config", str(cfg)], capsys)
    at_one = json.loads(out)["value"]
    _, out, _ = run(["mahler", "--config", str(cfg), "--p", "2"], capsys)
    assert json.loads(out)["value"] == at_two
    assert at_one == pytest.approx(32 / 3, rel=1e-10)


def test_output_file(tmp_path, capsys):
    target = tmp_path / "m.json"
    code, out, _ = run(["mahler", "--function", "l1", "--p", "1", "--output", str(target)], capsys)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["value"] == pytest.approx(32 / 3)


def test_csv_without_csv_form(capsys):
    code, _, _ = run(["santalo", "--function", "l1", "--p", "1", "--out", "csv"], capsys)
    assert code == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "lpsantalo.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
