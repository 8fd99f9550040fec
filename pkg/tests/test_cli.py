import json
import os
from pathlib import Path

import pytest

from varjet.cli import main

GOLDEN = Path(__file__).parent / "golden"

FREE_PARTICLE = """\
# free particle on the line
base = t
fiber = y
order = 1
lagrangian = (1/2)*u^2
"""

BEAM = """\
base = t
fiber = y
order = 2
lagrangian = (1/2)*y_tt^2
"""

SPHERE_STABILITY = """\
metric = sphere1
order = 1
solution = cos(t), sin(t)
trial = sin(t/2)*cos(t), sin(t/2)*sin(t)
t0 = 0
t1 = 2*pi
"""


@pytest.fixture
def free_spec(tmp_path):
    p = tmp_path / "free.vjp"
    p.write_text(FREE_PARTICLE)
    return str(p)


@pytest.fixture
def beam_spec(tmp_path):
    p = tmp_path / "beam.vjp"
    p.write_text(BEAM)
    return str(p)


@pytest.fixture
def sphere_spec(tmp_path):
    p = tmp_path / "sphere.vjp"
    p.write_text(SPHERE_STABILITY)
    return str(p)


class TestDerive:
    def test_golden_output(self, free_spec, capsys):
        assert main(["derive", "--spec", free_spec]) == 0
        out = capsys.readouterr().out
        expected = (GOLDEN / "derive_free_particle.txt").read_text()
        assert out == expected

    def test_beam_fourth_order(self, beam_spec, capsys):
        assert main(["derive", "--spec", beam_spec]) == 0
        out = capsys.readouterr().out
        assert "E[y] = y_tttt" in out
        assert "p[y]^tt = y_tt" in out

    def test_sphere_geodesic_equation(self, sphere_spec, capsys):
        assert main(["derive", "--spec", sphere_spec]) == 0
        out = capsys.readouterr().out
        assert "E[x1]" in out and "x1_tt" in out

    def test_json_schema(self, free_spec, capsys):
        assert main(["derive", "--spec", free_spec, "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["ok"] is True
        assert data["command"] == "derive"
        assert data["euler_lagrange"] == ["(* -1 y_tt)"]
        assert data["momenta"]["p1"] == [["y_t"]]

    def test_deterministic(self, free_spec, capsys):
        main(["derive", "--spec", free_spec, "--json"])
        first = capsys.readouterr().out
        main(["derive", "--spec", free_spec, "--json"])
        second = capsys.readouterr().out
        assert first == second


class TestJacobi:
    def test_pass(self, free_spec, capsys):
        assert main(["jacobi", "--spec", free_spec]) == 0
        out = capsys.readouterr().out
        assert "[PASS] tangency" in out

    def test_beam_pass(self, beam_spec, capsys):
        assert main(["jacobi", "--spec", beam_spec]) == 0
        out = capsys.readouterr().out
        assert "[PASS] tangency" in out

    def test_corrupted_momenta_fails(self, free_spec, capsys):
        assert main(["jacobi", "--spec", free_spec, "--corrupt-momenta"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] tangency" in out


class TestStability:
    def test_sphere_unstable_trial(self, sphere_spec, capsys, tmp_path):
        outdir = str(tmp_path / "out")
        assert main(["stability", "--spec", sphere_spec, "--out", outdir]) == 0
        out = capsys.readouterr().out
        assert "verdict: unstable" in out
        assert "conjugate point: 3.14159" in out
        assert (Path(outdir) / "eigenvalues.csv").exists()
        assert (Path(outdir) / "eigenvalues.png").exists()
        assert (Path(outdir) / "trial.csv").exists()
        assert (Path(outdir) / "trial.png").exists()
        header = (Path(outdir) / "eigenvalues.csv").read_text().splitlines()[0]
        assert header == "t,lambda1,lambda2"

    def test_json_values(self, sphere_spec, capsys):
        assert main(["stability", "--spec", sphere_spec, "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "unstable"
        assert abs(data["integral"] + 2.356194490192345) < 1e-6
        assert abs(data["conjugate_point"] - 3.14159265) < 1e-3

    def test_missing_solution_is_usage_error(self, free_spec, capsys):
        assert main(["stability", "--spec", free_spec]) == 2


class TestDemoSphere:
    def test_default_run_passes(self, capsys):
        assert main(["demo-sphere"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 5
        assert "result: PASS" in out

    def test_radius_two_conjugate_point(self, capsys):
        assert main(["demo-sphere", "--radius", "2", "--h", "2e-3"]) == 0
        out = capsys.readouterr().out
        assert "6.283185" in out

    def test_marginal_trial(self, capsys):
        assert main(["demo-sphere", "--a", "1.0"]) == 0
        out = capsys.readouterr().out
        assert "verdict marginal" in out

    def test_output_files(self, capsys, tmp_path):
        outdir = str(tmp_path / "demo")
        assert main(["demo-sphere", "--out", outdir]) == 0
        names = sorted(os.listdir(outdir))
        for expected in (
            "curves.png",
            "eigenvalues.csv",
            "eigenvalues.png",
            "equator.csv",
            "jacobi_field.csv",
            "jacobi_field.png",
        ):
            assert expected in names, names

    def test_json(self, capsys):
        assert main(["demo-sphere", "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["ok"] is True
        values = {round(row["a"], 3): row for row in data["integrals"]}
        assert values[0.5]["verdict"] == "stable-trialwise"
        assert values[2.0]["verdict"] == "unstable"


class TestSelfcheck:
    def test_clean(self, capsys):
        assert main(["selfcheck"]) == 0
        out = capsys.readouterr().out
        assert "[FAIL]" not in out

    def test_injected_fault(self, capsys):
        assert main(["selfcheck", "--inject-fault"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL]" in out

    def test_json(self, capsys):
        assert main(["selfcheck", "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["ok"] is True
        assert all(c["ok"] for c in data["checks"])


class TestErrors:
    def test_parse_error_exit_code(self, tmp_path, capsys):
        p = tmp_path / "bad.vjp"
        p.write_text("bogus = 1\n")
        assert main(["derive", "--spec", str(p)]) == 2
        assert "unknown key" in capsys.readouterr().err

    def test_expression_error_position(self, tmp_path, capsys):
        p = tmp_path / "bad2.vjp"
        p.write_text("base = t\nfiber = y\norder = 1\nlagrangian = (1/2*u^2\n")
        assert main(["derive", "--spec", str(p)]) == 2
        err = capsys.readouterr().err
        assert "line 4" in err

    def test_missing_file(self, capsys):
        assert main(["derive", "--spec", "/nonexistent/x.vjp"]) == 2

    def test_usage_error(self, capsys):
        assert main(["derive"]) == 2
