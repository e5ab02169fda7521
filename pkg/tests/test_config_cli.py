"""End-to-end tests for the command line interface.

Every subcommand is driven through main() with real config files in a temp
directory: JSON and CSV outputs, strict config validation with error paths,
the documented exit codes (0 ok, 2 validation, 3 numerical, 4 acceptance),
and byte-identical reruns.  One subprocess check pins the lazy import that
lets --threads take effect before the numerics stack loads.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from nonlocal_sl.cli import main, parse_config
from nonlocal_sl.errors import ConfigError

BASE_PROBLEM = {
    "T": 3.141592653589793,
    "q": {"type": "zero"},
    "U1": {"type": "point", "x": 0.0, "order": 0},
    "U2": {"type": "point", "x": 3.141592653589793, "order": 0},
}


def _cosine(*coeffs):
    return {"type": "cosine", "data": {"coefficients": [[c, 0.0] for c in coeffs]}}


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload), encoding="utf-8")
    return str(p)


def _config(section_name, section, problem=None):
    d = dict(problem or BASE_PROBLEM)
    d[section_name] = section
    return d


class TestConfigValidation:
    def test_minimal_config_parses(self):
        cfg = parse_config(json.dumps(_config("spectrum", {"which": "delta1", "box": {"re": [0.5, 10.0], "im": [-1.0, 1.0]}})))
        assert cfg.problem is not None
        assert cfg.sections["spectrum"]["tol"] == 1e-8

    def test_negative_T_reports_exact_path(self):
        bad = dict(BASE_PROBLEM, T=-1.0)
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(_config("spectrum", {"box": {"re": [0.5, 2.0], "im": [-1.0, 1.0]}}, problem=bad)))
        paths = [p for p, _ in exc.value.errors]
        assert ".T" in paths

    def test_atom_at_origin_names_the_split_rule(self):
        bad = dict(BASE_PROBLEM)
        bad["U1"] = {
            "type": "nonlocal",
            "measure": {"jump": [1.0, 0.0], "atoms": [[0.0, [1.0, 0.0]]], "density": None},
        }
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(_config("forward", {"lambdas": [[1.0, 0.0]]}, problem=bad)))
        hits = [(p, m) for p, m in exc.value.errors if "atoms[0]" in p]
        assert hits
        assert "jump" in hits[0][1]

    def test_zero_jump_on_first_nonlocal_form_rejected(self):
        bad = dict(BASE_PROBLEM)
        bad["U1"] = {
            "type": "nonlocal",
            "measure": {"jump": [0.0, 0.0], "atoms": [[1.0, [1.0, 0.0]]], "density": None},
        }
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(_config("forward", {"lambdas": [[1.0, 0.0]]}, problem=bad)))
        assert any(p.endswith(".measure.jump") for p, _ in exc.value.errors)

    def test_unknown_keys_rejected_with_paths(self):
        cfg = _config("spectrum", {"box": {"re": [0.5, 2.0], "im": [-1.0, 1.0]}, "wat": 1})
        cfg["extra_top"] = True
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(cfg))
        paths = [p for p, _ in exc.value.errors]
        assert any("extra_top" in p for p in paths)
        assert any("spectrum.wat" in p for p in paths)

    def test_complex_pairs_enforced(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(_config("forward", {"lambdas": [1.0, 2.0]})))
        assert any("forward.lambdas[0]" in p for p, _ in exc.value.errors)

    def test_booleans_are_not_numbers(self):
        bad = dict(BASE_PROBLEM, T=True)
        with pytest.raises(ConfigError):
            parse_config(json.dumps(_config("forward", {"lambdas": [[1.0, 0.0]]}, problem=bad)))


class TestForward:
    def test_json_payload_matches_library(self, tmp_path, capsys):
        cfg = _write(tmp_path, "f.json", _config("forward", {"lambdas": [[2.0, 0.0], [6.0, 1.0]]}))
        assert main(["forward", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        from nonlocal_sl import LinearForm, Potential, ProblemSpec
        from nonlocal_sl.characteristic import char_batch

        spec = ProblemSpec(
            q=Potential.zero(np.pi),
            form1=LinearForm.point_value(0.0, 0),
            form2=LinearForm.point_value(np.pi, 0),
        )
        b = char_batch(spec, np.array([2.0, 6.0 + 1.0j]))
        got = np.array([complex(re, im) for re, im in payload["delta1"]])
        assert np.allclose(got, b.delta1, rtol=1e-12)
        assert payload["M_ok"] == [True, True]

    def test_csv_column_order(self, tmp_path):
        out = tmp_path / "fwd.csv"
        cfg = _write(
            tmp_path,
            "f.json",
            _config("forward", {"lambdas": [[2.0, 0.0]], "quantities": ["omega", "M"]}),
        )
        assert main(["forward", cfg, "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda_re,lambda_im,omega_re,omega_im,M_re,M_im,M_ok"
        first = lines[1].split(",")
        assert float(first[0]) == 2.0 and first[-1] == "1"

    def test_weyl_pole_row_masked_not_failed(self, tmp_path, capsys):
        # lambda = 1 is a delta_1 zero for this problem; M is unavailable there
        cfg = _write(tmp_path, "f.json", _config("forward", {"lambdas": [[1.0, 0.0], [2.0, 0.0]]}))
        assert main(["forward", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["M_ok"] == [False, True]
        assert payload["M"][0] is None


class TestSpectrum:
    def test_dirichlet_eigenvalues(self, tmp_path, capsys):
        cfg = _write(
            tmp_path,
            "s.json",
            _config("spectrum", {"which": "delta1", "box": {"re": [0.5, 12.0], "im": [-1.0, 1.0]}}),
        )
        assert main(["spectrum", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        eigs = payload["eigenvalues"]
        assert [round(e[0]) for e in eigs] == [1, 4, 9]
        assert all(e[2] == 1 for e in eigs)
        assert payload["winding_total"] == 3

    def test_csv_columns(self, tmp_path):
        out = tmp_path / "s.csv"
        cfg = _write(
            tmp_path,
            "s.json",
            _config("spectrum", {"box": {"re": [0.5, 12.0], "im": [-1.0, 1.0]}}),
        )
        assert main(["spectrum", cfg, "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda_re,lambda_im,multiplicity"
        assert len(lines) == 4

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _write(
            tmp_path,
            "s.json",
            _config("spectrum", {"box": {"re": [0.5, 12.0], "im": [-1.0, 1.0]}}),
        )
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["spectrum", cfg, "--out", str(out1)]) == 0
        assert main(["spectrum", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestWeyl:
    def test_values_and_d_chart(self, tmp_path, capsys):
        section = {
            "lambdas": [[2.0, 0.5], [6.5, 0.5], [12.5, 0.5]],
            "which": "M",
            "xi_count": 2,
        }
        cfg = _write(tmp_path, "w.json", _config("weyl", section))
        assert main(["weyl", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["which"] == "M"
        assert payload["ok"] == [True, True, True]
        assert len(payload["d"]["xi"]) == 2
        # omega zeros for this problem are 1 and 4; d alternates +1, -1
        assert payload["d"]["xi"][0][0] == pytest.approx(1.0, abs=1e-7)
        assert payload["d"]["values"][0][0] == pytest.approx(1.0, abs=1e-6)
        assert payload["d"]["values"][1][0] == pytest.approx(-1.0, abs=1e-6)


class TestAsym:
    def test_sector_report(self, tmp_path, capsys):
        section = {
            "quantity": "Delta1",
            "ray": {"kind": "Pi_delta", "angle": 1.0471975511965976, "radii": [5.0, 10.0]},
        }
        problem = dict(BASE_PROBLEM, q=_cosine(1.0))
        cfg = _write(tmp_path, "a.json", _config("asym", section, problem=problem))
        assert main(["asym", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["quantity"] == "Delta1"
        rels = [float(row[5]) for row in payload["rows"]]  # rel_error column
        assert rels[1] < rels[0]

    def test_csv_rows(self, tmp_path):
        out = tmp_path / "a.csv"
        section = {
            "quantity": "Delta1",
            "ray": {"kind": "Pi_delta", "angle": 1.0471975511965976, "radii": [5.0, 10.0]},
        }
        cfg = _write(tmp_path, "a.json", _config("asym", section))
        assert main(["asym", cfg, "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("radius,computed_log_abs")
        assert len(lines) == 3


class TestInvert:
    def test_two_spectra_recovery(self, tmp_path, capsys):
        problem = dict(BASE_PROBLEM, q=_cosine(0.3, -0.2))
        section = {"kind": "two_spectra", "n_each": 3, "dim": 2, "starts": 1, "tol": 1e-8}
        cfg = _write(tmp_path, "i.json", _config("invert", section, problem=problem))
        assert main(["invert", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["converged"]
        got = payload["coeffs"]
        assert got[0] == pytest.approx(0.3, abs=1e-5)
        assert got[1] == pytest.approx(-0.2, abs=1e-5)

    def test_target_file_override(self, tmp_path, capsys):
        from nonlocal_sl import LinearForm, Potential, ProblemSpec
        from nonlocal_sl.inversion import make_two_spectra_target

        T = np.pi
        truth = ProblemSpec(
            q=Potential.from_cosine(T, [0.25]),
            form1=LinearForm.point_value(0.0, 0),
            form2=LinearForm.point_value(T, 0),
        )
        data = make_two_spectra_target(truth, 3).to_dict()
        data_path = tmp_path / "target.json"
        data_path.write_text(json.dumps(data), encoding="utf-8")
        section = {"kind": "two_spectra", "dim": 1, "starts": 1}
        cfg = _write(tmp_path, "i.json", _config("invert", section))
        assert main(["invert", cfg, "--target", str(data_path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["coeffs"][0] == pytest.approx(0.25, abs=1e-5)

    def test_csv_output(self, tmp_path):
        out = tmp_path / "i.csv"
        problem = dict(BASE_PROBLEM, q=_cosine(0.3))
        section = {"kind": "two_spectra", "n_each": 3, "dim": 1, "starts": 1}
        cfg = _write(tmp_path, "i.json", _config("invert", section, problem=problem))
        assert main(["invert", cfg, "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "index,coefficient"
        assert len(lines) == 2


class TestScenario:
    def test_named_scenario_without_config(self, capsys):
        assert main(["scenario", "--name", "three_spectra"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ok"]
        assert payload["counts"].get("2", 0) == 0
        assert payload["violations"] == 0


class TestExitCodes:
    def test_validation_failure_is_2(self, tmp_path, capsys):
        bad = dict(BASE_PROBLEM, T=-1.0)
        cfg = _write(tmp_path, "bad.json", _config("forward", {"lambdas": [[1.0, 0.0]]}, problem=bad))
        assert main(["forward", cfg]) == 2
        err = capsys.readouterr().err
        assert "config error at .T" in err

    def test_missing_config_file_is_2(self, tmp_path, capsys):
        assert main(["forward", str(tmp_path / "nope.json")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_numerical_failure_is_3(self, tmp_path, capsys):
        cfg = _write(
            tmp_path, "big.json", _config("forward", {"lambdas": [[-1.0e12, 0.0]]})
        )
        assert main(["forward", cfg]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_malformed_json_is_2(self, tmp_path, capsys):
        p = tmp_path / "broken.json"
        p.write_text("{not json", encoding="utf-8")
        assert main(["spectrum", str(p)]) == 2
        assert "config error" in capsys.readouterr().err


class TestRegress:
    def test_single_criterion_with_report(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert main(["regress", "--criteria", "1", "--out", str(report)]) == 0
        out = capsys.readouterr().out
        assert "criterion  1" in out and "PASS" in out
        doc = json.loads(report.read_text())
        assert doc["all_passed"] is True
        assert doc["criteria"][0]["number"] == 1
        assert doc["criteria"][0]["passed"] is True


def test_cli_import_does_not_load_numerics():
    code = "import nonlocal_sl.cli, sys; print('numpy' in sys.modules)"
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == "False"


def test_threads_flag_sets_env_before_numerics(tmp_path):
    cfg_payload = _config("spectrum", {"box": {"re": [0.5, 5.0], "im": [-1.0, 1.0]}})
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps(cfg_payload), encoding="utf-8")
    code = (
        "import os\n"
        "from nonlocal_sl.cli import main\n"
        f"rc = main(['spectrum', {str(cfg)!r}, '--threads', '2', '--out', {str(tmp_path / 'o.json')!r}])\n"
        "print(rc, os.environ.get('OMP_NUM_THREADS'))\n"
    )
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == "0 2"
