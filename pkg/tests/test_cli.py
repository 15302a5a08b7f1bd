"""Command-line interface: CSV schemas, config merging, seeds, exit codes."""

import numpy as np
import pytest

from mdiqkd import cli
from mdiqkd.cli import SWEEP_COLUMNS, find_crossover, main
from mdiqkd.security import OptimizerConfig

CHEAP = ["--grid-points", "5", "--multistarts", "2"]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = text.rstrip("\n").split("\n")
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_analyze_schema(capsys):
    code, out, _ = run(capsys, ["analyze", "--loss-db", "3", "--dim", "both"] + CHEAP)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == list(SWEEP_COLUMNS)
    assert [r["dim"] for r in rows] == ["2", "3"]
    for r in rows:
        assert r["mode"] == "uncharacterized"
        assert r["feasible_found"] == "true"
        assert 0.0 < float(r["eta"]) < 1.0
        assert float(r["qp_bound"]) >= float(r["qs"])
    assert "\r" not in out


def test_sweep_ordering_and_determinism(capsys, tmp_path):
    argv = ["sweep", "--loss-db-start", "0", "--loss-db-end", "2",
            "--loss-db-step", "1", "--dim", "both"] + CHEAP
    code, out, _ = run(capsys, argv)
    assert code == 0
    _, rows = parse_csv(out)
    keys = [(float(r["loss_db"]), int(r["dim"])) for r in rows]
    assert keys == sorted(keys)
    assert len(rows) == 6

    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(f1)]) == 0
    assert main(argv + ["--out", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()
    assert f1.read_text() == out


def test_seventeen_digit_floats(capsys):
    code, out, _ = run(capsys, ["analyze", "--loss-db", "7", "--dim", "3"] + CHEAP)
    assert code == 0
    _, rows = parse_csv(out)
    eta = float(rows[0]["eta"])
    assert rows[0]["eta"] == format(eta, ".17g")


def test_config_file_defaults_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("loss-db = 5\ndim = 3\ngrid-points = 5\nmultistarts = 2\n")
    code, out, _ = run(capsys, ["analyze", "--config", str(cfg)])
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["loss_db"] == "5" and rows[0]["dim"] == "3"
    # An explicit flag beats the file value.
    code, out, _ = run(capsys, ["analyze", "--config", str(cfg), "--loss-db", "1"])
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["loss_db"] == "1"


def test_config_file_errors(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    code, _, err = run(capsys, ["analyze", "--config", str(bad)])
    assert code == 2 and "frobnicate" in err
    bad.write_text("loss-db\n")
    code, _, err = run(capsys, ["analyze", "--config", str(bad)])
    assert code == 2
    code, _, err = run(capsys, ["analyze", "--config", str(tmp_path / "missing.cfg")])
    assert code == 2


def test_usage_errors(capsys):
    code, _, err = run(capsys, ["sweep", "--loss-db-start", "5",
                                "--loss-db-end", "1"] + CHEAP)
    assert code == 2
    code, _, err = run(capsys, ["sweep", "--loss-db-step", "0"] + CHEAP)
    assert code == 2
    code, _, err = run(capsys, ["certify", "--n", "0"])
    assert code == 2


def test_seed_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("QKD_SEED", "31")
    code, out, _ = run(capsys, ["analyze", "--loss-db", "2", "--dim", "3"] + CHEAP)
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["optimizer_seed"] == "31"
    # Explicit flag wins over the environment.
    code, out, _ = run(capsys, ["analyze", "--loss-db", "2", "--dim", "3",
                                "--seed", "4"] + CHEAP)
    _, rows = parse_csv(out)
    assert rows[0]["optimizer_seed"] == "4"
    monkeypatch.setenv("QKD_SEED", "not-a-number")
    code, _, err = run(capsys, ["analyze", "--loss-db", "2", "--dim", "3"] + CHEAP)
    assert code == 2


def test_certify_clean_run(capsys):
    code, out, _ = run(capsys, ["certify", "--n", "3", "--dim", "both", "--seed", "8"])
    assert code == 0
    header, rows = parse_csv(out)
    assert header == list(cli.CERTIFY_COLUMNS)
    assert len(rows) == 6
    assert all(r["all_ok"] == "true" for r in rows)


def test_certify_violation_exit_code(capsys, monkeypatch):
    """Exit code 1 plumbing, driven by a stubbed failing report."""
    class FakeReport:
        dim = 3
        seed = 1234
        strength = 0.5
        qs = 0.1
        epsilon = 0.0
        qp_direct = 0.5
        qp_bound = 0.1
        ok_identity = True
        ok_linearity = True
        ok_bell_split = True
        ok_phase_envelope = True
        ok_bar_expansion = True
        ok_branch_bounds = True
        ok_constraints = True
        ok_end_to_end = False
        all_ok = False

    monkeypatch.setattr(cli, "certification_trials",
                        lambda n, seed, dim: [FakeReport()])
    code, out, err = run(capsys, ["certify", "--n", "1", "--dim", "3"])
    assert code == 1
    assert "1234" in err


def test_crossover_not_found(capsys):
    code, out, err = run(capsys, ["crossover", "--loss-db-start", "0",
                                  "--loss-db-end", "2", "--loss-db-step", "1",
                                  "--quantity", "r_sifted"] + CHEAP)
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["found"] == "false"
    assert np.isnan(float(rows[0]["loss_db"]))
    assert "no r_sifted sign change" in err


def test_crossover_bracket_width():
    cfg = OptimizerConfig(grid_points=5, multistarts=2, refine_iterations=50)
    result = find_crossover(12.0, 18.0, 2.0, 1e-5, "r_sifted", cfg)
    assert result["found"]
    assert result["bracket_hi"] - result["bracket_lo"] <= 0.05 + 1e-12
    assert result["bracket_lo"] <= result["loss_db"] <= result["bracket_hi"]
