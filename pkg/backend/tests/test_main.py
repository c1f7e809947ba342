"""
Tests for the command-line entry point.
"""
import csv
import io
import math

import pytest

import main
from agents.orchestrator import EXIT_CONFIG, EXIT_OK
from experiments.config import valid_keys
from solver.spectral_core import GridSpec
from utils.field_io import write_state
from tests.helpers import taylor_green_state


def test_defaults_lists_every_key(capsys):
    assert main.main(["defaults"]) == EXIT_OK
    printed = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert printed == valid_keys()


def test_dispersion_csv(capsys):
    assert main.main(["dispersion", "--kmax", "2", "--dk", "0.5"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus"
    assert [float(line.split(",")[0]) for line in lines[1:]] == [0.5, 1.0, 1.5, 2.0]
    # default alpha = 2, mu = 1 puts the double root at k = 2
    last = [float(v) for v in lines[-1].split(",")]
    assert last[1] == pytest.approx(-2.0)
    assert last[3] == pytest.approx(-2.0)


def norm_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_norms_of_a_snapshot(tmp_path, capsys):
    path = write_state(str(tmp_path / "tg.snap"), taylor_green_state(GridSpec(n=16)))
    assert main.main(["norms", path, "--component", "u", "--lp", "2,inf"]) == EXIT_OK
    rows = norm_rows(capsys.readouterr().out)
    assert [(row["snapshot"], row["p"], row["s"]) for row in rows] == [(path, "2.0", ""), (path, "inf", "")]
    assert float(rows[0]["value"]) == pytest.approx(math.sqrt(2.0) * math.pi)
    assert float(rows[1]["value"]) == pytest.approx(1.0)


def test_norms_batch_writes_one_besov_row_per_file_and_index(tmp_path, capsys):
    grid = GridSpec(n=16)
    first = write_state(str(tmp_path / "a.snap"), taylor_green_state(grid))
    second = write_state(str(tmp_path / "b.snap"), taylor_green_state(grid, amplitude=2.0))
    code = main.main(["norms", first, second, "--component", "u", "--lp", "2",
                      "--besov", "0,2,2", "--besov", "1,inf,1"])
    assert code == EXIT_OK
    rows = norm_rows(capsys.readouterr().out)
    besov = [row for row in rows if row["s"]]
    assert [(row["snapshot"], row["s"], row["p"], row["r"]) for row in besov] == [
        (first, "0.0", "2.0", "2.0"), (first, "1.0", "inf", "1.0"),
        (second, "0.0", "2.0", "2.0"), (second, "1.0", "inf", "1.0"),
    ]
    assert all(row["homogeneous"] == "False" for row in besov)
    l2 = {row["snapshot"]: float(row["value"]) for row in rows if not row["s"]}
    # B^0_{2,2} is comparable to L^2
    assert float(besov[0]["value"]) == pytest.approx(l2[first], rel=0.5)
    assert float(besov[2]["value"]) == pytest.approx(2.0 * float(besov[0]["value"]), rel=1e-12)


def test_norms_homogeneous_flag_is_recorded(tmp_path, capsys):
    path = write_state(str(tmp_path / "tg.snap"), taylor_green_state(GridSpec(n=16)))
    assert main.main(["norms", path, "--lp", "", "--besov=-1,2,2", "--homogeneous"]) == EXIT_OK
    rows = norm_rows(capsys.readouterr().out)
    assert len(rows) == 1
    assert rows[0]["homogeneous"] == "True"
    assert float(rows[0]["value"]) > 0.0


def test_norms_malformed_besov_indices(tmp_path, capsys):
    path = write_state(str(tmp_path / "tg.snap"), taylor_green_state(GridSpec(n=16)))
    assert main.main(["norms", path, "--besov", "0,2"]) == EXIT_CONFIG
    assert "Error:" in capsys.readouterr().err


def test_norms_unknown_component(tmp_path, capsys):
    path = write_state(str(tmp_path / "tg.snap"), taylor_green_state(GridSpec(n=16)))
    assert main.main(["norms", path, "--component", "vorticity"]) == EXIT_CONFIG
    assert "no component 'vorticity'" in capsys.readouterr().err


def test_missing_snapshot_is_reported(tmp_path, capsys):
    assert main.main(["norms", str(tmp_path / "absent.snap")]) == EXIT_CONFIG
    assert "Error:" in capsys.readouterr().err


def test_linear_check_passes_for_a_small_mode(capsys):
    code = main.main(["linear-check", "--n", "16", "--t-end", "1.0", "--dt", "0.01"])
    assert code == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_run_with_invalid_config(tmp_path, monkeypatch):
    monkeypatch.setenv("REPORTS_DIR", str(tmp_path / "reports"))
    config = tmp_path / "bad.cfg"
    config.write_text("grid.n = 32\n", encoding="utf-8")
    assert main.main(["run", str(config)]) == EXIT_CONFIG


def test_unknown_category_is_rejected():
    with pytest.raises(SystemExit):
        main.main(["run", "x.cfg", "--category", "NOPE"])
