"""End-to-end command tests: exit codes, files on disk, determinism."""

import csv

import pytest

from kochfem.cli import main
from kochfem.export import REPORT_HEADER


def run(*argv):
    return main(list(argv))


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def summary_dict(path):
    return {row[0]: row[1] for row in read_rows(path)[1:]}


def test_geometry_level_one(tmp_path, capsys):
    assert run("--out", str(tmp_path), "geometry", "--level", "1") == 0
    out = capsys.readouterr().out
    assert "num_vertices: 12" in out
    assert "num_reentrant: 6" in out
    summary = summary_dict(tmp_path / "geometry_summary.csv")
    assert float(summary["nominal_length"]) == pytest.approx(4.0, rel=1e-12)
    rows = read_rows(tmp_path / "boundary.csv")
    assert len(rows) == 13
    assert (tmp_path / "boundary.png").exists()


def test_geometry_level_zero_triangle(tmp_path, capsys):
    assert run("--out", str(tmp_path), "geometry", "--level", "0") == 0
    out = capsys.readouterr().out
    assert "num_vertices: 3" in out
    assert "num_reentrant: 0" in out


def test_mesh_command(tmp_path):
    assert run("--out", str(tmp_path), "mesh", "--level", "1",
               "--h", "0.2") == 0
    summary = summary_dict(tmp_path / "mesh_summary.csv")
    assert float(summary["min_angle_deg"]) >= 20.0 - 1e-9
    assert summary["graded_ok"] == "1"
    assert (tmp_path / "vertices.csv").exists()
    assert (tmp_path / "triangles.csv").exists()
    assert (tmp_path / "mesh.png").exists()


def test_solve_square_outputs(tmp_path, capsys):
    assert run("--out", str(tmp_path), "solve", "--domain", "square",
               "--h", "0.3") == 0
    assert "peak |B|" in capsys.readouterr().out
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == REPORT_HEADER
    assert len(lines) == 2
    vrows = read_rows(tmp_path / "vertices.csv")
    srows = read_rows(tmp_path / "solution.csv")
    assert len(srows) == len(vrows)
    assert (tmp_path / "solution.vtk").exists()
    assert (tmp_path / "field.png").exists()
    assert (tmp_path / "mesh.png").exists()


def test_solve_rerun_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run("--out", str(out), "solve", "--domain", "square",
                   "--h", "0.3") == 0
    for name in ("report.csv", "solution.csv", "vertices.csv",
                 "triangles.csv", "solution.vtk", "field.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_config_file_controls_run(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "results"
    cfg.write_text("domain = square\n"
                   "h = 0.35\n"
                   f"out_dir = {out}\n"
                   "formats = csv\n")
    assert run("--config", str(cfg), "solve") == 0
    assert (out / "report.csv").exists()
    assert not (out / "solution.vtk").exists()
    assert not (out / "field.png").exists()


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("domain = snowflake\nlevel = 3\nh = 0.35\n")
    assert run("--config", str(cfg), "--out", str(tmp_path / "o"),
               "solve", "--domain", "square") == 0
    rows = read_rows(tmp_path / "o" / "report.csv")
    assert rows[1][0] == "square"


def test_unknown_config_key_is_exit_two(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("levle = 2\n")
    assert run("--config", str(cfg), "--out", str(tmp_path), "solve") == 2
    assert "unknown configuration key" in capsys.readouterr().err


def test_missing_config_is_exit_two(tmp_path, capsys):
    assert run("--config", str(tmp_path / "absent.cfg"), "solve") == 2
    assert "config" in capsys.readouterr().err


def test_bad_threads_is_exit_two(tmp_path):
    assert run("--threads", "0", "--out", str(tmp_path), "geometry") == 2


def test_threads_flag_accepted(tmp_path):
    assert run("--threads", "2", "--out", str(tmp_path), "geometry",
               "--level", "0") == 0


def test_table1_circle_only(tmp_path, capsys):
    assert run("--max-n", "0", "--out", str(tmp_path), "table1") == 0
    out = capsys.readouterr().out
    assert "circle" in out
    rows = read_rows(tmp_path / "table1.csv")
    assert rows[0] == ["domain", "linf_B", "ell_n", "rel_dev_reference"]
    assert len(rows) == 2
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "table1.png").exists()


def test_table1_max_n_bound(tmp_path):
    assert run("--max-n", "6", "--out", str(tmp_path), "table1") == 2


def test_convergence_square_ladder(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("domain = square\nh = 0.5\n")
    assert run("--config", str(cfg), "--out", str(tmp_path / "o"),
               "convergence", "--uniform") == 0
    out = capsys.readouterr().out
    assert "observed orders" in out
    rows = read_rows(tmp_path / "o" / "convergence.csv")
    assert rows[0] == ["level", "h", "err_h1", "err_l2"]
    assert len(rows) == 5
    errs = [float(r[2]) for r in rows[1:]]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert (tmp_path / "o" / "convergence.png").exists()


def test_convergence_too_few_levels(tmp_path):
    assert run("--out", str(tmp_path), "convergence", "--levels", "3") == 2


def test_mosco_needs_three_levels(tmp_path):
    assert run("--max-n", "2", "--out", str(tmp_path), "mosco") == 2


def test_global_flags_after_subcommand(tmp_path):
    assert run("geometry", "--level", "0", "--out", str(tmp_path)) == 0
    assert (tmp_path / "boundary.csv").exists()
