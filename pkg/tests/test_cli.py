import json

import numpy as np

from topokit import io
from topokit.cli import main


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--problem", "mbb", "--nelx", "30", "--nely", "10", "--volfrac", "0.5",
                 "--mu", "0.97", "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert " It.:    1 Obj.:" in stdout and "converged" in stdout
    summary = json.loads((out / "summary.json").read_text())
    assert summary["termination"] == "converged"
    rows = (out / "iterations.jsonl").read_text().splitlines()
    assert len(rows) == summary["total_iters"]
    img = io.read_density_csv(out / "density.csv")
    assert img.shape == (10, 30) and img.sum() == 150
    assert np.array_equal(io.read_pgm(out / "design.pgm"), img)


def test_run_3d_slices(tmp_path):
    out = tmp_path / "o3"
    code = main(["run", "--problem", "cantilever3d", "--nelx", "6", "--nely", "2", "--nelz", "2",
                 "--volfrac", "0.5", "--out", str(out), "-q"])
    assert code == 0
    assert sorted(p.name for p in out.glob("design_z*.pgm")) == ["design_z0.pgm", "design_z1.pgm"]


def test_max_iterations_exit_code(tmp_path):
    code = main(["run", "--nelx", "12", "--nely", "4", "--max-iters", "3", "--out", str(tmp_path), "-q"])
    assert code == 2
    assert json.loads((tmp_path / "summary.json").read_text())["termination"] == "max-iterations"


def test_range_error_exit_code(tmp_path, capsys):
    code = main(["run", "--volfrac", "1.5", "--out", str(tmp_path)])
    assert code == 1
    assert "volfrac" in capsys.readouterr().err


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nelx": 12, "nely": 4, "volfrac": 0.9}))
    code = main(["run", "--config", str(cfg), "--volfrac", "0.5", "--out", str(tmp_path / "o"), "-q"])
    assert code == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["volfrac"] == 0.5


def test_score(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("1,0\n0,1\n")
    assert main(["score", "--csv", str(p)]) == 0
    out = capsys.readouterr().out
    assert "volume_fraction: 0.500000" in out
    assert "checkerboard: 1" in out


def test_score_missing_file(tmp_path):
    assert main(["score", "--csv", str(tmp_path / "nope.csv")]) == 1
