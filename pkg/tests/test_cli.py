import csv
import json
import math

import numpy as np
import pytest

from advbound.cli import main


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for label, m in enumerate(((-2, 2), (2, 2), (-2, -2))):
        for p in rng.normal(m, 1.0, size=(5, 2)):
            rows.append(f"{label},{float(p[0])!r},{float(p[1])!r}")
    path = tmp_path / "d.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_hypergraph_dump(data_csv, tmp_path, capsys):
    dump = tmp_path / "edges.csv"
    assert main(["hypergraph", "--data", str(data_csv), "--epsilon", "1.0", "--dump", str(dump)]) == 0
    summary = json.loads(capsys.readouterr().out)
    lines = dump.read_text().splitlines()
    assert lines[0] == "edge_id,size,members"
    assert len(lines) - 1 == summary["edges"]


def test_solve_then_classify(data_csv, tmp_path):
    sol = tmp_path / "sol.json"
    assert main(["solve", "--data", str(data_csv), "--epsilon", "1.5", "--alpha", "0.75",
                 "--out", str(sol)]) == 0
    doc = json.loads(sol.read_text())
    assert doc["alpha"] == 0.75 and doc["cap"] == 3 and doc["kkt_residual"] <= 1e-6

    queries = tmp_path / "q.csv"
    queries.write_text("-2,2\n0,2\n")
    preds = tmp_path / "p.csv"
    assert main(["classify", "--data", str(data_csv), "--solution", str(sol),
                 "--queries", str(queries), "--out", str(preds)]) == 0
    rows = list(csv.reader(preds.open()))
    assert rows[0] == ["query_id", "f_0", "f_1", "f_2", "Z"]
    assert len(rows) == 3
    for r in rows[1:]:
        assert sum(float(v) for v in r[1:4]) == pytest.approx(1.0, abs=1e-10)
        assert math.isfinite(float(r[4]))


def test_classify_quadratic_warns(data_csv, tmp_path):
    sol = tmp_path / "sol.json"
    main(["solve", "--data", str(data_csv), "--epsilon", "1.5", "--alpha", "CE", "--out", str(sol)])
    queries = tmp_path / "q.csv"
    queries.write_text("-2,2\n")
    preds = tmp_path / "p.csv"
    with pytest.warns(UserWarning):
        main(["classify", "--data", str(data_csv), "--solution", str(sol), "--queries", str(queries),
              "--loss", "alpha:0.5", "--out", str(preds)])
    assert main(["classify", "--data", str(data_csv), "--solution", str(sol), "--queries", str(queries),
                 "--loss", "quadratic", "--out", str(preds)]) == 0
    assert list(csv.reader(preds.open()))[1][4] == ""


def test_curve(data_csv, tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--data", str(data_csv), "--epsilons", "0:2:0.5", "--alphas", "0,1",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 10
    assert list(rows[0]) == ["epsilon", "alpha", "value", "kkt_residual", "newton_iters"]


def test_exit_codes(data_csv, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n1,2,3\n")
    out = str(tmp_path / "x.json")
    assert main(["solve", "--data", str(bad), "--epsilon", "1", "--out", out]) == 2
    assert main(["solve", "--data", str(tmp_path / "missing.csv"), "--epsilon", "1", "--out", out]) == 2
    assert main(["solve", "--data", str(data_csv), "--epsilon", "1", "--cap", "5", "--out", out]) == 2
    assert main(["solve", "--data", str(data_csv), "--epsilon", "3", "--max-newton", "1",
                 "--out", out]) == 3


def test_resource_limit(tmp_path, monkeypatch):
    import advbound.geometry as geometry

    rng = np.random.default_rng(0)
    path = tmp_path / "d.csv"
    path.write_text("".join(f"{i % 2},{float(x)!r}\n" for i, x in enumerate(rng.normal(size=40))))
    monkeypatch.setattr(geometry.build_hypergraph, "__defaults__", (10,))
    assert main(["hypergraph", "--data", str(path), "--epsilon", "100"]) == 4
