from __future__ import annotations

import io
import json
import math

import pytest

from qgtrace.cli import run
from qgtrace.io import read_graph
from qgtrace.secular import CouplingSet, lowest_eigenvalues

EXAMPLES = ["interval", "star3", "triangle", "lasso", "four_vertex"]


def invoke(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def tsv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split("\t")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]


def test_neumann_interval_rows(data_dir):
    code, out = invoke("spectrum", data_dir / "interval_pi.graph", "--lmin", -1, "--lmax", 10)
    assert code == 0
    assert out.splitlines()[0] == "# schema_version=1\tcommand=spectrum"
    rows = tsv_rows(out)
    assert [int(r["multiplicity"]) for r in rows] == [1, 1, 1, 1]
    for r, exact in zip(rows, [0, 1, 4, 9]):
        assert abs(float(r["lambda"]) - exact) < 1e-10


def test_reflection_pair_trace(data_dir):
    code, out = invoke("trace", data_dir / "interval.graph", "--b1", data_dir / "ab.cpl", "--b2", data_dir / "ba.cpl", "--orders", 4)
    assert code == 0
    rows = tsv_rows(out)
    assert [int(r["m"]) for r in rows] == [1, 2, 3, 4]
    assert all(abs(float(r["value"])) < 1e-12 for r in rows)
    assert "# verdict=INCONCLUSIVE" in out


def test_trace_asymptotic_json(data_dir):
    code, out = invoke(
        "--format", "json", "trace", data_dir / "interval.graph",
        "--b1", data_dir / "scalar2.cpl", "--b2", data_dir / "scalar3.cpl", "--orders", 3, "--asymptotic",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "CERTIFIED_DISTINCT" and doc["regime"] == "scalar"
    asym = [r for r in doc["rows"] if r[0] == "asymptotic"]
    assert len(asym) == 3 and all(r[5] < 1e-6 for r in asym)


def test_delta_prime_trace_selects_variant(data_dir, tmp_path):
    b1, b2 = tmp_path / "p1.cpl", tmp_path / "p2.cpl"
    b1.write_text(json.dumps({"type": "delta_prime", "alpha": {"V1": 3.0, "V2": 2.0, "V3": 5.0, "V4": 4.0}}))
    b2.write_text(json.dumps({"type": "delta_prime", "alpha": {"V1": 4.0, "V2": 2.5, "V3": 3.0, "V4": 6.0}}))
    code, out = invoke("trace", data_dir / "star3.graph", "--b1", b1, "--b2", b2, "--orders", 3, "--asymptotic")
    assert code == 0
    assert "# selected_variant=expansion" in out


def test_check_lasso(data_dir):
    code, out = invoke("check", data_dir / "lasso.graph")
    assert code == 0
    messages = [r["value"] for r in tsv_rows(out) if r["key"] == "message"]
    assert "A_min NOT simple: loop e2" in messages
    assert "M-function may miss spectrum" in messages


def test_check_square_cycle_zero_mode(data_dir):
    code, out = invoke("--format", "json", "check", data_dir / "square_cycle.graph")
    rows = dict((k, v) for k, v in json.loads(out)["rows"] if k != "message")
    assert code == 0 and rows["simple"] == "yes" and rows["delta_prime_zero_eigenvalue"] is True


def test_mfun_variants_and_weyl(data_dir):
    args = ["mfun", data_dir / "interval.graph", "--lambda", "0.49", "--type", "delta_prime", "--weyl-trials", 5]
    _, verified = invoke(*args)
    _, printed = invoke(*args, "--variant", "printed")
    weyl = lambda text: float(next(ln for ln in text.splitlines() if ln.startswith("# weyl_residual")).split("=")[1])  # noqa: E731
    assert weyl(verified) < 1e-10 < 1e-2 < weyl(printed)
    rows = tsv_rows(verified)
    assert float(rows[1]["re"]) == pytest.approx(1 / (0.7 * math.sin(0.7)))


def test_mfun_complex_lambda(data_dir):
    code, out = invoke("--format", "json", "mfun", data_dir / "star3.graph", "--lambda", "2,1")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 16 and doc["lambda_im"] == 1.0


def test_spectrum_all_oracles(data_dir):
    code, out = invoke("--format", "json", "spectrum", data_dir / "star3.graph", "--lmin", -1, "--lmax", 30, "--oracle", "all")
    doc = json.loads(out)
    assert code == 0
    assert doc["max_deviation_vertex"] < 1e-9 and doc["max_deviation_fem"] < 1e-4
    assert {r[0] for r in doc["rows"]} == {"edge", "vertex", "fem"}


@pytest.mark.slow
def test_recover_scalar_and_no_match(data_dir):
    target = data_dir / "interval_target.json"
    code, out = invoke("recover", data_dir / "interval.graph", "--target", target, "--scalar", "--lo", 0, "--hi", 3)
    (row,) = tsv_rows(out)
    assert code == 0 and abs(float(row["alpha"]) - 1.5) < 1e-6 and row["label"] == "UNIQUE"
    code, out = invoke("--quiet", "recover", data_dir / "interval.graph", "--target", target, "--scalar", "--lo", 3, "--hi", 5)
    assert code == 4 and out == ""


@pytest.mark.slow
def test_recover_one_vertex_with_known_rest(data_dir, tmp_path):
    # the target comes from alpha = (1.5, 1.5); the graph file supplies the known V2 value
    doc = json.loads((data_dir / "interval.graph").read_text())
    doc["coupling"] = {"type": "delta", "alpha": {"V1": 0.0, "V2": 1.5}}
    graph = tmp_path / "known.graph"
    graph.write_text(json.dumps(doc))
    code, out = invoke("recover", graph, "--target", data_dir / "interval_target.json", "--vertex", "V1", "--lo", -1, "--hi", 4)
    (row,) = tsv_rows(out)
    assert code == 0 and row["vertex"] == "V1" and abs(float(row["alpha"]) - 1.5) < 1e-6
    assert row["label"] == "BEST_EFFORT"
    assert invoke("recover", graph, "--target", data_dir / "interval_target.json", "--vertex", "V9", "--lo", -1, "--hi", 4)[0] == 2


@pytest.mark.parametrize(
    "argv, code",
    [
        ([], 1),
        (["bogus"], 1),
        (["spectrum", "{data}/interval.graph"], 1),
        (["spectrum", "{data}/interval.graph", "--lmin", "5", "--lmax", "1"], 1),
        (["mfun", "{data}/interval.graph", "--lambda", "x"], 1),
        (["check", "{data}/missing.graph"], 1),
        (["--jobs", "0", "check", "{data}/interval.graph"], 1),
        (["mfun", "{data}/interval_pi.graph", "--lambda", "1"], 3),
        (["mfun", "{data}/lasso.graph", "--lambda", "0"], 2),
        (["trace", "{data}/star3.graph", "--b1", "{data}/ab.cpl", "--b2", "{data}/ba.cpl"], 0),
        (["trace", "{data}/triangle.graph", "--b1", "{data}/ab.cpl", "--b2", "{data}/ab_prime.cpl"], 2),
        (["trace", "{data}/interval.graph", "--b1", "{data}/ab_prime.cpl", "--b2", "{data}/ba.cpl"], 2),
    ],
)
def test_exit_codes(data_dir, argv, code):
    got, _ = invoke(*[a.format(data=data_dir) for a in argv])
    assert got == code


def test_invalid_graph_exit_code(tmp_path):
    bad = tmp_path / "bad.graph"
    bad.write_text(json.dumps({"vertices": ["A", "B", "C"], "edges": [{"id": "e", "from": "A", "to": "B", "length": {"num": 1}}]}))
    assert invoke("check", bad)[0] == 2


def test_global_flags_after_subcommand(data_dir):
    code, out = invoke("check", data_dir / "star3.graph", "--format", "json")
    assert code == 0 and json.loads(out)["schema_version"] == 1


def _scalar_coupling_file(tmp_path, doc, value):
    path = tmp_path / f"scalar_{value}.cpl"
    path.write_text(json.dumps({"type": "delta", "alpha": {n: value for n in doc.vertex_names}}))
    return path


@pytest.mark.parametrize("name", EXAMPLES)
@pytest.mark.parametrize("fmt", ["tsv", "json"])
def test_every_command_on_every_example(data_dir, tmp_path, name, fmt):
    graph = data_dir / f"{name}.graph"
    doc = read_graph(graph)
    b1 = _scalar_coupling_file(tmp_path, doc, 0.5)
    b2 = _scalar_coupling_file(tmp_path, doc, -0.25)
    runs = [
        ["check", graph],
        ["mfun", graph, "--lambda", "2.3,0.1"],
        ["spectrum", graph, "--lmin", -2, "--lmax", 15],
        ["trace", graph, "--b1", b1, "--b2", b2, "--orders", 3],
    ]
    for argv in runs:
        code, first = invoke("--format", fmt, "--seed", 7, *argv)
        assert code == 0, argv
        if fmt == "json":
            assert json.loads(first)["schema_version"] == 1
        else:
            assert first.startswith("# schema_version=1\t")
        # determinism
        assert invoke("--format", fmt, "--seed", 7, *argv) == (0, first)


@pytest.mark.slow
@pytest.mark.parametrize("name", EXAMPLES)
def test_recover_on_every_example(data_dir, tmp_path, name):
    graph = data_dir / f"{name}.graph"
    g = read_graph(graph).graph
    target = tmp_path / "target.json"
    ev = lowest_eigenvalues(g, CouplingSet("delta", (0.6,) * g.vertex_count), 3)
    target.write_text(json.dumps({"eigenvalues": [float(x) for x in ev], "weight": 3}))
    code, out = invoke("recover", graph, "--target", target, "--scalar", "--lo", 0, "--hi", 1.5)
    (row,) = tsv_rows(out)
    assert code == 0 and abs(float(row["alpha"]) - 0.6) < 1e-6
