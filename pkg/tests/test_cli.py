import json
import subprocess
import sys
from fractions import Fraction

import pytest

from cdkn import generate_example, load_space, save_space
from cdkn.errors import MetricError, ParseError
from cdkn.spacefile import SpaceFile, decode_number, encode_number


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "cdkn.cli"] + list(args),
        capture_output=True, text=True)


def test_number_round_trip():
    for x in (3, Fraction(5, 7), 0.125, Fraction(4, 1)):
        assert decode_number(encode_number(x)) == x


def test_generate_save_load_round_trip(tmp_path):
    for name, params in (("segment", {"n": 9}), ("theta", {"k": 8}),
                         ("circle", {"n": 12}), ("tripod", {"k": 4}),
                         ("grid2d", {"m": 4}),
                         ("weighted_tree", {"n": 7, "seed": 4})):
        space = generate_example(name, **params)
        path = tmp_path / f"{name}.json"
        save_space(path, space, {"name": name})
        loaded = load_space(path)
        assert loaded.points == space.points
        assert loaded.dist == space.dist         # exact rational round trip
        assert loaded.weights == space.weights


def test_graph_form_closure(tmp_path):
    doc = {
        "format": "cdkn-space/1",
        "points": ["a", "b", "c", "d"],
        "metric": {"type": "graph",
                   "edges": [["a", "b", 1], ["b", "c", 1],
                             ["c", "d", 1], ["d", "a", 1]]},
        "measure": [1, 1, 1, 1],
    }
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(doc))
    space = load_space(path)
    assert space.dist[0][2] == 2
    assert space.dist[1][3] == 2


def test_matrix_violation_raises_metric_error(tmp_path):
    doc = {
        "format": "cdkn-space/1",
        "points": ["a", "b", "c"],
        "metric": {"type": "matrix",
                   "entries": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
        "measure": [1, 1, 1],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(MetricError):
        load_space(path)


def test_parse_error_carries_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError) as err:
        load_space(path)
    assert "broken.json" in str(err.value)


def test_cli_generate_and_validate(tmp_path):
    out = tmp_path / "seg.json"
    res = run_cli("generate", "--name", "segment", "--params", '{"n": 17}',
                  "--out", str(out))
    assert res.returncode == 0
    res = run_cli("validate", "--space", str(out))
    assert res.returncode == 0
    doc = json.loads(res.stdout)
    assert doc["format"] == "cdkn-report/1"
    assert doc["results"]["ok"] is True


def test_cli_w2_and_reproducibility(tmp_path):
    out = tmp_path / "seg.json"
    run_cli("generate", "--name", "segment", "--params", '{"n": 9}',
            "--out", str(out))
    args = ("w2", "--space", str(out), "--mu", "dirac:p0", "--nu", "dirac:p8")
    first = run_cli(*args)
    second = run_cli(*args)
    assert first.returncode == 0
    d1 = json.loads(first.stdout)
    d2 = json.loads(second.stdout)
    assert d1["results"] == d2["results"]
    assert d1["results"]["distance"] == 1.0


def test_cli_beta_flat_branch():
    res = run_cli("beta", "--kappa", "0", "--dim", "5", "--t", "0.3",
                  "--dist", "1.0")
    doc = json.loads(res.stdout)
    assert doc["results"]["beta"] == 1.0


def test_cli_bad_space_path_exits_2():
    res = run_cli("validate", "--space", "/nonexistent/nowhere.json")
    assert res.returncode == 2
    err = json.loads(res.stderr)
    assert "error" in err


def test_cli_metric_error_exits_2(tmp_path):
    doc = {
        "format": "cdkn-space/1",
        "points": ["a", "b", "c"],
        "metric": {"type": "matrix",
                   "entries": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
        "measure": [1, 1, 1],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    res = run_cli("validate", "--space", str(path))
    assert res.returncode == 2


def test_cli_usage_error_exits_1():
    res = run_cli("w2", "--mu", "nonsense:spec", "--nu", "uniform",
                  "--space", "/tmp/x.json")
    assert res.returncode in (1, 2)  # bad spec or missing file, never a crash


def test_cli_doubling_and_csv(tmp_path):
    out = tmp_path / "seg.json"
    run_cli("generate", "--name", "segment", "--params", '{"n": 33}',
            "--out", str(out))
    res = run_cli("doubling", "--space", str(out), "--format", "csv")
    assert res.returncode == 0
    assert res.stdout.startswith("key,value")
    assert "doubling_constant" in res.stdout


def test_cli_uniqueness_on_circle(tmp_path):
    out = tmp_path / "circle.json"
    run_cli("generate", "--name", "circle", "--params", '{"n": 16}',
            "--out", str(out))
    res = run_cli("uniqueness", "--space", str(out), "--base", "c0",
                  "--k", "8", "--eps-geo", "0")
    assert res.returncode == 0
    doc = json.loads(res.stdout)
    assert doc["results"]["multi_fraction"] == pytest.approx(1 / 16)


def test_cli_branch_search_exit_zero_on_theta(tmp_path):
    out = tmp_path / "theta.json"
    run_cli("generate", "--name", "theta", "--params", '{"k": 8}',
            "--out", str(out))
    res = run_cli("branch-search", "--space", str(out), "--dim", "1",
                  "--k", "16", "--eps-geo", "0")
    assert res.returncode == 0
    doc = json.loads(res.stdout)
    assert doc["results"]["kind"] == "violation"


def test_cli_plot_emission_does_not_change_results(tmp_path):
    out = tmp_path / "seg.json"
    run_cli("generate", "--name", "segment", "--params", '{"n": 9}',
            "--out", str(out))
    plot = tmp_path / "curve.png"
    base = run_cli("interpolate", "--space", str(out), "--mu", "dirac:p0",
                   "--nu", "dirac:p8", "--k", "8", "--eps-geo", "0")
    with_plot = run_cli("interpolate", "--space", str(out), "--mu",
                        "dirac:p0", "--nu", "dirac:p8", "--k", "8",
                        "--eps-geo", "0", "--plot", str(plot))
    assert plot.exists()
    assert (json.loads(base.stdout)["results"]
            == json.loads(with_plot.stdout)["results"])


def test_cli_convexity_check_violation_exit_3(tmp_path):
    out = tmp_path / "theta.json"
    run_cli("generate", "--name", "theta", "--params", '{"k": 8}',
            "--out", str(out))
    res = run_cli("convexity-check", "--space", str(out), "--mu", "dirac:z",
                  "--nu", "dirac:j1", "--entropy", "renyi:1", "--k", "8",
                  "--eps-geo", "0")
    assert res.returncode == 3
