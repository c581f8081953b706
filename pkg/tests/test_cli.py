import csv
import io
import json

import pytest

from stein_chisq import cli
from stein_chisq.bounds import CONSTANTS, Constant, bound_kolmogorov_pearson
from stein_chisq.distances import smooth_distance
from stein_chisq.statistics import MultinomialModel
from stein_chisq.test_functions import parse_descriptor

TAGS = {"computed", "estimated", "paper-constant"}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def _numbers_untagged(node, path="outputs"):
    """Paths of floats in the outputs tree that do not sit inside a provenance record."""
    if isinstance(node, dict):
        if "provenance" in node:
            assert node["provenance"] in TAGS, path
            if node["provenance"] == "estimated":
                assert node["se"] >= 0, path
            return []
        return [p for k, v in node.items() for p in _numbers_untagged(v, f"{path}.{k}")]
    if isinstance(node, list):
        return [p for i, v in enumerate(node) for p in _numbers_untagged(v, f"{path}[{i}]")]
    return [path] if isinstance(node, float) else []


COMMANDS = [
    ("bound", "clt", "--n", "20", "--d", "2"),
    ("bound", "squared-clt", "--n", "20", "--dist", "shifted"),
    ("bound", "pearson", "--n", "30", "--p", "0.2,0.3,0.5"),
    ("bound", "kolmogorov", "--n", "100", "--m", "3", "--optimize"),
    ("bound", "literature", "--n", "100", "--p", "uniform:4"),
    ("bound", "gamma", "--r", "1.5", "--lambda", "0.5", "--k", "2"),
    ("distance", "smooth", "--n", "20", "--p", "0.3,0.7", "--check"),
    ("distance", "smooth", "--n", "20", "--d", "2", "--mode", "mc", "--budget", "20000"),
    ("distance", "kolmogorov", "--n", "20", "--p", "0.3,0.7", "--check"),
    ("rate", "atom", "--ns", "16,32,64"),
    ("rate", "pearson", "--p", "0.5,0.5", "--ns", "8,16,32"),
    ("gamma", "solve", "--r", "1", "--lambda", "1", "--x", "0,1,5"),
    ("gamma", "verify", "--r", "1", "--lambda", "0.5", "--k", "3", "--points", "50"),
    ("mvn", "compare", "--p", "0.2,0.3,0.5", "--trials", "50"),
    ("stats", "enumerate", "--n", "8", "--p", "0.2,0.3,0.5", "--h", "cos:1"),
    ("stats", "moments", "--n", "10", "--p", "0.3"),
]


class TestReports:
    @pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: " ".join(a[:2]))
    def test_layout_and_tags(self, capsys, argv):
        rep = report(capsys, *argv)
        assert set(rep) == {"schema", "command", "inputs", "outputs", "seed", "version", "wall_time"}
        assert rep["schema"] == 1 and rep["version"] == cli.__version__
        assert _numbers_untagged(rep["outputs"]) == []

    def test_kolmogorov_bound_matches_module(self, capsys):
        rep = report(capsys, "bound", "kolmogorov", "--n", "500", "--p", "0.2,0.3,0.5")
        assert rep["outputs"]["bound"]["value"] == bound_kolmogorov_pearson(500, (0.2, 0.3, 0.5)).value

    def test_smooth_distance_matches_module(self, capsys):
        rep = report(capsys, "distance", "smooth", "--n", "25", "--p", "0.2,0.3,0.5", "--h", "exp:1")
        want = smooth_distance(MultinomialModel(25, (0.2, 0.3, 0.5)), parse_descriptor("exp:1"))
        assert rep["outputs"]["distance"]["value"] == want.value

    def test_same_seed_same_report(self, capsys):
        argv = ("distance", "smooth", "--n", "30", "--d", "2", "--dist", "shifted", "--mode", "mc",
                "--budget", "30000", "--seed", "5")
        a, b = report(capsys, *argv), report(capsys, *argv)
        a.pop("wall_time"), b.pop("wall_time")
        assert a == b

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "17")
        assert report(capsys, "rate", "atom", "--ns", "4,8,16")["seed"] == 17
        monkeypatch.setenv(cli.SEED_ENV, "seventeen")
        code, _, err = run(capsys, "rate", "atom", "--ns", "4,8,16")
        assert code == 2 and cli.SEED_ENV in err

    def test_csv_rows(self, capsys):
        code, out, _ = run(capsys, "rate", "atom", "--ns", "4,8,16", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 3

    def test_csv_flattened(self, capsys):
        code, out, _ = run(capsys, "bound", "kolmogorov", "--n", "100", "--m", "3", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and any(r["key"].endswith("bound") for r in rows)
        assert all(r["provenance"] in TAGS for r in rows if r["provenance"])

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, out, _ = run(capsys, "stats", "moments", "--n", "6", "--p", "0.5", "--out", str(path))
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["command"] == "stats moments"

    def test_moment_order_filter(self, capsys):
        rep = report(capsys, "stats", "moments", "--n", "10", "--p", "0.3", "--order", "6")
        assert set(rep["outputs"]["closed_form"]) == {"m6"}


class TestExitCodes:
    def test_probabilities_must_sum_to_one(self, capsys):
        code, _, err = run(capsys, "bound", "pearson", "--n", "10", "--p", "0.5,0.6")
        assert code == 2 and "sum to 1" in err

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["bound", "pearson", "--frobnicate"])
        assert info.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_missing_n(self, capsys):
        code, _, err = run(capsys, "distance", "smooth", "--p", "0.5,0.5")
        assert code == 2 and "--n" in err

    def test_enumeration_budget(self, capsys):
        code, _, err = run(capsys, "stats", "enumerate", "--n", "200", "--m", "5", "--budget", "1000")
        assert code == 2 and "budget" in err

    def test_bad_descriptor(self, capsys):
        code, _, _ = run(capsys, "bound", "pearson", "--n", "10", "--p", "0.5,0.5", "--h", "sinc")
        assert code == 2


class TestSelftest:
    def test_quick_subset_passes(self, capsys):
        code, out, err = run(capsys, "selftest", "--only", "2,4,9")
        lines = [json.loads(line) for line in out.splitlines()]
        assert code == 0
        assert [r["command"] for r in lines] == ["selftest criterion 2", "selftest criterion 4",
                                                "selftest criterion 9", "selftest"]
        assert lines[-1]["outputs"] == {"passed": True, "failing_criteria": []}
        assert err.count("PASS") == 3

    def test_corrupted_constant_fails_criterion(self, capsys, monkeypatch):
        c = CONSTANTS["pearson.n1.h0"]
        monkeypatch.setitem(CONSTANTS, "pearson.n1.h0", Constant(1.0, c.ref))
        code, out, err = run(capsys, "selftest", "--only", "6")
        summary = json.loads(out.splitlines()[-1])
        assert code == 1
        assert summary["outputs"]["failing_criteria"] == [6]
        assert "criterion  6 FAIL" in err
