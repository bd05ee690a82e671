import csv
import json
from pathlib import Path

import pytest

from flexref.cli import main


def run(argv):
    return main(argv)


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "problems"
    code = run(["generate", "--family", "1id", "--count", "6", "--seed", "7",
                "--n", "6", "--out", str(out)])
    assert code == 0
    return out


class TestGenerate:
    def test_writes_diagrams_and_manifest(self, corpus):
        files = sorted(p.name for p in corpus.glob("*.json"))
        assert "manifest.json" in files
        assert len(files) == 7
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert manifest["count"] == 6
        assert all("path" in inst for inst in manifest["instances"])

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "1id", "count": 2, "seed": 3,
                                   "template": {"n": 4}}))
        out = tmp_path / "out"
        assert run(["generate", "--config", str(cfg), "--out", str(out)]) == 0
        assert len(list(out.glob("1id-*.json"))) == 2

    def test_maze_family(self, tmp_path):
        out = tmp_path / "mazes"
        code = run(["generate", "--family", "maze", "--count", "2",
                    "--stages", "2", "--grids", "small1,small2",
                    "--out", str(out)])
        assert code == 0
        assert len(list(out.glob("maze-*.json"))) == 2


class TestRefine:
    def test_directory_input(self, corpus, tmp_path):
        out = tmp_path / "profiles"
        code = run(["refine", str(corpus), "--budget", "12", "--solve",
                    "--out", str(out)])
        assert code == 0
        profiles = list(out.glob("*.profile.csv"))
        assert len(profiles) == 6
        meta = json.loads(next(out.glob("*.meta.json")).read_text())
        assert meta["ev_star"] is not None
        assert meta["final_ev"] <= meta["ev_star"] + 1e-9

    def test_parallel_jobs_match_serial(self, corpus, tmp_path):
        a, b = tmp_path / "serial", tmp_path / "parallel"
        assert run(["refine", str(corpus), "--budget", "5", "--out", str(a)]) == 0
        assert run(["refine", str(corpus), "--budget", "5", "--jobs", "2",
                    "--out", str(b)]) == 0
        for pa in sorted(a.glob("*.policy.json")):
            assert pa.read_bytes() == (b / pa.name).read_bytes()

    def test_no_problems_is_usage_error(self, tmp_path):
        assert run(["refine", "--out", str(tmp_path / "x")]) == 1

    def test_missing_file_is_parse_error(self, tmp_path):
        assert run(["refine", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path / "x")]) == 2

    def test_invalid_json_is_parse_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["refine", str(bad), "--out", str(tmp_path / "x")]) == 2


class TestSolve:
    def test_prints_and_writes(self, corpus, tmp_path, capsys):
        problem = sorted(corpus.glob("1id-*.json"))[0]
        out = tmp_path / "solutions"
        assert run(["solve", str(problem), "--out", str(out)]) == 0
        assert "EV* =" in capsys.readouterr().out
        doc = json.loads(next(out.glob("*.solution.json")).read_text())
        assert 0.0 <= doc["ev_star"] <= 1.0

    def test_cap_exceeded_is_runtime_error(self, corpus, tmp_path):
        problem = sorted(corpus.glob("1id-*.json"))[0]
        assert run(["solve", str(problem), "--cap", "2"]) == 3


class TestFitPredictControlReport:
    @pytest.fixture
    def profiles(self, corpus, tmp_path):
        out = tmp_path / "profiles"
        assert run(["refine", str(corpus), "--budget", "15", "--solve",
                    "--out", str(out)]) == 0
        return out

    def test_full_pipeline(self, corpus, profiles, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        assert run(["fit", "--profiles", str(profiles), "--step", "10",
                    "--out", str(model_path)]) == 0
        model = json.loads(model_path.read_text())
        assert len(model["coefficients"]) == 3

        preds = tmp_path / "preds"
        assert run(["predict", "--model", str(model_path),
                    "--profiles", str(profiles), "--out", str(preds)]) == 0
        pred_rows = list(csv.DictReader(next(preds.glob("*.pred.csv")).open()))
        assert pred_rows and "ev_star_hat" in pred_rows[0]

        problem = sorted(corpus.glob("1id-*.json"))[0]
        ctrl = tmp_path / "ctrl"
        assert run(["control", str(problem), "--model", str(model_path),
                    "--cost", "exp:0.001,1.5", "--budget", "25",
                    "--out", str(ctrl)]) == 0
        summary = json.loads(next(ctrl.glob("*.control.json")).read_text())
        assert {"stop_step", "stop_reason", "ev_ii_argmax_step"} <= summary.keys()

        report_path = tmp_path / "report.json"
        assert run(["report", "--profiles", str(profiles),
                    "--predictions", f"fit={preds}",
                    "--out", str(report_path)]) == 0
        doc = json.loads(report_path.read_text())
        assert len(doc["problems"]) == 6
        assert "fit" in doc["aggregate"]
        table = capsys.readouterr().out
        assert "best known" in table

    def test_fit_without_solve_needs_best_known(self, corpus, tmp_path):
        out = tmp_path / "nosolve"
        assert run(["refine", str(corpus), "--budget", "15",
                    "--out", str(out)]) == 0
        model_path = tmp_path / "m.json"
        assert run(["fit", "--profiles", str(out),
                    "--out", str(model_path)]) == 2
        assert run(["fit", "--profiles", str(out), "--target", "best-known",
                    "--out", str(model_path)]) == 0

    def test_fit_short_profiles_is_parse_error(self, corpus, tmp_path):
        out = tmp_path / "short"
        assert run(["refine", str(corpus), "--budget", "3", "--solve",
                    "--out", str(out)]) == 0
        assert run(["fit", "--profiles", str(out),
                    "--out", str(tmp_path / "m.json")]) == 2

    def test_bad_cost_spec_is_usage_error(self, corpus, profiles, tmp_path):
        model_path = tmp_path / "model.json"
        assert run(["fit", "--profiles", str(profiles),
                    "--out", str(model_path)]) == 0
        problem = sorted(corpus.glob("1id-*.json"))[0]
        assert run(["control", str(problem), "--model", str(model_path),
                    "--cost", "banana", "--out", str(tmp_path / "c")]) == 1

    def test_bad_predictions_spec_is_usage_error(self, profiles, tmp_path):
        assert run(["report", "--profiles", str(profiles),
                    "--predictions", "nodir"]) == 1

    def test_missing_model_is_parse_error(self, corpus, tmp_path):
        problem = sorted(corpus.glob("1id-*.json"))[0]
        assert run(["control", str(problem),
                    "--model", str(tmp_path / "none.json"),
                    "--out", str(tmp_path / "c")]) == 2


class TestUsage:
    def test_unknown_command(self):
        assert run(["frobnicate"]) == 1

    def test_missing_required_option(self, tmp_path):
        assert run(["generate"]) == 1
