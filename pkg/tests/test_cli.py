"""End-to-end command-line behavior: outputs, provenance, exit codes."""

import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from dtmad.cli import main
from dtmad.data import generate_scenario, save_csv
from dtmad import theory


@pytest.fixture
def ring_csv(tmp_path):
    lab = generate_scenario("ring", {"n_normals": 60, "n_anomalies": 2,
                                     "jitter": 0.02}, seed=4)
    path = tmp_path / "ring.csv"
    save_csv(lab, path)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if not row[0].startswith("#")]


class TestScore:
    def test_default_k_recorded(self, tmp_path):
        lab = generate_scenario("clustered", {"n_normals": 995, "n_anomalies": 5},
                                seed=1)
        data = tmp_path / "d.csv"
        save_csv(lab, data)
        out = tmp_path / "scores.json"
        code = main(["score", "--input", str(data), "--label-column", "label",
                     "--method", "dtm", "--q", "2", "--output", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["detector"]["k"] == 30  # ceil(0.03 * 1000)
        assert payload["detector"]["method"] == "dtm"
        assert payload["run"]["version"]

    def test_unknown_method_exit_2(self, ring_csv, tmp_path, capsys):
        code = main(["score", "--input", str(ring_csv), "--label-column", "label",
                     "--method", "wizardry", "--output", str(tmp_path / "x.csv")])
        assert code == 2

    def test_knn_equals_dtm_q1_byte_identical(self, ring_csv, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["score", "--input", str(ring_csv), "--label-column", "label",
                     "--method", "knn", "--k", "4", "--output", str(a)]) == 0
        assert main(["score", "--input", str(ring_csv), "--label-column", "label",
                     "--method", "dtm", "--q", "1", "--k", "4", "--output", str(b)]) == 0
        col_a = [row[1] for row in read_rows(a)[1:]]
        col_b = [row[1] for row in read_rows(b)[1:]]
        assert col_a == col_b

    def test_csv_json_same_numbers(self, ring_csv, tmp_path):
        c, j = tmp_path / "s.csv", tmp_path / "s.json"
        for out in (c, j):
            assert main(["score", "--input", str(ring_csv), "--label-column",
                         "label", "--method", "kthnn", "--k", "3",
                         "--output", str(out)]) == 0
        csv_scores = [float(row[1]) for row in read_rows(c)[1:]]
        assert csv_scores == json.loads(j.read_text())["scores"]

    def test_missing_input_exit_3(self, tmp_path):
        code = main(["score", "--input", str(tmp_path / "absent.csv"),
                     "--method", "knn", "--output", str(tmp_path / "o.csv")])
        assert code == 3

    def test_malformed_csv_exit_3(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,oops\n")
        code = main(["score", "--input", str(bad), "--method", "knn",
                     "--output", str(tmp_path / "o.csv")])
        assert code == 3

    def test_threads_identical_output(self, ring_csv, tmp_path):
        outs = []
        for t in ("1", "4"):
            out = tmp_path / f"s{t}.csv"
            assert main(["score", "--input", str(ring_csv), "--label-column",
                         "label", "--method", "dtm", "--q", "2", "--k", "4",
                         "--threads", t, "--output", str(out)]) == 0
            outs.append([row[1] for row in read_rows(out)[1:]])
        assert outs[0] == outs[1]

    def test_config_file_provides_defaults(self, ring_csv, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"k": 4, "label_column": "label"}))
        out = tmp_path / "s.json"
        assert main(["score", "--config", str(cfg), "--input", str(ring_csv),
                     "--method", "kthnn", "--output", str(out)]) == 0
        assert json.loads(out.read_text())["detector"]["k"] == 4


class TestEval:
    def _write_perfect(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x0,x1,label\n0,0,0\n0.1,0,0\n9,9,1\n9.1,9,1\n")
        scores = tmp_path / "s.csv"
        scores.write_text("index,score\n0,0.0\n1,0.1\n2,5.0\n3,6.0\n")
        return data, scores

    def test_perfect_fixture(self, tmp_path):
        data, scores = self._write_perfect(tmp_path)
        out = tmp_path / "eval.json"
        code = main(["eval", "--scores", str(scores), "--input", str(data),
                     "--label-column", "label", "--output", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["auc"] == 1.0 and payload["ap"] == 1.0

    def test_missing_label_column_exit_2(self, tmp_path):
        data, scores = self._write_perfect(tmp_path)
        assert main(["eval", "--scores", str(scores), "--input", str(data),
                     "--label-column", "absent",
                     "--output", str(tmp_path / "e.json")]) == 2
        assert main(["eval", "--scores", str(scores), "--input", str(data),
                     "--output", str(tmp_path / "e.json")]) == 2

    def test_single_class_exit_2(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x0,label\n0,0\n1,0\n2,0\n")
        scores = tmp_path / "s.csv"
        scores.write_text("index,score\n0,0.1\n1,0.2\n2,0.3\n")
        assert main(["eval", "--scores", str(scores), "--input", str(data),
                     "--label-column", "label",
                     "--output", str(tmp_path / "e.json")]) == 2

    def test_csv_json_parity(self, tmp_path):
        data, scores = self._write_perfect(tmp_path)
        j, c = tmp_path / "e.json", tmp_path / "e.csv"
        for out in (j, c):
            assert main(["eval", "--scores", str(scores), "--input", str(data),
                         "--label-column", "label", "--output", str(out)]) == 0
        payload = json.loads(j.read_text())
        table = {row[0]: row[1] for row in read_rows(c)[1:]}
        assert float(table["auc"]) == payload["auc"]
        assert float(table["ap"]) == payload["ap"]


class TestBounds:
    def test_skip_reasons_when_mass_below_epsilon(self, tmp_path):
        out = tmp_path / "b.json"
        code = main(["bounds", "--n", "1000", "--d", "2", "--m", "0.01",
                     "--epsilon", "0.05", "--eta", "2", "--a0", "1", "--b", "1",
                     "--output", str(out)])
        assert code == 0
        q = json.loads(out.read_text())["quantities"]
        assert "exceed contamination" in q["safety_density_threshold"]["skipped"]
        assert "exceed contamination" in q["full_support_separation"]["skipped"]

    def test_defaults_recorded_and_values_match_module(self, tmp_path):
        out = tmp_path / "b.json"
        assert main(["bounds", "--n", "1000", "--d", "2", "--m", "0.03",
                     "--output", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["inputs"]["delta"] == 0.05
        assert payload["inputs"]["C"] == 1.0
        got = payload["quantities"]["dtm_deviation_bound"]["value"]
        assert got == theory.dtm_deviation_bound(1000, 2, 0.05, 0.03, 1.0)

    def test_bad_flag_exit_2(self, tmp_path):
        assert main(["bounds", "--n", "notanint", "--d", "2",
                     "--output", str(tmp_path / "b.json")]) == 2


class TestDemo:
    def test_ring_top_two_are_center_anomalies(self, tmp_path):
        outdir = tmp_path / "ring"
        assert main(["demo", "--scenario", "ring", "--seed", "1",
                     "--output-dir", str(outdir)]) == 0
        rows = read_rows(outdir / "scores.csv")
        header, body = rows[0], rows[1:]
        dtm2 = np.array([float(r[header.index("dtm2")]) for r in body])
        top2 = set(np.argsort(-dtm2)[:2].tolist())
        assert top2 == {100, 101}  # the two center points appended last

    def test_shrinking_eta6_zero_misclassified(self, tmp_path):
        outdir = tmp_path / "sep"
        assert main(["demo", "--scenario", "shrinking_separation", "--eta", "6",
                     "--output-dir", str(outdir)]) == 0
        rows = read_rows(outdir / "scores.csv")
        header, body = rows[0], rows[1:]
        pred = np.array([int(r[header.index("predicted")]) for r in body])
        data_rows = read_rows(outdir / "dataset.csv")
        labels = np.array([int(r[-1]) for r in data_rows[1:]])
        assert ((labels == 0) & (pred == 1)).sum() == 0

    def test_svg_valid_one_circle_per_point(self, tmp_path):
        outdir = tmp_path / "svg"
        assert main(["demo", "--scenario", "ring", "--seed", "0",
                     "--n-normals", "40", "--output-dir", str(outdir)]) == 0
        tree = ET.parse(outdir / "demo.svg")
        circles = [el for el in tree.getroot().iter()
                   if el.tag.endswith("circle")]
        assert len(circles) == 42

    def test_all_method_columns_present(self, tmp_path):
        outdir = tmp_path / "cols"
        assert main(["demo", "--scenario", "local", "--seed", "0",
                     "--output-dir", str(outdir)]) == 0
        header = read_rows(outdir / "scores.csv")[0]
        for col in ("dtm2", "knn", "kthnn", "dtmf", "lof"):
            assert col in header


class TestBench:
    def _spec(self, tmp_path, ring_csv, with_unlabeled=False):
        datasets = [
            {"name": "ring", "path": str(ring_csv), "label_column": "label"},
            {"name": "shrink", "scenario": "shrinking_separation",
             "params": {"eta": 5.0}, "seed": 3},
        ]
        if with_unlabeled:
            plain = tmp_path / "plain.csv"
            plain.write_text("0,0\n1,1\n2,2\n3,3\n4,4\n5,5\n")
            datasets.append({"name": "plain", "path": str(plain)})
        spec = {"datasets": datasets,
                "methods": [{"method": "dtm", "q": 2},
                            {"method": "knn"},
                            {"method": "lof"}]}
        path = tmp_path / "bench.json"
        path.write_text(json.dumps(spec))
        return path

    def test_cardinality(self, tmp_path, ring_csv):
        spec = self._spec(tmp_path, ring_csv)
        out = tmp_path / "res.csv"
        assert main(["bench", "--spec", str(spec), "--seed", "1",
                     "--output", str(out)]) == 0
        rows = read_rows(out)[1:]
        assert len(rows) == 2 * 3 * 2  # datasets x methods x {auc, ap}

    def test_determinism_modulo_wall_time(self, tmp_path, ring_csv):
        spec = self._spec(tmp_path, ring_csv)
        snaps = []
        for name in ("r1.csv", "r2.csv"):
            out = tmp_path / name
            assert main(["bench", "--spec", str(spec), "--seed", "1",
                         "--output", str(out)]) == 0
            rows = read_rows(out)
            wall_col = rows[0].index("wall_time_s")
            snaps.append([[c for i, c in enumerate(row) if i != wall_col]
                          for row in rows])
        assert snaps[0] == snaps[1]

    def test_unlabeled_dataset_isolated_error(self, tmp_path, ring_csv):
        spec = self._spec(tmp_path, ring_csv, with_unlabeled=True)
        out = tmp_path / "res.csv"
        assert main(["bench", "--spec", str(spec), "--seed", "1",
                     "--output", str(out)]) == 0
        rows = read_rows(out)
        header = rows[0]
        by_ds = {}
        for row in rows[1:]:
            by_ds.setdefault(row[0], []).append(row)
        err_idx = header.index("error")
        assert all(r[err_idx] == "labels required" for r in by_ds["plain"])
        assert all(r[err_idx] == "" for r in by_ds["ring"])
        assert all(r[err_idx] == "" for r in by_ds["shrink"])


class TestCalibrate:
    def test_calibrate_outputs_constant(self, tmp_path, capsys):
        out = tmp_path / "c.json"
        code = main(["calibrate", "--n", "500", "--m", "0.1", "--trials", "3",
                     "--seed", "5", "--output", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["C"] > 0
        assert len(payload["constants"]) == 3


class TestEntryPoint:
    def test_console_script(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "dtmad.cli", "--version"],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert "dtmad" in res.stdout

    def test_no_command_exit_2(self):
        assert main([]) == 2
