import json
import shutil
import subprocess

import numpy as np
import pytest

from markov_fusion.cli import main
from markov_fusion.datasets import ACGT_COUNTS, ACGT_MLE_PRINTED, SIMULATION_COUNTS, SIMULATION_TRUTH
from markov_fusion.io import counts_csv, matrix_json


@pytest.fixture
def files(tmp_path):
    acgt = tmp_path / "acgt.csv"
    acgt.write_text(counts_csv(ACGT_COUNTS))
    sim = tmp_path / "sim.csv"
    sim.write_text(counts_csv(SIMULATION_COUNTS))
    truth = tmp_path / "truth.json"
    truth.write_text(matrix_json(SIMULATION_TRUTH))
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def csv_matrix(text):
    return np.array([[float(v) for v in line.split(",")] for line in text.strip().splitlines()])


class TestSpecExamples:
    def test_estimate_mle(self, capsys, files):
        code, out, _ = run(capsys, "estimate", "--method", "mle", "--counts", files / "acgt.csv")
        assert code == 0
        assert np.max(np.abs(csv_matrix(out) - ACGT_MLE_PRINTED)) < 5e-4
        # stdout uses six decimals
        assert all(len(v.split(".")[1]) == 6 for v in out.splitlines()[0].split(","))

    def test_lrt(self, capsys, files):
        code, out, _ = run(capsys, "lrt", "--counts", files / "acgt.csv", "--null", "AG=GC", "--level", "0.05")
        assert code == 0
        res = json.loads(out)
        assert res["gamma"] == pytest.approx(0.037, abs=0.01)
        assert res["reject"] is False
        assert res["df"] == 1

    def test_fit_lambda_zero_is_mle(self, capsys, files):
        code, out, _ = run(capsys, "fit", "--method", "alasso", "--counts", files / "sim.csv", "--lambda", "0",
                           "--seed", "1")
        assert code == 0
        fitted = np.array(json.loads(out)["estimate"])
        code, out, _ = run(capsys, "estimate", "--method", "mle", "--counts", files / "sim.csv", "--format", "json")
        assert np.max(np.abs(fitted - np.array(json.loads(out)["rows"]))) < 1e-6


class TestCommands:
    def test_simulate_counts_pipeline(self, capsys, files):
        seq = files / "seq.txt"
        assert run(capsys, "simulate", "--matrix", "simulation", "--N", 300, "--seed", 4, "--out", seq)[0] == 0
        assert len(seq.read_text().split()) == 300
        code, out, _ = run(capsys, "counts", "--sequence", seq)
        assert code == 0
        assert csv_matrix(out).sum() == 299

    def test_simulate_alphabet(self, capsys, files):
        m = files / "m.json"
        m.write_text(matrix_json(SIMULATION_TRUTH))
        code, out, _ = run(capsys, "simulate", "--matrix", m, "--N", 20, "--seed", 0, "--alphabet", "file:" + str(
            _alphabet(files, "xyz")))
        assert code == 0
        assert set(out.split()) <= {"x", "y", "z"}

    def test_bootstrap(self, capsys, files):
        q = files / "q.json"
        q.write_text(json.dumps({"m": 4, "rows": [[0.25] * 4] * 4}))
        code, out, _ = run(capsys, "estimate", "--method", "bootstrap", "--counts", files / "acgt.csv", "--q", q,
                           "--alpha", 0)
        assert code == 0
        assert np.max(np.abs(csv_matrix(out) - ACGT_MLE_PRINTED)) < 5e-4

    def test_lrt_csv_integer_null(self, capsys, files):
        code, out, _ = run(capsys, "lrt", "--counts", files / "acgt.csv", "--null", "1,3=3,2", "--format", "csv")
        assert code == 0
        header, row = out.strip().splitlines()
        assert header.startswith("gamma,df")
        assert float(row.split(",")[0]) == pytest.approx(0.037, abs=0.01)

    def test_fit_cv_and_refit(self, capsys, files):
        code, out, _ = run(capsys, "fit", "--counts", files / "sim.csv", "--cv", "--seed", 0, "--grid", "0.1:10:5",
                           "--refit")
        assert code == 0
        res = json.loads(out)
        assert res["cv"]["best_lambda"] in res["cv"]["grid"]
        assert np.allclose(np.array(res["refit"]).sum(axis=1), 1)

    def test_cv_csv(self, capsys, files):
        code, out, _ = run(capsys, "cv", "--counts", files / "sim.csv", "--seed", 0, "--grid", "0.1,1", "--k", 3,
                           "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "lambda,cv_score,fold_1,fold_2,fold_3"

    def test_metrics(self, capsys, files):
        code, out, _ = run(capsys, "metrics", "--truth", files / "truth.json", "--estimate", files / "truth.json")
        assert code == 0
        assert json.loads(out) == {"purity": 1.0, "frobenius": 0.0, "selection_accuracy": 1.0}

    def test_study_outdir(self, capsys, files):
        outdir = files / "study"
        code, out, _ = run(capsys, "study", "--n-reps", 2, "--N", 1000, "--seed", 0, "--methods", "mle,mcalasso",
                           "--fixed-lambda", 1.0, "--hist", "1,2", "2,3", "--hist-reps", 3, "--outdir", outdir)
        assert code == 0
        assert out.splitlines()[0].startswith("method,metric,min")
        assert sorted(p.name for p in outdir.iterdir()) == ["hist.csv", "raw.csv", "summary.csv"]
        assert len((outdir / "hist.csv").read_text().splitlines()) == 4

    def test_identical_runs_identical_bytes(self, capsys, files):
        argv = ("cv", "--counts", files / "acgt.csv", "--seed", 3, "--grid", "0.01:1:4")
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def _alphabet(path, symbols):
    f = path / "alpha.txt"
    f.write_text("\n".join(symbols))
    return f


class TestErrors:
    def assert_one_line(self, err, code_prefix):
        lines = err.strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith(code_prefix)

    def test_usage(self, capsys, files):
        code, _, err = run(capsys, "estimate", "--counts", files / "acgt.csv", "--method", "magic")
        assert code == 1
        self.assert_one_line(err, "E_USAGE:")

    def test_missing_seed(self, capsys, files):
        code, _, err = run(capsys, "cv", "--counts", files / "acgt.csv")
        assert code == 1
        self.assert_one_line(err, "E_USAGE:")
        code, _, err = run(capsys, "fit", "--counts", files / "acgt.csv", "--cv")
        assert code == 1

    def test_bad_null_is_usage(self, capsys, files):
        code, _, err = run(capsys, "lrt", "--counts", files / "acgt.csv", "--null", "AG")
        assert code == 1
        self.assert_one_line(err, "E_")

    def test_zero_row_is_numerical(self, capsys, files):
        c = files / "zero.csv"
        c.write_text("1,1\n0,0\n")
        code, _, err = run(capsys, "estimate", "--counts", c)
        assert code == 2
        self.assert_one_line(err, "E_")

    def test_missing_file(self, capsys, files):
        code, _, err = run(capsys, "estimate", "--counts", files / "nope.csv")
        assert code == 3
        self.assert_one_line(err, "E_IO:")

    def test_malformed_file(self, capsys, files):
        c = files / "ragged.csv"
        c.write_text("1,2\n3\n")
        code, _, err = run(capsys, "estimate", "--counts", c)
        assert code == 3
        self.assert_one_line(err, "E_FORMAT:")

    def test_bad_grid(self, capsys, files):
        code, _, err = run(capsys, "cv", "--counts", files / "acgt.csv", "--seed", 0, "--grid", "a:b")
        assert code == 1
        self.assert_one_line(err, "E_USAGE:")


@pytest.mark.skipif(shutil.which("markov-fusion") is None, reason="console script not installed")
def test_console_script(files):
    proc = subprocess.run(["markov-fusion", "lrt", "--counts", str(files / "acgt.csv"), "--null", "AG=GC"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["df"] == 1
