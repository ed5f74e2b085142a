import csv
import io
import subprocess
import sys

from fgbk.cli import cli_main
from fgbk.linalg import SparseMatrixCsr
from fgbk.matrix_io import RESULT_COLUMNS, gen_gaussian, write_matrix_market


def run(capsys, *argv):
    code = cli_main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSolve:
    def test_gaussian(self, capsys):
        code, out, _ = run(capsys, "solve", "--gaussian", "60x90", "--seed", "3", "--method", "fgbk", "--p", "1", "--eta", "0.1")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == ",".join(RESULT_COLUMNS) and len(lines) == 2
        (row,) = rows_of(out)
        assert row["method"] == "fgbk" and row["converged"] == "true" and row["m"] == "60"

    def test_matrix_file_and_history(self, capsys, tmp_path):
        write_matrix_market(gen_gaussian(20, 30, 0), tmp_path / "g.mtx")
        hist = tmp_path / "h.csv"
        code, out, _ = run(capsys, "solve", "--matrix", str(tmp_path / "g.mtx"), "--method", "gbk", "--history", str(hist))
        assert code == 0
        (row,) = rows_of(out)
        assert row["matrix"] == "g" and row["p"] == "" and row["eta"] == ""
        assert hist.read_text().startswith("k,rse,residual_norm,block_size\n")

    def test_no_source_is_usage_error(self, capsys):
        code, _, err = run(capsys, "solve", "--method", "fgbk")
        assert code == 2 and "--matrix" in err

    def test_bad_method(self, capsys):
        assert run(capsys, "solve", "--gaussian", "4x4", "--method", "sor")[0] == 2

    def test_bad_eta(self, capsys):
        code, _, err = run(capsys, "solve", "--gaussian", "4x4", "--eta", "3")
        assert code == 2 and "eta" in err

    def test_bad_shape(self, capsys):
        assert run(capsys, "solve", "--gaussian", "4by4")[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "solve", "--matrix", str(tmp_path / "none.mtx"))[0] == 2

    def test_malformed_file(self, capsys, tmp_path):
        p = tmp_path / "bad.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 q 1\n")
        code, _, err = run(capsys, "solve", "--matrix", str(p))
        assert code == 2 and "bad.mtx:3" in err

    def test_not_converged_exit_one(self, capsys):
        code, out, _ = run(capsys, "solve", "--gaussian", "50x50", "--max-iters", "3")
        assert code == 1 and rows_of(out)[0]["converged"] == "false"


class TestVerify:
    def test_example(self, capsys, tmp_path):
        trace = tmp_path / "t.csv"
        code, out, _ = run(capsys, "verify", "--m", "60", "--n", "40", "--seed", "1", "--p", "2", "--eta", "0.5", "--trace", str(trace))
        assert code == 0
        assert "contraction bound satisfied at all" in out
        K = int(out.split("at all ")[1].split()[0])
        assert len(trace.read_text().splitlines()) == K + 1

    def test_too_few_iterations(self, capsys):
        code, out, _ = run(capsys, "verify", "--m", "40", "--n", "40", "--p", "1", "--eta", "0.1", "--max-iters", "5")
        assert code == 1 and "satisfied" in out

    def test_cap(self, capsys):
        code, _, err = run(capsys, "verify", "--m", "1001", "--n", "3", "--p", "1", "--eta", "0.1")
        assert code == 1 and "capped" in err


class TestOthers:
    def test_info(self, capsys, tmp_path):
        write_matrix_market(SparseMatrixCsr.from_dense([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), tmp_path / "a.mtx")
        code, out, _ = run(capsys, "info", "--matrix", str(tmp_path / "a.mtx"))
        assert code == 0
        assert out.startswith("m=3 n=2 nnz=4 density=66.67% rank=2 cond=1.73")

    def test_sweep(self, capsys, tmp_path):
        out_csv = tmp_path / "s.csv"
        code, _, err = run(capsys, "sweep", "--gaussian", "30x50", "--seed", "2", "--p", "1", "--grid", "0.2:0.2:1.0", "--out", str(out_csv))
        assert code == 0
        rows = rows_of(out_csv.read_text())
        assert [r["eta"] for r in rows] == ["0.2", "0.4", "0.6", "0.8", "1.0"]
        eta_exp = float(err.split("eta_exp=")[1].split()[0])
        best = min(int(r["iters"]) for r in rows)
        assert eta_exp == min(float(r["eta"]) for r in rows if int(r["iters"]) == best)

    def test_bench(self, capsys, tmp_path):
        spec = tmp_path / "exp.txt"
        spec.write_text("problem = gaussian 20x30 seed=1\nmethod = gbk\nmethod = fgbk p=2 eta=0.5\n")
        out_csv = tmp_path / "r.csv"
        assert run(capsys, "bench", "--spec", str(spec), "--out", str(out_csv))[0] == 0
        assert [r["method"] for r in rows_of(out_csv.read_text())] == ["gbk", "fgbk"]

    def test_bench_parse_error(self, capsys, tmp_path):
        spec = tmp_path / "exp.txt"
        spec.write_text("problem = gaussian 20x30\nmethod = nope\n")
        code, _, err = run(capsys, "bench", "--spec", str(spec))
        assert code == 2 and "exp.txt:2" in err

    def test_no_subcommand(self, capsys):
        assert run(capsys)[0] == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "fgbk", "solve"], capture_output=True, text=True)
        assert proc.returncode == 2


def test_sweep_bad_p(capsys):
    assert run(capsys, "sweep", "--gaussian", "4x4", "--p", "0.5")[0] == 2
