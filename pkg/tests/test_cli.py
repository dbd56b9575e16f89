import json
from pathlib import Path

import numpy as np
import pytest

from lldpm import cli
from lldpm.cli import RunConfig, main, read_config_file, read_long, read_wide

FAST = ["--iters", "300", "--burnin", "100", "--catalogue-size", "200", "--catalogue-burnin", "50", "--g-samples", "2000"]
OUTPUTS = ["ppc.csv", "partitions.csv", "etas.csv", "trace.csv", "summary.json"]


def body(path):
    return [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]


@pytest.fixture
def sim(tmp_path):
    assert main(["simulate", "independent", "--n", "10", "--T", "18", "--seed", "7", "--out", str(tmp_path / "sim")]) == 0
    return tmp_path / "sim"


class TestSimulate:
    def test_writes_data_and_truth(self, sim):
        Y = read_wide(sim / "data.csv")
        truth = json.loads((sim / "truth.json").read_text())
        assert Y.shape == (10, 18)
        assert truth["n"] == 10 and truth["T"] == 18 and len(truth["true_changepoints"]) == 8
        assert (sim / "data.csv").read_text().startswith("# lldpm data format 1")

    def test_ar1_defaults(self, tmp_path):
        assert main(["simulate", "ar1", "--lambda", "0.9", "--out", str(tmp_path)]) == 0
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert (truth["n"], truth["T"]) == (20, 30) and truth["params"]["lambda"] == 0.9

    def test_missing_output_path(self, capsys):
        assert main(["simulate", "independent"]) == 2
        assert "--out" in capsys.readouterr().err


class TestFit:
    def test_outputs_and_determinism(self, sim, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["fit", str(sim / "data.csv"), "--out", str(a), "--seed", "5", *FAST]) == 0
        assert main(["fit", str(sim / "data.csv"), "--out", str(b), "--seed", "5", "--threads", "3", *FAST]) == 0
        for f in OUTPUTS:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f
        assert body(a / "ppc.csv")[0] == "t,ppc,flagged" and len(body(a / "ppc.csv")) == 18
        assert len(body(a / "partitions.csv")) == 1 + 10 * 18
        assert body(a / "trace.csv")[0] == "iteration,t,gamma,eta,k,entropy"
        summary = json.loads((a / "summary.json").read_text())
        assert summary["seed"] == 5 and summary["config"]["iters"] == 300
        assert "runtime_seconds" in json.loads((a / "runtime.json").read_text())

    def test_rerun_from_summary(self, sim, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["fit", str(sim / "data.csv"), "--out", str(a), "--seed", "2", *FAST])
        assert main(["fit", str(sim / "data.csv"), "--out", str(b), "--config", str(a / "summary.json")]) == 0
        assert (a / "ppc.csv").read_bytes() == (b / "ppc.csv").read_bytes()

    def test_similarity_output(self, sim, tmp_path):
        main(["fit", str(sim / "data.csv"), "--out", str(tmp_path / "f"), "--similarity", *FAST])
        S = read_wide(tmp_path / "f" / "similarity" / "t0001.csv")
        assert S.shape == (10, 10) and np.allclose(np.diag(S), 1)

    def test_malformed_csv(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,3\n4,5\n")
        assert main(["fit", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "line 2 has 2 columns" in capsys.readouterr().err
        bad.write_text("1,2\n3,oops\n")
        assert main(["fit", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "line 2, column 2" in capsys.readouterr().err

    def test_bad_config_value(self, sim, tmp_path):
        assert main(["fit", str(sim / "data.csv"), "--out", str(tmp_path), "--iters", "10", "--burnin", "20"]) == 2


class TestConfig:
    def _args(self, argv):
        return cli.build_parser().parse_args(["fit", "x.csv", *argv])

    def test_defaults(self):
        cfg = cli.resolve_config(self._args([]))
        assert (cfg.iters, cfg.burnin, cfg.eta_a, cfg.eta_b) == (10_000, 5_000, 0.1, 0.9)
        assert cfg.tau2 == cfg.sigma02 == pytest.approx(3 / 14)

    def test_precedence(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# comment\niters = 700\nburnin = 200\nzeta = 0.05\n")
        cfg = cli.resolve_config(self._args(["--config", str(f), "--iters", "900"]))
        assert (cfg.iters, cfg.burnin, cfg.zeta) == (900, 200, 0.05)

    def test_gesture_preset(self):
        cfg = cli.resolve_config(self._args(["--preset", "gesture"]))
        assert cfg.sigma02 == 1.0 and cfg.tau2 == 1.0 and cfg.expected_clusters == 2.0
        assert cfg.gibbs(8).theta == pytest.approx(0.49, abs=0.005)
        cfg = cli.resolve_config(self._args(["--preset", "gesture", "--theta", "0.3"]))
        assert cfg.theta == 0.3 and cfg.expected_clusters is None

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("itres = 5\n")
        with pytest.raises(ValueError, match="unknown config key"):
            read_config_file(f)

    def test_invariants(self):
        with pytest.raises(ValueError):
            RunConfig(zeta=1.0)
        with pytest.raises(ValueError):
            RunConfig(thin=0)


class TestReaders:
    def test_header_optional(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("t1,t2\n1,2\n3,4\n")
        np.testing.assert_array_equal(read_wide(f), [[1, 2], [3, 4]])
        f.write_text("# comment\n1,2\n3,4\n")
        np.testing.assert_array_equal(read_wide(f), [[1, 2], [3, 4]])

    def test_long(self, tmp_path):
        f = tmp_path / "l.csv"
        f.write_text("unit,time,value\n2,1,5\n1,2,2\n1,1,1\n2,2,6\n")
        np.testing.assert_array_equal(read_long(f), [[1, 2], [5, 6]])
        f.write_text("1,1,1\n1,2,2\n2,1,3\n")
        with pytest.raises(ValueError, match="missing value"):
            read_long(f)


class TestMetrics:
    def test_perfect_detection(self, sim, tmp_path, capsys):
        truth = json.loads((sim / "truth.json").read_text())
        fit = tmp_path / "fit"
        fit.mkdir()
        T, n = truth["T"], truth["n"]
        flagged = truth["true_changepoints"]
        cli.write_csv(fit / "ppc.csv", "ppc", {}, ["t", "ppc", "flagged"],
                      [(t, float(t in flagged), int(t in flagged)) for t in range(2, T + 1)])  # fmt: skip
        cli.write_csv(fit / "partitions.csv", "partitions", {}, ["t", "unit", "cluster"],
                      [(t + 1, i + 1, c) for t, p in enumerate(truth["true_partitions"]) for i, c in enumerate(p)])  # fmt: skip
        cli.write_json(fit / "summary.json", {"data": {"n": n, "T": T}, "flagged": flagged})
        assert main(["metrics", "--fit", str(fit), "--truth", str(sim / "truth.json"), "--out", str(tmp_path / "m")]) == 0
        rows = body(tmp_path / "m" / "metrics.csv")[1:]
        assert all(float(r.split(",")[1]) == 1.0 for r in rows)

    def test_table_rows_over_replicates(self, sim, tmp_path, capsys):
        fit = tmp_path / "fit"
        main(["fit", str(sim / "data.csv"), "--out", str(fit), *FAST])
        capsys.readouterr()
        args = ["--fit", str(fit), "--truth", str(sim / "truth.json")] * 2
        assert main(["metrics", *args]) == 0
        out = capsys.readouterr().out.splitlines()
        assert [line.split()[0] for line in out] == ["specificity", "accuracy", "recall", "precision", "f1", "auc", "ari"]
        assert all(line.endswith("(0.00)") for line in out)

    def test_empty_truth(self, sim, tmp_path):
        empty = tmp_path / "truth.json"
        empty.write_text("")
        assert main(["metrics", "--fit", str(sim), "--truth", str(empty)]) == 2

    def test_horizon_mismatch(self, sim, tmp_path):
        fit = tmp_path / "fit"
        main(["fit", str(sim / "data.csv"), "--out", str(fit), *FAST])
        main(["simulate", "independent", "--n", "10", "--T", "25", "--out", str(tmp_path / "other")])
        assert main(["metrics", "--fit", str(fit), "--truth", str(tmp_path / "other" / "truth.json")]) == 2


class TestEri:
    def test_spot_value(self, capsys):
        assert main(["eri", "--theta", "1", "--eta", "1", "--lag", "1"]) == 0
        assert "0.5" in capsys.readouterr().out

    def test_matrix_eta_zero(self, tmp_path):
        out = tmp_path / "m.csv"
        assert main(["eri", "--eta", "0", "--n", "6", "--T", "5", "--matrix", str(out), "--matrix-draws", "200"]) == 0
        np.testing.assert_array_equal(read_wide(out), np.ones((5, 5)))

    def test_validation(self):
        assert main(["eri", "--eta", "1.5"]) == 2


class TestTwoView:
    def test_duplicate_views_and_strata(self, tmp_path):
        rng = np.random.default_rng(0)
        y = np.concatenate([rng.normal(-3, 0.3, 6), rng.normal(3, 0.3, 6)])
        np.savetxt(tmp_path / "v.csv", y[:, None], delimiter=",")
        (tmp_path / "s.csv").write_text("stratum\n" + "\n".join(["a"] * 6 + ["b"] * 6) + "\n")
        argv = ["twoview", "--view1", str(tmp_path / "v.csv"), "--view2", str(tmp_path / "v.csv"), "--out", str(tmp_path / "o"),
                "--strata", str(tmp_path / "s.csv"), *FAST, "--iters", "2000", "--burnin", "500"]  # fmt: skip
        assert main(argv) == 0
        rows = [r.split(",") for r in body(tmp_path / "o" / "eta.csv")[1:]]
        assert [r[0] for r in rows] == ["a", "b"]
        assert all(float(r[2]) < 0.1 for r in rows)

    def test_dimension_mismatch(self, tmp_path):
        (tmp_path / "a.csv").write_text("1\n2\n3\n")
        (tmp_path / "b.csv").write_text("1\n2\n")
        argv = ["twoview", "--view1", str(tmp_path / "a.csv"), "--view2", str(tmp_path / "b.csv"), "--out", str(tmp_path)]
        assert main(argv) == 2


class TestPreprocess:
    def test_length_arithmetic(self, tmp_path):
        x = np.abs(np.random.default_rng(1).normal(size=(3, 1745)))
        np.savetxt(tmp_path / "raw.csv", x, delimiter=",")
        assert main(["preprocess", str(tmp_path / "raw.csv"), str(tmp_path / "out.csv")]) == 0
        assert read_wide(tmp_path / "out.csv").shape == (3, 349)

    def test_negative_input(self, tmp_path, capsys):
        (tmp_path / "raw.csv").write_text("1,2,3,4,5,6,7,8,9,10,11\n1,1,1,1,1,1,-9,-9,1,1,1\n")
        assert main(["preprocess", str(tmp_path / "raw.csv"), str(tmp_path / "out.csv")]) == 2
        assert "unit 1" in capsys.readouterr().err
