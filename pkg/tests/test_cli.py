import json

import numpy as np
import pytest

from pnlrank.cli import main
from pnlrank.data import read_csv, write_csv, Dataset


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = main(
        ["simulate", "--nodes", "4", "--n", "250", "--noise", "gaussian", "--snr", "low",
         "--degree", "2", "--seed", "11", "--out", str(out)]
    )
    assert rc == 0
    return out


class TestSimulate:
    def test_outputs_and_sidecar(self, sim_dir):
        data = read_csv(sim_dir / "data.csv")
        assert data.n == 250 and data.m == 4
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert set(truth) >= {"edges", "coefficients", "seed"}
        for rec in truth["coefficients"]:
            assert len(rec["coeffs"]) == 2
        manifest = json.loads((sim_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert any(p.endswith("data.csv") for p in manifest["outputs"])
        assert truth["run_id"] == manifest["run_id"]

    def test_reproducible_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["simulate", "--nodes", "3", "--n", "50", "--seed", "7", "--out", str(d)]) == 0
        assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
        assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()

    def test_degree_four_sidecar(self, tmp_path):
        assert main(["simulate", "--nodes", "3", "--n", "40", "--degree", "4",
                     "--seed", "3", "--out", str(tmp_path)]) == 0
        truth = json.loads((tmp_path / "truth.json").read_text())
        for rec in truth["coefficients"]:
            assert len(rec["coeffs"]) == 4

    def test_validation_exit(self, tmp_path):
        assert main(["simulate", "--nodes", "1", "--n", "50", "--out", str(tmp_path)]) == 2


class TestFit:
    def test_rankg_shape_contract(self, sim_dir, tmp_path):
        rc = main(["fit", "--data", str(sim_dir / "data.csv"), "--target", "X2",
                   "--method", "rankg", "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "fit_result.json").read_text())
        assert len(doc["beta"]) == 3  # unexpanded degree-1 design
        assert doc["converged"] in (True, False)
        assert len(doc["residuals"]) == 250
        assert len(doc["h_points"]) == 250
        res = (tmp_path / "residuals.csv").read_text().strip().split("\n")
        assert res[0] == "residual" and len(res) == 251

    def test_ranks_resolves_median_y0(self, sim_dir, tmp_path):
        rc = main(["fit", "--data", str(sim_dir / "data.csv"), "--target", "X2",
                   "--method", "ranks", "--y0", "median", "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "fit_result.json").read_text())
        data = read_csv(sim_dir / "data.csv")
        assert doc["y0"] == pytest.approx(float(np.median(data.column("X2"))))
        assert doc["beta"][doc["pivot_index"]] == 1.0
        assert doc["lambda"] == 1e-3
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["resolved"]["y0"] == doc["y0"]

    def test_byte_identical_rerun(self, sim_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["fit", "--data", str(sim_dir / "data.csv"), "--target", "X1",
                         "--method", "rankg", "--out", str(d)]) == 0
        assert (a / "fit_result.json").read_bytes() == (b / "fit_result.json").read_bytes()
        assert (a / "residuals.csv").read_bytes() == (b / "residuals.csv").read_bytes()

    def test_missing_target_exit_two(self, sim_dir, tmp_path):
        assert main(["fit", "--data", str(sim_dir / "data.csv"), "--target", "nope",
                     "--method", "rankg", "--out", str(tmp_path)]) == 2

    def test_ties_rejected_then_jittered(self, tmp_path):
        vals = np.column_stack([np.arange(20.0), np.repeat(np.arange(10.0), 2)])
        write_csv(Dataset(vals, ("a", "b")), tmp_path / "ties.csv")
        base = ["fit", "--data", str(tmp_path / "ties.csv"), "--target", "b",
                "--method", "rankg", "--out", str(tmp_path)]
        assert main(base) == 2
        assert main(base + ["--jitter-ties", "--seed", "4"]) == 0


class TestOrder:
    def test_shape_contract_and_trace(self, sim_dir, tmp_path):
        rc = main(["order", "--data", str(sim_dir / "data.csv"), "--method", "rankg",
                   "--basis-degree", "2", "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "ordering.json").read_text())
        assert sorted(doc["order"]) == ["X1", "X2", "X3", "X4"]
        assert len(doc["steps"]) == 3
        for step, expected in zip(doc["steps"], (4, 3, 2)):
            assert len(step["remaining"]) == expected
            assert step["chosen"] in step["remaining"]
            assert set(step["t"]) == set(step["remaining"])
        log = (tmp_path / "steps.txt").read_text()
        assert "sink ->" in log and "ordering:" in log

    def test_size_guard_exit_two(self, tmp_path):
        rng = np.random.default_rng(0)
        write_csv(Dataset(rng.normal(size=(5, 4)), ("a", "b", "c", "d")), tmp_path / "small.csv")
        rc = main(["order", "--data", str(tmp_path / "small.csv"), "--basis-degree", "2",
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_identical_bytes_on_rerun(self, sim_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["order", "--data", str(sim_dir / "data.csv"), "--basis-degree", "2",
                         "--out", str(d)]) == 0
        assert (a / "ordering.json").read_bytes() == (b / "ordering.json").read_bytes()


class TestBenchmark:
    def test_smoke_preset_outputs(self, tmp_path):
        rc = main(["benchmark", "--preset", "table4", "--reps", "1", "--nmax", "100",
                   "--out", str(tmp_path)])
        assert rc == 0
        csv = (tmp_path / "table4.csv").read_text()
        assert csv.splitlines()[0].startswith("method,n,")
        assert "rankg,100," in csv
        doc = json.loads((tmp_path / "table4.json").read_text())
        assert doc["spec"]["hsic_bandwidth_x"] == 1.0
        assert len(doc["replications"]) == 1
        svg = (tmp_path / "table4.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg
        table = (tmp_path / "table4_table.csv").read_text().splitlines()
        assert table[0] == "n,rankg" and "+/-" in table[1]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "rankg@100" in manifest["cells"]

    def test_preset_rows_follow_paper_grid(self, tmp_path):
        from pnlrank.presets import get_preset

        t4 = get_preset("table4")
        assert t4.n_values == (100, 500, 1000, 1500, 2000)
        assert t4.methods == ("rankg",)
        assert t4.sem.coef_range == (-10.0, 10.0)
        assert t4.sem.noise.law == "gaussian"
        t16 = get_preset("table16")
        assert t16.n_values == (100, 150, 200, 250, 300)
        assert set(t16.methods) == {"rankg", "ranks"}
        assert t16.sem.coef_range == (-10.0, 10.0)
        t22 = get_preset("table22")
        assert t22.sem.inner_degree == 4
        assert t22.order_cfg.basis.degree == 4
        assert len({get_preset(f"table{i}").base_seed for i in range(1, 25)}) == 24

    def test_custom_spec_file(self, tmp_path):
        spec = {
            "m": 3,
            "n_values": [60],
            "methods": ["rankg"],
            "replications": 2,
            "base_seed": 5,
            "basis_degree": 1,
        }
        (tmp_path / "custom.json").write_text(json.dumps(spec))
        rc = main(["benchmark", "--preset", "custom", "--spec", str(tmp_path / "custom.json"),
                   "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "custom.csv").exists()

    def test_identical_csv_across_thread_counts(self, tmp_path):
        outs = {}
        for t in ("1", "2"):
            d = tmp_path / f"t{t}"
            rc = main(["benchmark", "--preset", "table4", "--reps", "2", "--nmax", "100",
                       "--threads", t, "--out", str(d)])
            assert rc == 0
            outs[t] = (d / "table4.csv").read_bytes()
        assert outs["1"] == outs["2"]

    def test_nmax_validation(self, tmp_path):
        assert main(["benchmark", "--preset", "table4", "--nmax", "10",
                     "--out", str(tmp_path)]) == 2


class TestExitCodes:
    def test_separation_fit_exits_three_with_artifacts(self, tmp_path):
        # perfectly rank-concordant data: no finite maximizer
        n = 15
        x = np.linspace(0.0, 1.0, n)
        vals = np.column_stack([x, np.sqrt(x + 1.0)])
        write_csv(Dataset(vals, ("a", "b")), tmp_path / "sep.csv")
        rc = main(["fit", "--data", str(tmp_path / "sep.csv"), "--target", "b",
                   "--method", "rankg", "--out", str(tmp_path)])
        assert rc == 3
        doc = json.loads((tmp_path / "fit_result.json").read_text())
        assert doc["converged"] is False
        assert (tmp_path / "residuals.csv").exists()

    def test_chain_order_recovers_direction(self, tmp_path):
        from pnlrank.rng import Stream

        s = Stream(2024)
        x1 = s.gaussian(500)
        x2 = np.cbrt(4.0 * x1 + s.gaussian(500))
        write_csv(Dataset(np.column_stack([x1, x2]), ("A", "B")), tmp_path / "chain.csv")
        rc = main(["order", "--data", str(tmp_path / "chain.csv"), "--method", "rankg",
                   "--basis-degree", "1", "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "ordering.json").read_text())
        assert doc["order"] == ["A", "B"]
        log = (tmp_path / "steps.txt").read_text()
        assert "sink -> B" in log

    def test_order_ties_guard_and_jitter(self, tmp_path):
        rng = np.random.default_rng(5)
        vals = np.column_stack([np.repeat(np.arange(25.0), 2), rng.normal(size=50)])
        write_csv(Dataset(vals, ("A", "B")), tmp_path / "t.csv")
        base = ["order", "--data", str(tmp_path / "t.csv"), "--basis-degree", "1",
                "--out", str(tmp_path)]
        assert main(base) == 2
        assert main(base + ["--jitter-ties", "--seed", "3"]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["jitter_ties"] is True


class TestThreadsEnv:
    def test_env_var_sets_default_threads(self, monkeypatch):
        from pnlrank.cli import build_parser, _default_threads

        monkeypatch.setenv("PNLRANK_THREADS", "6")
        assert _default_threads() == 6
        args = build_parser().parse_args(["benchmark", "--preset", "table4"])
        assert args.threads == 6
        monkeypatch.setenv("PNLRANK_THREADS", "not-a-number")
        assert _default_threads() == 1
        monkeypatch.delenv("PNLRANK_THREADS")
        assert _default_threads() == 1
