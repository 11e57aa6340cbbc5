import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from sigtrial.cli import (
    ConfigError,
    bundled_config,
    load_data_csv,
    main,
    parse_run_config,
)

BUNDLED = [
    "scenario1_10pct",
    "scenario1_20pct",
    "scenario2a",
    "scenario2b",
    "scenario2c",
    "scenario3",
    "scenario4",
    "scenario4_null",
]


class TestBundledConfigs:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_loads_and_validates(self, name):
        cfg = parse_run_config(bundled_config(name), name)
        assert cfg["method"] == "cvrs2"
        assert cfg["k_clusters"] in (2, 4)
        assert cfg["scenario"].n_subjects == 400

    def test_missing_name(self):
        with pytest.raises(FileNotFoundError):
            bundled_config("no_such_scenario")


class TestParseRunConfig:
    def test_defaults(self):
        cfg = parse_run_config({})
        assert cfg["r_folds"] == 10
        assert cfg["alphas"].alpha1 == 0.04
        assert cfg["alphas"].alpha2 == 0.01
        assert "scenario" not in cfg

    def test_bad_method(self):
        with pytest.raises(ConfigError):
            parse_run_config({"method": "magic"})

    def test_bad_k(self):
        with pytest.raises(ConfigError):
            parse_run_config({"k_clusters": 3})

    def test_bad_counts(self):
        with pytest.raises(ConfigError):
            parse_run_config({"n_replications": 0})

    def test_unknown_scenario_field(self):
        with pytest.raises(ConfigError):
            parse_run_config({"scenario": {"n_subjects": 100, "bogus": 1}})

    def test_invalid_scenario_value(self):
        with pytest.raises(ConfigError):
            parse_run_config({"scenario": {"n_subjects": 1}})

    def test_threads_auto(self):
        assert parse_run_config({"threads": "auto"})["threads"] == 0


def tiny_config(**overrides):
    cfg = {
        "method": "cvrs2",
        "k_clusters": 2,
        "r_folds": 4,
        "n_replications": 3,
        "n_permutations": 5,
        "seed": 9,
        "threads": 1,
        "scenario": {
            "n_subjects": 60,
            "n_covariates": 8,
            "k_sens1": 3,
            "k_sens2": 3,
            "n_overlap": 2,
            "cluster_fractions": [0.6, 0.0, 0.0, 0.4],
            "rr1": 0.8,
            "rr2": 0.8,
        },
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestSimulateCommand:
    def run_simulate(self, tmp_path, cfg, extra=()):
        runner = CliRunner()
        cfg_path = write_config(tmp_path, cfg)
        outdir = tmp_path / "out"
        args = ["simulate", "-c", str(cfg_path), "-o", str(outdir)] + list(extra)
        return runner.invoke(main, args), outdir

    def test_tiny_run_outputs(self, tmp_path):
        result, outdir = self.run_simulate(tmp_path, tiny_config())
        assert result.exit_code == 0, result.output
        report = json.loads((outdir / "opchar.json").read_text())
        assert "cvrs2" in report["results"]
        oc = report["results"]["cvrs2"]
        assert oc["n_replications"] == 3
        assert len(oc["power_tp"]) == 2
        with (outdir / "opchar.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["method", "metric", "outcome", "cluster", "value", "mc_se"]
        assert len(rows) > 5

    def test_dump_scores(self, tmp_path):
        result, outdir = self.run_simulate(
            tmp_path, tiny_config(), extra=["--dump-scores", "2"]
        )
        assert result.exit_code == 0, result.output
        dumps = sorted(outdir.glob("scores_cvrs2_rep*.csv"))
        assert len(dumps) == 2
        with dumps[0].open() as fh:
            header = next(csv.reader(fh))
        assert header == ["subject", "rs1", "rs2", "cluster", "true_cluster"]

    def test_config_error_exit_2(self, tmp_path):
        result, _ = self.run_simulate(tmp_path, tiny_config(method="magic"))
        assert result.exit_code == 2

    def test_missing_scenario_exit_2(self, tmp_path):
        cfg = tiny_config()
        del cfg["scenario"]
        result, _ = self.run_simulate(tmp_path, cfg)
        assert result.exit_code == 2

    def test_missing_file_exit_3(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["simulate", "-c", str(tmp_path / "nope.json"), "-o", str(tmp_path / "o")],
        )
        assert result.exit_code == 3

    def test_thread_override_determinism(self, tmp_path):
        r1, out1 = self.run_simulate(tmp_path, tiny_config(), extra=["--threads", "1"])
        runner = CliRunner()
        cfg_path = write_config(tmp_path, tiny_config(), name="c2.json")
        out2 = tmp_path / "out2"
        r2 = runner.invoke(
            main,
            ["simulate", "-c", str(cfg_path), "-o", str(out2), "--threads", "2"],
        )
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (out1 / "opchar.json").read_bytes() == (out2 / "opchar.json").read_bytes()

    def test_replication_override(self, tmp_path):
        result, outdir = self.run_simulate(
            tmp_path, tiny_config(), extra=["--replications", "2"]
        )
        assert result.exit_code == 0
        report = json.loads((outdir / "opchar.json").read_text())
        assert report["results"]["cvrs2"]["n_replications"] == 2


def write_data_csv(path, n=80, j=6, seed=4, mutate=None):
    rng = np.random.default_rng(seed)
    arm = rng.integers(0, 2, n)
    x = rng.normal(size=(n, j))
    sens = x[:, 0] > 0
    p1 = np.where((arm == 1) & sens, 0.75, 0.25)
    y1 = rng.binomial(1, p1)
    y2 = rng.binomial(1, p1)
    rows = [["id", "arm", "y1", "y2"] + [f"x{c + 1}" for c in range(j)]]
    for i in range(n):
        rows.append(
            [f"s{i}", str(arm[i]), str(y1[i]), str(y2[i])]
            + [f"{v:.6f}" for v in x[i]]
        )
    if mutate:
        mutate(rows)
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)


class TestLoadDataCsv:
    def test_complete_case_dropping(self, tmp_path):
        path = tmp_path / "d.csv"

        def mutate(rows):
            rows[3][2] = "NA"
            rows[5][4] = ""

        write_data_csv(path, mutate=mutate)
        ids, dataset, dropped = load_data_csv(path)
        assert dropped == 2
        assert dataset.n == 78 and len(ids) == 78

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("subject,arm,y1,y2,x1\na,1,0,1,0.3\n")
        with pytest.raises(ConfigError):
            load_data_csv(path)

    def test_nonbinary_outcome(self, tmp_path):
        path = tmp_path / "d.csv"

        def mutate(rows):
            rows[2][2] = "2"

        write_data_csv(path, mutate=mutate)
        with pytest.raises(ConfigError):
            load_data_csv(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"

        def mutate(rows):
            rows[2] = rows[2][:-1]

        write_data_csv(path, mutate=mutate)
        with pytest.raises(ConfigError):
            load_data_csv(path)


class TestAnalyzeCommand:
    def test_round_trip(self, tmp_path):
        data = tmp_path / "data.csv"
        write_data_csv(data)
        cfg = tiny_config()
        del cfg["scenario"]
        cfg["n_permutations"] = 9
        cfg_path = write_config(tmp_path, cfg)
        outdir = tmp_path / "out"
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["analyze", "-c", str(cfg_path), "-d", str(data), "-o", str(outdir)],
        )
        assert result.exit_code == 0, result.output
        with (outdir / "assignments.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["id", "rs1", "rs2", "cluster"]
        assert len(rows) == 81
        clusters = {int(r[3]) for r in rows[1:]}
        assert clusters <= {1, 2}
        with (outdir / "cluster_rates.csv").open() as fh:
            rate_rows = list(csv.reader(fh))
        assert rate_rows[0] == ["cluster", "arm", "n", "rate_y1", "rate_y2"]
        perm = json.loads((outdir / "permutation.json").read_text())
        for cluster_p in perm["p_values"].values():
            for p in cluster_p.values():
                assert 0.1 <= p <= 1.0
        assert (outdir / "coefficients.csv").exists()

    def test_missing_data_exit_3(self, tmp_path):
        cfg_path = write_config(tmp_path, {"method": "cvrs2"})
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "analyze",
                "-c", str(cfg_path),
                "-d", str(tmp_path / "nope.csv"),
                "-o", str(tmp_path / "out"),
            ],
        )
        assert result.exit_code == 3
