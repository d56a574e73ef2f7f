"""CSV round-trips, config grammar, and the command-line interface."""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ratingsde import ValidationError
from ratingsde.config import RunConfig, parse_config_text
from ratingsde.datasets import data_path
from ratingsde.matio import (format_rating_csv, read_params_csv, read_pd_csv,
                             read_rating_csv, write_params_csv, write_pd_csv,
                             write_rating_csv)


class TestMatIo:
    def test_rating_csv_round_trip(self, tmp_path, reconstructed):
        p = tmp_path / "m.csv"
        write_rating_csv(p, ["A", "B", "C", "D"], reconstructed)
        labels, entries = read_rating_csv(p)
        assert labels == ["A", "B", "C", "D"]
        assert np.array_equal(entries, reconstructed)

    def test_withdrawal_column_ignored_on_read(self, tmp_path, cohort):
        text = format_rating_csv(["A", "B", "C", "D"], cohort.entries,
                                 withdrawals=True)
        assert "w_t" in text.splitlines()[0]
        p = tmp_path / "with_wt.csv"
        p.write_text(text)
        labels, entries = read_rating_csv(p)
        assert np.array_equal(entries, cohort.entries)

    def test_parse_error_reports_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("from,A,B\nA,0.5,oops\nB,0,1\n")
        with pytest.raises(ValidationError, match="line 2, column 3"):
            read_rating_csv(p)

    def test_params_round_trip(self, tmp_path):
        p = tmp_path / "params.csv"
        labels, a, b, s = read_params_csv(data_path("calibrated_params_1y.csv"))
        write_params_csv(p, labels, a, b, s)
        labels2, a2, b2, s2 = read_params_csv(p)
        assert labels2 == labels
        assert np.array_equal(a2, a) and np.array_equal(s2, s)

    def test_pd_round_trip(self, tmp_path):
        p = tmp_path / "pd.csv"
        write_pd_csv(p, ["A", "B", "C", "D"], np.array([0.1, 0.2, 0.3, 1.0]))
        labels, pds = read_pd_csv(p)
        assert labels == ["A", "B", "C", "D"]
        assert np.array_equal(pds, [0.1, 0.2, 0.3, 1.0])


class TestConfig:
    def test_grammar(self):
        values = parse_config_text("# comment\n\nseed = 3\ngrid.horizon=2.0\n")
        assert values == {"seed": "3", "grid.horizon": "2.0"}

    def test_rejects_malformed_line(self):
        with pytest.raises(ValidationError, match=":1:"):
            parse_config_text("not a pair")

    def test_rejects_duplicate_key(self):
        with pytest.raises(ValidationError, match="duplicate"):
            parse_config_text("a = 1\na = 2")

    def test_seed_required(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("labels = A,B,C,D\n")
        cfg = RunConfig.from_file(p)
        with pytest.raises(ValidationError, match="seed"):
            cfg.seed()

    def test_missing_file_reference(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("seed = 1\npaths.cohort = nope.csv\n")
        cfg = RunConfig.from_file(p)
        with pytest.raises(ValidationError, match="missing file"):
            cfg.get_path("paths.cohort", required=True)

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "m.csv").write_text("x")
        p = tmp_path / "c.cfg"
        p.write_text("seed = 1\npaths.cohort = m.csv\n")
        cfg = RunConfig.from_file(p)
        assert cfg.get_path("paths.cohort") == tmp_path / "m.csv"


def run_cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "ratingsde.cli", *args],
                          cwd=cwd, capture_output=True, text=True)


@pytest.fixture()
def workdir(tmp_path):
    for name in ("cohort_1y.csv", "reconstructed_1y.csv", "pd_case1.csv"):
        shutil.copy(data_path(name), tmp_path / name)
    shutil.copy(data_path("calibrated_params_1y.csv"), tmp_path / "params.csv")
    (tmp_path / "run.cfg").write_text(
        "seed = 42\n"
        "labels = A,B,C,D\n"
        "grid.horizon = 1.0\n"
        "grid.steps_per_year = 24\n"
        "paths.cohort = cohort_1y.csv\n"
        "paths.reconstructed = reconstructed_1y.csv\n"
        "paths.params = params.csv\n"
        "paths.pd_targets = pd_case1.csv\n"
        "measure.kind = historical\n"
        "sim.m = 40\n"
        "sim.m1 = 10\n"
        "sim.m2 = 40\n"
        "xva.m = 60\n"
        "csa.postings_per_year = 24\n"
        "checkpoints = 0.25,0.5,1.0\n"
    )
    return tmp_path


class TestCliCommands:
    def test_reconstruct_outputs_row_stochastic(self, workdir):
        res = run_cli("reconstruct", "--config", "run.cfg", "--out", "o",
                      cwd=workdir)
        assert res.returncode == 0, res.stderr
        _, rec = read_rating_csv(workdir / "o" / "reconstructed.csv")
        # the config injects a published matrix rounded to 6 decimals, so row
        # sums carry that rounding
        assert np.abs(rec.sum(axis=1) - 1.0).max() <= 1e-5
        summary = json.loads((workdir / "o" / "run_summary.json").read_text())
        assert summary["command"] == "reconstruct"

    def test_adjusted_matches_published(self, workdir):
        from conftest import ADJUSTED_PUBLISHED, PRINT_TOL

        run_cli("reconstruct", "--config", "run.cfg", "--out", "o", cwd=workdir)
        _, adj = read_rating_csv(workdir / "o" / "adjusted.csv")
        assert np.abs(adj - ADJUSTED_PUBLISHED).max() <= PRINT_TOL

    def test_missing_file_exits_one(self, workdir):
        (workdir / "run.cfg").write_text("seed = 1\npaths.cohort = gone.csv\n")
        res = run_cli("reconstruct", "--config", "run.cfg", cwd=workdir)
        assert res.returncode == 1
        assert "gone.csv" in res.stderr

    def test_missing_config_exits_three(self, workdir):
        res = run_cli("reconstruct", "--config", "absent.cfg", cwd=workdir)
        assert res.returncode == 3

    def test_unknown_subcommand_exits_one(self, workdir):
        res = run_cli("frobnicate", cwd=workdir)
        assert res.returncode == 1

    def test_simulate_emits_artifacts(self, workdir):
        res = run_cli("simulate", "--config", "run.cfg", "--out", "s",
                      cwd=workdir)
        assert res.returncode == 0, res.stderr
        for name in ("mean_t1.csv", "var_t1.csv", "property_report.csv",
                     "trajectories.svg", "histograms.svg"):
            assert (workdir / "s" / name).exists()
        _, mean = read_rating_csv(workdir / "s" / "mean_t1.csv")
        assert np.abs(mean.sum(axis=1) - 1.0).max() <= 1e-9

    def test_ssa_emits_artifacts(self, workdir):
        res = run_cli("ssa", "--config", "run.cfg", "--out", "g", cwd=workdir)
        assert res.returncode == 0, res.stderr
        for name in ("occupancy_t1.csv", "predefault.csv", "predefault.svg",
                     "occupancy_A.svg"):
            assert (workdir / "g" / name).exists()

    def test_xva_report_regimes_and_identity(self, workdir):
        res = run_cli("xva", "--config", "run.cfg", "--out", "x", cwd=workdir)
        assert res.returncode == 0, res.stderr
        rows = (workdir / "x" / "xva_report.csv").read_text().splitlines()
        assert rows[0].startswith("regime,cva,dva,bva")
        regimes = {}
        for row in rows[1:]:
            cells = row.split(",")
            regimes[cells[0]] = [float(c) for c in cells[1:7]]
        assert set(regimes) == {"none", "perfect", "triggers"}
        for vals in regimes.values():
            cva, dva, bva = vals[:3]
            assert bva == dva - cva

    def test_report_summarizes_and_flags_missing(self, workdir):
        run_cli("reconstruct", "--config", "run.cfg", "--out", "r", cwd=workdir)
        res = run_cli("report", "--config", "r", cwd=workdir)
        assert res.returncode == 0, res.stderr
        text = (workdir / "r" / "report.txt").read_text()
        assert "reconstruction" in text and "absent" in text

    def test_report_on_empty_directory_exits_one(self, workdir):
        (workdir / "empty").mkdir()
        res = run_cli("report", "--config", "empty", cwd=workdir)
        assert res.returncode == 1
        assert "xva_report.csv" in res.stderr

    def test_pipeline_byte_identical_across_threads(self, workdir):
        for threads, out in (("1", "d1"), ("8", "d8")):
            for cmd in ("reconstruct", "simulate", "ssa", "xva"):
                res = run_cli(cmd, "--config", "run.cfg", "--out", out,
                              "--threads", threads, cwd=workdir)
                assert res.returncode == 0, res.stderr
        d1, d8 = workdir / "d1", workdir / "d8"
        names = sorted(p.name for p in d1.iterdir())
        assert names == sorted(p.name for p in d8.iterdir())
        for name in names:
            assert (d1 / name).read_bytes() == (d8 / name).read_bytes(), name

    def test_seed_flag_overrides_config(self, workdir):
        run_cli("simulate", "--config", "run.cfg", "--out", "a", cwd=workdir)
        run_cli("simulate", "--config", "run.cfg", "--seed", "43",
                "--out", "b", cwd=workdir)
        a = (workdir / "a" / "mean_t1.csv").read_bytes()
        b = (workdir / "b" / "mean_t1.csv").read_bytes()
        assert a != b
