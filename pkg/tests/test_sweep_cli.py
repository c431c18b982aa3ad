import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from optokerr.cli import EXIT_CONFIG, EXIT_NO_LIMIT_CYCLE, EXIT_OK, EXIT_OUTPUT, EXIT_SOLVER, main
from optokerr.config import parse_config
from optokerr.sweep import COLUMNS, FAILED, NO_LIMIT_CYCLE, emit, point_seed, run_sweep

HEADER = ("kappa,delta1,delta2,B0,n_analytic,F_analytic,n_fp,F_fp,n_langevin,F_langevin,"
          "n_langevin_err,F_langevin_err,n_qme,F_qme,rel_dev_F,valid_rwa,limit_cycle")

TWO_LASER = """
kerr = 0.001
drive1.delta = 1.0
drive1.g = 0.001
drive1.kappa = 0.05
drive2.delta = optimal
"""

KAPPA_SWEEP = TWO_LASER + """
sweep.axis1.name = kappa
sweep.axis1.start = 0.04
sweep.axis1.stop = 0.06
sweep.axis1.count = 3
"""

RED_ONLY = """
drive1.delta = -1.0
gamma_m = 1e-6
sweep.axis1.name = kappa
sweep.axis1.start = 0.05
sweep.axis1.stop = 0.1
sweep.axis1.count = 2
"""

SHORT_LANGEVIN = "sim.t_total = 3000\nsim.burn_in = 500\nsim.trajectories = 3\n"


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSweep:
    def test_analytic_point(self):
        rows = run_sweep(parse_config(TWO_LASER))
        assert len(rows) == 1
        r = rows[0]
        assert r["F_analytic"] == pytest.approx(0.05 / 0.102, rel=1e-9)
        assert r["F_analytic"] == pytest.approx(0.490, abs=1e-3)
        assert r["delta2"] == pytest.approx(-1.1)
        assert r["limit_cycle"] is True and r["valid_rwa"] is True
        for c in ("n_langevin", "F_langevin", "n_qme", "F_qme", "n_fp", "rel_dev_F"):
            assert r[c] is None

    def test_compare_with_qme(self):
        rows = run_sweep(parse_config(TWO_LASER + "mode = analytic,fp,qme\n"))
        r = rows[0]
        assert r["rel_dev_F"] == pytest.approx(abs(r["F_qme"] - r["F_analytic"]) / r["F_analytic"])
        assert r["rel_dev_F"] < 0.15
        assert r["F_fp"] == pytest.approx(r["F_analytic"], rel=0.1)
        assert r.failures == []

    def test_red_only_sentinel(self):
        rows = run_sweep(parse_config(RED_ONLY + "mode = analytic,fp\n"))
        assert len(rows) == 2
        for r in rows:
            assert not r.limit_cycle
            for c in ("B0", "n_analytic", "F_analytic", "n_fp", "F_fp"):
                assert r[c] == NO_LIMIT_CYCLE
            assert r["rel_dev_F"] is None

    def test_failures_recorded_in_row(self):
        rows = run_sweep(parse_config(TWO_LASER + "mode = analytic,qme\nfock.max_dim = 100\n"))
        r = rows[0]
        assert r["F_qme"] == FAILED
        assert r["F_analytic"] == pytest.approx(0.490, abs=1e-3)
        assert r.failures and r.failures[0][0] == "qme"
        assert "DimensionBudgetError" in r.failures[0][1]

    def test_point_seeds_distinct(self):
        seeds = {point_seed(0, i) for i in range(50)}
        assert len(seeds) == 50
        assert point_seed(0, 3) == point_seed(0, 3) != point_seed(1, 3)

    def test_jobs_do_not_change_output(self):
        cfg = parse_config(KAPPA_SWEEP + "mode = analytic,langevin\nsim.tier = reduced\n"
                           "sim.dt = 20\n" + SHORT_LANGEVIN.replace("3000", "200000")
                           .replace("500", "50000"))
        serial = emit(run_sweep(cfg, jobs=1))
        parallel = emit(run_sweep(cfg, jobs=3))
        assert serial == parallel


class TestEmit:
    def test_csv_header_and_empty_cells(self):
        text = emit(run_sweep(parse_config(KAPPA_SWEEP)))
        lines = text.splitlines()
        assert lines[0] == HEADER
        assert ",".join(COLUMNS) == HEADER
        rows = rows_of(text)
        assert [float(r["kappa"]) for r in rows] == pytest.approx([0.04, 0.05, 0.06])
        assert all(r["n_qme"] == "" and r["F_langevin"] == "" for r in rows)
        assert all(r["limit_cycle"] == "true" for r in rows)

    def test_deterministic_formatting(self):
        cfg = parse_config(KAPPA_SWEEP)
        assert emit(run_sweep(cfg)) == emit(run_sweep(cfg))
        # fixed significant digits
        assert rows_of(emit(run_sweep(cfg)))[1]["F_analytic"] == "0.4901960784"

    def test_json_members(self):
        rows = run_sweep(parse_config(KAPPA_SWEEP))
        data = json.loads(emit(rows, "json"))
        assert len(data) == 3
        for obj, row in zip(data, rows):
            assert list(obj) == list(COLUMNS)
            assert obj["F_qme"] is None
            assert obj["limit_cycle"] is True
            assert obj["F_analytic"] == pytest.approx(row["F_analytic"], rel=1e-9)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit([], "xml")


class TestCli:
    def test_predict_stdout(self, tmp_path, capsys):
        assert main(["predict", "--config", write(tmp_path, KAPPA_SWEEP)]) == EXIT_OK
        rows = rows_of(capsys.readouterr().out)
        # predict ignores the sweep axes
        assert len(rows) == 1 and float(rows[0]["kappa"]) == 0.05

    def test_sweep_to_file_json(self, tmp_path):
        out = tmp_path / "out.json"
        code = main(["sweep", "--config", write(tmp_path, KAPPA_SWEEP), "--output", str(out),
                     "--format", "json"])
        assert code == EXIT_OK
        assert len(json.loads(out.read_text())) == 3

    def test_byte_identical_with_seed(self, tmp_path):
        cfg = write(tmp_path, TWO_LASER + "mode = analytic,langevin\n" + SHORT_LANGEVIN)
        outs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            assert main(["predict", "--config", cfg, "--seed", "5", "--output", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        other = tmp_path / "c.csv"
        main(["predict", "--config", cfg, "--seed", "6", "--output", str(other)])
        assert other.read_bytes() != outs[0]
        row = rows_of(outs[0].decode())[0]
        assert float(row["n_langevin_err"]) > 0

    def test_mode_override(self, tmp_path, capsys):
        main(["predict", "--config", write(tmp_path, TWO_LASER), "--mode", "fp"])
        row = rows_of(capsys.readouterr().out)[0]
        assert row["F_fp"] != "" and row["F_analytic"] == ""

    def test_config_error_exit(self, tmp_path, capsys):
        code = main(["predict", "--config", write(tmp_path, "kerr = -0.001\n")])
        assert code == EXIT_CONFIG
        assert "line 1, key 'kerr'" in capsys.readouterr().err
        assert main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
        assert main(["sweep", "--config", write(tmp_path, TWO_LASER), "--mode", "x"]) == EXIT_CONFIG
        assert main(["sweep", "--config", write(tmp_path, TWO_LASER), "--jobs", "0"]) == EXIT_CONFIG

    def test_no_limit_cycle_exit(self, tmp_path, capsys):
        assert main(["sweep", "--config", write(tmp_path, RED_ONLY)]) == EXIT_NO_LIMIT_CYCLE
        rows = rows_of(capsys.readouterr().out)
        assert all(r["F_analytic"] == NO_LIMIT_CYCLE and r["limit_cycle"] == "false"
                   for r in rows)

    def test_solver_failure_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, TWO_LASER + "mode = qme\nfock.max_dim = 100\n")
        assert main(["predict", "--config", cfg]) == EXIT_SOLVER
        assert "DimensionBudgetError" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path):
        out = tmp_path / "no_such_dir" / "x.csv"
        assert main(["predict", "--config", write(tmp_path, TWO_LASER), "--output", str(out)]) \
            == EXIT_OUTPUT

    def test_validate_config(self, tmp_path, capsys):
        assert main(["validate-config", "--config", write(tmp_path, KAPPA_SWEEP)]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "ok: 3 point(s), tiers analytic, 2 drive(s)"

    def test_dumps(self, tmp_path):
        traj, dist = tmp_path / "traj.txt", tmp_path / "pops.txt"
        cfg = write(tmp_path, TWO_LASER + "mode = langevin,qme\nfock.dim_mech = 20\n"
                    "fock.dim_cav = 2\n" + SHORT_LANGEVIN
                    + f"output.trajectory_dump = {traj}\noutput.distribution_dump = {dist}\n")
        assert main(["predict", "--config", cfg, "--output", str(tmp_path / "o.csv")]) == 0
        assert traj.read_text().startswith(
            "# t re_beta im_beta re_alpha1 im_alpha1 re_alpha2 im_alpha2")
        assert np.loadtxt(traj).shape[1] == 7
        assert dist.read_text().startswith("# level population")
        assert np.loadtxt(dist).shape == (20, 2)

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "optokerr", "validate-config", "--config",
                               write(tmp_path, TWO_LASER)], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("ok: 1 point(s)")
