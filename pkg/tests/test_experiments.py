"""Experiment runner: config grammar, CSV contract, determinism, exit codes."""

import json

import numpy as np
import pytest

from gfstack.cli import main as cli_main
from gfstack.errors import ConfigError
from gfstack.experiments import (
    CSV_HEADER,
    ExperimentConfig,
    Row,
    build_heat_instances,
    parse_config,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    worker_count,
)
from gfstack.transport import TLpPoint, dump_tlp_point, tlp_distance, uniform_measure


class TestConfigGrammar:
    def test_flat_key_values_and_comments(self):
        text = """
        # experiment setup
        kind = d2c_heat
        sizes = 8, 16, 32
        horizon = 0.5   # half a unit of time
        time_grid = 4
        seed = 42
        """
        cfg = parse_config(text)
        assert cfg.kind == "d2c_heat"
        assert cfg.sizes == (8, 16, 32)
        assert cfg.horizon == 0.5
        assert cfg.time_grid == 4
        assert cfg.seed == 42

    def test_overrides_win(self):
        cfg = parse_config("kind = tlp_table\nseed = 1\n", seed=9)
        assert cfg.seed == 9

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("kind = tlp_table\nbogus = 1\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("kind tlp_table\n")

    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="nope")
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="d2c_heat", sizes=(16, 8))
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="d2c_heat", tolerance=0.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="d2c_heat", sampling="weird")


class TestCsvContract:
    def test_header_and_format(self):
        rows = [Row("x", 2, 0.5, "m", 1.0 / 3.0, np.inf, np.inf, True),
                Row("x", 1, 0.25, "a", 1.23456789012345e-7, 2.0, 2.0, False)]
        text = rows_to_csv(rows)
        lines = text.split("\n")
        assert lines[0] == CSV_HEADER == "experiment,n,t,metric,lhs,rhs,slack,pass"
        # sorted by (experiment, n, t, metric); 12 significant digits
        assert lines[1] == "x,1,0.25,a,1.23456789012e-07,2,2,false"
        assert lines[2] == "x,2,0.5,m,0.333333333333,inf,inf,true"
        assert text.endswith("\n") and "\r" not in text

    def test_json_mirror_field_names(self):
        rows = [Row("x", 1, 0.0, "m", 1.0, 2.0, 1.0, True)]
        payload = json.loads(rows_to_json(rows))
        assert payload[0] == {"experiment": "x", "n": 1, "t": 0.0, "metric": "m",
                              "lhs": 1.0, "rhs": 2.0, "slack": 1.0, "pass": True}


class TestDeterminism:
    @pytest.mark.parametrize("kind,kw", [
        ("bound_suite", {}),
        ("tlp_table", {}),
        ("p0_audit", {}),
        ("stacking_audit", {"sizes": (4, 8, 16)}),
        ("d2c_heat", {"sizes": (8, 16), "time_grid": 3}),
        ("resolvent_convergence", {"sizes": (8, 16)}),
    ])
    def test_same_seed_byte_identical(self, kind, kw):
        cfg = ExperimentConfig(kind=kind, seed=1234, **kw)
        a = rows_to_csv(run_experiment(cfg))
        b = rows_to_csv(run_experiment(cfg))
        assert a == b

    def test_different_seed_changes_sampled_tables(self):
        a = rows_to_csv(run_experiment(ExperimentConfig(kind="tlp_table", seed=1)))
        b = rows_to_csv(run_experiment(ExperimentConfig(kind="tlp_table", seed=2)))
        assert a != b

    def test_thread_cap_env(self, monkeypatch):
        monkeypatch.setenv("GFSTACK_THREADS", "2")
        assert worker_count() == 2
        cfg = ExperimentConfig(kind="bound_suite", seed=7)
        two = rows_to_csv(run_experiment(cfg))
        monkeypatch.setenv("GFSTACK_THREADS", "1")
        one = rows_to_csv(run_experiment(cfg))
        assert one == two
        monkeypatch.setenv("GFSTACK_THREADS", "zebra")
        with pytest.raises(ConfigError):
            worker_count()


class TestCli:
    def test_runs_and_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "table.csv"
        code = cli_main(["tlp", "--seed", "5", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert text.splitlines()[0] == CSV_HEADER

    def test_json_mirror(self, tmp_path):
        out = tmp_path / "t.csv"
        code = cli_main(["tlp", "--seed", "5", "--out", str(out), "--json"])
        assert code == 0
        mirror = json.loads((tmp_path / "t.json").read_text())
        assert {"experiment", "n", "t", "metric", "lhs", "rhs", "slack", "pass"} == set(mirror[0])

    def test_config_file_flow(self, tmp_path):
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text("kind = tlp_table\nseed = 3\noutput = %s\n" % (tmp_path / "o.csv"))
        assert cli_main(["tlp", "--config", str(cfgfile)]) == 0
        assert (tmp_path / "o.csv").exists()

    def test_bad_config_exit_code(self, tmp_path):
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text("junk junk junk\n")
        assert cli_main(["tlp", "--config", str(cfgfile)]) == 2

    def test_point_pair_distance_rows(self, tmp_path):
        a = TLpPoint(uniform_measure([[0.0], [1.0]]), np.array([0.0, 1.0]))
        b = TLpPoint(uniform_measure([[0.0], [1.0]]), np.array([1.0, 0.0]))
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        pa.write_text(dump_tlp_point(a))
        pb.write_text(dump_tlp_point(b))
        out = tmp_path / "t.csv"
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text(f"kind = tlp_table\npoint_a = {pa}\npoint_b = {pb}\n")
        assert cli_main(["tlp", "--config", str(cfgfile), "--out", str(out)]) == 0
        rows = [l for l in out.read_text().splitlines() if "point_pair_distance" in l]
        assert len(rows) == 2  # p = 1 and p = 2
        val = float(rows[0].split(",")[4])
        want, _ = tlp_distance(a, b, 1.0)
        assert val == pytest.approx(want)

    def test_exit_one_on_failing_rows(self, monkeypatch, capsys, tmp_path):
        # doctor a runner so one asserted row fails, exit code must be 1
        import gfstack.experiments as exps

        def fake(cfg):
            return [Row("tlp", 1, 0.0, "forced_failure", 1.0, 0.0, -1.0, False)]

        monkeypatch.setitem(exps.RUNNERS, "tlp_table", fake)
        assert cli_main(["tlp", "--out", str(tmp_path / "x.csv")]) == 1
        err = capsys.readouterr().err
        assert "forced_failure" in err


class TestExperimentBehaviour:
    def test_d2c_zero_horizon_reports_initial_gaps(self):
        cfg = ExperimentConfig(kind="d2c_heat", sizes=(8, 16), horizon=0.0, time_grid=1)
        rows = run_experiment(cfg)
        dist_rows = [r for r in rows if r.metric == "tl2_distance"]
        assert {r.t for r in dist_rows} == {0.0}
        assert all(r.passed for r in rows if r.metric != "speed_integral_lower_bound")

    def test_d2c_self_comparison_is_zero(self):
        cfg = ExperimentConfig(kind="d2c_heat", sizes=(8, 16), time_grid=3)
        rng = np.random.default_rng(0)
        instances, fine = build_heat_instances(cfg, rng)
        pt = TLpPoint(fine.measure, fine.initial)
        d, _ = tlp_distance(pt, pt, 2.0)
        assert d < 1e-9

    def test_d2c_sin_profile_distance_column_decreases(self):
        cfg = ExperimentConfig(kind="d2c_heat", sizes=(8, 16, 32), time_grid=4,
                               profile="sin")
        rows = run_experiment(cfg)
        col = [r.lhs for r in rows if r.metric == "sup_tl2_distance"]
        assert np.all(np.diff(col) < 0)

    def test_uniform_sampling_depends_on_seed(self):
        base = dict(kind="d2c_heat", sizes=(8, 16), time_grid=3, sampling="uniform")
        a = rows_to_csv(run_experiment(ExperimentConfig(seed=1, **base)))
        b = rows_to_csv(run_experiment(ExperimentConfig(seed=2, **base)))
        assert a != b

    def test_bound_suite_row_count_and_pass(self):
        rows = run_experiment(ExperimentConfig(kind="bound_suite", seed=0))
        assert len(rows) >= 200
        assert all(r.passed for r in rows)

    def test_resolvent_columns_decrease(self):
        rows = run_experiment(ExperimentConfig(kind="resolvent_convergence", seed=0))
        for metric in ("matrix_resolvent_distance", "matrix_semigroup_distance",
                       "heat_resolvent_distance", "heat_semigroup_distance"):
            col = [r.lhs for r in rows if r.metric == metric]
            assert len(col) >= 3
            assert np.all(np.diff(col) < 0), metric

    def test_matrix_resolvent_distance_rate(self):
        # closed forms: |sqrt(1+1/n) z/(1+lam(1+1/n)) - z/(1+lam)| = O(1/n)
        rows = run_experiment(ExperimentConfig(kind="resolvent_convergence",
                                               sizes=(8, 16, 32, 64, 128), seed=0))
        col = [(r.n, r.lhs) for r in rows if r.metric == "matrix_resolvent_distance"]
        ratios = [a[1] / b[1] for a, b in zip(col, col[1:])]
        assert all(1.7 < r < 2.3 for r in ratios)

    def test_stacking_audit_negative_controls_flagged(self):
        rows = run_experiment(ExperimentConfig(kind="stacking_audit", sizes=(4, 8, 16, 32)))
        metrics = {r.metric: r for r in rows}
        assert metrics["gamma_liminf_broken_scaling_fails"].passed
        assert metrics["equicoercivity_escaping_fails"].passed
        assert metrics["circle_minimizers_do_not_converge"].passed
        assert all(r.passed for r in rows)

    def test_p0_audit_passes(self):
        rows = run_experiment(ExperimentConfig(kind="p0_audit", seed=0))
        assert all(r.passed for r in rows)
        slack0 = [r for r in rows if r.metric == "counterexample_slack" and r.t == 0.0]
        assert slack0[0].lhs == pytest.approx(-0.5, abs=1e-12)


    def test_constant_operator_family_zero_distances(self):
        # identical operators across the family: embedded distances vanish
        from gfstack.experiments import _scaled_identity_resolvent
        from gfstack.stacking import LIMIT, MatrixHilbertStacking, stacking_distance

        sizes = (8, 16, 32)
        mats = {n: np.eye(2) for n in sizes}
        mats[LIMIT] = np.eye(2)
        stack = MatrixHilbertStacking(mats)
        R = _scaled_identity_resolvent(1.0)
        z = np.array([1.0, -2.0])
        for n in sizes:
            d = stacking_distance(stack, n, R.resolve(0.5, z), LIMIT, R.resolve(0.5, z))
            assert d < 1e-12


    def test_help_prints_schema(self, capsys):
        import pytest as _pytest

        with _pytest.raises(SystemExit) as exc:
            cli_main(["d2c", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for token in ("config grammar", "kind", "sizes", "GFSTACK_THREADS",
                      CSV_HEADER):
            assert token in out
