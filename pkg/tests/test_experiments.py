import json
import math
from pathlib import Path

import numpy as np
import pytest

from remfrail.cli import main as cli_main
from remfrail.experiments import (ExperimentSpec, run_case_study,
                                  run_ghost_triadic, run_recovery,
                                  run_sample_size, run_study)
from remfrail.simulate import SimulationConfig, simulate


def tiny_recovery_spec(**over):
    base = dict(replications=2, n_actors=12, n_events=250, seed=5)
    base.update(over)
    return ExperimentSpec.recovery("desk", **base)


class TestRecovery:
    def test_report_structure(self, tmp_path):
        report = run_recovery(tiny_recovery_spec())
        assert len(report.records) == 2
        assert report.n_failures == 0
        assert all(not math.isnan(r.sigma_exp_hat) for r in report.records)
        out = report.write(tmp_path / "rec")
        assert (out / "sigmas.csv").exists()
        assert (out / "hazard_curves.csv").exists()
        payload = json.loads((out / "summary.json").read_text())
        assert payload["n_records"] == 2
        assert "sigma_pop" in payload

    def test_rerun_identical_modulo_timing(self, tmp_path):
        spec = tiny_recovery_spec()
        a = run_recovery(spec)
        b = run_recovery(spec)
        strip = lambda text: ["," .join(line.split(",")[:6])
                              for line in text.splitlines()]
        assert strip(a.sigmas_csv()) == strip(b.sigmas_csv())
        assert a.curves_csv() == b.curves_csv()
        assert a.summary_json() == b.summary_json()

    def test_parallel_equals_serial(self):
        serial = run_recovery(tiny_recovery_spec(n_jobs=1))
        parallel = run_recovery(tiny_recovery_spec(n_jobs=2))
        assert serial.curves_csv() == parallel.curves_csv()
        assert [r.sigma_exp_hat for r in serial.records] == \
            [r.sigma_exp_hat for r in parallel.records]


class TestSampleSize:
    def test_grid_record_count(self):
        spec = ExperimentSpec.samplesize(
            "desk", replications=2, actor_grid=(6, 10), event_grid=(100,),
            grid_events=150, grid_actors=8, seed=3)
        report = run_sample_size(spec)
        assert len(report.records) == 2 * 3  # replications x scenarios
        names = {r.scenario for r in report.records}
        assert names == {"actors=6", "actors=10", "events=100"}
        assert all(not r.error for r in report.records)

    def test_single_cell_grid(self):
        spec = ExperimentSpec.samplesize(
            "desk", replications=1, actor_grid=(), event_grid=(),
            n_actors=8, n_events=120, seed=1)
        report = run_sample_size(spec)
        assert len(report.records) == 1


class TestGhost:
    def test_records_curves_and_summary(self):
        spec = ExperimentSpec.ghost("desk", replications=1, n_actors=12,
                                    n_events=300, seed=2)
        report = run_ghost_triadic(spec)
        # 4 kinds x 2 models
        assert len(report.records) == 8
        scenarios = {r.scenario for r in report.records}
        assert "transitive:fixed" in scenarios
        assert "cyclic:frailty" in scenarios
        assert "mean_triadic_ratio" in report.summary
        assert "transitive_exceeds_cyclic" in report.summary
        fixed_rows = [r for r in report.records if r.scenario.endswith(":fixed")]
        assert all(math.isnan(r.sigma_exp_hat) for r in fixed_rows)

    def test_fixed_only_mode(self):
        spec = ExperimentSpec.ghost("desk", replications=1, n_actors=10,
                                    n_events=200, seed=2,
                                    ghost_frailty_fit=False,
                                    kinds=("transitive", "cyclic"))
        report = run_ghost_triadic(spec)
        assert len(report.records) == 2
        assert all(r.scenario.endswith(":fixed") for r in report.records)

    def test_zero_frailty_truth_shows_no_ghost(self):
        """Homogeneous actors: misspecified fits show no triadic inflation.

        The per-replication mean ratio is noisy where the emptying
        spontaneous stratum thins out, so the band is checked on the
        median across replications.
        """
        spec = ExperimentSpec.ghost("desk", replications=5, sigma_exp=0.0,
                                    sigma_pop=0.0, seed=2024,
                                    ghost_frailty_fit=False, n_jobs=2)
        report = run_ghost_triadic(spec)
        assert report.n_failures == 0
        for kind in spec.kinds:
            vals = report.summary["mean_triadic_ratio"][f"{kind}:fixed"][
                "per_replication"]
            med = float(np.median(vals))
            assert 0.8 <= med <= 1.25, (kind, med)


class TestCaseStudy:
    def make_email_csv(self, tmp_path) -> Path:
        config = SimulationConfig(25, 1200, 0.8, 1.0, seed=13)
        history, _ = simulate(config)
        text = history.to_csv()
        # inject a self-loop and a multi-recipient group to exercise cleanup
        lines = text.splitlines()
        lines.append("3,3,999999.0")
        lines.append("4,5,999999.5")
        lines.append("4,6,999999.5")
        path = tmp_path / "emails.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_pipeline(self, tmp_path):
        path = self.make_email_csv(tmp_path)
        spec = ExperimentSpec.case_study(str(path), seed=1)
        report = run_case_study(spec)
        assert len(report.records) == 2
        assert report.n_failures == 0
        pre = report.summary["preprocessing"]
        assert pre["dropped_self_loops"] == 1
        assert pre["dropped_multi_recipient"] == 2
        assert pre["rows_out"] == 1200
        out = report.write(tmp_path / "case")
        assert (out / "frailty_estimates.csv").exists()
        assert (out / "preprocess_report.json").exists()
        payload = json.loads((out / "summary.json").read_text())
        assert payload["sigma_pop_hat"] > 0

    def test_sampled_policy_pipeline_at_scale(self, tmp_path):
        """Above the full-policy actor limit the default nested
        case-control sampling still recovers the variances and the frailty
        fit removes the (huge) apparent triadic effect."""
        config = SimulationConfig(140, 20_000, 1.1, 1.7, seed=404)
        history, truth = simulate(config)
        path = tmp_path / "emails.csv"
        with open(path, "w") as fh:
            history.to_csv(fh)
        spec = ExperimentSpec.case_study(str(path), seed=7)
        report = run_case_study(spec)
        assert report.n_failures == 0
        assert report.summary["risk_policy"].startswith("sampled")
        assert abs(report.summary["sigma_exp_hat"] - truth.b_exp.std()) < 0.3
        assert abs(report.summary["sigma_pop_hat"] - truth.b_pop.std()) < 0.3
        assert report.summary["sigma_pop_hat"] > report.summary["sigma_exp_hat"]
        assert report.summary["mean_ratios"]["fixed"]["triadic"] > 5.0
        assert 0.75 <= report.summary["mean_ratios"]["frailty"]["triadic"] <= 1.33

    def test_missing_file_raises(self):
        from remfrail.errors import EventDataError
        spec = ExperimentSpec.case_study("/nonexistent/file.csv")
        with pytest.raises(EventDataError, match="not found"):
            run_case_study(spec)

    def test_too_few_events_rejected(self, tmp_path):
        path = tmp_path / "small.csv"
        path.write_text("sender,receiver,time\na,b,1.0\nb,a,2.0\n")
        from remfrail.errors import EventDataError
        spec = ExperimentSpec.case_study(str(path))
        with pytest.raises(EventDataError, match="< 100"):
            run_case_study(spec)


class TestScaleDefaults:
    def test_paper_scale_wiring(self):
        rec = ExperimentSpec.recovery("paper")
        assert (rec.n_actors, rec.n_events, rec.replications) == (100, 10_000, 20)
        assert (rec.sigma_exp, rec.sigma_pop) == (0.9, 1.3)
        ss = ExperimentSpec.samplesize("paper")
        assert ss.replications == 100
        assert ss.actor_grid == (10, 30, 90)
        assert ss.event_grid == (500, 1500, 4500)
        assert (ss.grid_events, ss.grid_actors) == (10_000, 100)
        assert (ss.sigma_exp, ss.sigma_pop) == (0.5, 0.9)
        ghost = ExperimentSpec.ghost("paper")
        assert (ghost.n_actors, ghost.n_events) == (100, 10_000)

    def test_desk_scale_wiring(self):
        rec = ExperimentSpec.recovery("desk")
        assert (rec.n_actors, rec.n_events, rec.replications) == (30, 2000, 20)
        ss = ExperimentSpec.samplesize("desk")
        assert ss.replications == 50
        assert (ss.grid_events, ss.grid_actors) == (5000, 50)


class TestFailureHandling:
    def test_failed_replication_recorded_not_silent(self, monkeypatch):
        import remfrail.experiments as exp
        from remfrail.errors import RemfrailError

        calls = {"n": 0}
        real = exp.fit_frailty

        def flaky(data, options=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RemfrailError("synthetic failure")
            return real(data, options)

        monkeypatch.setattr(exp, "fit_frailty", flaky)
        report = run_recovery(tiny_recovery_spec())
        assert len(report.records) == 2
        assert report.n_failures == 1
        failed = [r for r in report.records if r.error]
        assert "synthetic failure" in failed[0].error


class TestCli:
    def test_experiment_roundtrip_and_exit_codes(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"replications": 1, "n_actors": 10,
                                   "n_events": 150}))
        out = tmp_path / "exp"
        code = cli_main(["experiment", "recovery", "--config", str(cfg),
                         "--seed", "3", "--out", str(out)])
        assert code == 0
        assert (out / "summary.json").exists()

    def test_invalid_config_exit_1(self, tmp_path):
        code = cli_main(["experiment", "recovery", "--replications", "0",
                         "--out", str(tmp_path / "x")])
        assert code == 1

    def test_unknown_flag_exit_1(self, tmp_path):
        code = cli_main(["experiment", "recovery", "--nope", "1",
                         "--out", str(tmp_path / "x")])
        assert code == 1

    def test_missing_input_exit_2(self, tmp_path):
        code = cli_main(["fit", "--events-file", "/does/not/exist.csv",
                         "--out", str(tmp_path / "f.json")])
        assert code == 2

    def test_bad_event_data_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sender,receiver,time\na,a,1.0\n")
        code = cli_main(["fit", "--events-file", str(bad),
                         "--out", str(tmp_path / "f.json")])
        assert code == 2

    def test_simulate_then_strata_and_baseline(self, tmp_path):
        events = tmp_path / "events.csv"
        code = cli_main(["simulate", "--actors", "10", "--events", "200",
                         "--seed", "4", "--out", str(events)])
        assert code == 0
        code = cli_main(["strata", "--events-file", str(events),
                         "--kind", "cyclic", "--out", str(tmp_path / "tl.csv")])
        assert code == 0
        code = cli_main(["baseline", "--events-file", str(events),
                         "--model", "fixed",
                         "--curves-out", str(tmp_path / "curves.csv"),
                         "--summary-out", str(tmp_path / "summary.json")])
        assert code == 0
        header = (tmp_path / "curves.csv").read_text().splitlines()[0]
        assert header == "stratum,time,cumhaz,hazard"

    def test_fit_json_contract(self, tmp_path):
        events = tmp_path / "events.csv"
        cli_main(["simulate", "--actors", "8", "--events", "120", "--seed",
                  "9", "--out", str(events)])
        fit_path = tmp_path / "fit.json"
        code = cli_main(["fit", "--events-file", str(events), "--model",
                         "frailty", "--out", str(fit_path)])
        assert code == 0
        payload = json.loads(fit_path.read_text())
        assert set(payload) >= {"theta", "b_exp", "b_pop", "sigma_exp",
                                "sigma_pop", "loglik", "marginal",
                                "converged", "iterations", "risk_policy"}
