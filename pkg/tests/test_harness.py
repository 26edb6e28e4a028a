"""Harness tests: config round-trips, trial mechanics, emission, sweeps."""
import dataclasses
import json
import math
import os
import warnings

import numpy as np
import pytest

from overfitlab.bounds import BoundConfig
from overfitlab.designs import DesignSpec
from overfitlab.harness import (
    AlphaStarSpec,
    ConfigError,
    Example31Params,
    ExperimentConfig,
    NoiseSpec,
    OutputPaths,
    TrialRecord,
    emit_outputs,
    preset_example_31,
    records_to_csv,
    resolve_alpha_star,
    run_experiment,
    summarize,
    sweep,
    CSV_HEADER,
)
from overfitlab.spectra import Spectrum, make_example_spectrum


def small_config(seed=101, trials=8, noise_sigma=1.0, p=120, N=25):
    spectrum = Spectrum(np.geomspace(1.0, 1e-2, p))
    return ExperimentConfig(
        design=DesignSpec(spectrum=spectrum, family="gaussian", seed=seed),
        N=N,
        alpha_star=AlphaStarSpec(mode="random_unit", norm=2.0),
        noise=NoiseSpec(family="gaussian", sigma=noise_sigma),
        bound_config=BoundConfig(),
        trials=trials,
    )


class TestSpecs:
    def test_noise_psi2_defaults_to_sigma(self):
        n = NoiseSpec(family="gaussian", sigma=0.7)
        assert n.psi2 == 0.7
        with pytest.raises(ConfigError):
            NoiseSpec(family="poisson")
        with pytest.raises(ConfigError):
            NoiseSpec(sigma=1.0, psi2=0.0)

    def test_alpha_star_validation(self):
        with pytest.raises(ConfigError):
            AlphaStarSpec(mode="spiral")
        with pytest.raises(ConfigError):
            AlphaStarSpec(mode="explicit")
        with pytest.raises(ConfigError):
            AlphaStarSpec(mode="random_unit", vector=(1.0,))
        with pytest.raises(ConfigError):
            AlphaStarSpec(norm=0.0)

    def test_explicit_vector_length_checked(self):
        spectrum = Spectrum(np.ones(3))
        with pytest.raises(ConfigError):
            ExperimentConfig(
                design=DesignSpec(spectrum=spectrum),
                N=1,
                alpha_star=AlphaStarSpec(mode="explicit", norm=1.0, vector=(1.0, 2.0)),
            )

    def test_resolve_alpha_star(self):
        cfg = small_config()
        v = resolve_alpha_star(cfg)
        assert np.linalg.norm(v) == pytest.approx(2.0, rel=1e-12)
        assert np.array_equal(v, resolve_alpha_star(cfg))  # deterministic
        unit = dataclasses.replace(cfg, alpha_star=AlphaStarSpec(norm=3.0))
        u = resolve_alpha_star(unit)
        assert u[0] == 3.0 and np.count_nonzero(u) == 1
        expl = dataclasses.replace(
            cfg,
            alpha_star=AlphaStarSpec(
                mode="explicit", vector=tuple(float(i) for i in range(cfg.design.spectrum.p))
            ),
        )
        assert resolve_alpha_star(expl)[5] == 5.0


class TestConfigSerialization:
    def test_roundtrip_bit_exact(self):
        cfg = preset_example_31(N=20, epsilon=0.05, snr=10.0, trials=3, seed=7)
        text = json.dumps(cfg.to_json_obj())
        back = ExperimentConfig.from_json(text)
        assert back.to_json_obj() == cfg.to_json_obj()
        assert back.design == cfg.design
        assert back.bound_config == cfg.bound_config
        assert back.example_params == cfg.example_params

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(json.dumps({"N": 5}))


class TestRunExperiment:
    def test_zero_noise_row_span(self):
        cfg = small_config(noise_sigma=0.0, trials=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = run_experiment(cfg)
        assert result.summary["trials"] == 4
        assert result.summary["coverage_within_rho"] == 1.0  # rho >= |a*| always covers
        assert result.report.rho == pytest.approx(2.0)
        # estimation error equals the out-of-row-space mass of alpha*
        from overfitlab.designs import sample_design

        X = sample_design(cfg.design, cfg.N, substream=(31, 0))
        alpha = resolve_alpha_star(cfg)
        proj = X.T @ np.linalg.solve(X @ X.T, X @ alpha)
        oracle = float(np.linalg.norm(alpha - proj))
        assert result.records[0].estimation_error == pytest.approx(oracle, rel=1e-8)

    def test_exclusion_flags(self):
        cfg = small_config(trials=6)
        result = run_experiment(cfg)
        for rec in result.records:
            assert rec.exclusion_ok in (True, False)
            assert rec.excess_risk_at_interpolant < 0

    def test_threads_match_serial(self):
        cfg = small_config(trials=6)
        serial = run_experiment(cfg, threads=1)
        parallel = run_experiment(cfg, threads=4)
        assert records_to_csv(serial.records) == records_to_csv(parallel.records)

    def test_summary_matches_records(self):
        cfg = small_config(trials=10)
        result = run_experiment(cfg)
        rho_cov = np.mean([r.within_rho for r in result.records])
        assert result.summary["coverage_within_rho"] == pytest.approx(rho_cov)
        assert result.summary["coverage_target"] >= 0.9


class TestCsv:
    def test_header_and_row_count(self):
        cfg = small_config(trials=5)
        result = run_experiment(cfg)
        text = records_to_csv(result.records)
        lines = text.strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == 6

    def test_empty_records(self):
        assert records_to_csv([]) == CSV_HEADER + "\n"

    def test_coverage_recomputable_from_csv(self):
        cfg = small_config(trials=9)
        result = run_experiment(cfg)
        lines = records_to_csv(result.records).strip().split("\n")[1:]
        cols = CSV_HEADER.split(",")
        parsed = [dict(zip(cols, ln.split(","))) for ln in lines]
        cov = np.mean([row["within_rho"] == "true" for row in parsed])
        assert cov == pytest.approx(result.summary["coverage_within_rho"])
        med = np.median([float(row["s_min_empirical"]) for row in parsed])
        assert med == pytest.approx(result.summary["median_s_min"])

    def test_17_digit_floats_roundtrip(self):
        rec = TrialRecord(0, math.pi, math.e, 1 / 3, -math.tau, True, False, True)
        line = records_to_csv([rec]).strip().split("\n")[1]
        vals = line.split(",")
        assert float(vals[1]) == math.pi
        assert float(vals[4]) == -math.tau


class TestEmitOutputs:
    def test_full_emission(self, tmp_path):
        out = OutputPaths(
            csv_path=str(tmp_path / "trials.csv"),
            json_path=str(tmp_path / "report.json"),
            plot_dir=str(tmp_path / "plots"),
        )
        cfg = dataclasses.replace(small_config(trials=5), outputs=out)
        result = run_experiment(cfg)
        written = emit_outputs(result.report, result.records, result.summary, cfg)
        assert set(written) == {"csv", "json", "prediction_plot", "smin_plot"}
        payload = json.loads((tmp_path / "report.json").read_text())
        assert set(payload) == {"config", "bound_report", "summary"}
        rebuilt = ExperimentConfig.from_json_obj(payload["config"])
        assert rebuilt.to_json_obj() == cfg.to_json_obj()
        svg = (tmp_path / "plots" / "prediction_error.svg").read_text()
        assert svg.startswith("<svg") and "r*" in svg

    def test_empty_records_no_plots(self, tmp_path):
        out = OutputPaths(
            csv_path=str(tmp_path / "t.csv"),
            json_path=str(tmp_path / "r.json"),
            plot_dir=str(tmp_path / "plots"),
        )
        cfg = dataclasses.replace(small_config(trials=5), outputs=out)
        result = run_experiment(cfg)
        written = emit_outputs(result.report, [], summarize([], result.report), cfg)
        assert (tmp_path / "t.csv").read_text() == CSV_HEADER + "\n"
        json.loads((tmp_path / "r.json").read_text())  # valid JSON
        assert "prediction_plot" not in written

    def test_io_error(self, tmp_path):
        target = tmp_path / "blocker"
        target.write_text("a file, not a directory")
        out = OutputPaths(csv_path=str(target / "x.csv"))
        cfg = dataclasses.replace(small_config(trials=5), outputs=out)
        result = run_experiment(cfg)
        with pytest.raises(OSError):
            emit_outputs(result.report, result.records, result.summary, cfg)


class TestPreset31:
    def test_dimensions_and_floors(self):
        cfg = preset_example_31(N=200, epsilon=1e-3, snr=30.0, trials=2)
        p = cfg.design.spectrum.p
        assert p == 1382
        assert math.sqrt(p / (p * 1e-3 + 1)) == pytest.approx(24.087, abs=1e-3)
        assert cfg.alpha_star.norm == pytest.approx(30.0)
        assert cfg.noise.psi2 == 1.0
        assert cfg.example_params == Example31Params(N=200, epsilon=1e-3, c_ratio=1.0, snr=30.0)

    def test_snr_floor_enforced(self):
        with pytest.raises(ConfigError, match="snr too small"):
            preset_example_31(N=200, epsilon=1e-3, snr=10.0)

    def test_small_boundary_case(self):
        cfg = preset_example_31(N=10, epsilon=0.5, snr=5.0, trials=1)
        assert cfg.design.spectrum.p == 7


class TestSweep:
    def test_single_value_matches_run(self):
        cfg = small_config(trials=5)
        pts = sweep(cfg, "N", [25])
        direct = run_experiment(cfg)
        assert pts[0].summary == direct.summary

    def test_pred_error_trend_on_benchmark_family(self):
        cfg = preset_example_31(N=60, epsilon=0.05, snr=10.0, trials=15, seed=77)
        pts = sweep(cfg, "N", [60, 120, 240])
        means = [pt.summary["mean_prediction_error"] for pt in pts]
        assert all(pt.error is None for pt in pts)
        assert means[-1] <= means[0]  # risk shrinks as N (and p with it) grows

    def test_trace_scale_applies(self):
        cfg = small_config(trials=3)
        pts = sweep(cfg, "trace_scale", [1.0, 4.0])
        assert all(pt.error is None for pt in pts)

    def test_df_requires_student(self):
        cfg = small_config(trials=3)
        pts = sweep(cfg, "df", [3.0])
        assert pts[0].error is not None and "student_t" in pts[0].error

    def test_epsilon_requires_preset(self):
        cfg = small_config(trials=3)
        pts = sweep(cfg, "epsilon", [0.05])
        assert pts[0].error is not None

    def test_unknown_variable(self):
        with pytest.raises(ConfigError):
            sweep(small_config(), "gamma", [1.0])
        with pytest.raises(ConfigError):
            sweep(small_config(), "N", [])

    def test_sweep_plot(self, tmp_path):
        cfg = dataclasses.replace(
            small_config(trials=3), outputs=OutputPaths(plot_dir=str(tmp_path))
        )
        sweep(cfg, "N", [20, 30])
        assert (tmp_path / "risk_vs_N.svg").exists()


class TestDeterminism:
    def test_identical_configs_identical_csv(self):
        a = run_experiment(small_config(trials=6))
        b = run_experiment(small_config(trials=6))
        assert records_to_csv(a.records) == records_to_csv(b.records)

    def test_different_seeds_differ(self):
        a = run_experiment(small_config(seed=1, trials=4))
        b = run_experiment(small_config(seed=2, trials=4))
        assert records_to_csv(a.records) != records_to_csv(b.records)
