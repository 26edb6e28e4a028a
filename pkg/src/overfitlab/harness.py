"""Experiment orchestration: configs, trials, summaries and file emission.

A run computes the theoretical bound report once, then executes independent
trials (sample a design and noise, interpolate, measure errors) with
per-trial random streams, so results are identical no matter how trials are
scheduled.  Summaries compare empirical coverage of the bounds against the
theoretical probability floor; because that floor can be vacuous at desk
scale with default constants, coverage targets never drop below 0.9.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .bounds import BoundConfig, BoundReport, bound_report
from .designs import DesignSpec, check_paley_zygmund, rng_stream, sample_design
from .interpolator import (
    RankDeficientDesignError,
    RegressionInstance,
    empirical_excess_risk,
    estimation_error,
    exclusion_event_check,
    min_norm_interpolate,
    prediction_error,
)
from .plots import histogram_svg, line_chart_svg
from .spectra import Spectrum, make_example_spectrum

__all__ = [
    "ConfigError",
    "NoiseSpec",
    "AlphaStarSpec",
    "OutputPaths",
    "Example31Params",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentResult",
    "SweepPoint",
    "run_experiment",
    "preset_example_31",
    "emit_outputs",
    "sweep",
    "records_to_csv",
    "resolve_alpha_star",
]

_TRIAL_DESIGN_TAG = 31
_TRIAL_NOISE_TAG = 32
_ALPHA_TAG = 33

CSV_HEADER = (
    "trial_index,estimation_error,prediction_error,s_min_empirical,"
    "excess_risk_at_interpolant,exclusion_ok,within_rho,within_r_star"
)

NOISE_FAMILIES = ("gaussian", "rademacher")
ALPHA_MODES = ("unit_first_coordinate", "random_unit", "explicit")


class ConfigError(ValueError):
    """An experiment configuration is malformed."""


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family with its declared sub-gaussian scale.

    Convention: gaussian noise with standard deviation sigma is declared at
    psi2 = sigma (recorded in every output); rademacher noise at +-sigma
    likewise.
    """

    family: str = "gaussian"
    sigma: float = 1.0
    psi2: float | None = None

    def __post_init__(self) -> None:
        if self.family not in NOISE_FAMILIES:
            raise ConfigError(f"noise family must be one of {NOISE_FAMILIES}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.psi2 is None:
            object.__setattr__(self, "psi2", self.sigma)
        if self.sigma > 0 and not self.psi2 > 0:
            raise ConfigError("psi2 must be positive when sigma > 0")

    def sample(self, N: int, rng: np.random.Generator) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(N)
        if self.family == "gaussian":
            return self.sigma * rng.standard_normal(N)
        return self.sigma * (rng.integers(0, 2, size=N).astype(np.float64) * 2.0 - 1.0)


@dataclass(frozen=True)
class AlphaStarSpec:
    """Ground-truth coefficient recipe, fixed across all trials of a run."""

    mode: str = "unit_first_coordinate"
    norm: float = 1.0
    vector: tuple | None = None

    def __post_init__(self) -> None:
        if self.mode not in ALPHA_MODES:
            raise ConfigError(f"alpha_star mode must be one of {ALPHA_MODES}")
        if self.mode == "explicit":
            if not self.vector:
                raise ConfigError("explicit alpha_star requires a vector")
            object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        elif self.vector is not None:
            raise ConfigError("vector is only meaningful for the explicit mode")
        if self.mode != "explicit" and not self.norm > 0:
            raise ConfigError("alpha_star norm must be positive")


@dataclass(frozen=True)
class OutputPaths:
    csv_path: str | None = None
    json_path: str | None = None
    plot_dir: str | None = None


@dataclass(frozen=True)
class Example31Params:
    """Parameters of the exponential-plus-flat-tail preset, kept with the
    config so sweeps over epsilon can rebuild the spectrum."""

    N: int
    epsilon: float
    c_ratio: float
    snr: float


@dataclass(frozen=True)
class ExperimentConfig:
    design: DesignSpec
    N: int
    alpha_star: AlphaStarSpec = AlphaStarSpec()
    noise: NoiseSpec = NoiseSpec()
    bound_config: BoundConfig = BoundConfig()
    trials: int = 100
    outputs: OutputPaths = OutputPaths()
    example_params: Example31Params | None = None

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.alpha_star.mode == "explicit" and len(self.alpha_star.vector) != self.design.spectrum.p:
            raise ConfigError(
                f"explicit alpha_star has length {len(self.alpha_star.vector)}, "
                f"expected {self.design.spectrum.p}"
            )

    # -- JSON round-trip; floats survive bit-exactly through repr

    def to_json_obj(self) -> dict:
        return {
            "design": self.design.to_json_obj(),
            "N": self.N,
            "alpha_star": {
                "mode": self.alpha_star.mode,
                "norm": self.alpha_star.norm,
                "vector": list(self.alpha_star.vector) if self.alpha_star.vector else None,
            },
            "noise": {
                "family": self.noise.family,
                "sigma": self.noise.sigma,
                "psi2": self.noise.psi2,
            },
            "bound_config": self.bound_config.to_json_obj(),
            "trials": self.trials,
            "outputs": {
                "csv_path": self.outputs.csv_path,
                "json_path": self.outputs.json_path,
                "plot_dir": self.outputs.plot_dir,
            },
            "example_params": (
                dataclasses.asdict(self.example_params) if self.example_params else None
            ),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExperimentConfig":
        try:
            alpha = obj.get("alpha_star", {})
            noise = obj.get("noise", {})
            outputs = obj.get("outputs", {}) or {}
            ex = obj.get("example_params")
            return cls(
                design=DesignSpec.from_json_obj(obj["design"]),
                N=int(obj["N"]),
                alpha_star=AlphaStarSpec(
                    mode=alpha.get("mode", "unit_first_coordinate"),
                    norm=float(alpha.get("norm", 1.0)),
                    vector=tuple(alpha["vector"]) if alpha.get("vector") else None,
                ),
                noise=NoiseSpec(
                    family=noise.get("family", "gaussian"),
                    sigma=float(noise.get("sigma", 1.0)),
                    psi2=noise.get("psi2"),
                ),
                bound_config=BoundConfig.from_json_obj(obj.get("bound_config", {})),
                trials=int(obj.get("trials", 100)),
                outputs=OutputPaths(
                    csv_path=outputs.get("csv_path"),
                    json_path=outputs.get("json_path"),
                    plot_dir=outputs.get("plot_dir"),
                ),
                example_params=Example31Params(**ex) if ex else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_json_obj(obj)


@dataclass
class TrialRecord:
    trial_index: int
    estimation_error: float
    prediction_error: float
    s_min_empirical: float
    excess_risk_at_interpolant: float
    exclusion_ok: bool
    within_rho: bool
    within_r_star: bool


class ExperimentResult(NamedTuple):
    report: BoundReport
    records: list
    summary: dict


class SweepPoint(NamedTuple):
    value: float
    summary: dict | None
    error: str | None


def resolve_alpha_star(config: ExperimentConfig) -> np.ndarray:
    """Materialize the ground-truth vector (deterministic per config seed)."""
    p = config.design.spectrum.p
    spec = config.alpha_star
    if spec.mode == "unit_first_coordinate":
        v = np.zeros(p)
        v[0] = spec.norm
        return v
    if spec.mode == "random_unit":
        g = rng_stream(config.design.seed, _ALPHA_TAG).standard_normal(p)
        return spec.norm * g / np.linalg.norm(g)
    return np.asarray(spec.vector, dtype=np.float64)


def _run_trial(
    config: ExperimentConfig, alpha_vec: np.ndarray, report: BoundReport, t: int
) -> TrialRecord:
    X = sample_design(config.design, config.N, substream=(_TRIAL_DESIGN_TAG, t))
    xi = config.noise.sample(config.N, rng_stream(config.design.seed, _TRIAL_NOISE_TAG, t))
    inst = RegressionInstance(X, alpha_vec, xi, noise_psi2=config.noise.psi2)
    res = min_norm_interpolate(inst)
    est = estimation_error(res, inst)
    pred = prediction_error(res, inst, config.design.spectrum)
    excl = exclusion_event_check(inst)
    return TrialRecord(
        trial_index=t,
        estimation_error=est,
        prediction_error=pred,
        s_min_empirical=res.s_min,
        excess_risk_at_interpolant=empirical_excess_risk(res.alpha_hat, inst),
        exclusion_ok=excl.excluded,
        within_rho=bool(est <= report.rho),
        within_r_star=bool(pred <= report.r_star),
    )


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Bound report once, then `trials` independent trials.

    Per-trial solver failures are tolerated and counted; the run aborts only
    when more than half the trials fail.
    """
    if config.N >= config.design.spectrum.p:
        warnings.warn(
            f"N={config.N} >= p={config.design.spectrum.p}: not the interpolation regime",
            stacklevel=2,
        )
    alpha_vec = resolve_alpha_star(config)
    report = bound_report(
        config.design.spectrum,
        config.N,
        config.bound_config,
        alpha_star_norm=float(np.linalg.norm(alpha_vec)),
        noise_psi2=config.noise.psi2,
    )
    if report.k_star is None:
        warnings.warn(
            "balance level k* is infinite for this configuration; "
            "the probability floor is vacuous and coverage targets fall back to 0.9",
            stacklevel=2,
        )

    def work(t: int):
        try:
            return _run_trial(config, alpha_vec, report, t)
        except RankDeficientDesignError as exc:
            return (t, str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, range(config.trials)))
    else:
        outcomes = [work(t) for t in range(config.trials)]

    records = [o for o in outcomes if isinstance(o, TrialRecord)]
    failures = [o for o in outcomes if not isinstance(o, TrialRecord)]
    if len(failures) > config.trials / 2:
        raise RuntimeError(
            f"{len(failures)}/{config.trials} trials failed; first failure: {failures[0][1]}"
        )
    summary = summarize(records, report, n_failures=len(failures))
    return ExperimentResult(report=report, records=records, summary=summary)


def summarize(records: Sequence[TrialRecord], report: BoundReport, n_failures: int = 0) -> dict:
    floor = report.probability_floor
    target = max(0.9, floor) if math.isfinite(floor) else 0.9
    if not records:
        return {
            "trials": 0,
            "failures": n_failures,
            "coverage_within_rho": math.nan,
            "coverage_within_r_star": math.nan,
            "exclusion_rate": math.nan,
            "mean_estimation_error": math.nan,
            "mean_prediction_error": math.nan,
            "mean_sq_prediction_error": math.nan,
            "median_s_min": math.nan,
            "smin_exceed_rate": math.nan,
            "probability_floor": floor,
            "coverage_target": target,
        }
    est = np.array([r.estimation_error for r in records])
    pred = np.array([r.prediction_error for r in records])
    smin = np.array([r.s_min_empirical for r in records])
    return {
        "trials": len(records),
        "failures": n_failures,
        "coverage_within_rho": float(np.mean([r.within_rho for r in records])),
        "coverage_within_r_star": float(np.mean([r.within_r_star for r in records])),
        "exclusion_rate": float(np.mean([r.exclusion_ok for r in records])),
        "mean_estimation_error": float(est.mean()),
        "mean_prediction_error": float(pred.mean()),
        "mean_sq_prediction_error": float((pred**2).mean()),
        "median_s_min": float(np.median(smin)),
        "smin_exceed_rate": float(np.mean(smin >= report.s_min_bound)),
        "probability_floor": floor,
        "coverage_target": target,
    }


def preset_example_31(
    N: int = 200,
    epsilon: float = 1e-3,
    c_ratio: float = 1.0,
    snr: float = 30.0,
    trials: int = 100,
    seed: int = 20260810,
    sigma: float = 1.0,
    bound_config: BoundConfig | None = None,
    outputs: OutputPaths | None = None,
) -> ExperimentConfig:
    """Benchmark preset on the exponential-plus-flat-tail spectrum.

    Enforces at construction the two hypotheses the guarantee needs there:
    the signal-to-noise ratio floor sqrt(p / (p epsilon + 1)) and the moment
    condition with delta2^2 >= 1 + 1/epsilon.
    """
    spectrum = make_example_spectrum(N, epsilon, c_ratio)
    p = spectrum.p
    snr_floor = math.sqrt(p / (p * epsilon + 1.0))
    if snr < snr_floor:
        raise ConfigError(
            f"snr too small: {snr:.6g} < required floor {snr_floor:.6g} "
            f"(p={p}, epsilon={epsilon})"
        )
    pz = check_paley_zygmund(spectrum, delta1=1.0, delta2=math.sqrt(1.0 + 1.0 / epsilon))
    if not pz.holds:
        raise ConfigError(
            f"moment condition failed at delta2^2 = 1 + 1/epsilon: "
            f"lhs={pz.lhs:.6g} > rhs={pz.rhs:.6g}"
        )
    noise = NoiseSpec(family="gaussian", sigma=sigma)
    return ExperimentConfig(
        design=DesignSpec(spectrum=spectrum, family="gaussian", seed=seed),
        N=N,
        alpha_star=AlphaStarSpec(mode="unit_first_coordinate", norm=snr * noise.psi2),
        noise=noise,
        bound_config=bound_config if bound_config is not None else BoundConfig(),
        trials=trials,
        outputs=outputs if outputs is not None else OutputPaths(),
        example_params=Example31Params(N=N, epsilon=epsilon, c_ratio=c_ratio, snr=snr),
    )


def _csv_bool(b: bool) -> str:
    return "true" if b else "false"


def records_to_csv(records: Sequence[TrialRecord]) -> str:
    """Fixed header, fixed column order, floats at 17 significant digits."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.trial_index},{r.estimation_error:.17g},{r.prediction_error:.17g},"
            f"{r.s_min_empirical:.17g},{r.excess_risk_at_interpolant:.17g},"
            f"{_csv_bool(r.exclusion_ok)},{_csv_bool(r.within_rho)},"
            f"{_csv_bool(r.within_r_star)}"
        )
    return "\n".join(lines) + "\n"


def _json_clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    return obj


def emit_outputs(
    report: BoundReport,
    records: Sequence[TrialRecord],
    summary: dict,
    config: ExperimentConfig,
) -> dict:
    """Write CSV / JSON / SVG artifacts as configured; returns written paths."""
    written = {}
    out = config.outputs
    try:
        if out.csv_path:
            os.makedirs(os.path.dirname(os.path.abspath(out.csv_path)), exist_ok=True)
            with open(out.csv_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(records_to_csv(records))
            written["csv"] = out.csv_path
        if out.json_path:
            os.makedirs(os.path.dirname(os.path.abspath(out.json_path)), exist_ok=True)
            payload = {
                "config": config.to_json_obj(),
                "bound_report": report.to_json_obj(),
                "summary": _json_clean(summary),
            }
            with open(out.json_path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
            written["json"] = out.json_path
        if out.plot_dir and records:
            os.makedirs(out.plot_dir, exist_ok=True)
            pred_path = os.path.join(out.plot_dir, "prediction_error.svg")
            with open(pred_path, "w", encoding="utf-8") as fh:
                fh.write(
                    histogram_svg(
                        [r.prediction_error for r in records],
                        marker=report.r_star if math.isfinite(report.r_star) else None,
                        marker_label="r*",
                        title="Prediction error across trials",
                        xlabel="covariance-weighted error",
                    )
                )
            written["prediction_plot"] = pred_path
            smin_path = os.path.join(out.plot_dir, "smin.svg")
            with open(smin_path, "w", encoding="utf-8") as fh:
                fh.write(
                    histogram_svg(
                        [r.s_min_empirical for r in records],
                        marker=report.s_min_bound,
                        marker_label="bound",
                        title="Smallest singular value across trials",
                        xlabel="s_min",
                    )
                )
            written["smin_plot"] = smin_path
    except OSError as exc:
        raise OSError(f"failed writing outputs ({exc.filename or exc}): {exc}") from exc
    return written


def _config_with_value(config: ExperimentConfig, variable: str, value: float) -> ExperimentConfig:
    if variable == "N":
        if config.example_params is not None:
            # the benchmark family couples p to N; rebuild the spectrum
            ex = config.example_params
            return preset_example_31(
                N=int(value),
                epsilon=ex.epsilon,
                c_ratio=ex.c_ratio,
                snr=ex.snr,
                trials=config.trials,
                seed=config.design.seed,
                sigma=config.noise.sigma,
                bound_config=config.bound_config,
                outputs=config.outputs,
            )
        return dataclasses.replace(config, N=int(value))
    if variable == "epsilon":
        if config.example_params is None:
            raise ConfigError("epsilon sweeps need a config built by preset_example_31")
        ex = config.example_params
        return preset_example_31(
            N=ex.N,
            epsilon=float(value),
            c_ratio=ex.c_ratio,
            snr=ex.snr,
            trials=config.trials,
            seed=config.design.seed,
            sigma=config.noise.sigma,
            bound_config=config.bound_config,
            outputs=config.outputs,
        )
    if variable == "df":
        if config.design.family != "student_t":
            raise ConfigError("df sweeps need a student_t design")
        return dataclasses.replace(
            config, design=dataclasses.replace(config.design, df=float(value))
        )
    if variable == "trace_scale":
        scaled = config.design.spectrum.scaled(float(value))
        return dataclasses.replace(
            config, design=dataclasses.replace(config.design, spectrum=scaled)
        )
    raise ConfigError(f"unknown sweep variable {variable!r}")


def sweep(
    config: ExperimentConfig,
    variable: str,
    values: Sequence[float],
    threads: int = 1,
) -> list[SweepPoint]:
    """run_experiment per value; per-value failures are recorded, not fatal."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    points = []
    for value in values:
        try:
            cfg = _config_with_value(config, variable, value)
            result = run_experiment(cfg, threads=threads)
            points.append(SweepPoint(value=float(value), summary=result.summary, error=None))
        except (ConfigError, RuntimeError, ValueError) as exc:
            points.append(SweepPoint(value=float(value), summary=None, error=str(exc)))
    if config.outputs.plot_dir:
        good = [pt for pt in points if pt.summary is not None]
        if good:
            os.makedirs(config.outputs.plot_dir, exist_ok=True)
            path = os.path.join(config.outputs.plot_dir, f"risk_vs_{variable}.svg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(
                    line_chart_svg(
                        [pt.value for pt in good],
                        [pt.summary["mean_prediction_error"] for pt in good],
                        title=f"Mean prediction error vs {variable}",
                        xlabel=variable,
                        ylabel="mean prediction error",
                    )
                )
    return points
