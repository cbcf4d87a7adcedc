"""Coverage experiments: repeated calibration/test draws and empirical coverage.

One experiment runs `trial_count` independent trials; each trial samples a
fresh calibration set from the unshifted generator and a test set from the
shifted one, verifies every test trajectory with the configured method at
shift budget epsilon and with the epsilon=0 baseline, and records the
fraction of test trajectories whose true robustness is at least the
certified bound.  Every trial owns a generator seeded from (master seed,
trial index), so serial and parallel execution produce identical reports.
"""

from __future__ import annotations

import dataclasses
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..conformal import FDivergenceSpec, region_feasible, robust_quantile
from ..predictors import fit_predictor
from ..rprv import (
    AdaptiveWeightModel,
    adaptive_rescale,
    direct_scores,
    normalization_constants,
    predicate_ball_infimum,
    required_predicate_times,
    variant1_scores,
    variant2_scores,
)
from ..shift import estimate_epsilon
from ..stl.formula import atom_functions, formula_length, to_positive_normal_form
from ..stl.parser import parse_formula
from ..stl.semantics import eval_probabilistic_robustness, eval_robustness
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = ["ExperimentConfig", "CoverageReport", "run_coverage_experiment",
           "load_config", "write_report"]

_HIST_BINS = 30

# Seed streams derived from the master seed; trials use (seed, TRIAL_STREAM + i).
_TRAIN_STREAM = 1
_AUX_STREAM = 2
_EST_CAL_STREAM = 3
_EST_TEST_STREAM = 4
_TRIAL_STREAM = 1000


@dataclass
class ExperimentConfig:
    """Knobs of one coverage experiment (mirrors the flat config-file keys)."""

    formula: str = "G[0,105] (x0 >= 60)"
    method: str = "direct"
    delta: float = 0.2
    epsilon: float | str = "estimate"
    calibration_size: int = 2000
    test_count: int = 100
    trial_count: int = 50
    t: int = 100
    tau0: int = 0
    predictor: str = "constant-velocity"
    ar_order: int = 2
    train_count: int = 200
    aux_count: int = 200
    estimate_count: int = 1000
    seed: int = 0
    norm: str = "l2"
    downsample: int = 1
    length: int | None = None
    dimension: int = 1
    sigma0: float = 3.0
    sigma: float = 3.5
    base_path: str | None = None
    offset: float = 75.0
    amplitudes: tuple[float, ...] = (8.0, 4.0)
    periods: tuple[float, ...] = (60.0, 17.0)
    phases: tuple[float, ...] = (0.0, 1.3)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.calibration_size < 1 or self.trial_count < 1 or self.test_count < 1:
            raise ValueError("calibration_size, trial_count, test_count must be >= 1")
        if self.method not in ("direct", "variant1", "variant2", "adaptive-direct"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")
        if isinstance(self.epsilon, str) and self.epsilon != "estimate":
            raise ValueError("epsilon must be a number or the string 'estimate'")


_TUPLE_KEYS = ("amplitudes", "periods", "phases")


def load_config(path) -> ExperimentConfig:
    """Parse the flat `key = value` config-file format into an ExperimentConfig."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, val)
    return ExperimentConfig(**values)


def _coerce(key: str, val: str):
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in val.split(",") if v.strip())
    if key in ("formula", "method", "predictor", "norm", "base_path"):
        return val
    if key == "epsilon":
        return val if val == "estimate" else float(val)
    if key == "length":
        return None if val.lower() in ("", "auto", "none") else int(val)
    if key in ("delta", "sigma0", "sigma", "offset"):
        return float(val)
    return int(val)


@dataclass
class CoverageReport:
    """Per-trial coverage ratios and regions for the robust and epsilon=0 arms."""

    config: dict
    target: float
    feasible: bool
    epsilon: float
    robust_ratios: list[float] = field(default_factory=list)
    vanilla_ratios: list[float] = field(default_factory=list)
    robust_regions: list[float] = field(default_factory=list)
    vanilla_regions: list[float] = field(default_factory=list)
    histograms: list[dict] = field(default_factory=list)
    estimated_shift: dict | None = None
    environment: dict = field(default_factory=dict)

    @property
    def mean_robust(self) -> float:
        return float(np.mean(self.robust_ratios)) if self.robust_ratios else float("nan")

    @property
    def mean_vanilla(self) -> float:
        return float(np.mean(self.vanilla_ratios)) if self.vanilla_ratios else float("nan")

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "target": self.target,
            "feasible": self.feasible,
            "epsilon": self.epsilon,
            "mean_robust_coverage": self.mean_robust,
            "mean_vanilla_coverage": self.mean_vanilla,
            "robust_ratios": self.robust_ratios,
            "vanilla_ratios": self.vanilla_ratios,
            "robust_regions": self.robust_regions,
            "vanilla_regions": self.vanilla_regions,
            "score_histograms": self.histograms,
            "estimated_shift": self.estimated_shift,
            "environment": self.environment,
        }


def _environment_metadata() -> dict:
    from .. import __version__

    return {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
    }


def _downsample(trajectories: list[np.ndarray], step: int) -> list[np.ndarray]:
    if step == 1:
        return trajectories
    return [traj[::step] for traj in trajectories]


class _MethodRunner:
    """Per-method score computation and test-side certified bounds."""

    def __init__(self, cfg: ExperimentConfig, phi, phi_pnf, model, alphas, omega):
        self.cfg = cfg
        self.phi = phi
        self.phi_pnf = phi_pnf
        self.model = model
        self.alphas = alphas
        self.omega = omega
        if cfg.method in ("variant1", "variant2"):
            self.pairs = [
                (name, tau)
                for name, tau in required_predicate_times(phi_pnf, cfg.tau0)
                if tau > model.t
            ]
            self.atoms = {fn.name: fn for fn in atom_functions(phi_pnf)}

    def scores(self, trajectories):
        cfg = self.cfg
        if cfg.method == "direct":
            return direct_scores(self.phi, trajectories, self.model, cfg.tau0)
        if cfg.method == "variant1":
            return variant1_scores(trajectories, self.model, self.alphas, norm=cfg.norm)
        if cfg.method == "variant2":
            return variant2_scores(self.phi_pnf, trajectories, self.model, self.alphas)
        raw = direct_scores(self.phi, trajectories, self.model, cfg.tau0)
        prefixes = [traj[: self.model.t + 1] for traj in trajectories]
        return adaptive_rescale(raw, self.omega, prefixes)

    def certified_bound(self, observed, predicted_full, region_value: float) -> float:
        """rho_star for one test trajectory given the calibrated constant."""
        cfg = self.cfg
        if cfg.method in ("direct", "adaptive-direct"):
            rho_hat = eval_robustness(self.phi, predicted_full, cfg.tau0)
            if cfg.method == "adaptive-direct":
                region_value = region_value * self.omega(observed)
            return rho_hat - region_value
        bounds = {}
        for name, tau in self.pairs:
            fn = self.atoms[name]
            if cfg.method == "variant1":
                radius = region_value * self.alphas.state[tau]
                bounds[(name, tau)] = predicate_ball_infimum(
                    fn, predicted_full[tau], radius, cfg.norm
                )
            else:
                rho_hat = float(fn(predicted_full[tau]))
                bounds[(name, tau)] = rho_hat - region_value * self.alphas.predicate[(name, tau)]
        return eval_probabilistic_robustness(self.phi_pnf, observed, bounds, cfg.tau0)


def run_coverage_experiment(config: ExperimentConfig) -> CoverageReport:
    """Run the configured coverage study; see the module docstring for the protocol.

    Infeasible (K, delta, epsilon) combinations are reported with
    feasible=False and no trials, never silently skipped.
    """
    cfg = config
    phi = parse_formula(cfg.formula, cfg.dimension)
    phi_pnf = to_positive_normal_form(phi)
    horizon = cfg.tau0 + formula_length(phi) - cfg.t
    if horizon < 1:
        raise ValueError(
            f"formula horizon {horizon} leaves nothing to predict at t={cfg.t}"
        )
    needed_len = cfg.t + horizon + 1
    if cfg.length is None:
        raw_length = (needed_len - 1) * cfg.downsample + 1
    else:
        raw_length = cfg.length
        if (raw_length - 1) // cfg.downsample + 1 < needed_len:
            raise ValueError(
                f"length {raw_length} after downsampling by {cfg.downsample} is shorter "
                f"than the needed {needed_len} states"
            )
    syn = SyntheticSpec(
        length=raw_length,
        dimension=cfg.dimension,
        sigma0=cfg.sigma0,
        sigma=cfg.sigma,
        seed=cfg.seed,
        base_path=cfg.base_path,
        offset=cfg.offset,
        amplitudes=cfg.amplitudes,
        periods=cfg.periods,
        phases=cfg.phases,
    )

    def draw(count, side, stream):
        rng = np.random.default_rng([cfg.seed, stream])
        return _downsample(generate_synthetic(syn, count, side, rng), cfg.downsample)

    train = draw(cfg.train_count, "calibration", _TRAIN_STREAM)
    model = fit_predictor(train, cfg.t, horizon, cfg.predictor, order=cfg.ar_order)

    alphas = None
    omega = None
    if cfg.method in ("variant1", "variant2"):
        aux = draw(cfg.aux_count, "calibration", _AUX_STREAM)
        alphas = normalization_constants(aux, model, phi_pnf, norm=cfg.norm)
    elif cfg.method == "adaptive-direct":
        aux = draw(cfg.aux_count, "calibration", _AUX_STREAM)
        aux_scores = direct_scores(phi, aux, model, cfg.tau0)
        prefixes = [traj[: cfg.t + 1] for traj in aux]
        omega = AdaptiveWeightModel.fit_knn(prefixes, aux_scores.values)

    runner = _MethodRunner(cfg, phi, phi_pnf, model, alphas, omega)

    estimated = None
    if cfg.epsilon == "estimate":
        est_cal = draw(cfg.estimate_count, "calibration", _EST_CAL_STREAM)
        est_test = draw(cfg.estimate_count, "test", _EST_TEST_STREAM)
        estimate = estimate_epsilon(
            [(runner.scores(est_cal), runner.scores(est_test))],
            labels=(cfg.method,),
        )
        epsilon = estimate.epsilon
        estimated = estimate.to_dict()
    else:
        epsilon = float(cfg.epsilon)

    spec_robust = FDivergenceSpec.total_variation(epsilon)
    spec_vanilla = FDivergenceSpec.total_variation(0.0)

    report = CoverageReport(
        config=dataclasses.asdict(cfg),
        target=1.0 - cfg.delta,
        feasible=True,
        epsilon=epsilon,
        estimated_shift=estimated,
        environment=_environment_metadata(),
    )

    if not region_feasible(cfg.calibration_size, cfg.delta, spec_robust):
        report.feasible = False
        return report

    for trial in range(cfg.trial_count):
        rng = np.random.default_rng([cfg.seed, _TRIAL_STREAM + trial])
        calibration = _downsample(
            generate_synthetic(syn, cfg.calibration_size, "calibration", rng),
            cfg.downsample,
        )
        tests = _downsample(
            generate_synthetic(syn, cfg.test_count, "test", rng), cfg.downsample
        )
        scores = runner.scores(calibration)
        region_r = robust_quantile(scores, cfg.delta, spec_robust)
        region_v = robust_quantile(scores, cfg.delta, spec_vanilla)
        covered_r = 0
        covered_v = 0
        for traj in tests:
            observed = traj[: cfg.t + 1]
            predicted = model.predict(observed).full
            rho_true = eval_robustness(phi, traj, cfg.tau0)
            if rho_true >= runner.certified_bound(observed, predicted, region_r.value):
                covered_r += 1
            if rho_true >= runner.certified_bound(observed, predicted, region_v.value):
                covered_v += 1
        report.robust_ratios.append(covered_r / cfg.test_count)
        report.vanilla_ratios.append(covered_v / cfg.test_count)
        report.robust_regions.append(region_r.value)
        report.vanilla_regions.append(region_v.value)
        counts, edges = np.histogram(scores.as_array(), bins=_HIST_BINS)
        report.histograms.append(
            {"counts": counts.tolist(), "edges": edges.tolist()}
        )
    return report


def write_report(report: CoverageReport, outdir, figures: bool = True) -> dict[str, Path]:
    """Write report.json plus companion CSVs (and figures) into `outdir`.

    Returns the mapping of artifact names to paths.  The JSON and CSV
    outputs are byte-deterministic for a fixed config and seed.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"report": outdir / "report.json"}
    paths["report"].write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    coverage = outdir / "coverage.csv"
    with open(coverage, "w") as fh:
        fh.write("trial,robust_coverage,vanilla_coverage,robust_region,vanilla_region\n")
        for i, (rr, vr, rc, vc) in enumerate(
            zip(report.robust_ratios, report.vanilla_ratios,
                report.robust_regions, report.vanilla_regions)
        ):
            fh.write(f"{i},{rr!r},{vr!r},{rc!r},{vc!r}\n")
    paths["coverage"] = coverage

    hist = outdir / "score_histogram.csv"
    with open(hist, "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        if report.histograms:
            first = report.histograms[0]
            for left, right, count in zip(
                first["edges"][:-1], first["edges"][1:], first["counts"]
            ):
                fh.write(f"{left!r},{right!r},{count}\n")
    paths["histogram"] = hist

    if figures and report.robust_ratios:
        from .figures import render_report_figures

        paths.update(render_report_figures(report, outdir))
    return paths
