"""Robust predictive runtime verification algorithms.

Four methods produce a probabilistic lower bound rho_star on the robust
satisfaction of a bounded STL formula by a partially observed trajectory,
valid with probability 1-delta for every test distribution within the
configured f-divergence ball around the calibration distribution:

* direct          calibrates the formula-level robustness error;
* variant1        calibrates normalized state prediction errors and
                  composes worst-case predicate values over norm balls;
* variant2        calibrates normalized predicate-level robustness errors;
* adaptive direct rescales the direct score by a per-prefix weight so the
                  region adapts to the observed prefix.

The indirect variants additionally report per-predicate lower bounds,
which is what makes a violated verdict interpretable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conformal import (
    FDivergenceSpec,
    PredictionRegion,
    ScoreSet,
    encode_float,
    robust_quantile,
)
from .stl.formula import (
    Formula,
    PredicateFn,
    atom_functions,
    formula_length,
    required_predicate_times,
    to_positive_normal_form,
)
from .stl.semantics import eval_probabilistic_robustness, eval_robustness

__all__ = [
    "NormalizationConstants",
    "VerificationOutcome",
    "AdaptiveWeightModel",
    "HorizonMismatchError",
    "direct_scores",
    "direct_verify",
    "normalization_constants",
    "variant1_scores",
    "variant2_scores",
    "predicate_ball_infimum",
    "variant1_verify",
    "variant2_verify",
    "adaptive_rescale",
    "adaptive_direct_verify",
    "METHODS",
]

METHODS = ("direct", "variant1", "variant2", "adaptive-direct")

ALPHA_FLOOR = 1e-8


class HorizonMismatchError(ValueError):
    """Predictor (t, H) does not match tau0 + L^phi for the formula."""


def _iter_trajectories(collection):
    """Yield (trajectory_id, (T, n) array) from a dict or an iterable of arrays."""
    if isinstance(collection, dict):
        for tid, traj in collection.items():
            yield str(tid), np.atleast_2d(np.asarray(traj, dtype=float))
    else:
        for traj in collection:
            if isinstance(traj, tuple) and len(traj) == 2 and isinstance(traj[0], str):
                yield traj[0], np.atleast_2d(np.asarray(traj[1], dtype=float))
            else:
                yield None, np.atleast_2d(np.asarray(traj, dtype=float))


def _check_horizon(phi: Formula, model, tau0: int) -> int:
    """Return the prediction horizon demanded by the formula; error on mismatch."""
    needed = tau0 + formula_length(phi) - model.t
    if needed < 1:
        raise ValueError(
            f"formula is decided by the observed prefix (needed horizon {needed}); "
            "evaluate its robustness directly instead"
        )
    if model.horizon != needed:
        raise HorizonMismatchError(
            f"formula enabled at tau0={tau0} needs horizon {needed} from t={model.t}, "
            f"predictor provides {model.horizon}"
        )
    return needed


def _truth_and_prediction(model, traj: np.ndarray, tid, needed_len: int):
    if traj.shape[0] < needed_len:
        raise ValueError(
            f"trajectory has {traj.shape[0]} states, needs at least {needed_len}"
        )
    predicted = model.predict(traj[: model.t + 1], trajectory_id=tid)
    return traj, predicted.full


@dataclass(frozen=True)
class NormalizationConstants:
    """Per-time and per-(predicate, time) error scales estimated on auxiliary data.

    Values never fall below `floor`; `clamped` flags that some raw maximum
    was smaller (e.g. an exact predictor), which would otherwise break the
    strict positivity the indirect guarantees require.
    """

    state: dict[int, float]
    predicate: dict[tuple[str, int], float]
    floor: float
    clamped: bool


@dataclass(frozen=True)
class VerificationOutcome:
    """Result of one verification call: the certified bound and its provenance."""

    rho_star: float
    region: PredictionRegion
    confidence: float
    method: str
    predicate_bounds: dict[tuple[str, int], float] | None = None
    weight: float | None = None  # adaptive methods: omega(X_obs)

    @property
    def satisfied(self) -> bool:
        """True when satisfaction itself is certified at the stated confidence."""
        return self.rho_star > 0

    def to_dict(self) -> dict:
        data = {
            "rho_star": encode_float(self.rho_star),
            "confidence": self.confidence,
            "method": self.method,
            "satisfied": self.satisfied,
            "region": self.region.to_dict(),
        }
        if self.predicate_bounds is not None:
            data["predicate_bounds"] = {
                f"{name}@{tau}": encode_float(v)
                for (name, tau), v in sorted(self.predicate_bounds.items())
            }
        if self.weight is not None:
            data["weight"] = self.weight
        return data

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Direct method
# ---------------------------------------------------------------------------

def direct_scores(phi: Formula, calibration, model, tau0: int = 0) -> ScoreSet:
    """Formula-level nonconformity: predicted minus true robustness, per trajectory."""
    needed_h = _check_horizon(phi, model, tau0)
    needed_len = model.t + needed_h + 1
    values = []
    for tid, traj in _iter_trajectories(calibration):
        truth, predicted = _truth_and_prediction(model, traj, tid, needed_len)
        values.append(
            eval_robustness(phi, predicted, tau0) - eval_robustness(phi, truth, tau0)
        )
    if not values:
        raise ValueError("calibration set is empty")
    return ScoreSet(tuple(values), provenance="direct")


def direct_verify(phi: Formula, calibration, model, observed, delta: float,
                  spec: FDivergenceSpec, tau0: int = 0) -> VerificationOutcome:
    """Certify rho^phi(X, tau0) >= rho^phi(X_hat, tau0) - C_tilde at confidence 1-delta."""
    scores = direct_scores(phi, calibration, model, tau0)
    region = robust_quantile(scores, delta, spec)
    predicted = model.predict(observed).full
    rho_hat = eval_robustness(phi, predicted, tau0)
    rho_star = rho_hat - region.value if region.feasible else -math.inf
    return VerificationOutcome(
        rho_star=rho_star,
        region=region,
        confidence=1.0 - delta,
        method="direct",
    )


# ---------------------------------------------------------------------------
# Normalization constants and indirect scores
# ---------------------------------------------------------------------------

def _state_errors(truth: np.ndarray, predicted: np.ndarray, window, norm: str) -> np.ndarray:
    diffs = truth[window] - predicted[window]
    order = np.inf if norm == "linf" else 2
    return np.linalg.norm(diffs, ord=order, axis=1)


def normalization_constants(aux, model, phi_pnf: Formula, *,
                            floor: float = ALPHA_FLOOR,
                            norm: str = "l2") -> NormalizationConstants:
    """Max prediction-error scales over an auxiliary set independent of calibration.

    state[tau] is the largest state-prediction error norm at tau;
    predicate[(name, tau)] the largest absolute predicate-robustness error.
    The window is {t+1, .., t+H} from the model.
    """
    t, horizon = model.t, model.horizon
    window = list(range(t + 1, t + horizon + 1))
    atoms = atom_functions(phi_pnf)
    state_max = {tau: 0.0 for tau in window}
    pred_max = {(fn.name, tau): 0.0 for fn in atoms for tau in window}
    count = 0
    for tid, traj in _iter_trajectories(aux):
        truth, predicted = _truth_and_prediction(model, traj, tid, t + horizon + 1)
        errs = _state_errors(truth, predicted, window, norm)
        for tau, e in zip(window, errs):
            state_max[tau] = max(state_max[tau], float(e))
        for fn in atoms:
            gap = np.abs(fn.evaluate(predicted[window]) - fn.evaluate(truth[window]))
            for tau, e in zip(window, gap):
                key = (fn.name, tau)
                pred_max[key] = max(pred_max[key], float(e))
        count += 1
    if count == 0:
        raise ValueError("auxiliary trajectory set is empty")
    clamped = any(v < floor for v in state_max.values()) or any(
        v < floor for v in pred_max.values()
    )
    state = {tau: max(v, floor) for tau, v in state_max.items()}
    predicate = {key: max(v, floor) for key, v in pred_max.items()}
    return NormalizationConstants(state=state, predicate=predicate,
                                  floor=floor, clamped=clamped)


def variant1_scores(calibration, model, alphas: NormalizationConstants,
                    norm: str = "l2") -> ScoreSet:
    """Max over the prediction window of normalized state prediction errors."""
    t, horizon = model.t, model.horizon
    window = list(range(t + 1, t + horizon + 1))
    scale = np.asarray([alphas.state[tau] for tau in window])
    values = []
    for tid, traj in _iter_trajectories(calibration):
        truth, predicted = _truth_and_prediction(model, traj, tid, t + horizon + 1)
        values.append(float((_state_errors(truth, predicted, window, norm) / scale).max()))
    if not values:
        raise ValueError("calibration set is empty")
    return ScoreSet(tuple(values), provenance="variant1")


def variant2_scores(phi_pnf: Formula, calibration, model,
                    alphas: NormalizationConstants) -> ScoreSet:
    """Max over predicates and window times of normalized robustness errors (signed)."""
    t, horizon = model.t, model.horizon
    window = list(range(t + 1, t + horizon + 1))
    atoms = atom_functions(phi_pnf)
    if not atoms:
        raise ValueError("formula has no predicates")
    scale = np.asarray([[alphas.predicate[(fn.name, tau)] for tau in window] for fn in atoms])
    values = []
    for tid, traj in _iter_trajectories(calibration):
        truth, predicted = _truth_and_prediction(model, traj, tid, t + horizon + 1)
        gaps = np.asarray(
            [fn.evaluate(predicted[window]) - fn.evaluate(truth[window]) for fn in atoms]
        )
        values.append(float((gaps / scale).max()))
    if not values:
        raise ValueError("calibration set is empty")
    return ScoreSet(tuple(values), provenance="variant2")


# ---------------------------------------------------------------------------
# Worst-case predicate values over norm balls (Variant I bounds)
# ---------------------------------------------------------------------------

def predicate_ball_infimum(fn: PredicateFn, center, radius: float,
                           norm: str = "l2") -> float:
    """Infimum of h over the `norm` ball of the given radius around `center`.

    Closed forms for all three predicate kinds; `norm` selects the ball
    shape ("l2" or "linf") used for state prediction regions.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if norm not in ("l2", "linf"):
        raise ValueError(f"unsupported norm {norm!r}")
    x = np.asarray(center, dtype=float)
    if fn.kind == "affine":
        a = np.asarray(fn.a)
        dual = np.linalg.norm(a, ord=1 if norm == "linf" else 2)
        base = float(x[: len(fn.a)] @ a + fn.b)
        if dual == 0.0:
            return base
        return base - radius * dual
    delta = np.abs(x[list(fn.sel)] - np.asarray(fn.center))
    if norm == "l2":
        dist = float(np.linalg.norm(delta))
        if fn.kind == "norm-inside":
            return fn.c - dist - radius
        return max(dist - radius, 0.0) - fn.c
    # linf ball: per-coordinate displacement up to radius, combined in l2.
    if fn.kind == "norm-inside":
        far = float(np.linalg.norm(delta + radius))
        return fn.c - far
    near = float(np.linalg.norm(np.maximum(delta - radius, 0.0)))
    return near - fn.c


# ---------------------------------------------------------------------------
# Indirect verification
# ---------------------------------------------------------------------------

def variant1_verify(phi: Formula, calibration, aux, model, observed, delta: float,
                    spec: FDivergenceSpec, tau0: int = 0,
                    norm: str = "l2") -> VerificationOutcome:
    """Indirect method with state-level calibration and ball-infimum predicate bounds."""
    phi_pnf = to_positive_normal_form(phi)
    _check_horizon(phi_pnf, model, tau0)
    alphas = normalization_constants(aux, model, phi_pnf, norm=norm)
    scores = variant1_scores(calibration, model, alphas, norm=norm)
    region = robust_quantile(scores, delta, spec)
    t = model.t
    atoms = {fn.name: fn for fn in atom_functions(phi_pnf)}
    pairs = [(name, tau) for name, tau in required_predicate_times(phi_pnf, tau0) if tau > t]
    predicted = model.predict(np.atleast_2d(np.asarray(observed, dtype=float))).full
    bounds = {}
    for name, tau in pairs:
        radius = region.value * alphas.state[tau] if region.feasible else math.inf
        bounds[(name, tau)] = predicate_ball_infimum(atoms[name], predicted[tau], radius, norm)
    rho_star = eval_probabilistic_robustness(phi_pnf, observed, bounds, tau0)
    return VerificationOutcome(
        rho_star=rho_star,
        region=region,
        confidence=1.0 - delta,
        method="variant1",
        predicate_bounds=bounds,
    )


def variant2_verify(phi: Formula, calibration, aux, model, observed, delta: float,
                    spec: FDivergenceSpec, tau0: int = 0) -> VerificationOutcome:
    """Indirect method with predicate-level calibration (no ball infimum needed)."""
    phi_pnf = to_positive_normal_form(phi)
    _check_horizon(phi_pnf, model, tau0)
    alphas = normalization_constants(aux, model, phi_pnf)
    scores = variant2_scores(phi_pnf, calibration, model, alphas)
    region = robust_quantile(scores, delta, spec)
    t = model.t
    atoms = {fn.name: fn for fn in atom_functions(phi_pnf)}
    pairs = [(name, tau) for name, tau in required_predicate_times(phi_pnf, tau0) if tau > t]
    predicted = model.predict(np.atleast_2d(np.asarray(observed, dtype=float))).full
    bounds = {}
    for name, tau in pairs:
        rho_hat = float(atoms[name](predicted[tau]))
        if region.feasible:
            bounds[(name, tau)] = rho_hat - region.value * alphas.predicate[(name, tau)]
        else:
            bounds[(name, tau)] = -math.inf
    rho_star = eval_probabilistic_robustness(phi_pnf, observed, bounds, tau0)
    return VerificationOutcome(
        rho_star=rho_star,
        region=region,
        confidence=1.0 - delta,
        method="variant2",
        predicate_bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Locally adaptive rescaling
# ---------------------------------------------------------------------------

class AdaptiveWeightModel:
    """Estimator omega of the score magnitude |R| from an observed prefix.

    kind "constant" returns a fixed positive value; kind "knn" averages the
    |R| targets of the k nearest stored prefixes (flattened, Euclidean).
    Outputs never fall below the positivity floor.
    """

    def __init__(self, kind: str = "constant", *, value: float = 1.0,
                 prefixes=None, targets=None, k: int = 10, floor: float = 1e-6):
        if floor <= 0:
            raise ValueError("floor must be positive")
        self.kind = kind
        self.floor = floor
        if kind == "constant":
            if value <= 0:
                raise ValueError("constant weight must be positive")
            self.value = float(value)
        elif kind == "knn":
            self.prefixes = np.asarray(
                [np.asarray(p, dtype=float).ravel() for p in prefixes]
            )
            self.targets = np.abs(np.asarray(targets, dtype=float))
            if len(self.prefixes) != len(self.targets):
                raise ValueError("prefixes and targets must align")
            self.k = min(int(k), len(self.targets))
            if self.k < 1:
                raise ValueError("knn weight model needs at least one training pair")
        else:
            raise ValueError(f"unknown weight model kind {kind!r}")

    @classmethod
    def fit_knn(cls, prefixes, scores, k: int = 10, floor: float = 1e-6):
        return cls(kind="knn", prefixes=list(prefixes), targets=list(scores),
                   k=k, floor=floor)

    def __call__(self, observed) -> float:
        if self.kind == "constant":
            return max(self.value, self.floor)
        q = np.asarray(observed, dtype=float).ravel()
        if q.shape[0] != self.prefixes.shape[1]:
            raise ValueError("prefix length differs from the weight model's training data")
        d = np.linalg.norm(self.prefixes - q, axis=1)
        nearest = np.argpartition(d, self.k - 1)[: self.k]
        return max(float(self.targets[nearest].mean()), self.floor)


def adaptive_rescale(scores: ScoreSet, omega: AdaptiveWeightModel, prefixes) -> ScoreSet:
    """Divide each score by omega of its own observed prefix."""
    prefixes = list(prefixes)
    if len(prefixes) != len(scores):
        raise ValueError("one prefix is required per score")
    weights = [omega(p) for p in prefixes]
    rescaled = tuple(v / w for v, w in zip(scores.values, weights))
    return ScoreSet(rescaled, provenance=f"{scores.provenance}/adaptive")


def adaptive_direct_verify(phi: Formula, calibration, aux, model, observed,
                           delta: float, spec: FDivergenceSpec, tau0: int = 0, *,
                           weight_kind: str = "knn", k: int = 10,
                           floor: float = 1e-6) -> VerificationOutcome:
    """Direct method with a locally adaptive region C_tilde * omega(X_obs).

    The weight model is fit on the auxiliary set (its own direct scores),
    so the calibration scores stay exchangeable after rescaling.
    """
    aux_scores = direct_scores(phi, aux, model, tau0)
    aux_prefixes = [traj[: model.t + 1] for _, traj in _iter_trajectories(aux)]
    if weight_kind == "knn":
        omega = AdaptiveWeightModel.fit_knn(aux_prefixes, aux_scores.values,
                                            k=k, floor=floor)
    elif weight_kind == "constant":
        mean_abs = float(np.abs(np.asarray(aux_scores.values)).mean())
        omega = AdaptiveWeightModel(kind="constant", value=max(mean_abs, floor),
                                    floor=floor)
    else:
        raise ValueError(f"unknown weight model kind {weight_kind!r}")

    cal_scores = direct_scores(phi, calibration, model, tau0)
    cal_prefixes = [traj[: model.t + 1] for _, traj in _iter_trajectories(calibration)]
    rescaled = adaptive_rescale(cal_scores, omega, cal_prefixes)
    region = robust_quantile(rescaled, delta, spec)

    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    weight = omega(observed)
    predicted = model.predict(observed).full
    rho_hat = eval_robustness(phi, predicted, tau0)
    rho_star = rho_hat - region.value * weight if region.feasible else -math.inf
    return VerificationOutcome(
        rho_star=rho_star,
        region=region,
        confidence=1.0 - delta,
        method="adaptive-direct",
        weight=weight,
    )
