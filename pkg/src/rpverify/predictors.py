"""Baseline trajectory predictors and ingestion of externally computed predictions.

A predictor maps an observed prefix (X_0 .. X_t) to point predictions for
the next H states.  These baselines are deliberately simple; the conformal
calibration downstream is valid for any predictor, good or bad.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PredictedTrajectory",
    "TrajectoryPredictor",
    "HoldLastPredictor",
    "ConstantVelocityPredictor",
    "AutoregressivePredictor",
    "ExternalPredictions",
    "fit_predictor",
    "PREDICTOR_KINDS",
]

PREDICTOR_KINDS = ("hold-last", "constant-velocity", "autoregressive", "external-file")


@dataclass(frozen=True)
class PredictedTrajectory:
    """Observed prefix (t+1 states) glued to H predicted states."""

    observed: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        obs = np.atleast_2d(np.asarray(self.observed, dtype=float))
        pred = np.asarray(self.predicted, dtype=float).reshape(-1, obs.shape[1])
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "predicted", pred)

    @property
    def t(self) -> int:
        return self.observed.shape[0] - 1

    @property
    def horizon(self) -> int:
        return self.predicted.shape[0]

    @property
    def full(self) -> np.ndarray:
        """The assembled trajectory (X_obs, X_hat_{t+1|t}, ..., X_hat_{t+H|t})."""
        return np.vstack([self.observed, self.predicted])


class TrajectoryPredictor:
    """Base predictor: subclasses fill in `_forecast`."""

    kind = "base"

    def __init__(self, t: int, horizon: int):
        if t < 0 or horizon < 0:
            raise ValueError("t and horizon must be nonnegative")
        self.t = t
        self.horizon = horizon

    def predict(self, observed, trajectory_id: str | None = None) -> PredictedTrajectory:
        obs = np.atleast_2d(np.asarray(observed, dtype=float))
        if obs.shape[0] != self.t + 1:
            raise ValueError(
                f"predictor expects a prefix of length {self.t + 1}, got {obs.shape[0]}"
            )
        pred = self._forecast(obs, trajectory_id)
        return PredictedTrajectory(observed=obs, predicted=pred)

    def _forecast(self, obs: np.ndarray, trajectory_id: str | None) -> np.ndarray:
        raise NotImplementedError


class HoldLastPredictor(TrajectoryPredictor):
    """Repeat the last observed state for the whole horizon."""

    kind = "hold-last"

    def _forecast(self, obs, trajectory_id=None):
        return np.tile(obs[-1], (self.horizon, 1))


class ConstantVelocityPredictor(TrajectoryPredictor):
    """Extrapolate linearly from the last observed step difference."""

    kind = "constant-velocity"

    def _forecast(self, obs, trajectory_id=None):
        if obs.shape[0] < 2:
            velocity = np.zeros(obs.shape[1])
        else:
            velocity = obs[-1] - obs[-2]
        steps = np.arange(1, self.horizon + 1)[:, None]
        return obs[-1] + steps * velocity


class AutoregressivePredictor(TrajectoryPredictor):
    """Per-component AR(p) fit by least squares, applied recursively.

    Multi-step prediction feeds forecasts back as inputs.  Components whose
    lag design matrix is rank deficient fall back to hold-last and are
    recorded in `degenerate_components`.
    """

    kind = "autoregressive"

    def __init__(self, t: int, horizon: int, order: int,
                 coefficients: np.ndarray, degenerate_components: tuple[int, ...] = ()):
        super().__init__(t, horizon)
        self.order = order
        self.coefficients = np.asarray(coefficients, dtype=float)  # (n, p)
        self.degenerate_components = degenerate_components

    @property
    def fallback_warning(self) -> bool:
        return len(self.degenerate_components) > 0

    @classmethod
    def fit(cls, training, t: int, horizon: int, order: int) -> "AutoregressivePredictor":
        if order < 1:
            raise ValueError("autoregressive order must be >= 1")
        if order > t:
            raise ValueError(f"order {order} exceeds observed prefix length t={t}")
        trajs = [np.atleast_2d(np.asarray(x, dtype=float)) for x in training]
        if not trajs:
            raise ValueError("training set is empty")
        n = trajs[0].shape[1]
        coeffs = np.zeros((n, order))
        degenerate = []
        for comp in range(n):
            rows, targets = [], []
            for traj in trajs:
                series = traj[:, comp]
                for s in range(order, len(series)):
                    rows.append(series[s - order:s][::-1])  # most recent lag first
                    targets.append(series[s])
            design = np.asarray(rows)
            y = np.asarray(targets)
            if design.shape[0] < order or np.linalg.matrix_rank(design) < order:
                degenerate.append(comp)
                coeffs[comp, 0] = 1.0  # hold-last
                continue
            coeffs[comp], *_ = np.linalg.lstsq(design, y, rcond=None)
        return cls(t, horizon, order, coeffs, tuple(degenerate))

    def _forecast(self, obs, trajectory_id=None):
        n = obs.shape[1]
        if self.coefficients.shape[0] != n:
            raise ValueError(
                f"model fitted for dimension {self.coefficients.shape[0]}, got {n}"
            )
        window = obs[-self.order:][::-1].copy()  # (p, n), most recent first
        out = np.empty((self.horizon, n))
        for step in range(self.horizon):
            nxt = (window * self.coefficients.T).sum(axis=0)
            out[step] = nxt
            window = np.vstack([nxt, window[:-1]])
        return out


class ExternalPredictions(TrajectoryPredictor):
    """Predictions computed elsewhere, keyed by trajectory id.

    File format: a JSON object mapping each trajectory id to a list of H
    state vectors (a list of numbers is accepted for 1-d states).  Stored
    predictions are returned bit-exactly.
    """

    kind = "external-file"

    def __init__(self, t: int, horizon: int, table: dict[str, np.ndarray]):
        super().__init__(t, horizon)
        self.table = table

    @classmethod
    def from_file(cls, path, t: int, horizon: int) -> "ExternalPredictions":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("external predictions file must be a JSON object")
        table = {}
        for key, rows in data.items():
            arr = np.asarray(rows, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != horizon:
                raise ValueError(
                    f"trajectory {key!r}: expected {horizon} predicted states, "
                    f"got {arr.shape[0]}"
                )
            table[str(key)] = arr
        return cls(t, horizon, table)

    def _forecast(self, obs, trajectory_id=None):
        if trajectory_id is None or trajectory_id not in self.table:
            raise KeyError(f"no stored predictions for trajectory id {trajectory_id!r}")
        pred = self.table[trajectory_id]
        if pred.shape[1] != obs.shape[1]:
            raise ValueError(
                f"stored predictions have dimension {pred.shape[1]}, prefix has {obs.shape[1]}"
            )
        return pred


def fit_predictor(training, t: int, horizon: int, kind: str, *,
                  order: int = 2, predictions_path=None) -> TrajectoryPredictor:
    """Construct a predictor of the given kind for prefixes of length t+1.

    `training` is only consulted by the autoregressive kind; keeping it
    disjoint from the calibration set is the caller's responsibility.
    """
    if kind == "hold-last":
        return HoldLastPredictor(t, horizon)
    if kind == "constant-velocity":
        return ConstantVelocityPredictor(t, horizon)
    if kind == "autoregressive":
        return AutoregressivePredictor.fit(training, t, horizon, order)
    if kind == "external-file":
        if predictions_path is None:
            raise ValueError("external-file predictor needs predictions_path")
        return ExternalPredictions.from_file(predictions_path, t, horizon)
    raise ValueError(f"unknown predictor kind {kind!r}; choose from {PREDICTOR_KINDS}")
