"""Vanilla and robust conformal quantiles under a bounded f-divergence shift.

The robust prediction region follows the adjusted-level construction: with
K calibration scores and failure probability delta, the reported constant is
the empirical quantile at level

    level = g_inverse(1 - delta_n),   delta_n = 1 - g((1 + 1/K) * g_inverse(1 - delta)),

where g and its generalized inverse are one-dimensional convex programs
determined by the divergence generator f and the shift budget epsilon.
For the total variation distance, g(beta) = max(0, beta - epsilon) and
g_inverse(tau) = min(tau + epsilon, 1) in closed form.  With epsilon = 0 the
chain reduces bit-for-bit to the 1/K-corrected (1-delta) quantile, so the
non-robust baseline is exactly the epsilon=0 path.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "ScoreSet",
    "FDivergenceSpec",
    "PredictionRegion",
    "empirical_quantile",
    "g_func",
    "g_inverse",
    "robust_quantile",
    "min_calibration_size",
]

_BISECT_TOL = 1e-9
_BISECT_MAX_ITER = 64
# Slack for comparisons that are exact in real arithmetic but jittered by
# floating point (e.g. 0.8 / (1 - 0.8) = 4 + 1e-15).
_FEAS_SLACK = 1e-9


def encode_float(v: float):
    """JSON encoding for possibly non-finite floats ('inf' / '-inf' / 'nan')."""
    if math.isfinite(v):
        return v
    if math.isnan(v):
        return "nan"
    return "inf" if v > 0 else "-inf"


def decode_float(v) -> float:
    if isinstance(v, str):
        return float(v)
    if v is None:
        return math.inf
    return float(v)


@dataclass(frozen=True)
class ScoreSet:
    """A bag of scalar nonconformity scores plus a tag naming their definition."""

    values: tuple[float, ...]
    provenance: str = ""

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("score set must contain at least one value")
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)

    # -- serialization ------------------------------------------------------
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["score"])
            for v in self.values:
                writer.writerow([repr(v)])

    @classmethod
    def from_csv(cls, path, provenance: str | None = None) -> "ScoreSet":
        values = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip() == "":
                    continue
                cell = row[0].strip()
                if cell == "score":  # optional header
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(f"non-numeric score {cell!r} in {path}") from None
        return cls(tuple(values), provenance or str(path))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(list(self.values)))

    @classmethod
    def from_json(cls, path, provenance: str | None = None) -> "ScoreSet":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, list):
            raise ValueError("score JSON must be an array of numbers")
        return cls(tuple(float(v) for v in data), provenance or str(path))


def _tv_generator(z: float) -> float:
    return 0.5 * abs(z - 1.0)


@dataclass(frozen=True)
class FDivergenceSpec:
    """An f-divergence bound: the generator f (convex, f(1)=0) plus epsilon.

    kind "total-variation" uses closed forms for g / g_inverse; kind
    "generic" accepts a black-box convex scalar generator and solves the
    one-dimensional programs by bisection.  Convexity of a generic f is
    spot-checked by midpoint sampling, not proven.
    """

    kind: str
    epsilon: float
    f: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.kind == "total-variation":
            object.__setattr__(self, "f", _tv_generator)
        elif self.kind == "generic":
            if self.f is None:
                raise ValueError("generic divergence requires a generator f")
            if abs(self.f(1.0)) > 1e-12:
                raise ValueError("divergence generator must satisfy f(1) = 0")
            grid = np.linspace(0.0, 4.0, 17)
            for lo, hi in zip(grid[:-2], grid[2:]):
                mid = 0.5 * (lo + hi)
                if self.f(mid) > 0.5 * (self.f(lo) + self.f(hi)) + 1e-9:
                    raise ValueError("divergence generator fails midpoint convexity check")
        else:
            raise ValueError(f"unknown divergence kind {self.kind!r}")

    @classmethod
    def total_variation(cls, epsilon: float) -> "FDivergenceSpec":
        return cls(kind="total-variation", epsilon=float(epsilon))

    @classmethod
    def generic(cls, f: Callable[[float], float], epsilon: float) -> "FDivergenceSpec":
        return cls(kind="generic", epsilon=float(epsilon), f=f)


@dataclass(frozen=True)
class PredictionRegion:
    """A calibrated constant plus the adjusted quantile level that produced it.

    `value` is +inf exactly when the configuration is infeasible (the
    adjusted level exceeds 1, equivalently the required order statistic
    exceeds K); `adjusted_level` then records the offending level.
    """

    value: float
    adjusted_level: float
    feasible: bool
    delta: float
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "value": encode_float(self.value),
            "adjusted_level": self.adjusted_level,
            "feasible": self.feasible,
            "delta": self.delta,
            "epsilon": self.epsilon,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "PredictionRegion":
        return cls(
            value=decode_float(data["value"]),
            adjusted_level=float(data["adjusted_level"]),
            feasible=bool(data["feasible"]),
            delta=float(data["delta"]),
            epsilon=float(data["epsilon"]),
        )


def empirical_quantile(scores: ScoreSet, level: float) -> float:
    """Order-statistic quantile: the ceil(level*K)-th smallest score.

    Levels at or below 1/K return the minimum; levels above 1 (reachable
    through the vanilla path when (K+1)(1-delta) > K) return +inf.
    Ties are handled naturally by the order statistics.
    """
    k = len(scores)
    if level > 1.0 + _FEAS_SLACK:
        return math.inf
    rank = max(1, math.ceil(min(level, 1.0) * k))
    return float(np.partition(scores.as_array(), rank - 1)[rank - 1])


def _phi(spec: FDivergenceSpec, beta: float, z: float) -> float:
    """Constraint value beta*f(z/beta) + (1-beta)*f((1-z)/(1-beta)), by limits at 0/1."""
    # Interior evaluation with the endpoints handled as limits: each term
    # t*f(u/t) converges and is monotone as t -> 0+, so clamping t to a tiny
    # positive value evaluates the limit to within solver tolerance.
    tiny = 1e-12
    b = min(max(beta, tiny), 1.0 - tiny)
    return b * spec.f(z / b) + (1.0 - b) * spec.f((1.0 - z) / (1.0 - b))


def g_func(spec: FDivergenceSpec, beta: float) -> float:
    """g(beta): smallest z in [0,1] whose divergence constraint stays within epsilon."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if spec.kind == "total-variation":
        return max(0.0, beta - spec.epsilon)
    if beta == 0.0:
        return 0.0
    if _phi(spec, beta, 0.0) <= spec.epsilon:
        return 0.0
    # z = beta is always feasible (f(1) = 0); the feasible set is an interval,
    # so bisect for its left edge.
    lo, hi = 0.0, beta
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo <= _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _phi(spec, beta, mid) <= spec.epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def g_inverse(spec: FDivergenceSpec, tau: float) -> float:
    """g^{-1}(tau): largest beta in [0,1] with g(beta) <= tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if spec.kind == "total-variation":
        return min(tau + spec.epsilon, 1.0)
    if g_func(spec, 1.0) <= tau:
        return 1.0
    lo, hi = 0.0, 1.0  # g(0) = 0 <= tau
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo <= _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if g_func(spec, mid) <= tau:
            lo = mid
        else:
            hi = mid
    return lo


def robust_quantile(scores: ScoreSet, delta: float, spec: FDivergenceSpec) -> PredictionRegion:
    """Prediction region at confidence 1-delta, robust to the given divergence shift.

    Infeasible configurations (adjusted level above 1, which happens when K
    is too small or epsilon too large for delta) yield value +inf with
    feasible=False rather than an error.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    k = len(scores)
    beta_arg = (1.0 + 1.0 / k) * g_inverse(spec, 1.0 - delta)
    if beta_arg > 1.0 + _FEAS_SLACK:
        return PredictionRegion(
            value=math.inf,
            adjusted_level=beta_arg,
            feasible=False,
            delta=delta,
            epsilon=spec.epsilon,
        )
    delta_n = 1.0 - g_func(spec, min(beta_arg, 1.0))
    level = g_inverse(spec, 1.0 - delta_n)
    value = empirical_quantile(scores, level)
    return PredictionRegion(
        value=value,
        adjusted_level=level,
        feasible=math.isfinite(value),
        delta=delta,
        epsilon=spec.epsilon,
    )


def region_feasible(k: int, delta: float, spec: FDivergenceSpec) -> bool:
    """Whether a K-score robust region can be finite for this delta and shift."""
    if k < 1:
        return False
    return (1.0 + 1.0 / k) * g_inverse(spec, 1.0 - delta) <= 1.0 + _FEAS_SLACK


def min_calibration_size(delta: float, spec: FDivergenceSpec) -> int | None:
    """Smallest K for which the robust region can be finite; None if no K suffices.

    The bound is ceil(q / (1 - q)) with q = g_inverse(1 - delta); the ceiling
    is taken with a 1e-9 slack so that ratios that are integers in exact
    arithmetic (e.g. 0.8 / 0.2) are not bumped up by float jitter.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    q = g_inverse(spec, 1.0 - delta)
    if q >= 1.0 - 1e-12:
        return None
    return max(1, math.ceil(q / (1.0 - q) - _FEAS_SLACK))
