"""Boolean, robust, and probabilistic robust semantics for bounded STL.

Each evaluator computes, for every subformula, an array of values over all
start times at once (classic bottom-up monitoring), so a single call costs
O(tree size x horizon x window) with vectorized predicate evaluation.

Conventions:

* robustness of TRUE is +inf; min/max saturate naturally on infinities;
* Until uses the open interior interval (tau, tau''): the candidate time
  tau'' itself and the start time tau carry no left-operand obligation;
* Release is evaluated through its Until dual.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .formula import (
    Always,
    And,
    Eventually,
    FalseFormula,
    Formula,
    Not,
    Or,
    Predicate,
    Release,
    TrueFormula,
    Until,
    formula_length,
    is_positive_normal_form,
)

__all__ = [
    "eval_robustness",
    "eval_boolean",
    "eval_probabilistic_robustness",
    "TrajectoryTooShortError",
    "MissingBoundError",
]


class TrajectoryTooShortError(ValueError):
    """The trajectory does not cover tau0 + L^phi."""


class MissingBoundError(KeyError):
    """A required (predicate, time) lower bound is absent from the bound map."""


def _as_states(trajectory) -> np.ndarray:
    x = np.asarray(trajectory, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("trajectory must be a nonempty (T, n) array")
    return x


def _window_reduce(values: np.ndarray, interval: tuple[int, int], kind: str) -> np.ndarray:
    a, b = interval
    width = b - a + 1
    windows = sliding_window_view(values, width)
    if kind == "min":
        reduced = windows.min(axis=-1)
    elif kind == "max":
        reduced = windows.max(axis=-1)
    elif kind == "all":
        reduced = windows.all(axis=-1)
    else:
        reduced = windows.any(axis=-1)
    return reduced[a:]


def _until_values(rho1: np.ndarray, rho2: np.ndarray, interval: tuple[int, int],
                  out_len: int, dual: bool) -> np.ndarray:
    """sup-min (Until) or inf-max (Release) recursion over candidate times."""
    a, b = interval
    out = np.empty(out_len)
    for tau in range(out_len):
        if dual:
            best = np.inf
            run = -np.inf  # sup of rho1 over the open interior (tau, tau'')
        else:
            best = -np.inf
            run = np.inf  # inf of rho1 over the open interior (tau, tau'')
        for tau1 in range(tau + 1, tau + a):
            run = max(run, rho1[tau1]) if dual else min(run, rho1[tau1])
        for tau2 in range(tau + a, tau + b + 1):
            if dual:
                best = min(best, max(rho2[tau2], run))
                if tau2 > tau:
                    run = max(run, rho1[tau2])
            else:
                best = max(best, min(rho2[tau2], run))
                if tau2 > tau:
                    run = min(run, rho1[tau2])
        out[tau] = best
    return out


def _rho_arrays(phi: Formula, leaf, total_len: int) -> np.ndarray:
    """Array of robustness values for start times 0 .. total_len-1-L^phi.

    `leaf` maps a Predicate node to its length-`total_len` value array.
    """
    cache: dict[int, np.ndarray] = {}

    def rec(node: Formula) -> np.ndarray:
        got = cache.get(id(node))
        if got is not None:
            return got
        if isinstance(node, TrueFormula):
            out = np.full(total_len, np.inf)
        elif isinstance(node, FalseFormula):
            out = np.full(total_len, -np.inf)
        elif isinstance(node, Predicate):
            out = leaf(node)
        elif isinstance(node, Not):
            out = -rec(node.child)
        elif isinstance(node, (And, Or)):
            left, right = rec(node.left), rec(node.right)
            m = min(len(left), len(right))
            op = np.minimum if isinstance(node, And) else np.maximum
            out = op(left[:m], right[:m])
        elif isinstance(node, (Always, Eventually)):
            kind = "min" if isinstance(node, Always) else "max"
            out = _window_reduce(rec(node.child), node.interval, kind)
        elif isinstance(node, (Until, Release)):
            rho1, rho2 = rec(node.left), rec(node.right)
            out_len = total_len - formula_length(node)
            out = _until_values(rho1, rho2, node.interval, out_len,
                                dual=isinstance(node, Release))
        else:
            raise TypeError(f"not a formula node: {node!r}")
        cache[id(node)] = out
        return out

    return rec(phi)


def _check_horizon(phi: Formula, total_len: int, tau0: int) -> None:
    if tau0 < 0:
        raise ValueError("tau0 must be nonnegative")
    needed = tau0 + formula_length(phi)
    if needed > total_len - 1:
        raise TrajectoryTooShortError(
            f"formula needs states up to time {needed}, trajectory ends at {total_len - 1}"
        )


def eval_robustness(phi: Formula, trajectory, tau0: int = 0) -> float:
    """Robust satisfaction value of phi over the trajectory, enabled at tau0."""
    x = _as_states(trajectory)
    _check_horizon(phi, x.shape[0], tau0)
    values = _rho_arrays(phi, lambda node: node.fn.evaluate(x), x.shape[0])
    return float(values[tau0])


def eval_boolean(phi: Formula, trajectory, tau0: int = 0) -> bool:
    """Boolean satisfaction of phi over the trajectory, enabled at tau0."""
    x = _as_states(trajectory)
    _check_horizon(phi, x.shape[0], tau0)
    total_len = x.shape[0]
    cache: dict[int, np.ndarray] = {}

    def rec(node: Formula) -> np.ndarray:
        got = cache.get(id(node))
        if got is not None:
            return got
        if isinstance(node, TrueFormula):
            out = np.ones(total_len, dtype=bool)
        elif isinstance(node, FalseFormula):
            out = np.zeros(total_len, dtype=bool)
        elif isinstance(node, Predicate):
            out = node.fn.evaluate(x) >= 0.0
        elif isinstance(node, Not):
            out = ~rec(node.child)
        elif isinstance(node, (And, Or)):
            left, right = rec(node.left), rec(node.right)
            m = min(len(left), len(right))
            out = (left[:m] & right[:m]) if isinstance(node, And) else (left[:m] | right[:m])
        elif isinstance(node, (Always, Eventually)):
            kind = "all" if isinstance(node, Always) else "any"
            out = _window_reduce(rec(node.child), node.interval, kind)
        elif isinstance(node, (Until, Release)):
            sat1, sat2 = rec(node.left), rec(node.right)
            a, b = node.interval
            out_len = total_len - formula_length(node)
            out = np.empty(out_len, dtype=bool)
            dual = isinstance(node, Release)
            for tau in range(out_len):
                # run = "phi' holds on the whole open interior" (Until)
                #       "phi' held somewhere in the open interior" (Release)
                run = not dual
                for tau1 in range(tau + 1, tau + a):
                    run = (run or sat1[tau1]) if dual else (run and sat1[tau1])
                acc = dual  # identity of the outer any/all
                for tau2 in range(tau + a, tau + b + 1):
                    term = (sat2[tau2] or run) if dual else (sat2[tau2] and run)
                    acc = (acc and term) if dual else (acc or term)
                    if tau2 > tau:
                        run = (run or sat1[tau2]) if dual else (run and sat1[tau2])
                out[tau] = acc
        else:
            raise TypeError(f"not a formula node: {node!r}")
        cache[id(node)] = out
        return out

    return bool(rec(phi)[tau0])


def eval_probabilistic_robustness(phi_pnf: Formula, observed, bounds, tau0: int = 0) -> float:
    """Robust semantics with future predicate values replaced by lower bounds.

    `observed` holds the states up to the current time t (length t+1);
    a predicate read at tau <= t evaluates on the observed state, and a
    read at tau > t takes the value bounds[(predicate_name, tau)].
    Requires phi_pnf in positive normal form so the composition is
    monotone in the bounds.
    """
    if not is_positive_normal_form(phi_pnf):
        raise ValueError("formula must be in positive normal form")
    obs = _as_states(observed)
    t = obs.shape[0] - 1
    if tau0 < 0:
        raise ValueError("tau0 must be nonnegative")
    total_len = tau0 + formula_length(phi_pnf) + 1

    def leaf(node: Predicate) -> np.ndarray:
        vals = np.empty(total_len)
        upto = min(t + 1, total_len)
        vals[:upto] = node.fn.evaluate(obs[:upto])
        for tau in range(t + 1, total_len):
            try:
                vals[tau] = bounds[(node.fn.name, tau)]
            except KeyError:
                raise MissingBoundError(
                    f"no lower bound for predicate {node.fn.name!r} at time {tau}"
                ) from None
        return vals

    values = _rho_arrays(phi_pnf, leaf, total_len)
    return float(values[tau0])
