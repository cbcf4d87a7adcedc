"""Bounded STL formulas over discrete-time trajectories.

Formulas are immutable trees built from predicate leaves and the usual
Boolean/temporal connectives.  Temporal operators carry closed integer
intervals ``[a, b]`` with ``0 <= a <= b``; unbounded intervals are not
representable.  Time is integer-indexed throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PredicateFn",
    "Formula",
    "TrueFormula",
    "FalseFormula",
    "Predicate",
    "Not",
    "And",
    "Or",
    "Until",
    "Release",
    "Eventually",
    "Always",
    "formula_length",
    "to_positive_normal_form",
    "is_positive_normal_form",
    "to_text",
    "atom_functions",
    "required_predicate_times",
]

Interval = tuple[int, int]


def _fmt_num(v: float) -> str:
    """Format a float compactly but value-exactly (integers lose the '.0')."""
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class PredicateFn:
    """A scalar predicate function h over state vectors; the atom holds iff h(x) >= 0.

    Three kinds are supported:

    * ``affine``:        h(x) = a . x + b
    * ``norm-inside``:   h(x) = c - ||x[sel] - center||_2
    * ``norm-outside``:  h(x) = ||x[sel] - center||_2 - c

    Negating a predicate stays inside this family (affine flips sign,
    the two norm kinds swap), which is what makes positive normal form
    closed over predicate leaves.
    """

    kind: str
    a: tuple[float, ...] = ()
    b: float = 0.0
    sel: tuple[int, ...] = ()
    center: tuple[float, ...] = ()
    c: float = 0.0

    def __post_init__(self):
        if self.kind == "affine":
            if not all(math.isfinite(v) for v in self.a) or not math.isfinite(self.b):
                raise ValueError("affine predicate requires finite coefficients")
        elif self.kind in ("norm-inside", "norm-outside"):
            if self.c < 0:
                raise ValueError("norm predicate threshold must be nonnegative")
            if len(self.sel) != len(self.center):
                raise ValueError("selector and center must have equal length")
            if len(self.sel) == 0:
                raise ValueError("norm predicate needs at least one component")
            if len(set(self.sel)) != len(self.sel) or min(self.sel) < 0:
                raise ValueError("selector indices must be distinct and nonnegative")
            if not all(math.isfinite(v) for v in self.center) or not math.isfinite(self.c):
                raise ValueError("norm predicate requires finite center and threshold")
        else:
            raise ValueError(f"unknown predicate kind {self.kind!r}")

    @classmethod
    def affine(cls, a, b) -> "PredicateFn":
        return cls(kind="affine", a=tuple(float(v) for v in a), b=float(b))

    @classmethod
    def norm_inside(cls, sel, center, c) -> "PredicateFn":
        return cls(kind="norm-inside", sel=tuple(int(i) for i in sel),
                   center=tuple(float(v) for v in center), c=float(c))

    @classmethod
    def norm_outside(cls, sel, center, c) -> "PredicateFn":
        return cls(kind="norm-outside", sel=tuple(int(i) for i in sel),
                   center=tuple(float(v) for v in center), c=float(c))

    @property
    def is_constant(self) -> bool:
        return self.kind == "affine" and all(v == 0.0 for v in self.a)

    def min_dimension(self) -> int:
        if self.kind == "affine":
            return len(self.a)
        return max(self.sel) + 1

    def negated(self) -> "PredicateFn":
        if self.kind == "affine":
            return PredicateFn.affine(tuple(-v for v in self.a), -self.b)
        if self.kind == "norm-inside":
            return PredicateFn.norm_outside(self.sel, self.center, self.c)
        return PredicateFn.norm_inside(self.sel, self.center, self.c)

    def __call__(self, state) -> float:
        """Evaluate h at a single state vector."""
        x = np.asarray(state, dtype=float)
        if self.kind == "affine":
            return float(np.dot(x[: len(self.a)], self.a) + self.b)
        d = float(np.linalg.norm(x[list(self.sel)] - np.asarray(self.center)))
        if self.kind == "norm-inside":
            return self.c - d
        return d - self.c

    def evaluate(self, states) -> np.ndarray:
        """Evaluate h over a (T, n) array of states, returning a length-T vector."""
        x = np.asarray(states, dtype=float)
        if x.ndim != 2:
            raise ValueError("states must be a (T, n) array")
        if x.shape[1] < self.min_dimension():
            raise ValueError(
                f"predicate {self.name!r} needs dimension >= {self.min_dimension()}, "
                f"got {x.shape[1]}"
            )
        if self.kind == "affine":
            return x[:, : len(self.a)] @ np.asarray(self.a) + self.b
        d = np.linalg.norm(x[:, list(self.sel)] - np.asarray(self.center), axis=1)
        if self.kind == "norm-inside":
            return self.c - d
        return d - self.c

    def text(self) -> str:
        """Canonical grammar form of the atom (also its identity for bound maps)."""
        if self.kind == "affine":
            parts = []
            for i, coeff in enumerate(self.a):
                if coeff == 0.0:
                    continue
                mag = abs(coeff)
                term = f"x{i}" if mag == 1.0 else f"{_fmt_num(mag)}*x{i}"
                if not parts:
                    parts.append(term if coeff > 0 else f"-{term}")
                else:
                    parts.append(f"+ {term}" if coeff > 0 else f"- {term}")
            expr = " ".join(parts) if parts else "0*x0"
            return f"{expr} >= {_fmt_num(-self.b)}"
        vars_ = ",".join(f"x{i}" for i in self.sel)
        cen = ",".join(_fmt_num(v) for v in self.center)
        op = "<=" if self.kind == "norm-inside" else ">="
        return f"norm2({vars_} ; {cen}) {op} {_fmt_num(self.c)}"

    @property
    def name(self) -> str:
        return self.text()


class Formula:
    """Base class for formula nodes.  Instances are immutable and hashable."""

    def __invert__(self) -> "Formula":
        return Not(self)

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)


@dataclass(frozen=True)
class TrueFormula(Formula):
    pass


@dataclass(frozen=True)
class FalseFormula(Formula):
    """Negation of TRUE; produced only by positive normal form conversion."""


@dataclass(frozen=True)
class Predicate(Formula):
    fn: PredicateFn


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


def _check_interval(interval) -> Interval:
    a, b = interval
    if a != int(a) or b != int(b):
        raise ValueError("interval endpoints must be integers")
    a, b = int(a), int(b)
    if not 0 <= a <= b:
        raise ValueError(f"invalid interval [{a},{b}]: need 0 <= a <= b")
    return (a, b)


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    interval: Interval
    right: Formula

    def __post_init__(self):
        object.__setattr__(self, "interval", _check_interval(self.interval))


@dataclass(frozen=True)
class Release(Formula):
    """Dual of Until; introduced by PNF conversion, robust value defined by duality."""

    left: Formula
    interval: Interval
    right: Formula

    def __post_init__(self):
        object.__setattr__(self, "interval", _check_interval(self.interval))


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    child: Formula

    def __post_init__(self):
        object.__setattr__(self, "interval", _check_interval(self.interval))


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    child: Formula

    def __post_init__(self):
        object.__setattr__(self, "interval", _check_interval(self.interval))


def formula_length(phi: Formula) -> int:
    """Minimal horizon L such that states x[tau0 .. tau0+L] decide the formula."""
    if isinstance(phi, (TrueFormula, FalseFormula, Predicate)):
        return 0
    if isinstance(phi, Not):
        return formula_length(phi.child)
    if isinstance(phi, (And, Or)):
        return max(formula_length(phi.left), formula_length(phi.right))
    if isinstance(phi, (Until, Release)):
        return phi.interval[1] + max(formula_length(phi.left), formula_length(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.interval[1] + formula_length(phi.child)
    raise TypeError(f"not a formula node: {phi!r}")


def to_positive_normal_form(phi: Formula) -> Formula:
    """Push negations into predicate leaves; the result contains no Not nodes.

    Negated Until rewrites to Release (and vice versa); negated predicates
    flip their underlying function.  Idempotent on formulas already in PNF.
    """
    if isinstance(phi, (TrueFormula, FalseFormula, Predicate)):
        return phi
    if isinstance(phi, Not):
        return _negate_pnf(phi.child)
    if isinstance(phi, And):
        return And(to_positive_normal_form(phi.left), to_positive_normal_form(phi.right))
    if isinstance(phi, Or):
        return Or(to_positive_normal_form(phi.left), to_positive_normal_form(phi.right))
    if isinstance(phi, Until):
        return Until(to_positive_normal_form(phi.left), phi.interval,
                     to_positive_normal_form(phi.right))
    if isinstance(phi, Release):
        return Release(to_positive_normal_form(phi.left), phi.interval,
                       to_positive_normal_form(phi.right))
    if isinstance(phi, Eventually):
        return Eventually(phi.interval, to_positive_normal_form(phi.child))
    if isinstance(phi, Always):
        return Always(phi.interval, to_positive_normal_form(phi.child))
    raise TypeError(f"not a formula node: {phi!r}")


def _negate_pnf(phi: Formula) -> Formula:
    if isinstance(phi, TrueFormula):
        return FalseFormula()
    if isinstance(phi, FalseFormula):
        return TrueFormula()
    if isinstance(phi, Predicate):
        return Predicate(phi.fn.negated())
    if isinstance(phi, Not):
        return to_positive_normal_form(phi.child)
    if isinstance(phi, And):
        return Or(_negate_pnf(phi.left), _negate_pnf(phi.right))
    if isinstance(phi, Or):
        return And(_negate_pnf(phi.left), _negate_pnf(phi.right))
    if isinstance(phi, Until):
        return Release(_negate_pnf(phi.left), phi.interval, _negate_pnf(phi.right))
    if isinstance(phi, Release):
        return Until(_negate_pnf(phi.left), phi.interval, _negate_pnf(phi.right))
    if isinstance(phi, Eventually):
        return Always(phi.interval, _negate_pnf(phi.child))
    if isinstance(phi, Always):
        return Eventually(phi.interval, _negate_pnf(phi.child))
    raise TypeError(f"not a formula node: {phi!r}")


def is_positive_normal_form(phi: Formula) -> bool:
    if isinstance(phi, Not):
        return False
    if isinstance(phi, (And, Or, Until, Release)):
        return is_positive_normal_form(phi.left) and is_positive_normal_form(phi.right)
    if isinstance(phi, (Eventually, Always)):
        return is_positive_normal_form(phi.child)
    return True


def to_text(phi: Formula) -> str:
    """Render a formula in the concrete grammar accepted by the parser.

    Release has no surface syntax and is emitted through its Until dual,
    so parsing the output of ``to_text`` yields a semantically equivalent
    (for Release-free input: structurally identical) formula.
    """
    if isinstance(phi, TrueFormula):
        return "TRUE"
    if isinstance(phi, FalseFormula):
        return "!TRUE"
    if isinstance(phi, Predicate):
        return f"({phi.fn.text()})"
    if isinstance(phi, Not):
        return f"!{to_text(phi.child)}"
    if isinstance(phi, And):
        return f"({to_text(phi.left)} & {to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({to_text(phi.left)} | {to_text(phi.right)})"
    if isinstance(phi, Until):
        a, b = phi.interval
        return f"({to_text(phi.left)} U[{a},{b}] {to_text(phi.right)})"
    if isinstance(phi, Release):
        a, b = phi.interval
        return f"!((!{to_text(phi.left)}) U[{a},{b}] (!{to_text(phi.right)}))"
    if isinstance(phi, Eventually):
        a, b = phi.interval
        return f"F[{a},{b}] {to_text(phi.child)}"
    if isinstance(phi, Always):
        a, b = phi.interval
        return f"G[{a},{b}] {to_text(phi.child)}"
    raise TypeError(f"not a formula node: {phi!r}")


def atom_functions(phi: Formula) -> list[PredicateFn]:
    """Unique predicate functions of the formula, keyed by name, in syntax order."""
    out: dict[str, PredicateFn] = {}

    def walk(node: Formula) -> None:
        if isinstance(node, Predicate):
            out.setdefault(node.fn.name, node.fn)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or, Until, Release)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (Eventually, Always)):
            walk(node.child)

    walk(phi)
    return list(out.values())


def required_predicate_times(phi: Formula, tau0: int) -> set[tuple[str, int]]:
    """All (predicate name, time) pairs the formula can read when enabled at tau0."""
    out: set[tuple[str, int]] = set()
    seen: set[tuple[int, int]] = set()

    def walk(node: Formula, tau: int) -> None:
        key = (id(node), tau)
        if key in seen:
            return
        seen.add(key)
        if isinstance(node, Predicate):
            out.add((node.fn.name, tau))
        elif isinstance(node, Not):
            walk(node.child, tau)
        elif isinstance(node, (And, Or)):
            walk(node.left, tau)
            walk(node.right, tau)
        elif isinstance(node, (Until, Release)):
            a, b = node.interval
            for tau2 in range(tau + a, tau + b + 1):
                walk(node.right, tau2)
                for tau1 in range(tau + 1, tau2):
                    walk(node.left, tau1)
        elif isinstance(node, (Eventually, Always)):
            a, b = node.interval
            for tau2 in range(tau + a, tau + b + 1):
                walk(node.child, tau2)

    walk(phi, tau0)
    return out
