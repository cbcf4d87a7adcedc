"""Text grammar for bounded STL formulas.

::

    phi   ::= or
    or    ::= and ('|' and)*
    and   ::= until ('&' until)*
    until ::= unary ('U' '[' int ',' int ']' until)?        # right-associative
    unary ::= '!' unary
            | 'F' '[' int ',' int ']' unary
            | 'G' '[' int ',' int ']' unary
            | 'TRUE'
            | '(' phi ')'
            | '(' expr ('>='|'<=') number ')'
            | '(' 'norm2' '(' xvars ';' numbers ')' ('>='|'<=') number ')'

    expr  ::= signed linear combination of x0..x{n-1} plus constants,
              e.g.  2*x0 - x1 + 3

Intervals must be bounded integer ranges; `&` binds tighter than `|`.
"""

from __future__ import annotations

import re

from .formula import (
    Always,
    And,
    Eventually,
    Formula,
    Not,
    Or,
    Predicate,
    PredicateFn,
    TrueFormula,
    Until,
)

__all__ = ["parse_formula", "FormulaSyntaxError"]


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<TRUE>TRUE\b)
  | (?P<NORM>norm2\b)
  | (?P<INF>inf\b|Inf\b|INF\b)
  | (?P<XVAR>x\d+)
  | (?P<OP>U\b|F\b|G\b)
  | (?P<NUM>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<CMP>>=|<=)
  | (?P<SYM>[()\[\],;|&!*+-])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "WS":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("END", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dimension = dimension

    # -- token helpers ----------------------------------------------------
    def peek(self, offset: int = 0) -> tuple[str, str, int]:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise FormulaSyntaxError(f"expected {want!r}, found {tok[1]!r}", tok[2])
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    # -- grammar ----------------------------------------------------------
    def parse(self) -> Formula:
        phi = self.parse_or()
        tok = self.peek()
        if tok[0] != "END":
            raise FormulaSyntaxError(f"unexpected trailing input {tok[1]!r}", tok[2])
        return phi

    def parse_or(self) -> Formula:
        phi = self.parse_and()
        while self.at("SYM", "|"):
            self.next()
            phi = Or(phi, self.parse_and())
        return phi

    def parse_and(self) -> Formula:
        phi = self.parse_until()
        while self.at("SYM", "&"):
            self.next()
            phi = And(phi, self.parse_until())
        return phi

    def parse_until(self) -> Formula:
        phi = self.parse_unary()
        if self.at("OP", "U"):
            self.next()
            interval = self.parse_interval()
            return Until(phi, interval, self.parse_until())
        return phi

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok[0] == "END":
            raise FormulaSyntaxError("unexpected end of input", tok[2])
        if self.at("SYM", "!"):
            self.next()
            return Not(self.parse_unary())
        if self.at("OP", "F"):
            self.next()
            return Eventually(self.parse_interval(), self.parse_unary())
        if self.at("OP", "G"):
            self.next()
            return Always(self.parse_interval(), self.parse_unary())
        if self.at("TRUE"):
            self.next()
            return TrueFormula()
        if self.at("SYM", "("):
            self.next()
            # Predicate bodies start with norm2 or a linear expression;
            # anything else is a parenthesized subformula.
            if self.peek()[0] in ("NORM", "XVAR", "NUM") or self.peek()[1] in ("+", "-"):
                phi = self.parse_predicate()
            else:
                phi = self.parse_or()
            self.expect("SYM", ")")
            return phi
        raise FormulaSyntaxError(f"unexpected token {tok[1]!r}", tok[2])

    def parse_interval(self) -> tuple[int, int]:
        self.expect("SYM", "[")
        a = self.parse_interval_bound()
        self.expect("SYM", ",")
        b = self.parse_interval_bound()
        tok = self.expect("SYM", "]")
        if a > b:
            raise FormulaSyntaxError(f"empty interval [{a},{b}]", tok[2])
        return (a, b)

    def parse_interval_bound(self) -> int:
        tok = self.next()
        if tok[0] == "INF":
            raise FormulaSyntaxError("unbounded intervals are not supported", tok[2])
        if tok[0] != "NUM":
            raise FormulaSyntaxError(f"expected integer bound, found {tok[1]!r}", tok[2])
        value = float(tok[1])
        if value != int(value):
            raise FormulaSyntaxError(f"interval bound {tok[1]!r} is not an integer", tok[2])
        return int(value)

    def parse_predicate(self) -> Formula:
        if self.at("NORM"):
            return self.parse_norm_predicate()
        coeffs, const = self.parse_linear_expr()
        op = self.expect("CMP")
        k = self.parse_signed_number()
        # expr >= k  <=>  expr - k >= 0 ; expr <= k  <=>  k - expr >= 0
        if op[1] == ">=":
            a = coeffs
            b = const - k
        else:
            a = [-v for v in coeffs]
            b = k - const
        return Predicate(PredicateFn.affine(a, b))

    def parse_norm_predicate(self) -> Formula:
        self.expect("NORM")
        self.expect("SYM", "(")
        sel = [self.parse_xvar()]
        while self.at("SYM", ","):
            self.next()
            sel.append(self.parse_xvar())
        self.expect("SYM", ";")
        center = [self.parse_signed_number()]
        while self.at("SYM", ","):
            self.next()
            center.append(self.parse_signed_number())
        tok = self.expect("SYM", ")")
        if len(center) != len(sel):
            raise FormulaSyntaxError(
                f"norm2 lists {len(sel)} components but {len(center)} center values", tok[2]
            )
        if len(set(sel)) != len(sel):
            raise FormulaSyntaxError("duplicate component in norm2 selector", tok[2])
        op = self.expect("CMP")
        k = self.parse_signed_number()
        if k < 0:
            raise FormulaSyntaxError("norm2 threshold must be nonnegative", op[2])
        if op[1] == "<=":
            return Predicate(PredicateFn.norm_inside(sel, center, k))
        return Predicate(PredicateFn.norm_outside(sel, center, k))

    def parse_xvar(self) -> int:
        tok = self.expect("XVAR")
        idx = int(tok[1][1:])
        if idx >= self.dimension:
            raise FormulaSyntaxError(
                f"component {tok[1]} exceeds trajectory dimension {self.dimension}", tok[2]
            )
        return idx

    def parse_signed_number(self) -> float:
        sign = 1.0
        while self.peek()[1] in ("+", "-"):
            if self.next()[1] == "-":
                sign = -sign
        tok = self.expect("NUM")
        return sign * float(tok[1])

    def parse_linear_expr(self) -> tuple[list[float], float]:
        """Parse a signed linear combination, returning (coefficients, constant)."""
        coeffs = [0.0] * self.dimension
        const = 0.0
        first = True
        while True:
            sign = 1.0
            saw_sign = False
            while self.peek()[1] in ("+", "-"):
                saw_sign = True
                if self.next()[1] == "-":
                    sign = -sign
            if not first and not saw_sign:
                break
            tok = self.peek()
            if tok[0] == "NUM":
                self.next()
                value = float(tok[1])
                if self.at("SYM", "*"):
                    self.next()
                    idx = self.parse_xvar()
                    coeffs[idx] += sign * value
                else:
                    const += sign * value
            elif tok[0] == "XVAR":
                idx = self.parse_xvar()
                coeffs[idx] += sign * 1.0
            else:
                if first or saw_sign:
                    raise FormulaSyntaxError(
                        f"expected term in linear expression, found {tok[1]!r}", tok[2]
                    )
                break
            first = False
        return coeffs, const


def parse_formula(text: str, dimension: int) -> Formula:
    """Parse formula text over `dimension`-dimensional states into an AST.

    Raises FormulaSyntaxError with the offending position on malformed
    input, unbounded intervals, or component indices outside the dimension.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(text, dimension).parse()
