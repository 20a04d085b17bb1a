"""Affine expressions, comparison constraints, and intervals over the reals.

All static analysis in this package runs over exact rationals
(``fractions.Fraction``) so sign and bound computations carry no rounding
error.  Runtime valuations are plain floats; every type here caches the
float image of its rational fields so the simulator never converts in a
hot loop.

The constraint language is deliberately small: finite conjunctions of
comparisons between one variable and one rational constant, with the
operators ``<  <=  >  >=  ==``.  Disjunction, variable-vs-variable
comparisons, and nonlinear terms are not representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

Rational = Fraction
Endpoint = Union[Fraction, float]  # floats are only ever +-inf here

COMPARISON_OPS = ("<", "<=", ">", ">=", "==")

NEG_INF = float("-inf")
POS_INF = float("inf")


class MissingVariable(KeyError):
    """A constraint or expression referenced a variable absent from the valuation."""

    def __init__(self, variable: str):
        super().__init__(variable)
        self.variable = variable

    def __str__(self) -> str:
        return f"valuation does not bind variable {self.variable!r}"


def _is_inf(x: Endpoint) -> bool:
    return isinstance(x, float) and math.isinf(x)


def _ep_float(x: Endpoint) -> float:
    return x if isinstance(x, float) else float(x)


@dataclass(frozen=True)
class Interval:
    """A possibly unbounded real interval with independent endpoint closure.

    Construction normalises away every degenerate shape, so two intervals
    containing the same points compare equal: anything empty collapses to
    the canonical ``Interval.empty()`` (the open interval (0, 0)), and
    infinite endpoints are always open.
    """

    lo: Endpoint = NEG_INF
    hi: Endpoint = POS_INF
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self) -> None:
        lo, hi = self.lo, self.hi
        lo_c, hi_c = self.lo_closed, self.hi_closed
        if _is_inf(lo):
            lo_c = False
        if _is_inf(hi):
            hi_c = False
        empty = (
            lo > hi
            or (lo == hi and not (lo_c and hi_c))
            or (isinstance(lo, float) and lo == POS_INF)
            or (isinstance(hi, float) and hi == NEG_INF)
        )
        if empty:
            lo, hi, lo_c, hi_c = Fraction(0), Fraction(0), False, False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "lo_closed", lo_c)
        object.__setattr__(self, "hi_closed", hi_c)

    @classmethod
    def empty(cls) -> "Interval":
        return cls(Fraction(0), Fraction(0), False, False)

    @classmethod
    def full(cls) -> "Interval":
        return cls(NEG_INF, POS_INF, False, False)

    @classmethod
    def point(cls, x: Rational) -> "Interval":
        return cls(x, x, True, True)

    @classmethod
    def closed(cls, lo: Rational, hi: Rational) -> "Interval":
        return cls(lo, hi, True, True)

    @classmethod
    def open(cls, lo: Endpoint, hi: Endpoint) -> "Interval":
        return cls(lo, hi, False, False)

    @property
    def is_empty(self) -> bool:
        return self == Interval.empty()

    def contains(self, x) -> bool:
        """Membership for a real number (float or Fraction)."""
        if self.is_empty:
            return False
        lo_ok = x >= self.lo if self.lo_closed else x > self.lo
        hi_ok = x <= self.hi if self.hi_closed else x < self.hi
        return lo_ok and hi_ok

    def intersect(self, other: "Interval") -> "Interval":
        return interval_intersect(self, other)

    def __str__(self) -> str:
        if self.is_empty:
            return "EMPTY"
        lb = "[" if self.lo_closed else "("
        rb = "]" if self.hi_closed else ")"
        lo = "-inf" if _is_inf(self.lo) else str(self.lo)
        hi = "inf" if _is_inf(self.hi) else str(self.hi)
        return f"{lb}{lo}, {hi}{rb}"


def interval_intersect(a: Interval, b: Interval) -> Interval:
    """Tightest interval contained in both arguments."""
    if a.is_empty or b.is_empty:
        return Interval.empty()
    if a.lo > b.lo:
        lo, lo_c = a.lo, a.lo_closed
    elif b.lo > a.lo:
        lo, lo_c = b.lo, b.lo_closed
    else:
        lo, lo_c = a.lo, a.lo_closed and b.lo_closed
    if a.hi < b.hi:
        hi, hi_c = a.hi, a.hi_closed
    elif b.hi < a.hi:
        hi, hi_c = b.hi, b.hi_closed
    else:
        hi, hi_c = a.hi, a.hi_closed and b.hi_closed
    return Interval(lo, hi, lo_c, hi_c)


@dataclass(frozen=True)
class Comparison:
    """A single atom ``variable op bound`` with a rational bound."""

    variable: str
    op: str
    bound: Rational
    bound_f: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bound_f", float(self.bound))

    def holds(self, value: float) -> bool:
        b = self.bound_f
        op = self.op
        if op == "<":
            return value < b
        if op == "<=":
            return value <= b
        if op == ">":
            return value > b
        if op == ">=":
            return value >= b
        if op == "==":
            return value == b
        raise ValueError(f"unknown comparison operator {op!r}")

    def holds_exact(self, value: Rational) -> bool:
        b = self.bound
        op = self.op
        if op == "<":
            return value < b
        if op == "<=":
            return value <= b
        if op == ">":
            return value > b
        if op == ">=":
            return value >= b
        if op == "==":
            return value == b
        raise ValueError(f"unknown comparison operator {op!r}")

    def to_interval(self) -> Interval:
        b = self.bound
        if self.op == "<":
            return Interval(NEG_INF, b, False, False)
        if self.op == "<=":
            return Interval(NEG_INF, b, False, True)
        if self.op == ">":
            return Interval(b, POS_INF, False, False)
        if self.op == ">=":
            return Interval(b, POS_INF, True, False)
        if self.op == "==":
            return Interval.point(b)
        raise ValueError(f"unknown comparison operator {self.op!r}")

    def __str__(self) -> str:
        return f"{self.variable} {self.op} {_fmt_rational(self.bound)}"


@dataclass(frozen=True)
class Constraint:
    """A finite conjunction of comparisons.  The empty conjunction is TRUE."""

    conjuncts: tuple[Comparison, ...] = ()

    @classmethod
    def true(cls) -> "Constraint":
        return cls(())

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for c in self.conjuncts:
            seen.setdefault(c.variable, None)
        return tuple(seen)

    def holds(self, valuation: Mapping[str, float]) -> bool:
        for c in self.conjuncts:
            if c.variable not in valuation:
                raise MissingVariable(c.variable)
            if not c.holds(valuation[c.variable]):
                return False
        return True

    def conjoin(self, other: "Constraint") -> "Constraint":
        return Constraint(self.conjuncts + other.conjuncts)

    def __str__(self) -> str:
        if not self.conjuncts:
            return "true"
        return " && ".join(str(c) for c in self.conjuncts)


def eval_constraint(constraint: Constraint, valuation: Mapping[str, float]) -> bool:
    """Evaluate a conjunction against a float valuation.

    Raises MissingVariable if any referenced variable is unbound.  Equality
    is exact float equality; ``x == 20`` is false at 20.0000001.
    """
    return constraint.holds(valuation)


def constraint_to_interval(constraint: Constraint, variable: str) -> Interval:
    """Project a conjunction onto one variable as the tightest interval.

    Conjuncts over other variables are ignored; contradictory conjuncts
    yield the canonical empty interval.
    """
    acc = Interval.full()
    for c in constraint.conjuncts:
        if c.variable != variable:
            continue
        acc = interval_intersect(acc, c.to_interval())
    return acc


@dataclass(frozen=True)
class AffineExpr:
    """The function x -> a*x + b over a single named variable."""

    a: Rational
    b: Rational
    variable: str
    a_f: float = field(init=False, repr=False, compare=False)
    b_f: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "a_f", float(self.a))
        object.__setattr__(self, "b_f", float(self.b))

    def evaluate(self, value: float) -> float:
        return self.a_f * value + self.b_f

    def evaluate_exact(self, value: Rational) -> Rational:
        return self.a * value + self.b

    def evaluate_in(self, valuation: Mapping[str, float]) -> float:
        if self.a == 0:
            return self.b_f
        if self.variable not in valuation:
            raise MissingVariable(self.variable)
        return self.a_f * valuation[self.variable] + self.b_f

    def root(self) -> Rational | None:
        """The unique zero of the expression, or None when a == 0."""
        if self.a == 0:
            return None
        return -self.b / self.a


def sign_region(expr: AffineExpr, positive: bool) -> Interval:
    """Open region of the variable's axis where the expression is > 0 (or < 0).

    For a == 0 the answer is the full line or the empty interval depending
    on the sign of b; for a != 0 the two regions are the open half-lines on
    either side of the root -b/a.
    """
    if expr.a == 0:
        if (expr.b > 0) == positive and expr.b != 0:
            return Interval.full()
        return Interval.empty()
    r = expr.root()
    assert r is not None
    # a > 0: expression positive above the root; a < 0: positive below it.
    above = (expr.a > 0) == positive
    if above:
        return Interval(r, POS_INF, False, False)
    return Interval(NEG_INF, r, False, False)


# --- linear forms -----------------------------------------------------------
#
# The surface syntax allows arbitrary +, -, * and constant division over
# declared variables, e.g. ``0.075 * (150 - x)``.  Parsing normalises such
# terms into a LinearForm (coefficients plus constant).  Products of two
# variable-bearing terms cannot be normalised; they are kept as an opaque
# NonlinearExpr so the well-formedness check can report them instead of the
# parser rejecting the model outright.


@dataclass(frozen=True)
class LinearForm:
    """sum(coeff_i * var_i) + const, with all-rational coefficients."""

    coeffs: tuple[tuple[str, Rational], ...] = ()
    const: Rational = Fraction(0)

    def __post_init__(self) -> None:
        cleaned = tuple(sorted(((v, c) for v, c in self.coeffs if c != 0)))
        object.__setattr__(self, "coeffs", cleaned)

    @classmethod
    def constant(cls, value: Rational) -> "LinearForm":
        return cls((), Fraction(value))

    @classmethod
    def of_variable(cls, name: str) -> "LinearForm":
        return cls(((name, Fraction(1)),), Fraction(0))

    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def coefficient(self, variable: str) -> Rational:
        for v, c in self.coeffs:
            if v == variable:
                return c
        return Fraction(0)

    def evaluate(self, valuation: Mapping[str, float]) -> float:
        acc = float(self.const)
        for v, c in self.coeffs:
            if v not in valuation:
                raise MissingVariable(v)
            acc += float(c) * valuation[v]
        return acc

    def as_affine(self, default_variable: str) -> AffineExpr:
        """View as a single-variable affine expression.

        Constants become 0*default_variable + b.  Raises ValueError when
        more than one variable carries a nonzero coefficient.
        """
        if not self.coeffs:
            return AffineExpr(Fraction(0), self.const, default_variable)
        if len(self.coeffs) > 1:
            names = ", ".join(self.variables())
            raise ValueError(f"expression is not affine in one variable (uses {names})")
        (v, c), = self.coeffs
        return AffineExpr(c, self.const, v)

    def __str__(self) -> str:
        parts: list[str] = []
        for v, c in self.coeffs:
            if c == 1:
                parts.append(v)
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{_fmt_rational(c)} * {v}")
        if self.const != 0 or not parts:
            parts.append(_fmt_rational(self.const))
        out = parts[0]
        for p in parts[1:]:
            if p.startswith("-"):
                out += f" - {p[1:]}"
            else:
                out += f" + {p}"
        return out


@dataclass(frozen=True)
class NonlinearExpr:
    """A parsed expression outside the affine class, kept only as source text."""

    text: str

    def variables(self) -> tuple[str, ...]:
        return ()

    def __str__(self) -> str:
        return self.text


ExprForm = Union[LinearForm, NonlinearExpr]


def lin_add(a: ExprForm, b: ExprForm, text: str) -> ExprForm:
    if isinstance(a, NonlinearExpr) or isinstance(b, NonlinearExpr):
        return NonlinearExpr(text)
    merged = dict(a.coeffs)
    for v, c in b.coeffs:
        merged[v] = merged.get(v, Fraction(0)) + c
    return LinearForm(tuple(merged.items()), a.const + b.const)


def lin_neg(a: ExprForm, text: str) -> ExprForm:
    if isinstance(a, NonlinearExpr):
        return NonlinearExpr(text)
    return LinearForm(tuple((v, -c) for v, c in a.coeffs), -a.const)


def lin_sub(a: ExprForm, b: ExprForm, text: str) -> ExprForm:
    return lin_add(a, lin_neg(b, text), text)


def lin_mul(a: ExprForm, b: ExprForm, text: str) -> ExprForm:
    if isinstance(a, NonlinearExpr) or isinstance(b, NonlinearExpr):
        return NonlinearExpr(text)
    if a.coeffs and b.coeffs:
        return NonlinearExpr(text)
    if a.coeffs:
        a, b = b, a
    # a is now a pure constant
    k = a.const
    return LinearForm(tuple((v, k * c) for v, c in b.coeffs), k * b.const)


def lin_div(a: ExprForm, b: ExprForm, text: str) -> ExprForm:
    if isinstance(a, NonlinearExpr) or isinstance(b, NonlinearExpr):
        return NonlinearExpr(text)
    if b.coeffs:
        return NonlinearExpr(text)
    if b.const == 0:
        raise ZeroDivisionError("division by zero in expression")
    k = b.const
    return LinearForm(tuple((v, c / k) for v, c in a.coeffs), a.const / k)


def _fmt_rational(q: Rational) -> str:
    """Render a rational the way the model format writes numbers.

    Denominators of the form 2^a * 5^b print as exact decimals; anything
    else falls back to a fraction literal ``p/q`` (re-parseable because the
    grammar has constant division).
    """
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    twos = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        shift = max(twos, fives)
        scaled = q.numerator * 10**shift // q.denominator
        sign = "-" if scaled < 0 else ""
        digits = str(abs(scaled)).rjust(shift + 1, "0")
        return f"{sign}{digits[:-shift]}.{digits[-shift:]}"
    return f"{q.numerator}/{q.denominator}"


def format_number(q: Rational) -> str:
    return _fmt_rational(q)


def parse_decimal(text: str) -> Rational:
    """Exact rational value of a decimal literal like ``0.075`` or ``150``."""
    return Fraction(text)


def rational_grid(lo: Rational, hi: Rational, count: int) -> Iterable[Rational]:
    """Evenly spaced rationals covering [lo, hi], endpoints included."""
    if count < 2:
        yield lo
        return
    span = hi - lo
    for k in range(count):
        yield lo + span * k / (count - 1)
