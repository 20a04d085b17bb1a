"""Static well-formedness verification of a hybrid automaton.

Three criteria gate compilation:

1. every invariant and edge guard is a conjunction of single-variable
   comparisons against rational constants,
2. every flow has a closed-form solution in the supported affine class,
3. every flow is monotone within the location's invariant bounds (its
   slope must not change sign there).

Unlike a fail-fast gate, the checker accumulates every violation so a
report lists all of them at once.  The verdict is PASS exactly when the
violation list is empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    COMPARISON_OPS,
    Constraint,
    LinearForm,
    NonlinearExpr,
    constraint_to_interval,
)
from .model import Diagnostic, HybridAutomaton
from .odesolve import Monotonicity, UnsupportedOde, classify_monotonicity, solve_ode

NON_CVX_CONSTRAINT = "NON_CVX_CONSTRAINT"
NO_CLOSED_FORM = "NO_CLOSED_FORM"
NON_MONOTONE = "NON_MONOTONE"


@dataclass(frozen=True)
class Violation:
    kind: str  # NON_CVX_CONSTRAINT | NO_CLOSED_FORM | NON_MONOTONE
    where: str  # location or edge description
    detail: str
    line: int = 0

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}"


@dataclass(frozen=True)
class WhaReport:
    automaton: str
    violations: tuple[Violation, ...]

    @property
    def verdict(self) -> str:
        return "PASS" if not self.violations else "FAIL"

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_diagnostics(self) -> list[Diagnostic]:
        """The report in the model module's diagnostic schema."""
        return [
            Diagnostic(v.kind, f"{v.where}: {v.detail}", v.line) for v in self.violations
        ]

    def __str__(self) -> str:
        head = f"{self.automaton}: {self.verdict}"
        if not self.violations:
            return head
        return head + "\n" + "\n".join(f"  {v}" for v in self.violations)


def _constraint_violations(c: Constraint, where: str, line: int) -> list[Violation]:
    out = []
    for comp in c.conjuncts:
        if comp.op not in COMPARISON_OPS:
            out.append(
                Violation(
                    NON_CVX_CONSTRAINT,
                    where,
                    f"operator {comp.op!r} is outside the constraint grammar",
                    line,
                )
            )
        elif not isinstance(comp.bound, Fraction):
            out.append(
                Violation(
                    NON_CVX_CONSTRAINT,
                    where,
                    f"bound {comp.bound!r} on {comp.variable} is not rational",
                    line,
                )
            )
        elif not comp.variable:
            out.append(
                Violation(NON_CVX_CONSTRAINT, where, "comparison has no variable", line)
            )
    return out


def check_wha(ha: HybridAutomaton) -> WhaReport:
    """Verify all well-formedness criteria, reporting every violation.

    Violations are ordered by location declaration order (the location's
    invariant first, then its flows in order), with edge guard violations
    after all locations, in edge declaration order.
    """
    violations: list[Violation] = []

    for loc in ha.locations:
        inv_violations = _constraint_violations(
            loc.invariant, f"invariant of {loc.name}", loc.line
        )
        violations.extend(inv_violations)
        for flow in loc.flows:
            where = f"flow {flow.variable}' in {loc.name}"
            if isinstance(flow.rhs, NonlinearExpr):
                violations.append(
                    Violation(
                        NO_CLOSED_FORM,
                        where,
                        f"{flow.variable}' = {flow.rhs.text} has no closed-form "
                        "solution in the supported affine class",
                        flow.line,
                    )
                )
                continue
            try:
                solve_ode(flow.variable, flow.rhs)
            except UnsupportedOde as exc:
                violations.append(Violation(NO_CLOSED_FORM, where, str(exc), flow.line))
                continue
            if inv_violations:
                # the invariant is outside the grammar, so its projection is
                # meaningless; don't pile a bogus direction verdict on top
                continue
            rhs = flow.rhs.as_affine(flow.variable)
            bounds = constraint_to_interval(loc.invariant, flow.variable)
            verdict = classify_monotonicity(rhs, bounds)
            if verdict is Monotonicity.NON_MONOTONE:
                violations.append(
                    Violation(
                        NON_MONOTONE,
                        where,
                        f"slope {flow.rhs} changes sign inside the invariant "
                        f"bounds {bounds} (both sign regions intersect them)",
                        flow.line,
                    )
                )

    for e in ha.edges:
        violations.extend(
            _constraint_violations(e.guard, f"guard of edge {e.src} -> {e.dst}", e.line)
        )

    return WhaReport(ha.name, tuple(violations))
