"""Tick-synchronous execution of analysed automata.

`build_swa` lowers an analysed automaton into an executable form where
every location carries its witness functions, a self transition (the
evolution step) and an ordered list of egress transitions.  `tick`
advances one reaction:

* the value computed on the previous tick is committed,
* if the invariant holds at the committed values and no trigger event is
  visible, the step counter advances and the witnesses produce the next
  values,
* otherwise the egress transitions are scanned in declaration order and
  the first enabled one fires: equality and non-strict bounds that the
  trajectory crossed since the previous tick snap the crossing variable
  exactly onto the bound, jump updates are applied simultaneously, the
  step counter resets, and the transition's events are emitted,
* if neither applies the configuration is stuck and `UnreachableState`
  is raised.

Events travel with one tick of latency: everything emitted or supplied
at tick t is visible during tick t+1 and never during tick t itself.

`compose` builds the synchronous product of two executable automata.
While one side switches and the other evolves, the evolving side is
frozen for that tick (its values re-enter as fresh initial values), so
a product tick never interleaves a half-step with a jump.

Two engines run the same semantics: a readable generic interpreter and
a specialising one that compiles the automaton to straight-line Python.
They produce bit-identical traces; the specialised engine exists for
very long runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, TextIO

from .expr import AffineExpr, Constraint, Rational
from .model import EventExpr, HybridAutomaton
from .odesolve import WitnessFunction, WitnessKind, resolve_c1
from .shagen import Sha, generate_sha


class UnreachableState(Exception):
    """The configuration can neither evolve nor take any transition."""

    def __init__(
        self,
        automaton: str,
        state: str,
        valuation: Mapping[str, float],
        k: int,
        visible: frozenset[str],
        tick: int | None = None,
    ):
        self.automaton = automaton
        self.state = state
        self.valuation = dict(valuation)
        self.k = k
        self.visible = visible
        self.tick = tick
        super().__init__()

    def __str__(self) -> str:
        at = f" at tick {self.tick}" if self.tick is not None else ""
        values = ", ".join(f"{v} = {x!r}" for v, x in self.valuation.items()) or "none"
        events = ", ".join(sorted(self.visible)) or "none"
        return (
            f"automaton {self.automaton!r} is stuck{at} in state {self.state!r}: "
            f"the invariant fails or a trigger is visible, and no outgoing "
            f"transition is enabled (values: {values}; step index k = {self.k}; "
            f"visible events: {events})"
        )


@dataclass(frozen=True)
class SelfTransition:
    """Condition for taking one evolution step and staying put."""

    guard: Constraint  # the state's invariant (conjoined across products)
    absent: tuple[str, ...]  # every trigger event must be silent


@dataclass(frozen=True)
class SwaTransition:
    """One egress transition.

    The guard is kept as ordered groups, one per constituent automaton.
    Value snapping may alter at most one variable per group, and only in
    groups marked saturable (a frozen side's invariant is checked as-is).
    """

    dst: str
    event: EventExpr
    guard_groups: tuple[Constraint, ...]
    saturable: tuple[bool, ...]
    updates: tuple[tuple[str, AffineExpr], ...] = ()
    emits: tuple[str, ...] = ()


@dataclass(frozen=True)
class SwaState:
    name: str
    self_transition: SelfTransition
    witnesses: tuple[tuple[str, WitnessFunction], ...]
    egress: tuple[SwaTransition, ...]
    nsteps: int | None  # bound on consecutive evolution steps, None if unbounded
    fairness_warning: bool

    def witness_for(self, variable: str) -> WitnessFunction:
        for var, w in self.witnesses:
            if var == variable:
                return w
        raise KeyError(f"state {self.name} has no witness for {variable!r}")


@dataclass(frozen=True)
class Swa:
    """An executable tick-synchronous automaton."""

    name: str
    variables: tuple[str, ...]
    init_values: tuple[tuple[str, Rational], ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    states: tuple[SwaState, ...]
    initial_state: str
    delta: Fraction
    composed: bool = False
    delta_f: float = field(init=False, repr=False, compare=False)
    _by_name: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta_f", float(self.delta))
        object.__setattr__(self, "_by_name", {s.name: s for s in self.states})

    def state(self, name: str) -> SwaState:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"automaton {self.name} has no state {name!r}") from None

    def events(self) -> tuple[str, ...]:
        return _dedup(self.inputs + self.outputs)


@dataclass(frozen=True)
class ExecState:
    """A runtime configuration between two ticks.

    ``v`` holds the values the next tick will commit (for a step index k
    they are the witness values at k), ``i`` the values the state was
    entered with, and ``pending_pre`` the events that will be visible on
    the next tick.
    """

    location: str
    v: Mapping[str, float]
    i: Mapping[str, float]
    k: int
    prev_location: str
    pending_pre: frozenset[str] = frozenset()


def _dedup(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for x in items:
        seen.setdefault(x, None)
    return tuple(seen)


# --- lowering -----------------------------------------------------------------


def _foreign_vars(ha: HybridAutomaton) -> list[str]:
    owned = set(ha.variables)
    bad: dict[str, None] = {}
    for loc in ha.locations:
        for v in loc.invariant.variables():
            if v not in owned:
                bad.setdefault(f"{v} (invariant of {loc.name})", None)
    for e in ha.edges:
        for v in e.guard.variables():
            if v not in owned:
                bad.setdefault(f"{v} (guard of {e.src} -> {e.dst})", None)
        for _, expr in e.updates:
            if expr.a != 0 and expr.variable not in owned:
                bad.setdefault(f"{expr.variable} (update on {e.src} -> {e.dst})", None)
    return list(bad)


def build_swa(sha: Sha) -> Swa:
    """Lower an analysed automaton into its executable form.

    The automaton must be self-contained: invariants, guards and update
    expressions may only mention its own variables (compose executable
    automata to let one react to another's events).
    """
    ha = sha.base
    foreign = _foreign_vars(ha)
    if foreign:
        raise ValueError(
            f"automaton {ha.name} reads variables it does not own: "
            + "; ".join(foreign)
        )
    triggers = ha.trigger_events()
    states = []
    for loc in ha.locations:
        analysis = sha.analysis(loc.name)
        egress = tuple(
            SwaTransition(
                dst=e.dst,
                event=e.event,
                guard_groups=(e.guard,),
                saturable=(True,),
                updates=e.updates,
                emits=e.emits,
            )
            for e in ha.edges_from(loc.name)
        )
        states.append(
            SwaState(
                name=loc.name,
                self_transition=SelfTransition(loc.invariant, triggers),
                witnesses=analysis.witnesses,
                egress=egress,
                nsteps=analysis.nsteps,
                fairness_warning=analysis.fairness_warning,
            )
        )
    return Swa(
        name=ha.name,
        variables=ha.variables,
        init_values=ha.init_values,
        inputs=ha.inputs,
        outputs=ha.outputs,
        states=tuple(states),
        initial_state=ha.initial_location,
        delta=sha.delta,
    )


def compile_automaton(ha: HybridAutomaton, delta: Fraction) -> tuple[Swa, list[str]]:
    """One-shot analysis plus lowering.  Returns the automaton and warnings."""
    sha, warnings = generate_sha(ha, delta)
    return build_swa(sha), warnings


def initial_exec_state(swa: Swa) -> ExecState:
    v = {var: float(val) for var, val in swa.init_values}
    return ExecState(
        location=swa.initial_state,
        v=v,
        i=v,
        k=0,
        prev_location=swa.initial_state,
        pending_pre=frozenset(),
    )


# --- one reaction -------------------------------------------------------------


def _event_enabled(event: EventExpr, visible: frozenset[str]) -> bool:
    for e in event.present:
        if e not in visible:
            return False
    for e in event.absent:
        if e in visible:
            return False
    return True


def _candidate(group: Constraint, var: str, cur: float, prev: float) -> float | None:
    """Snap value for one variable against one guard group, if any.

    Scanning the group's comparisons on this variable in order: holding
    ones need nothing, strict ones are never snapped onto, and the first
    failing non-strict one yields its bound when the trajectory crossed
    it between the previous and the current tick (otherwise no snap can
    help, so the scan stops).
    """
    for comp in group.conjuncts:
        if comp.variable != var:
            continue
        if comp.holds(cur):
            continue
        if comp.op in ("<", ">"):
            continue
        b = comp.bound_f
        if (prev <= b <= cur) or (cur <= b <= prev):
            return b
        return None
    return None


def _eval_update(expr: AffineExpr, valuation: Mapping[str, float]) -> float:
    # mirrored case for case by the emitted C, keep the shapes in sync
    if expr.a == 0:
        return expr.b_f
    val = valuation[expr.variable]
    if expr.a == 1:
        term = val
    elif expr.a == -1:
        term = -val
    else:
        term = expr.a_f * val
    if expr.b == 0:
        return term
    return term + expr.b_f


def tick(
    swa: Swa, st: ExecState, inputs: frozenset[str] = frozenset()
) -> tuple[ExecState, frozenset[str]]:
    """Advance one reaction.

    ``inputs`` are the externally supplied events of this tick; they
    become visible on the next tick.  Returns the next configuration and
    the events emitted during this tick.  Raises UnreachableState when
    the configuration is stuck.
    """
    state = swa.state(st.location)
    committed = st.v
    visible = st.pending_pre
    delta_f = swa.delta_f

    selft = state.self_transition
    if visible.isdisjoint(selft.absent) and selft.guard.holds(committed):
        k_new = st.k + 1
        new_v = {
            var: w.value_at_tick(resolve_c1(w, st.i[var]), k_new, delta_f)
            for var, w in state.witnesses
        }
        nxt = ExecState(
            location=st.location,
            v=new_v,
            i=st.i,
            k=k_new,
            prev_location=st.location,
            pending_pre=inputs,
        )
        return nxt, frozenset()

    prev_vals = {
        var: (
            w.value_at_tick(resolve_c1(w, st.i[var]), st.k - 1, delta_f)
            if st.k >= 1
            else committed[var]
        )
        for var, w in state.witnesses
    }
    for tr in state.egress:
        if not _event_enabled(tr.event, visible):
            continue
        patched = dict(committed)
        feasible = True
        for group, sat in zip(tr.guard_groups, tr.saturable):
            if not sat:
                continue
            snaps: dict[str, float] = {}
            for var in group.variables():
                c = _candidate(group, var, committed[var], prev_vals[var])
                if c is not None:
                    snaps[var] = c
            if len(snaps) > 1:
                feasible = False
                break
            patched.update(snaps)
        if not feasible:
            continue
        if not all(g.holds(patched) for g in tr.guard_groups):
            continue
        post = patched
        if tr.updates:
            staged = [(var, _eval_update(expr, patched)) for var, expr in tr.updates]
            post = dict(patched)
            for var, val in staged:
                post[var] = val
        emitted = frozenset(tr.emits)
        nxt = ExecState(
            location=tr.dst,
            v=post,
            i=post,
            k=0,
            prev_location=st.location,
            pending_pre=inputs | emitted,
        )
        return nxt, emitted

    raise UnreachableState(swa.name, st.location, committed, st.k, visible)


# --- parallel composition -----------------------------------------------------


def _min_nsteps(n1: int | None, n2: int | None) -> int | None:
    if n1 is None:
        return n2
    if n2 is None:
        return n1
    return min(n1, n2)


def compose(a: Swa, b: Swa, name: str | None = None) -> Swa:
    """Synchronous product of two executable automata.

    Product transitions are scanned joint switches first (both sides
    take an edge on the same tick), then left-side switches (the right
    side is frozen for the tick), then right-side switches.  A frozen
    side contributes its invariant as a non-snapping guard group plus
    the silence of all its trigger events.
    """
    if a.delta != b.delta:
        raise ValueError(
            f"cannot compose {a.name} (delta {a.delta}) with {b.name} (delta {b.delta})"
        )
    overlap = set(a.variables) & set(b.variables)
    if overlap:
        raise ValueError(f"variable names collide in product: {sorted(overlap)}")
    out_overlap = set(a.outputs) & set(b.outputs)
    if out_overlap:
        raise ValueError(f"both sides emit {sorted(out_overlap)}")
    outputs = _dedup(a.outputs + b.outputs)
    inputs = tuple(e for e in _dedup(a.inputs + b.inputs) if e not in outputs)

    states = []
    for s1 in a.states:
        for s2 in b.states:
            self_t = SelfTransition(
                guard=s1.self_transition.guard.conjoin(s2.self_transition.guard),
                absent=_dedup(s1.self_transition.absent + s2.self_transition.absent),
            )
            egress: list[SwaTransition] = []
            for e1 in s1.egress:
                for e2 in s2.egress:
                    egress.append(
                        SwaTransition(
                            dst=e1.dst + e2.dst,
                            event=EventExpr(
                                _dedup(e1.event.present + e2.event.present),
                                _dedup(e1.event.absent + e2.event.absent),
                            ),
                            guard_groups=e1.guard_groups + e2.guard_groups,
                            saturable=e1.saturable + e2.saturable,
                            updates=e1.updates + e2.updates,
                            emits=e1.emits + e2.emits,
                        )
                    )
            for e1 in s1.egress:
                egress.append(
                    SwaTransition(
                        dst=e1.dst + s2.name,
                        event=EventExpr(
                            e1.event.present,
                            _dedup(e1.event.absent + s2.self_transition.absent),
                        ),
                        guard_groups=e1.guard_groups + (s2.self_transition.guard,),
                        saturable=e1.saturable + (False,),
                        updates=e1.updates,
                        emits=e1.emits,
                    )
                )
            for e2 in s2.egress:
                egress.append(
                    SwaTransition(
                        dst=s1.name + e2.dst,
                        event=EventExpr(
                            e2.event.present,
                            _dedup(s1.self_transition.absent + e2.event.absent),
                        ),
                        guard_groups=(s1.self_transition.guard,) + e2.guard_groups,
                        saturable=(False,) + e2.saturable,
                        updates=e2.updates,
                        emits=e2.emits,
                    )
                )
            states.append(
                SwaState(
                    name=s1.name + s2.name,
                    self_transition=self_t,
                    witnesses=s1.witnesses + s2.witnesses,
                    egress=tuple(egress),
                    nsteps=_min_nsteps(s1.nsteps, s2.nsteps),
                    fairness_warning=_min_nsteps(s1.nsteps, s2.nsteps) is None,
                )
            )
    names = [s.name for s in states]
    if len(set(names)) != len(names):
        raise ValueError(
            "product state names collide; rename locations so that pairwise "
            "concatenations stay unique"
        )
    return Swa(
        name=name or (a.name + b.name),
        variables=a.variables + b.variables,
        init_values=a.init_values + b.init_values,
        inputs=inputs,
        outputs=outputs,
        states=tuple(states),
        initial_state=a.initial_state + b.initial_state,
        delta=a.delta,
        composed=True,
    )


def compose_all(swas: Iterable[Swa], name: str | None = None) -> Swa:
    items = list(swas)
    if not items:
        raise ValueError("nothing to compose")
    product = items[0]
    for nxt in items[1:]:
        product = compose(product, nxt)
    if name is not None and name != product.name:
        product = Swa(
            name=name,
            variables=product.variables,
            init_values=product.init_values,
            inputs=product.inputs,
            outputs=product.outputs,
            states=product.states,
            initial_state=product.initial_state,
            delta=product.delta,
            composed=product.composed,
        )
    return product


# --- traces and stimulus ------------------------------------------------------


def trace_header(swa: Swa) -> str:
    return ",".join(["tick", "time", "location", *swa.variables, "inputs", "outputs"])


def _fmt(x: float) -> str:
    return "%.15g" % x


def format_trace_row(
    swa: Swa,
    t: int,
    location: str,
    values: Iterable[float],
    visible: frozenset[str],
    emitted: frozenset[str],
) -> str:
    ins = ";".join(e for e in swa.inputs if e in visible)
    outs = ";".join(e for e in swa.outputs if e in emitted)
    parts = [str(t), _fmt(t * swa.delta_f), location]
    parts.extend(_fmt(v) for v in values)
    parts.append(ins)
    parts.append(outs)
    return ",".join(parts)


def parse_stimulus(text: str, source: str = "<stimulus>") -> dict[int, frozenset[str]]:
    """Parse a stimulus table: one `tick,events` row per line.

    Events are semicolon separated, ticks not listed supply no events,
    and a header row is allowed.  Later rows for the same tick add up.
    """
    table: dict[int, frozenset[str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        first, _, rest = line.partition(",")
        first = first.strip()
        if line_no == 1 and not _is_int(first):
            continue  # header
        if not _is_int(first):
            raise ValueError(f"{source}:{line_no}: expected a tick number, got {first!r}")
        t = int(first)
        if t < 0:
            raise ValueError(f"{source}:{line_no}: negative tick {t}")
        events = frozenset(e.strip() for e in rest.split(";") if e.strip())
        table[t] = table.get(t, frozenset()) | events
    return table


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


def read_stimulus(path) -> dict[int, frozenset[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_stimulus(fh.read(), source=str(path))


def run(
    swa: Swa,
    ticks: int,
    stimulus: Mapping[int, frozenset[str]] | None = None,
    out: TextIO | None = None,
) -> ExecState:
    """Run the generic interpreter for the given number of reactions.

    When ``out`` is given, a header plus one row per tick is written to
    it: committed values on evolution ticks, post-jump values on switch
    ticks (the value a switch entered with therefore appears on two
    consecutive rows).  Unknown event names in the stimulus are ignored.
    """
    stimulus = stimulus or {}
    known = frozenset(swa.events())
    st = initial_exec_state(swa)
    if out is not None:
        out.write(trace_header(swa) + "\n")
    for t in range(ticks):
        supplied = stimulus.get(t)
        inputs = (frozenset(supplied) & known) if supplied else frozenset()
        prev = st
        try:
            st, emitted = tick(swa, prev, inputs)
        except UnreachableState as exc:
            exc.tick = t
            raise
        if out is not None:
            observed = st.v if st.k == 0 else prev.v
            values = (observed[var] for var in swa.variables)
            out.write(
                format_trace_row(swa, t, st.location, values, prev.pending_pre, emitted)
                + "\n"
            )
    return st


# --- specialising engine ------------------------------------------------------


def _py_comparison(var_expr: str, op: str, bound: float) -> str:
    return f"{var_expr} {op} {bound!r}"


def _py_constraint(c: Constraint, name_of: Callable[[str], str]) -> str:
    if not c.conjuncts:
        return "True"
    return " and ".join(
        _py_comparison(name_of(cmp.variable), cmp.op, cmp.bound_f) for cmp in c.conjuncts
    )


def _py_witness(w: WitnessFunction, c1: str, k: str, delta_f: float) -> str:
    """Python expression with the same float shape as value_at_tick."""
    if w.kind is WitnessKind.CONSTANT:
        return c1
    if w.kind is WitnessKind.LINEAR:
        return f"{c1} + {w.b_f * delta_f!r} * {k}"
    if w.x_eq_f == 0.0:
        return f"{c1} * _exp({w.a_f * delta_f!r} * {k})"
    return f"{w.x_eq_f!r} + {c1} * _exp({w.a_f * delta_f!r} * {k})"


def _py_c1(w: WitnessFunction, post: str) -> str:
    if w.kind is WitnessKind.EXPONENTIAL and w.x_eq_f != 0.0:
        return f"{post} - {w.x_eq_f!r}"
    return post


def _py_update(expr: AffineExpr, name_of: Callable[[str], str]) -> str:
    # mirrors _eval_update case for case
    if expr.a == 0:
        return repr(expr.b_f)
    val = name_of(expr.variable)
    if expr.a == 1:
        term = val
    elif expr.a == -1:
        term = f"-{val}"
    else:
        term = f"{expr.a_f!r} * {val}"
    if expr.b == 0:
        return term
    return f"{term} + {expr.b_f!r}"


def _runner_source(swa: Swa, trace: bool) -> str:
    """Generate the specialised tick loop for one automaton."""
    events = swa.events()
    bit = {e: 1 << idx for idx, e in enumerate(events)}
    state_idx = {s.name: idx for idx, s in enumerate(swa.states)}
    init = dict(swa.init_values)

    def mask(names: Iterable[str]) -> int:
        m = 0
        for n in names:
            m |= bit[n]
        return m

    w = []  # source lines
    emit = w.append
    emit("def _swarun(_TICKS, _STT, _STM, _row, _mk_stuck):")
    emit("    _exp = _EXP")
    for s in swa.states:
        if s.name == swa.initial_state:
            for var, wit in s.witnesses:
                x0 = float(init[var])
                emit(f"    v_{var} = {x0!r}")
                emit(f"    u_{var} = {x0!r}")
                emit(f"    i_{var} = {x0!r}")
                emit(f"    c1_{var} = {resolve_c1(wit, x0)!r}")
    emit(f"    _loc = {state_idx[swa.initial_state]}")
    emit(f"    _prev = {state_idx[swa.initial_state]}")
    emit("    _k = 0")
    emit("    _pend = 0")
    emit("    _nst = len(_STT)")
    emit("    _si = 0")
    emit("    _next = _STT[0] if _nst else -1")
    emit("    _t = 0")
    emit("    while _t < _TICKS:")
    for var in swa.variables:
        emit(f"        v_{var} = u_{var}")
    emit("        _vis = _pend")
    emit("        _emit = 0")

    first = True
    for s in swa.states:
        idx = state_idx[s.name]
        kw = "if" if first else "elif"
        first = False
        emit(f"        {kw} _loc == {idx}:  # {s.name}")
        absent_mask = mask(s.self_transition.absent)
        conds = []
        if absent_mask:
            conds.append(f"(_vis & {absent_mask}) == 0")
        inv = _py_constraint(s.self_transition.guard, lambda v: f"v_{v}")
        if inv != "True":
            conds.append(inv)
        emit(f"            if {' and '.join(conds) if conds else 'True'}:")
        emit("                _k += 1")
        wrote = False
        for var, wit in s.witnesses:
            if wit.kind is WitnessKind.CONSTANT:
                continue  # value stays at c1, no assignment needed
            emit(f"                u_{var} = {_py_witness(wit, f'c1_{var}', '_k', swa.delta_f)}")
            wrote = True
        if not wrote:
            emit("                pass")
        emit("            else:")

        # previous-tick values, needed for crossing detection
        prev_needed = _dedup(
            var
            for tr in s.egress
            for group, sat in zip(tr.guard_groups, tr.saturable)
            if sat
            for var in group.variables()
        )
        for var in prev_needed:
            wit = s.witness_for(var)
            prev_expr = _py_witness(wit, f"c1_{var}", "(_k - 1)", swa.delta_f)
            emit(f"                p_{var} = ({prev_expr}) if _k >= 1 else v_{var}")
        emit("                _f = False")

        for tr in s.egress:
            lit = []
            pm = mask(tr.event.present)
            am = mask(tr.event.absent)
            if pm:
                lit.append(f"(_vis & {pm}) == {pm}")
            if am:
                lit.append(f"(_vis & {am}) == 0")
            label = str(tr.event) if not tr.event.is_trivial() else "true"
            emit(f"                # -> {tr.dst} on {label}")
            emit(f"                if not _f and {' and '.join(lit) if lit else 'True'}:")
            snap_vars: list[str] = []
            guard_terms: list[str] = []
            alt_terms: list[str] = []
            for group, sat in zip(tr.guard_groups, tr.saturable):
                gvars = group.variables() if sat else ()
                for var in gvars:
                    nonstrict = [
                        c
                        for c in group.conjuncts
                        if c.variable == var and c.op not in ("<", ">")
                    ]
                    if not nonstrict:
                        continue
                    snap_vars.append(var)
                    emit(f"                    s_{var} = v_{var}")
                    branch = "if"
                    for c in nonstrict:
                        emit(
                            f"                    {branch} not (v_{var} {c.op} {c.bound_f!r}):"
                        )
                        b = repr(c.bound_f)
                        emit(
                            f"                        if (p_{var} <= {b} and {b} <= v_{var})"
                            f" or (v_{var} <= {b} and {b} <= p_{var}):"
                        )
                        emit(f"                            s_{var} = {b}")
                        branch = "elif"
                if len([v for v in gvars if v in snap_vars]) > 1:
                    alt_terms.append(
                        "("
                        + " + ".join(
                            f"(s_{v} != v_{v})" for v in gvars if v in snap_vars
                        )
                        + ") <= 1"
                    )
                name_of = lambda v: f"s_{v}" if v in snap_vars else f"v_{v}"
                term = _py_constraint(group, name_of)
                if term != "True":
                    guard_terms.append(term)
            cond = " and ".join(alt_terms + guard_terms) if (alt_terms or guard_terms) else "True"
            emit(f"                    if {cond}:")
            body: list[str] = []
            for var in snap_vars:
                body.append(f"v_{var} = s_{var}")
            if tr.updates:
                for j, (var, expr) in enumerate(tr.updates):
                    body.append(f"t_{j} = {_py_update(expr, lambda v: f'v_{v}')}")
                for j, (var, _) in enumerate(tr.updates):
                    body.append(f"v_{var} = t_{j}")
            dst_state = swa.state(tr.dst)
            for var, wit in dst_state.witnesses:
                body.append(f"u_{var} = v_{var}")
                body.append(f"i_{var} = v_{var}")
                body.append(f"c1_{var} = {_py_c1(wit, f'v_{var}')}")
            body.append("_k = 0")
            body.append(f"_prev = {idx}")
            body.append(f"_loc = {state_idx[tr.dst]}")
            if tr.emits:
                body.append(f"_emit = {mask(tr.emits)}")
            body.append("_f = True")
            for line in body:
                emit(f"                        {line}")
        emit("                if not _f:")
        vals = ", ".join(f"v_{var}" for var in swa.variables)
        emit(
            f"                    raise _mk_stuck(_loc, ({vals}{',' if swa.variables else ''}), _k, _vis, _t)"
        )

    if trace:
        vals = ", ".join(f"v_{var}" for var in swa.variables)
        emit(f"        _row(_t, _loc, ({vals}{',' if swa.variables else ''}), _vis, _emit)")
    emit("        if _t == _next:")
    emit("            _pend = _STM[_si] | _emit")
    emit("            _si += 1")
    emit("            _next = _STT[_si] if _si < _nst else -1")
    emit("        else:")
    emit("            _pend = _emit")
    emit("        _t += 1")
    us = ", ".join(f"u_{var}" for var in swa.variables)
    is_ = ", ".join(f"i_{var}" for var in swa.variables)
    tail = "," if swa.variables else ""
    emit(f"    return (_loc, _k, ({us}{tail}), ({is_}{tail}), _pend, _prev)")
    return "\n".join(w) + "\n"


@lru_cache(maxsize=64)
def _build_runner(swa: Swa, trace: bool):
    source = _runner_source(swa, trace)
    namespace = {"_EXP": math.exp}
    exec(compile(source, f"<swa:{swa.name}>", "exec"), namespace)
    return namespace["_swarun"]


def run_compiled(
    swa: Swa,
    ticks: int,
    stimulus: Mapping[int, frozenset[str]] | None = None,
    out: TextIO | None = None,
) -> ExecState:
    """Run the specialising engine.  Same contract and output as `run`."""
    events = swa.events()
    bit = {e: 1 << idx for idx, e in enumerate(events)}
    known = set(events)
    stim_items = sorted(
        (t, sum(bit[e] for e in set(evs) & known))
        for t, evs in (stimulus or {}).items()
        if t >= 0
    )
    stt = [t for t, _ in stim_items]
    stm = [m for _, m in stim_items]
    loc_names = tuple(s.name for s in swa.states)

    row = None
    if out is not None:
        out.write(trace_header(swa) + "\n")
        in_cache: dict[int, str] = {}
        out_cache: dict[int, str] = {}
        inputs_t = swa.inputs
        outputs_t = swa.outputs
        delta_f = swa.delta_f
        write = out.write

        def row(t, loc, values, vis, emitted):
            ins = in_cache.get(vis)
            if ins is None:
                ins = ";".join(e for e in inputs_t if vis & bit[e])
                in_cache[vis] = ins
            outs = out_cache.get(emitted)
            if outs is None:
                outs = ";".join(e for e in outputs_t if emitted & bit[e])
                out_cache[emitted] = outs
            parts = [str(t), _fmt(t * delta_f), loc_names[loc]]
            parts.extend(map(_fmt, values))
            parts.append(ins)
            parts.append(outs)
            write(",".join(parts) + "\n")

    def mk_stuck(loc, values, k, vis, t):
        valuation = dict(zip(swa.variables, values))
        visible = frozenset(e for e in events if vis & bit[e])
        return UnreachableState(swa.name, loc_names[loc], valuation, k, visible, tick=t)

    fn = _build_runner(swa, out is not None)
    loc, k, us, is_, pend, prev = fn(ticks, stt, stm, row, mk_stuck)
    # after an evolution tick the previous state equals the current one;
    # the loop only tracks it across switches, so patch it up here
    if k != 0:
        prev = loc
    return ExecState(
        location=loc_names[loc],
        v=dict(zip(swa.variables, us)),
        i=dict(zip(swa.variables, is_)),
        k=k,
        prev_location=loc_names[prev],
        pending_pre=frozenset(e for e in events if pend & bit[e]),
    )


ENGINES = ("auto", "generic", "compiled")


def simulate(
    swa: Swa,
    ticks: int,
    stimulus: Mapping[int, frozenset[str]] | None = None,
    out: TextIO | None = None,
    engine: str = "auto",
) -> ExecState:
    """Run `ticks` reactions with the selected engine ('auto' specialises)."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}, expected one of {ENGINES}")
    if engine == "generic":
        return run(swa, ticks, stimulus, out)
    return run_compiled(swa, ticks, stimulus, out)
