"""C code generation for executable automata.

Each automaton becomes two translation units:

* ``<name>.c`` holds the state globals, one witness function and one
  entry-constant function per state and variable, and the reaction
  function that advances a single tick,
* ``<name>_main.c`` holds a driver that loads an optional stimulus
  table, calls the reaction in a loop and prints the same trace format
  as the Python engines.

Every arithmetic expression is emitted with exactly the operation shape
the interpreter uses (same association, same special cases), so the C
binary and the Python engines compute identical doubles and identical
``%.15g`` trace rows on the same libm.
"""

from __future__ import annotations

import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .expr import Comparison, Constraint, Rational, format_number
from .odesolve import WitnessFunction, WitnessKind, resolve_c1
from .swa import Swa, SwaState

_C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary""".split()
)

# Everything the templates themselves use, so model names never shadow it.
_RESERVED = _C_KEYWORDS | frozenset(
    """main exp fabs printf fprintf snprintf fputs fopen fclose fgets memcpy
    strtol strtod strcmp strncmp strcpy strlen qsort atol atoi exit malloc
    realloc free stdin stdout stderr errno d k cstate pstate stuck states
    statename t si off next ticks argc argv ins outs mask stim_ticks
    stim_masks stim_n stim_cap stim_path load_stimulus INFINITY NAN""".split()
)


class _Names:
    """Injective mapping from model identifiers to free C identifiers."""

    def __init__(self) -> None:
        self.used: set[str] = set(_RESERVED)
        self.map: dict[tuple[str, str], str] = {}

    def claim(self, kind: str, original: str, derived) -> str:
        name = original
        while any(x in self.used for x in derived(name)):
            name += "_"
        self.used.update(derived(name))
        self.map[(kind, original)] = name
        return name

    def of(self, kind: str, original: str) -> str:
        return self.map[(kind, original)]


def c_num(q: Rational) -> str:
    """Exact C literal for a rational: short decimals stay readable, the
    rest round-trips through the float that the interpreter uses."""
    text = format_number(q)
    if "/" in text or len(text) > 24:
        return repr(float(q))
    return text


def c_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"cannot emit {x!r} as a C constant")
    return repr(x)


def _c_comparison(var_expr: str, comp: Comparison) -> str:
    return f"{var_expr} {comp.op} {c_num(comp.bound)}"


def _c_constraint(c: Constraint, name_of) -> str:
    if not c.conjuncts:
        return "1"
    return " && ".join(_c_comparison(name_of(cmp.variable), cmp) for cmp in c.conjuncts)


def _c_witness_body(w: WitnessFunction) -> str:
    if w.kind is WitnessKind.CONSTANT:
        return "return C1;"
    if w.kind is WitnessKind.LINEAR:
        return f"return C1 + {c_num(w.b)}*d*k;"
    if w.x_eq_f == 0.0:
        return f"return C1*exp({c_num(w.a)}*d*k);"
    return f"return {c_num(w.x_eq)} + C1*exp({c_num(w.a)}*d*k);"


def _c_init_body(w: WitnessFunction) -> str:
    if w.kind is WitnessKind.EXPONENTIAL and w.x_eq_f != 0.0:
        return f"return x0 - {c_num(w.x_eq)};"
    return "return x0;"


def _c_update(expr, name_of) -> str:
    # mirrors swa._eval_update case for case
    if expr.a == 0:
        return c_num(expr.b)
    val = name_of(expr.variable)
    if expr.a == 1:
        term = val
    elif expr.a == -1:
        term = f"-{val}"
    else:
        term = f"{c_num(expr.a)}*{val}"
    if expr.b == 0:
        return term
    return f"{term} + {c_num(expr.b)}"


def _witness_call(sn: str, n: int, wit: WitnessFunction, k_expr: str, c1: str) -> str:
    if wit.kind is WitnessKind.CONSTANT:
        return f"{sn}_ode_{n}({c1})"
    return f"{sn}_ode_{n}(d, {k_expr}, {c1})"


@dataclass(frozen=True)
class CodegenOptions:
    ticks: int = 10000  # driver default, argv[1] overrides
    stimulus_path: str | None = None  # baked stimulus file, argv[2] overrides


@dataclass(frozen=True)
class CUnit:
    """The two generated translation units for one automaton."""

    name: str  # sanitized base name: <name>.c plus <name>_main.c
    automaton_source: str
    driver_source: str
    reaction_symbol: str
    state_names: tuple[str, ...]  # enum constants, declaration order

    def file_names(self) -> tuple[str, str]:
        return (f"{self.name}.c", f"{self.name}_main.c")


def emit_c(swa: Swa, options: CodegenOptions | None = None) -> CUnit:
    options = options or CodegenOptions()
    if len(swa.events()) > 64:
        raise ValueError("the driver packs events into a 64-bit stimulus mask")
    names = _Names()
    auto = names.claim("auto", swa.name, lambda n: {n, f"{n}R"})
    nvars = len(swa.variables)
    for s in swa.states:
        names.claim(
            "state",
            s.name,
            lambda n: {n}
            | {f"{n}_ode_{i}" for i in range(1, nvars + 1)}
            | {f"{n}_init_{i}" for i in range(1, nvars + 1)},
        )
    for v in swa.variables:
        names.claim("var", v, lambda n: {n, f"{n}_u", f"C1_{n}"})
    for e in swa.events():
        names.claim("event", e, lambda n: {n, f"{n}_out"})

    reaction = f"{auto}R"
    state_names = tuple(names.of("state", s.name) for s in swa.states)
    automaton_source = _emit_automaton(swa, names, reaction)
    driver_source = _emit_driver(swa, names, reaction, options)
    return CUnit(auto, automaton_source, driver_source, reaction, state_names)


def _emit_automaton(swa: Swa, names: _Names, reaction: str) -> str:
    cv = lambda v: names.of("var", v)
    ce = lambda e: names.of("event", e)
    cs = lambda s: names.of("state", s)
    var_index = {v: i + 1 for i, v in enumerate(swa.variables)}

    w: list[str] = []
    emit = w.append
    emit("#include <math.h>")
    emit("")
    emit(f"enum states {{ {', '.join(cs(s.name) for s in swa.states)} }};")
    emit("")
    emit(f"double d = {c_num(swa.delta)};")
    emit("long k = 0;")
    emit("int stuck = 0;")
    initial = swa.state(swa.initial_state)
    for v, x0q in swa.init_values:
        x0 = float(x0q)
        emit(f"double {cv(v)} = {c_float(x0)};")
        emit(f"double {cv(v)}_u = {c_float(x0)};")
        c1 = resolve_c1(initial.witness_for(v), x0)
        emit(f"double C1_{cv(v)} = {c_float(c1)};")
    for e in swa.events():
        emit(f"int {ce(e)} = 0;")
        emit(f"int {ce(e)}_out = 0;")
    emit("")

    for s in swa.states:
        sn = cs(s.name)
        for v, wit in s.witnesses:
            n = var_index[v]
            if wit.kind is WitnessKind.CONSTANT:
                args = "double C1"
            else:
                args = "double d, double k, double C1"
            emit(f"double {sn}_ode_{n}({args}) {{ {_c_witness_body(wit)} }}")
            emit(f"double {sn}_init_{n}(double x0) {{ {_c_init_body(wit)} }}")
    emit("")

    emit(f"enum states {reaction}(enum states cstate, enum states pstate) {{")
    for v in swa.variables:
        emit(f"    {cv(v)} = {cv(v)}_u;")
    emit("    switch (cstate) {")
    for s in swa.states:
        emit(f"    case {cs(s.name)}: {{")
        for line in _emit_state_case(swa, s, names, var_index):
            emit(f"        {line}" if line else "")
        emit("        break;")
        emit("    }")
    emit("    }")
    emit("    return cstate;")
    emit("}")
    return "\n".join(w) + "\n"


def _emit_state_case(
    swa: Swa, s: SwaState, names: _Names, var_index: dict[str, int]
) -> list[str]:
    cv = lambda v: names.of("var", v)
    ce = lambda e: names.of("event", e)
    cs = lambda st: names.of("state", st)
    sn = cs(s.name)

    taken: set[str] = set()

    def local(base: str) -> str:
        name = base
        while name in names.used or name in taken:
            name += "_"
        taken.add(name)
        return name

    out: list[str] = []
    emit = out.append

    inv = _c_constraint(s.self_transition.guard, cv)
    silences = " && ".join(f"!{ce(e)}" for e in s.self_transition.absent)
    parts = [p for p in ("" if inv == "1" else inv, silences) if p]
    emit(f"if ({' && '.join(parts) if parts else '1'}) {{")
    emit("    if (pstate != cstate) {")
    for v, _ in s.witnesses:
        emit(f"        C1_{cv(v)} = {sn}_init_{var_index[v]}({cv(v)});")
    emit("    }")
    emit("    k = k + 1;")
    for v, wit in s.witnesses:
        call = _witness_call(sn, var_index[v], wit, "k", f"C1_{cv(v)}")
        emit(f"    {cv(v)}_u = {call};")
    emit(f"    cstate = {sn};")
    emit("}")
    emit("else {")

    inner: list[str] = []
    put = inner.append

    # previous-tick values, needed for crossing detection
    prev_needed: list[str] = []
    for tr in s.egress:
        for group, sat in zip(tr.guard_groups, tr.saturable):
            if not sat:
                continue
            for var in group.variables():
                has_nonstrict = any(
                    c.variable == var and c.op not in ("<", ">") for c in group.conjuncts
                )
                if has_nonstrict and var not in prev_needed:
                    prev_needed.append(var)
    prev_name: dict[str, str] = {}
    for var in prev_needed:
        wit = s.witness_for(var)
        pn = local(f"{cv(var)}_prev")
        prev_name[var] = pn
        call = _witness_call(sn, var_index[var], wit, "k - 1", f"C1_{cv(var)}")
        put(f"double {pn} = (k >= 1) ? {call} : {cv(var)};")

    # snap candidates: at most one comparison bound per variable can be
    # adopted, and only when the trajectory crossed it since last tick
    cand_name: dict[tuple[int, str], str] = {}
    for ti, tr in enumerate(s.egress):
        for group, sat in zip(tr.guard_groups, tr.saturable):
            if not sat:
                continue
            for var in group.variables():
                nonstrict = [
                    c
                    for c in group.conjuncts
                    if c.variable == var and c.op not in ("<", ">")
                ]
                if not nonstrict:
                    continue
                cn = local(f"{cv(var)}_c{ti}")
                cand_name[(ti, var)] = cn
                put(f"double {cn} = {cv(var)};")
                branch = "if"
                for c in nonstrict:
                    b = c_num(c.bound)
                    pv = prev_name[var]
                    put(f"{branch} (!({cv(var)} {c.op} {b})) {{")
                    put(
                        f"    if (({pv} <= {b} && {b} <= {cv(var)})"
                        f" || ({cv(var)} <= {b} && {b} <= {pv})) {{"
                    )
                    put(f"        {cn} = {b};")
                    put("    }")
                    put("}")
                    branch = "else if"

    branch = "if"
    for ti, tr in enumerate(s.egress):
        conds: list[str] = []
        for e in tr.event.present:
            conds.append(ce(e))
        for e in tr.event.absent:
            conds.append(f"!{ce(e)}")
        patched = lambda v, _ti=ti: cand_name.get((_ti, v), cv(v))
        for group, sat in zip(tr.guard_groups, tr.saturable):
            if sat:
                snapped = [v for v in group.variables() if (ti, v) in cand_name]
                if len(snapped) > 1:
                    count = " + ".join(
                        f"({cand_name[(ti, v)]} != {cv(v)})" for v in snapped
                    )
                    conds.append(f"({count}) <= 1")
            term = _c_constraint(group, patched)
            if term != "1":
                conds.append(term)
        put(f"{branch} ({' && '.join(conds) if conds else '1'}) {{")
        for v in swa.variables:
            if (ti, v) in cand_name:
                put(f"    {cv(v)} = {cand_name[(ti, v)]};")
        if tr.updates:
            temps: list[tuple[str, str]] = []
            for j, (var, expr) in enumerate(tr.updates):
                tn = local(f"{cv(var)}_t{j}")
                temps.append((var, tn))
                put(f"    double {tn} = {_c_update(expr, cv)};")
            for var, tn in temps:
                put(f"    {cv(var)} = {tn};")
        for v in swa.variables:
            put(f"    {cv(v)}_u = {cv(v)};")
        put("    k = 0;")
        if tr.dst == s.name:
            # a self loop re-enters the state, so pstate never differs and
            # the lazy refresh above would keep a stale entry constant
            for v, _ in s.witnesses:
                put(f"    C1_{cv(v)} = {sn}_init_{var_index[v]}({cv(v)});")
        put(f"    cstate = {cs(tr.dst)};")
        for e in tr.emits:
            put(f"    {ce(e)}_out = 1;")
        put("}")
        branch = "else if"
    if s.egress:
        put("else {")
        put("    stuck = 1;")
        put("}")
    else:
        put("stuck = 1;")

    for line in inner:
        emit(f"    {line}" if line else "")
    emit("}")
    return out


def _emit_driver(swa: Swa, names: _Names, reaction: str, options: CodegenOptions) -> str:
    cv = lambda v: names.of("var", v)
    ce = lambda e: names.of("event", e)
    cs = lambda s: names.of("state", s)
    events = swa.events()
    name_width = sum(len(e) for e in events) + len(events) + 8

    w: list[str] = []
    emit = w.append
    emit("#include <stdio.h>")
    emit("#include <stdlib.h>")
    emit("#include <string.h>")
    emit("")
    emit(f"enum states {{ {', '.join(cs(s.name) for s in swa.states)} }};")
    emit(f"enum states {reaction}(enum states cstate, enum states pstate);")
    emit("extern double d;")
    emit("extern long k;")
    emit("extern int stuck;")
    for v in swa.variables:
        emit(f"extern double {cv(v)};")
    for e in events:
        emit(f"extern int {ce(e)}, {ce(e)}_out;")
    emit("")
    emit(
        "static const char *statename[] = { "
        + ", ".join(f'"{s.name}"' for s in swa.states)
        + " };"
    )
    emit("")
    emit("static long *stim_ticks = 0;")
    emit("static unsigned long long *stim_masks = 0;")
    emit("static long stim_n = 0, stim_cap = 0;")
    emit("")
    emit("static void load_stimulus(const char *path) {")
    emit('    FILE *fp = fopen(path, "r");')
    emit("    if (!fp) {")
    emit('        fprintf(stderr, "cannot open stimulus file %s\\n", path);')
    emit("        exit(2);")
    emit("    }")
    emit("    char line[8192];")
    emit("    int row = 0;")
    emit("    while (fgets(line, sizeof line, fp)) {")
    emit("        row++;")
    emit("        char *p = line;")
    emit("        while (*p == ' ' || *p == '\\t') p++;")
    emit("        if (*p == '\\n' || *p == '\\r' || *p == '\\0' || *p == '#') continue;")
    emit("        char *end = 0;")
    emit("        long tick = strtol(p, &end, 10);")
    emit("        if (end == p) {")
    emit("            if (row == 1) continue; /* header line */")
    emit('            fprintf(stderr, "%s:%d: expected a tick number\\n", path, row);')
    emit("            exit(2);")
    emit("        }")
    emit("        if (tick < 0) {")
    emit('            fprintf(stderr, "%s:%d: negative tick\\n", path, row);')
    emit("            exit(2);")
    emit("        }")
    emit("        unsigned long long mask = 0;")
    emit("        p = end;")
    emit("        if (*p == ',') p++;")
    emit("        while (*p && *p != '\\n' && *p != '\\r') {")
    emit("            char *q = p;")
    emit("            while (*q && *q != ';' && *q != '\\n' && *q != '\\r') q++;")
    emit("            long n = q - p;")
    emit("            while (n > 0 && *p == ' ') { p++; n--; }")
    emit("            while (n > 0 && p[n - 1] == ' ') n--;")
    for idx, e in enumerate(events):
        emit(
            f'            if (n == {len(e)} && strncmp(p, "{e}", {len(e)}) == 0)'
            f" mask |= {1 << idx}ULL;"
        )
    emit("            p = (*q == ';') ? q + 1 : q;")
    emit("        }")
    emit("        if (stim_n == stim_cap) {")
    emit("            stim_cap = stim_cap ? stim_cap * 2 : 64;")
    emit("            stim_ticks = realloc(stim_ticks, stim_cap * sizeof *stim_ticks);")
    emit("            stim_masks = realloc(stim_masks, stim_cap * sizeof *stim_masks);")
    emit("            if (!stim_ticks || !stim_masks) exit(2);")
    emit("        }")
    emit("        stim_ticks[stim_n] = tick;")
    emit("        stim_masks[stim_n] = mask;")
    emit("        stim_n++;")
    emit("    }")
    emit("    fclose(fp);")
    emit("    /* insertion sort by tick; equal ticks merge during lookup */")
    emit("    for (long i = 1; i < stim_n; i++) {")
    emit("        long tick = stim_ticks[i];")
    emit("        unsigned long long mask = stim_masks[i];")
    emit("        long j = i - 1;")
    emit("        while (j >= 0 && stim_ticks[j] > tick) {")
    emit("            stim_ticks[j + 1] = stim_ticks[j];")
    emit("            stim_masks[j + 1] = stim_masks[j];")
    emit("            j--;")
    emit("        }")
    emit("        stim_ticks[j + 1] = tick;")
    emit("        stim_masks[j + 1] = mask;")
    emit("    }")
    emit("}")
    emit("")
    emit("int main(int argc, char **argv) {")
    emit(f"    long ticks = {options.ticks};")
    if options.stimulus_path is not None:
        emit(f'    const char *stim_path = "{options.stimulus_path}";')
    else:
        emit("    const char *stim_path = 0;")
    emit("    if (argc > 1) ticks = atol(argv[1]);")
    emit("    if (argc > 2) stim_path = argv[2];")
    emit("    if (stim_path) load_stimulus(stim_path);")
    emit(f"    enum states cstate = {cs(swa.initial_state)};")
    emit(f"    enum states pstate = {cs(swa.initial_state)};")
    emit("    long si = 0;")
    header = ",".join(["tick", "time", "location", *swa.variables, "inputs", "outputs"])
    emit(f'    printf("{header}\\n");')
    emit("    for (long t = 0; t < ticks; t++) {")
    emit(f"        enum states next = {reaction}(cstate, pstate);")
    emit("        pstate = cstate;")
    emit("        cstate = next;")
    emit("        if (stuck) {")
    emit(
        '            fprintf(stderr, "stuck at tick %ld in state %s:'
        ' no evolution step and no enabled transition (k = %ld)\\n",'
        " t, statename[cstate], k);"
    )
    for v in swa.variables:
        emit(f'            fprintf(stderr, "  {v} = %.17g\\n", {cv(v)});')
    for e in events:
        emit(f'            if ({ce(e)}) fprintf(stderr, "  visible: {e}\\n");')
    emit("            exit(3);")
    emit("        }")
    emit(f"        char ins[{name_width}];")
    emit(f"        char outs[{name_width}];")
    emit("        int off = 0;")
    for e in swa.inputs:
        emit(f"        if ({ce(e)}) {{")
        emit("            if (off) ins[off++] = ';';")
        emit(f'            memcpy(ins + off, "{e}", {len(e)});')
        emit(f"            off += {len(e)};")
        emit("        }")
    emit("        ins[off] = '\\0';")
    emit("        off = 0;")
    for e in swa.outputs:
        emit(f"        if ({ce(e)}_out) {{")
        emit("            if (off) outs[off++] = ';';")
        emit(f'            memcpy(outs + off, "{e}", {len(e)});')
        emit(f"            off += {len(e)};")
        emit("        }")
    emit("        outs[off] = '\\0';")
    value_fmt = ",%.15g" * len(swa.variables)
    value_args = "".join(f", {cv(v)}" for v in swa.variables)
    emit(
        f'        printf("%ld,%.15g,%s{value_fmt},%s,%s\\n",'
        f" t, t * d, statename[cstate]{value_args}, ins, outs);"
    )
    emit("        unsigned long long mask = 0;")
    emit("        while (si < stim_n && stim_ticks[si] < t) si++;")
    emit("        while (si < stim_n && stim_ticks[si] == t) {")
    emit("            mask |= stim_masks[si];")
    emit("            si++;")
    emit("        }")
    for idx, e in enumerate(events):
        emit(f"        {ce(e)} = ((mask >> {idx}) & 1) || {ce(e)}_out;")
        emit(f"        {ce(e)}_out = 0;")
    emit("    }")
    emit("    return 0;")
    emit("}")
    return "\n".join(w) + "\n"


def write_unit(unit: CUnit, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    auto_name, main_name = unit.file_names()
    auto_path = directory / auto_name
    main_path = directory / main_name
    auto_path.write_text(unit.automaton_source, encoding="utf-8")
    main_path.write_text(unit.driver_source, encoding="utf-8")
    return auto_path, main_path


def find_cc() -> str | None:
    for cc in ("cc", "gcc", "clang"):
        path = shutil.which(cc)
        if path:
            return path
    return None


def build_binary(unit: CUnit, directory, cc: str | None = None) -> Path | None:
    """Compile the unit in ``directory``; None when no C compiler exists."""
    cc = cc or find_cc()
    if cc is None:
        return None
    auto_path, main_path = write_unit(unit, directory)
    binary = Path(directory) / unit.name
    cmd = [cc, "-O2", str(auto_path), str(main_path), "-lm", "-o", str(binary)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"C compilation failed:\n{proc.stderr}")
    return binary
