"""Command line front end.

Subcommands mirror the pipeline stages: ``check`` validates a model,
``compile`` emits C, ``simulate`` and ``compose-and-simulate`` produce
traces, and ``bench`` measures throughput.

Exit codes: 0 on success, 1 when a model fails validation, 2 for bad
input (unreadable files, parse errors, unusable flags), 3 when a run
gets stuck with no enabled reaction.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

from .codegen import CodegenOptions, build_binary, emit_c, find_cc, write_unit
from .model import HybridAutomaton, ModelError, Network, load_model
from .shagen import generate_sha, sha_to_ir
from .swa import (
    ENGINES,
    Swa,
    UnreachableState,
    build_swa,
    compose_all,
    read_stimulus,
    simulate,
)
from .whacheck import check_wha

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_STUCK = 3


def _delta_arg(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid tick length {text!r}") from exc
    if value <= 0:
        raise argparse.ArgumentTypeError("tick length must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncha",
        description="Compile hybrid automata into tick-synchronous programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("model", help="model file to read")
        sp.add_argument(
            "--delta",
            type=_delta_arg,
            default=Fraction(1, 100),
            help="tick length in seconds (default 0.01)",
        )

    sp = sub.add_parser("check", help="validate that every automaton is compilable")
    common(sp)
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("compile", help="emit C sources per automaton")
    common(sp)
    sp.add_argument("--automaton", help="restrict to one automaton")
    sp.add_argument("--out", default=".", help="output directory (default .)")
    sp.add_argument(
        "--ticks", type=int, default=10000, help="default tick count baked into the driver"
    )
    sp.add_argument("--stimulus", help="stimulus file path baked into the driver")
    sp.add_argument(
        "--emit-ir",
        action="store_true",
        help="also write the analysed automaton as <name>.ir.json",
    )
    sp.set_defaults(func=_cmd_compile)

    def sim_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--ticks", type=int, default=10000, help="reactions to run")
        sp.add_argument("--stimulus", help="stimulus file (tick,events rows)")
        sp.add_argument("--out", help="write the trace here instead of stdout")
        sp.add_argument(
            "--engine",
            choices=ENGINES,
            default="auto",
            help="interpreter choice (default auto)",
        )

    sp = sub.add_parser("simulate", help="run one automaton and print its trace")
    common(sp)
    sp.add_argument("--automaton", help="which automaton to run")
    sim_flags(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser(
        "compose-and-simulate",
        help="run the synchronous product of all automata in the model",
    )
    common(sp)
    sim_flags(sp)
    sp.set_defaults(func=_cmd_compose_and_simulate)

    sp = sub.add_parser("bench", help="measure simulation throughput")
    common(sp)
    sp.add_argument("--ticks", type=int, default=1000000, help="reactions to time")
    sp.set_defaults(func=_cmd_bench)

    return parser


def _select(net: Network, name: str | None) -> list[HybridAutomaton]:
    if name is None:
        return list(net.automata)
    return [net.automaton(name)]


def _checked(ha: HybridAutomaton) -> bool:
    """Report validation failures on stderr; True when the automaton is fine."""
    report = check_wha(ha)
    if report.passed:
        return True
    for diag in report.to_diagnostics():
        print(f"{ha.name}: {diag}", file=sys.stderr)
    return False


def _build(ha: HybridAutomaton, delta: Fraction) -> Swa:
    sha, warnings = generate_sha(ha, delta)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return build_swa(sha)


def _cmd_check(args) -> int:
    net = load_model(args.model)
    failed = False
    for ha in net.automata:
        report = check_wha(ha)
        if report.passed:
            _, warnings = generate_sha(ha, args.delta)
            print(f"{ha.name}: PASS")
            for w in warnings:
                print(f"{ha.name}: warning: {w}")
        else:
            failed = True
            for diag in report.to_diagnostics():
                print(f"{ha.name}: {diag}", file=sys.stderr)
            n = len(report.violations)
            print(f"{ha.name}: FAIL ({n} violation{'s' if n != 1 else ''})")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _cmd_compile(args) -> int:
    net = load_model(args.model)
    automata = _select(net, args.automaton)
    if not all([_checked(ha) for ha in automata]):
        return EXIT_CHECK_FAILED
    outdir = Path(args.out)
    options = CodegenOptions(ticks=args.ticks, stimulus_path=args.stimulus)
    for ha in automata:
        sha, warnings = generate_sha(ha, args.delta)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        unit = emit_c(build_swa(sha), options)
        for path in write_unit(unit, outdir):
            print(path)
        if args.emit_ir:
            ir_path = outdir / f"{ha.name}.ir.json"
            ir_path.write_text(json.dumps(sha_to_ir(sha), indent=2) + "\n", encoding="utf-8")
            print(ir_path)
    return EXIT_OK


def _run_trace(swa: Swa, args) -> int:
    stimulus = None
    if args.stimulus:
        stimulus = read_stimulus(args.stimulus)
        unknown = sorted(
            {e for events in stimulus.values() for e in events} - set(swa.events())
        )
        if unknown:
            print(
                "warning: stimulus mentions unknown events, ignored: "
                + ", ".join(unknown),
                file=sys.stderr,
            )
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        simulate(swa, args.ticks, stimulus, out, engine=args.engine)
    except UnreachableState as exc:
        print(exc, file=sys.stderr)
        return EXIT_STUCK
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _cmd_simulate(args) -> int:
    net = load_model(args.model)
    automata = _select(net, args.automaton)
    if len(automata) > 1:
        print(
            f"model has {len(automata)} automata; pick one with --automaton"
            " or use compose-and-simulate",
            file=sys.stderr,
        )
        return EXIT_USAGE
    ha = automata[0]
    if not _checked(ha):
        return EXIT_CHECK_FAILED
    return _run_trace(_build(ha, args.delta), args)


def _cmd_compose_and_simulate(args) -> int:
    net = load_model(args.model)
    if not all([_checked(ha) for ha in net.automata]):
        return EXIT_CHECK_FAILED
    swa = compose_all(_build(ha, args.delta) for ha in net.automata)
    return _run_trace(swa, args)


def _cmd_bench(args) -> int:
    net = load_model(args.model)
    if not all([_checked(ha) for ha in net.automata]):
        return EXIT_CHECK_FAILED
    swa = compose_all(_build(ha, args.delta) for ha in net.automata)
    simulate(swa, 1)  # build and cache the specialised engine up front
    start = time.perf_counter()
    simulate(swa, args.ticks)
    elapsed = time.perf_counter() - start
    rate = args.ticks / elapsed if elapsed > 0 else float("inf")
    print(f"{swa.name}: {args.ticks} ticks in {elapsed:.3f}s ({rate:,.0f} ticks/s)")
    unit = emit_c(swa)
    source_bytes = len(unit.automaton_source) + len(unit.driver_source)
    print(f"C source: {source_bytes} bytes in 2 files")
    cc = find_cc()
    if cc is None:
        print("C binary: skipped, no C compiler on PATH")
        return EXIT_OK
    with tempfile.TemporaryDirectory() as td:
        binary = build_binary(unit, td, cc=cc)
        assert binary is not None
        print(f"C binary: {binary.stat().st_size} bytes ({cc})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnreachableState as exc:
        print(exc, file=sys.stderr)
        return EXIT_STUCK


if __name__ == "__main__":
    sys.exit(main())
