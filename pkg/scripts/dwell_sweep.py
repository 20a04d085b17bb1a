#!/usr/bin/env python3
"""Report per-location dwell bounds across a range of tick lengths.

For every automaton of a model this prints the worst-case dwell time of
each location and the evolution step bound it induces at each tick
length.  Unbounded locations are the ones a scheduler must treat fairly;
they are marked instead of getting a step count.
"""

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from syncha import model as model_mod
from syncha.model import load_model
from syncha.shagen import generate_sha

MODELS_DIR = Path(model_mod.__file__).parent / "models"
BUNDLED = sorted(MODELS_DIR.glob("*.pha"))
DEFAULT_DELTAS = (Fraction(1, 10), Fraction(1, 100), Fraction(1, 1000))


def sweep(path: Path, deltas: list[Fraction]) -> None:
    net = load_model(path)
    for ha in net.automata:
        shas = [generate_sha(ha, d)[0] for d in deltas]
        header = "".join(f"{f'steps @ {d}':>16}" for d in deltas)
        print(f"\n{net.name}.{ha.name}")
        print(f"  {'location':<12}{'dwell (s)':>14}{header}")
        for loc in ha.locations:
            first = shas[0].analysis(loc.name)
            if first.fairness_warning:
                dwell, steps = "unbounded", f"{'needs fairness':>16}" * len(deltas)
            else:
                dwell = f"{first.worst_case_time:.6g}"
                steps = "".join(
                    f"{sha.analysis(loc.name).nsteps:>16}" for sha in shas
                )
            print(f"  {loc.name:<12}{dwell:>14}{steps}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("models", nargs="*", type=Path, default=BUNDLED,
                        help="model files to analyse (default: the bundled ones)")
    parser.add_argument("--delta", type=Fraction, action="append", dest="deltas",
                        help="tick length to include, repeatable (default: 1/10 1/100 1/1000)")
    args = parser.parse_args(argv)
    for path in args.models:
        sweep(path, args.deltas or list(DEFAULT_DELTAS))
    return 0


if __name__ == "__main__":
    sys.exit(main())
