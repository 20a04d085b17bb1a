"""syncha: compile hybrid automata networks to synchronous C and simulate them.

The pipeline is: parse a model file into a network of hybrid automata,
check that every automaton is well formed (affine flows with closed-form
monotone solutions, conjunctive variable-vs-constant constraints), derive
per-location witness functions and worst-case dwell times, build a
synchronous witness automaton that advances all continuous variables at a
fixed tick, optionally compose the automata of a network into a single
machine, and either interpret the result or emit C99 for it.
"""

__version__ = "0.1.0"
