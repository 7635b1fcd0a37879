"""nested-automata: simulate and verify nested cellular automata.

This package evaluates cellular automata both by direct local recurrence and
by their factorized global map (a shift stage followed by a pointwise stage),
composes automata recursively into nested space-times, and computes the
propagation-speed calculus of orthogonal nested space-times.

Key Features:
    - Flat automata with vector-state cells, built-in or table rules
    - Exhaustive and seeded-random verification of staged vs direct evaluation
    - Nested automata of any depth, with a flattening oracle
    - Nested effective speeds and rational shift synthesis
    - Real-valued propagation evaluators and traces
    - Text encoded as a letter/word/sentence/paragraph hierarchy

Usage:
    $ nested-automata run --spec xor.json --steps 4
    $ nested-automata verify --spec xor.json --mode exhaustive

Architecture:
    - spacetime: frames, shifts, block indexing
    - automaton: cell rules, direct and staged stepping, verification
    - nesting: composition, nested stepping, flattening
    - kinematics: speeds and nested speed formulas
    - propagation: closed-form propagation evaluators
    - parser / writer: spec documents and deterministic outputs
    - hierarchy: text hierarchy encode/decode
    - config: configuration file handling
    - cli: command-line interface
"""

from importlib.metadata import PackageNotFoundError, version

__version__: str
try:
    __version__ = version("nested-automata")
except PackageNotFoundError:
    # Package not installed (development mode without editable install)
    __version__ = "0.0.0+dev"

__license__ = "Apache-2.0"

# Public API exports
__all__ = [
    "__version__",
    "Alphabet",
    "Automaton",
    "CellRule",
    "NestedAutomaton",
    "NestedSpeedSpec",
    "Shift",
    "ShiftStructure",
    "SpaceTimeFrame",
    "Trajectory",
    "compose_nested",
    "evaluate_global",
    "flatten",
    "nested_speed",
    "parse_spec",
    "verify_factorization",
    "verify_flattening",
]

from .automaton import (
    Alphabet,
    Automaton,
    CellRule,
    Trajectory,
    evaluate_global,
    verify_factorization,
)
from .kinematics import NestedSpeedSpec, nested_speed
from .nesting import NestedAutomaton, compose_nested, flatten, verify_flattening
from .parser import parse_spec
from .spacetime import Shift, ShiftStructure, SpaceTimeFrame
