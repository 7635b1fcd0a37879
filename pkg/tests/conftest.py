"""Shared test fixtures for nested-automata.

This module provides reusable pytest fixtures: paths to the committed spec
fixtures, small automata used across modules, and the Click runner.

Fixtures:
    Path Fixtures:
        - fixtures_dir: Path to test fixtures directory
        - write_spec: Writes a spec document into tmp_path

    Automaton Fixtures:
        - xor_automaton: Flat xor automaton, N=8 periodic, shifts (-1, +1)
        - identity_automaton: Flat identity automaton, N=6, |S|=3
        - xor_inner_leaf: Leaf xor on two periodic cells, shifts (0, +1)
        - nested_depth2: Depth-2 automaton over the xor inner leaf
        - nested_depth3: Depth-3 automaton, explicit taps at the top

    CLI Fixtures:
        - runner: Click CliRunner for CLI testing
"""

import json
from pathlib import Path
from typing import Any, Callable

import pytest
from click.testing import CliRunner

from nested_automata.automaton import Alphabet, Automaton, CellRule
from nested_automata.nesting import NestedAutomaton, compose_nested
from nested_automata.spacetime import Shift, ShiftStructure, SpaceTimeFrame

# =============================================================================
# Constants
# =============================================================================

BINARY = Alphabet(2)

# Neighbor shifts of the classic elementary stencil: left and right.
LEFT_RIGHT = ShiftStructure((Shift((-1,)), Shift((1,))))

# Self and left neighbor; on two periodic cells both cells see both.
SELF_LEFT = ShiftStructure((Shift((0,)), Shift((1,))))


def make_flat(
    extents: tuple[int, ...],
    structure: ShiftStructure,
    rule: CellRule,
    horizon: int = 1,
) -> Automaton:
    """Build a flat periodic automaton."""
    return Automaton(SpaceTimeFrame(extents, horizon), structure, rule)


# =============================================================================
# Path Fixtures
# =============================================================================


@pytest.fixture
def fixtures_dir() -> Path:
    """Return path to test fixtures directory.

    Returns:
        Path to the fixtures directory containing committed spec documents.
    """
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def write_spec(tmp_path: Path) -> Callable[[dict[str, Any], str], Path]:
    """Return a helper writing a spec document to tmp_path.

    Returns:
        Function (document, file name) -> path of the written file.
    """

    def _write(document: dict[str, Any], name: str = "spec.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


# =============================================================================
# Automaton Fixtures
# =============================================================================


@pytest.fixture
def xor_automaton() -> Automaton:
    """Flat xor automaton: |S|=2, N=8 periodic, shifts (-1, 1), (+1, 1)."""
    return make_flat((8,), LEFT_RIGHT, CellRule.from_builtin("xor", BINARY, 2))


@pytest.fixture
def identity_automaton() -> Automaton:
    """Flat identity automaton over |S|=3 with a single zero shift."""
    return make_flat(
        (6,),
        ShiftStructure((Shift((0,)),)),
        CellRule.from_builtin("identity", Alphabet(3), 1),
    )


@pytest.fixture
def xor_inner_leaf() -> NestedAutomaton:
    """Leaf xor on two periodic cells (block size 2)."""
    return NestedAutomaton.leaf(
        SpaceTimeFrame((2,)), SELF_LEFT, CellRule.from_builtin("xor", BINARY, 2)
    )


@pytest.fixture
def nested_depth2(xor_inner_leaf: NestedAutomaton) -> NestedAutomaton:
    """Depth-2 automaton: three outer cells over the 2 x 1 xor block."""
    return compose_nested(LEFT_RIGHT, SpaceTimeFrame((3,)), xor_inner_leaf)


@pytest.fixture
def nested_depth3(xor_inner_leaf: NestedAutomaton) -> NestedAutomaton:
    """Depth-3 automaton with swapped taps at the outermost level."""
    middle = compose_nested(SELF_LEFT, SpaceTimeFrame((2,)), xor_inner_leaf)
    return compose_nested(LEFT_RIGHT, SpaceTimeFrame((3,)), middle, taps=(2, 1))


# =============================================================================
# CLI Fixtures
# =============================================================================


@pytest.fixture
def runner() -> CliRunner:
    """Create Click test runner for CLI testing.

    Returns:
        CliRunner instance for CLI testing.
    """
    return CliRunner()
