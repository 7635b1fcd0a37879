"""Nested cellular automata: recursive composition, evaluation and flattening.

At a composed level the cell state is a whole block of the inner automaton's
space-time window R' x T' (k = |R'| x horizon' points, each an inner cell
state), and the cell function is the inner global map: the gathered block is
read as the inner history window and replaced by the next horizon' evolved
inner slices. Only leaves carry a CellRule.

flatten() expands a nested automaton into an equivalent flat Automaton whose
state width is k x (inner width); verify_flattening() uses it as an oracle.
"""

import itertools
import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np

from .automaton import (
    SYMBOL_DTYPE,
    Alphabet,
    Automaton,
    CapExceededError,
    CellRule,
    RuleFunction,
    SliceResult,
    Trajectory,
    VerificationReport,
    default_taps,
    enumerate_windows,
    evaluate_direct,
    evaluate_global,
    step_direct,
)
from .spacetime import (
    BlockIndex,
    FixedSymbol,
    Shift,
    ShiftStructure,
    SpaceTimeFrame,
    resolve,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_TABLE_SIZE = 65536

ROOT = "root"
INNER = "inner"


class NestingError(ValueError):
    """Raised when a nested composition violates its structural invariants."""


@dataclass(frozen=True)
class NestedAutomaton:
    """One level of a nested automaton.

    Exactly one of ``rule`` (leaf) and ``inner`` (composed level) is set.

    Attributes:
        frame: This level's R x T window.
        structure: This level's shift structure v.
        rule: Leaf cell rule.
        inner: The automaton one level in.
        taps: Gather taps; at a composed level they address positions of the
            neighbor's block in canonical order.
    """

    frame: SpaceTimeFrame
    structure: ShiftStructure
    rule: Optional[CellRule] = None
    inner: Optional["NestedAutomaton"] = None
    taps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if (self.rule is None) == (self.inner is None):
            raise NestingError(
                "A nesting level carries either a cell rule (leaf) or an inner "
                "automaton, not both and not neither"
            )
        if self.inner is None:
            # Validates taps, arity and boundary through the flat constructor.
            leaf = self.as_automaton()
            object.__setattr__(self, "taps", leaf.taps)
            return

        inner = self.inner
        block = inner.frame.block_size
        if self.structure.k != block:
            raise NestingError(
                f"k={self.structure.k} does not match inner block size {block} "
                f"(extents {list(inner.frame.extents)} x horizon {inner.frame.horizon})"
            )
        if self.structure.l:
            raise NestingError(
                f"Composed levels take no inputs; got l={self.structure.l}"
            )
        if inner.structure.l:
            raise NestingError(
                f"Inner automata must be autonomous; inner level has "
                f"l={inner.structure.l} inputs"
            )
        self.structure.check_frame(self.frame)
        if not self.taps:
            object.__setattr__(self, "taps", default_taps(block, block))
        object.__setattr__(self, "taps", tuple(int(t) for t in self.taps))
        if len(self.taps) != self.structure.k:
            raise NestingError(
                f"Expected {self.structure.k} taps, got {len(self.taps)}"
            )
        bad = [tap for tap in self.taps if not 1 <= tap <= block]
        if bad:
            raise NestingError(f"Taps {bad} out of range 1..{block}")
        if self.frame.boundary.symbol >= self.alphabet.states:
            raise NestingError(
                f"Fixed boundary symbol {self.frame.boundary.symbol} is not a "
                f"state symbol (|S| = {self.alphabet.states})"
            )

    @classmethod
    def leaf(
        cls,
        frame: SpaceTimeFrame,
        structure: ShiftStructure,
        rule: CellRule,
        taps: Sequence[int] = (),
    ) -> "NestedAutomaton":
        return cls(frame=frame, structure=structure, rule=rule, taps=tuple(taps))

    @classmethod
    def from_automaton(cls, automaton: Automaton) -> "NestedAutomaton":
        return cls.leaf(
            automaton.frame, automaton.structure, automaton.rule, automaton.taps
        )

    @property
    def is_leaf(self) -> bool:
        return self.inner is None

    @property
    def depth(self) -> int:
        return 1 if self.inner is None else 1 + self.inner.depth

    @property
    def alphabet(self) -> Alphabet:
        if self.rule is not None:
            return self.rule.alphabet
        assert self.inner is not None
        return self.inner.alphabet

    @property
    def width(self) -> int:
        """Cell state width: m at a leaf, k x (inner width) above."""
        if self.rule is not None:
            return self.rule.state_width
        assert self.inner is not None
        return self.structure.k * self.inner.width

    @property
    def block_index(self) -> BlockIndex:
        """Block index of this level's frame, as seen from the level above."""
        return BlockIndex(self.frame)

    def as_automaton(self) -> Automaton:
        if self.rule is None:
            raise NestingError("Only a leaf level is a flat automaton")
        return Automaton(self.frame, self.structure, self.rule, self.taps)

    def levels(self) -> Iterator["NestedAutomaton"]:
        """Iterate levels outermost first."""
        node: Optional[NestedAutomaton] = self
        while node is not None:
            yield node
            node = node.inner

    def slice_shape(self) -> tuple[int, ...]:
        return (*self.frame.extents, self.width)

    @cached_property
    def block_evolver(self) -> "BlockEvolver":
        """Inner evolution used as the cell function of the level above."""
        return _block_evolver(self)


def compose_nested(
    outer_structure: ShiftStructure,
    outer_frame: SpaceTimeFrame,
    inner: NestedAutomaton,
    taps: Sequence[int] = (),
) -> NestedAutomaton:
    """Wrap ``inner`` in one more level.

    Raises:
        NestingError: If k differs from the inner block size or taps are out
            of range.

    Example:
        >>> inner = NestedAutomaton.leaf(
        ...     SpaceTimeFrame((2,), horizon=2),
        ...     ShiftStructure((Shift((0,)),)),
        ...     CellRule.from_builtin("identity", Alphabet(2), 1),
        ... )
        >>> outer = compose_nested(
        ...     ShiftStructure(tuple(Shift((0,)) for _ in range(4))),
        ...     SpaceTimeFrame((4,)),
        ...     inner,
        ... )
        >>> outer.depth, outer.width
        (2, 4)
    """
    return NestedAutomaton(
        frame=outer_frame, structure=outer_structure, inner=inner, taps=tuple(taps)
    )


BlockEvolver = Callable[[tuple[int, ...]], tuple[int, ...]]


def _block_evolver(inner: NestedAutomaton) -> BlockEvolver:
    """Memoized block-in / block-out evolution of one inner automaton."""
    frame = inner.frame
    width = inner.width

    @lru_cache(maxsize=65536)
    def evolve(block: tuple[int, ...]) -> tuple[int, ...]:
        window = np.asarray(block, dtype=SYMBOL_DTYPE).reshape(
            frame.horizon, *frame.extents, width
        )
        history = Trajectory.from_window(frame, list(window))
        evolved = evaluate_nested(inner, history, frame.horizon)
        fresh = [evolved.states[t] for t in range(frame.horizon, 2 * frame.horizon)]
        return tuple(int(v) for v in np.stack(fresh).reshape(-1))

    return evolve


def cell_function_of(inner: NestedAutomaton, block: np.ndarray) -> np.ndarray:
    """The outer cell function realized by the inner global map.

    Args:
        inner: Automaton one level in.
        block: k inner cell states, shape (k, inner width) or flat, in
            canonical (time-major, row-major) block order.

    Returns:
        The next horizon' inner slices as a block of the same shape.

    Raises:
        NestingError: If the block length differs from the inner block size.
    """
    array = np.asarray(block, dtype=SYMBOL_DTYPE)
    expected = inner.frame.block_size * inner.width
    if array.size != expected:
        raise NestingError(
            f"Block holds {array.size} symbols, expected {expected} "
            f"({inner.frame.block_size} points x width {inner.width})"
        )
    if np.any((array < 0) | (array >= inner.alphabet.states)):
        raise NestingError("Block contains symbols outside the state alphabet")
    evolved = inner.block_evolver(tuple(int(v) for v in array.reshape(-1)))
    return np.asarray(evolved, dtype=SYMBOL_DTYPE).reshape(array.shape)


def _gather_block(
    nested: NestedAutomaton, history: Trajectory, r: tuple[int, ...], t: int
) -> np.ndarray:
    assert nested.inner is not None
    inner_width = nested.inner.width
    block = np.empty((nested.structure.k, inner_width), dtype=SYMBOL_DTYPE)
    for i, (shift, tap) in enumerate(zip(nested.structure.state_shifts, nested.taps)):
        point = resolve(nested.frame, r, shift)
        if isinstance(point, FixedSymbol):
            block[i] = point.symbol
            continue
        neighbor = history.state_slice(t - shift.dt)[point]
        block[i] = neighbor[(tap - 1) * inner_width : tap * inner_width]
    return block


def step_nested(nested: NestedAutomaton, history: Trajectory, t: int) -> SliceResult:
    """Evaluate slice t of a nested automaton.

    A leaf delegates to step_direct(); a composed level gathers one inner
    point per shift from its neighbors and applies cell_function_of().
    """
    if nested.is_leaf:
        return step_direct(nested.as_automaton(), history, t)
    assert nested.inner is not None
    history.require_depth(t, nested.structure.depth)
    extents = nested.frame.extents
    states = np.empty((*extents, nested.width), dtype=SYMBOL_DTYPE)
    for r in nested.frame.cells():
        block = _gather_block(nested, history, r, t)
        states[r] = cell_function_of(nested.inner, block).reshape(-1)
    return SliceResult(states, np.zeros((*extents, 0), dtype=SYMBOL_DTYPE))


def evaluate_nested(
    nested: NestedAutomaton,
    initial: Trajectory,
    steps: int,
    inputs: Optional[Mapping[int, np.ndarray]] = None,
) -> Trajectory:
    """Evolve ``steps`` slices of a nested automaton with step_nested()."""
    depth = nested.structure.depth
    start = initial.last_time + 1
    initial.require_depth(start, depth)
    trajectory = Trajectory(
        frame=initial.frame,
        states=dict(initial.states),
        inputs=dict(initial.inputs),
        outputs=dict(initial.outputs),
    )
    if inputs:
        trajectory.inputs.update(inputs)
    for t in range(start, start + steps):
        result = step_nested(nested, trajectory, t)
        trajectory.states[t] = result.states
        trajectory.outputs[t] = result.outputs
    return trajectory


def validate_lowest_level(nested: NestedAutomaton) -> Optional[tuple[str, ...]]:
    """Check that only leaves carry cell rules.

    Returns:
        None when every composed level is rule-free and the innermost level
        has a rule, otherwise the path to the first violating level, such as
        ``("root",)`` or ``("root", "inner")``.
    """
    path: tuple[str, ...] = (ROOT,)
    node: Optional[NestedAutomaton] = nested
    while node is not None:
        if node.inner is not None and node.rule is not None:
            return path
        if node.inner is None and node.rule is None:
            return path
        node = node.inner
        path = path + (INNER,)
    return None


def _flat_cell_function(
    nested: NestedAutomaton, flat_inner: Automaton
) -> RuleFunction:
    assert nested.inner is not None
    frame = flat_inner.frame
    width = nested.inner.width

    @lru_cache(maxsize=65536)
    def function(
        state_args: tuple[int, ...], input_args: tuple[int, ...]
    ) -> tuple[tuple[int, ...], tuple[int, ...]]:
        window = np.asarray(state_args, dtype=SYMBOL_DTYPE).reshape(
            frame.horizon, *frame.extents, width
        )
        evolved = evaluate_global(
            flat_inner, Trajectory.from_window(frame, list(window)), frame.horizon
        )
        fresh = np.stack(
            [evolved.states[t] for t in range(frame.horizon, 2 * frame.horizon)]
        )
        return tuple(int(v) for v in fresh.reshape(-1)), ()

    return function


def flatten(
    nested: NestedAutomaton,
    max_table_size: int = DEFAULT_MAX_TABLE_SIZE,
    explicit: bool = False,
) -> Automaton:
    """Expand a nested automaton into an equivalent flat automaton.

    Each outer shift is duplicated once per inner state component, so the
    flat automaton has k x (inner width) arguments and equally many state
    components. The cell rule is tabulated when |S|^k_flat fits
    ``max_table_size`` and kept as a synthesized function otherwise.

    Args:
        nested: Automaton to flatten.
        max_table_size: Largest explicit table to build.
        explicit: Require an explicit table instead of falling back.

    Returns:
        A flat Automaton whose step_direct() equals step_nested() of the
        original on every history.

    Raises:
        CapExceededError: If ``explicit`` is set and the table is too large.
    """
    if nested.is_leaf:
        return nested.as_automaton()
    assert nested.inner is not None
    flat_inner = flatten(nested.inner, max_table_size, explicit)
    inner_width = nested.inner.width
    shifts = []
    taps = []
    for shift, tap in zip(nested.structure.state_shifts, nested.taps):
        for c in range(inner_width):
            shifts.append(Shift(shift.dr, shift.dt))
            taps.append((tap - 1) * inner_width + c + 1)
    k_flat = len(shifts)
    alphabet = nested.alphabet
    function = _flat_cell_function(nested, flat_inner)
    table_size = alphabet.states**k_flat

    if table_size <= max_table_size:
        transition = [
            function(args, ())[0]
            for args in itertools.product(range(alphabet.states), repeat=k_flat)
        ]
        rule = CellRule.from_table(Alphabet(alphabet.states), k_flat, transition)
        logger.debug(
            "Flattened depth-%d level into a %d-row table", nested.depth, table_size
        )
    elif explicit:
        raise CapExceededError(
            f"Explicit table needs {alphabet.states}^{k_flat} = {table_size} rows, "
            f"above the cap of {max_table_size}"
        )
    else:
        logger.warning(
            "Flattened table would need %d rows (cap %d); keeping a synthesized rule",
            table_size,
            max_table_size,
        )
        rule = CellRule.synthesized(
            Alphabet(alphabet.states), k_flat, nested.width, function
        )
    return Automaton(
        frame=nested.frame,
        structure=ShiftStructure(tuple(shifts)),
        rule=rule,
        taps=tuple(taps),
    )


def verify_flattening(
    nested: NestedAutomaton,
    mode: str = "exhaustive",
    steps: int = 4,
    samples: int = 1000,
    seed: int = 0,
    max_configs: int = 65536,
    max_table_size: int = DEFAULT_MAX_TABLE_SIZE,
) -> VerificationReport:
    """Compare step_nested() against step_direct() of the flattened automaton.

    Raises:
        CapExceededError: If exhaustive mode exceeds max_configs.
    """
    flat = flatten(nested, max_table_size)
    depth = nested.structure.depth
    shape = (depth, *nested.slice_shape())
    report = VerificationReport(
        check="flattening",
        mode=mode,
        steps=steps,
        seed=seed if mode == "random" else None,
    )
    for config, window in enumerate(
        enumerate_windows(
            shape, nested.alphabet.states, mode, samples, seed, max_configs
        )
    ):
        initial = Trajectory.from_window(nested.frame, list(window))
        expected = evaluate_nested(nested, initial, steps)
        actual = evaluate_direct(flat, initial, steps)
        for t in range(depth, depth + steps):
            report.record(config, t, expected.states[t], actual.states[t])
        report.configurations += 1

    logger.info(
        "Flattening check (%s, depth %d): %d configurations, %d mismatches",
        mode,
        nested.depth,
        report.configurations,
        report.mismatch_count,
    )
    return report
