"""Flat cellular automata: cell rules, direct stepping and staged evaluation.

A flat automaton is a frame, a shift structure v and a cell rule (F, G).
One time step can be computed two ways:

    - step_direct(): the local recurrence, cell by cell. For every r the k
      state arguments s(r - r_i, t - t_i) and l input arguments are gathered
      and F, G are applied.
    - build_shift_stage() followed by apply_pointwise_stage(): the global map
      factorized into a shift stage B (k + l shifted copies of whole slices)
      and a pointwise stage C (F, G applied at every r independently).

verify_factorization() compares both paths over every (or a seeded sample of)
initial window and reports the (r, t) points where they disagree.

Slices are numpy arrays of shape ``extents + (width,)``: cells may hold a
vector of m state components (m = 1 for a classic automaton).
"""

import itertools
import logging
from collections import deque
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from .spacetime import (
    Coordinate,
    FixedSymbol,
    Shift,
    ShiftStructure,
    SpaceTimeFrame,
    resolve,
)

logger = logging.getLogger(__name__)

# Built-in cell rules, usable without an explicit table.
BUILTIN_RULES = (
    "identity",
    "xor",
    "sum_mod",
    "threshold",
    "projection",
    "constant",
)

# Built-ins that require a parameter (theta, j, c respectively).
PARAMETRIZED_RULES = ("threshold", "projection", "constant")

SYMBOL_DTYPE = np.int64

# Cap on mismatches recorded individually in a report.
MAX_RECORDED_MISMATCHES = 1000

RuleFunction = Callable[
    [tuple[int, ...], tuple[int, ...]], tuple[tuple[int, ...], tuple[int, ...]]
]


class RuleError(ValueError):
    """Raised for malformed cell rules, taps or arity mismatches."""


class HistoryError(ValueError):
    """Raised when a step needs slices the history does not hold."""


class CapExceededError(ValueError):
    """Raised when an enumeration or table would exceed its configured cap."""


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol sets, represented as 0..size-1.

    Attributes:
        states: |S|, number of state symbols.
        inputs: |X|; 1 means "no input".
        outputs: |Y|; 1 means "no output".
    """

    states: int
    inputs: int = 1
    outputs: int = 1

    def __post_init__(self) -> None:
        for name in ("states", "inputs", "outputs"):
            if getattr(self, name) < 1:
                raise RuleError(
                    f"Alphabet size '{name}' must be >= 1, got {getattr(self, name)}"
                )


@dataclass(frozen=True)
class CellRule:
    """The cell function F x G: S^k x X^l -> S^m x Y^l.

    Exactly one representation is set: a named built-in, an explicit dense
    table keyed by the mixed-radix index of (S^k x X^l), or a synthesized
    Python function (used for flattened nested automata above the table cap).

    Attributes:
        alphabet: Symbol sets.
        arity_state: k, number of state arguments.
        arity_input: l, number of input arguments (and of output channels).
        state_width: m, number of state components produced.
        builtin: Built-in name from BUILTIN_RULES.
        parameter: Built-in parameter (theta, j or c).
        transition: Table rows of m state symbols, one per argument index.
        output: Table rows of l output symbols, one per argument index.
        function: Synthesized mapping (state_args, input_args) -> (state, out).
    """

    alphabet: Alphabet
    arity_state: int
    arity_input: int = 0
    state_width: int = 1
    builtin: Optional[str] = None
    parameter: Optional[int] = None
    transition: Optional[tuple[tuple[int, ...], ...]] = None
    output: Optional[tuple[tuple[int, ...], ...]] = None
    function: Optional[RuleFunction] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.arity_state < 1:
            raise RuleError(
                f"Rule needs k >= 1 state arguments, got {self.arity_state}"
            )
        if self.arity_input < 0 or self.state_width < 1:
            raise RuleError(
                f"Invalid arities: l={self.arity_input}, m={self.state_width}"
            )
        representations = [
            self.builtin is not None,
            self.transition is not None,
            self.function is not None,
        ]
        if sum(representations) != 1:
            raise RuleError(
                "A cell rule needs exactly one of: builtin, transition table, function"
            )
        if self.builtin is not None:
            self._validate_builtin()
        elif self.transition is not None:
            self._validate_table()

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_builtin(
        cls,
        name: str,
        alphabet: Alphabet,
        arity_state: int,
        arity_input: int = 0,
        state_width: int = 1,
        parameter: Optional[int] = None,
    ) -> "CellRule":
        return cls(
            alphabet=alphabet,
            arity_state=arity_state,
            arity_input=arity_input,
            state_width=state_width,
            builtin=name,
            parameter=parameter,
        )

    @classmethod
    def from_table(
        cls,
        alphabet: Alphabet,
        arity_state: int,
        transition: Sequence[Any],
        arity_input: int = 0,
        output: Optional[Sequence[Sequence[int]]] = None,
    ) -> "CellRule":
        """Build a table rule; scalar transition rows are read as m = 1.

        Example:
            >>> and_not = CellRule.from_table(Alphabet(2), 2, [0, 0, 1, 0])
            >>> and_not.evaluate((1, 0), ())
            ((1,), ())
        """
        rows = tuple(
            (int(row),) if np.isscalar(row) else tuple(int(v) for v in row)
            for row in transition
        )
        width = len(rows[0]) if rows else 1
        out_rows = None
        if output is not None:
            out_rows = tuple(tuple(int(v) for v in row) for row in output)
        return cls(
            alphabet=alphabet,
            arity_state=arity_state,
            arity_input=arity_input,
            state_width=width,
            transition=rows,
            output=out_rows,
        )

    @classmethod
    def synthesized(
        cls,
        alphabet: Alphabet,
        arity_state: int,
        state_width: int,
        function: RuleFunction,
    ) -> "CellRule":
        return cls(
            alphabet=alphabet,
            arity_state=arity_state,
            state_width=state_width,
            function=function,
        )

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    @property
    def kind(self) -> str:
        if self.builtin is not None:
            return "builtin"
        if self.transition is not None:
            return "table"
        return "synthesized"

    @property
    def table_size(self) -> int:
        """|S|^k x |X|^l, the number of distinct argument tuples."""
        return int(
            self.alphabet.states**self.arity_state
            * self.alphabet.inputs**self.arity_input
        )

    def _validate_builtin(self) -> None:
        name = self.builtin
        if name not in BUILTIN_RULES:
            raise RuleError(
                f"Unknown built-in rule {name!r}. Available: {', '.join(BUILTIN_RULES)}"
            )
        if name in PARAMETRIZED_RULES and self.parameter is None:
            raise RuleError(f"Built-in rule {name!r} requires a parameter")
        if name not in PARAMETRIZED_RULES and self.parameter is not None:
            raise RuleError(f"Built-in rule {name!r} takes no parameter")

        n_states = self.alphabet.states
        if name == "identity":
            if self.state_width != self.arity_state:
                raise RuleError(
                    f"identity maps k arguments to k components: "
                    f"k={self.arity_state}, m={self.state_width}"
                )
        elif self.state_width != 1 and name != "constant":
            raise RuleError(f"Built-in {name!r} produces one component (m = 1)")

        if name in ("xor", "threshold") and n_states < 2:
            raise RuleError(f"Built-in {name!r} needs at least 2 state symbols")
        if name == "projection":
            total = self.arity_state + self.arity_input
            if not 1 <= (self.parameter or 0) <= total:
                raise RuleError(
                    f"projection index must be in 1..{total}, got {self.parameter}"
                )
        if name == "constant" and not 0 <= (self.parameter or 0) < n_states:
            raise RuleError(
                f"constant symbol must be in 0..{n_states - 1}, got {self.parameter}"
            )

    def _validate_table(self) -> None:
        rows = self.transition or ()
        if len(rows) != self.table_size:
            raise RuleError(
                f"Transition table has {len(rows)} rows, expected |S|^k x |X|^l = "
                f"{self.table_size} (k={self.arity_state}, l={self.arity_input})"
            )
        for index, row in enumerate(rows):
            if len(row) != self.state_width:
                raise RuleError(
                    f"Transition row {index} has {len(row)} components, "
                    f"expected {self.state_width}"
                )
            if any(not 0 <= v < self.alphabet.states for v in row):
                raise RuleError(f"Transition row {index} leaves the state alphabet")
        if self.arity_input == 0:
            if self.output and any(self.output):
                raise RuleError("Output table given for a rule without inputs (l = 0)")
            return
        if self.output is None or len(self.output) != self.table_size:
            raise RuleError(
                f"Output table must have {self.table_size} rows when l > 0"
            )
        for index, row in enumerate(self.output):
            if len(row) != self.arity_input or any(
                not 0 <= v < self.alphabet.outputs for v in row
            ):
                raise RuleError(f"Output row {index} is malformed or out of alphabet")

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def table_index(self, state_args: Sequence[int], input_args: Sequence[int]) -> int:
        """Mixed-radix index: state arguments base |S|, then inputs base |X|."""
        index = 0
        for a in state_args:
            index = index * self.alphabet.states + int(a)
        for x in input_args:
            index = index * self.alphabet.inputs + int(x)
        return index

    def evaluate(
        self, state_args: Sequence[int], input_args: Sequence[int] = ()
    ) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Apply (F, G) to one argument tuple."""
        if len(state_args) != self.arity_state or len(input_args) != self.arity_input:
            raise RuleError(
                f"Rule expects {self.arity_state} state and {self.arity_input} input "
                f"arguments, got {len(state_args)} and {len(input_args)}"
            )
        if self.function is not None:
            return self.function(tuple(state_args), tuple(input_args))
        if self.transition is not None:
            index = self.table_index(state_args, input_args)
            out = self.output[index] if self.output else ()
            return self.transition[index], tuple(out)

        args = [int(a) for a in state_args] + [int(x) for x in input_args]
        name = self.builtin
        if name == "identity":
            new_state = tuple(int(a) for a in state_args)
        elif name == "xor":
            new_state = (sum(args) % 2,)
        elif name == "sum_mod":
            new_state = (sum(args) % self.alphabet.states,)
        elif name == "threshold":
            new_state = (int(sum(args) >= (self.parameter or 0)),)
        elif name == "projection":
            new_state = (args[(self.parameter or 1) - 1] % self.alphabet.states,)
        else:
            new_state = (int(self.parameter or 0),) * self.state_width
        return new_state, self._builtin_outputs(new_state[0])

    def _builtin_outputs(self, first: int) -> tuple[int, ...]:
        return (first % self.alphabet.outputs,) * self.arity_input

    @cached_property
    def _transition_array(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=SYMBOL_DTYPE).reshape(
            self.table_size, self.state_width
        )

    @cached_property
    def _output_array(self) -> np.ndarray:
        if not self.output:
            return np.zeros((self.table_size, self.arity_input), dtype=SYMBOL_DTYPE)
        return np.asarray(self.output, dtype=SYMBOL_DTYPE)

    def apply(
        self, state_args: np.ndarray, input_args: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (F, G) over whole slices.

        Args:
            state_args: Array of shape (k, *extents).
            input_args: Array of shape (l, *extents).

        Returns:
            (states of shape (*extents, m), outputs of shape (*extents, l)).
        """
        cells_shape = state_args.shape[1:]
        if self.function is not None:
            return self._apply_cellwise(state_args, input_args)
        if self.transition is not None:
            index = np.zeros(cells_shape, dtype=SYMBOL_DTYPE)
            for a in state_args:
                index = index * self.alphabet.states + a
            for x in input_args:
                index = index * self.alphabet.inputs + x
            return self._transition_array[index], self._output_array[index]

        total = state_args.sum(axis=0) + input_args.sum(axis=0)
        name = self.builtin
        if name == "identity":
            states = np.moveaxis(state_args, 0, -1)
        elif name == "xor":
            states = (total % 2)[..., None]
        elif name == "sum_mod":
            states = (total % self.alphabet.states)[..., None]
        elif name == "threshold":
            states = (total >= (self.parameter or 0)).astype(SYMBOL_DTYPE)[..., None]
        elif name == "projection":
            stacked = np.concatenate([state_args, input_args], axis=0)
            states = (stacked[(self.parameter or 1) - 1] % self.alphabet.states)[
                ..., None
            ]
        else:
            states = np.full(
                (*cells_shape, self.state_width), self.parameter or 0, SYMBOL_DTYPE
            )
        outputs = np.repeat(
            (states[..., 0] % self.alphabet.outputs)[..., None],
            self.arity_input,
            axis=-1,
        )
        return states.astype(SYMBOL_DTYPE), outputs.astype(SYMBOL_DTYPE)

    def _apply_cellwise(
        self, state_args: np.ndarray, input_args: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        cells_shape = state_args.shape[1:]
        states = np.empty((*cells_shape, self.state_width), dtype=SYMBOL_DTYPE)
        outputs = np.empty((*cells_shape, self.arity_input), dtype=SYMBOL_DTYPE)
        for r in np.ndindex(*cells_shape):
            column = (slice(None), *r)
            new_state, out = self.evaluate(
                tuple(int(a) for a in state_args[column]),
                tuple(int(x) for x in input_args[column]),
            )
            states[r] = new_state
            outputs[r] = out
        return states, outputs


def default_taps(k: int, width: int) -> tuple[int, ...]:
    """Position-matched taps: argument i reads component min(i, m)."""
    return tuple(min(i, width) for i in range(1, k + 1))


@dataclass(frozen=True)
class GatherPlan:
    """Which state component of neighbor i feeds argument i.

    Attributes:
        structure: The shift structure being gathered.
        taps: 1-based component selectors, one per state shift.
    """

    structure: ShiftStructure
    taps: tuple[int, ...]

    def validate(self, width: int) -> None:
        if len(self.taps) != self.structure.k:
            raise RuleError(
                f"Expected {self.structure.k} taps (one per state shift), "
                f"got {len(self.taps)}"
            )
        bad = [tap for tap in self.taps if not 1 <= tap <= width]
        if bad:
            raise RuleError(f"Taps {bad} out of range 1..{width}")


@dataclass(frozen=True)
class Automaton:
    """A flat (depth-1) cellular automaton.

    Attributes:
        frame: Lattice, horizon (>= deepest shift) and boundary.
        structure: Space-time structure v.
        rule: Cell rule (F, G).
        taps: Gather taps; empty selects default_taps().
    """

    frame: SpaceTimeFrame
    structure: ShiftStructure
    rule: CellRule
    taps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.taps:
            object.__setattr__(
                self, "taps", default_taps(self.structure.k, self.rule.state_width)
            )
        object.__setattr__(self, "taps", tuple(int(t) for t in self.taps))
        self.structure.check_frame(self.frame)
        if (self.rule.arity_state, self.rule.arity_input) != (
            self.structure.k,
            self.structure.l,
        ):
            raise RuleError(
                f"Rule arity (k={self.rule.arity_state}, l={self.rule.arity_input}) "
                f"does not match structure (k={self.structure.k}, "
                f"l={self.structure.l})"
            )
        self.plan.validate(self.rule.state_width)
        if self.frame.boundary.symbol >= self.alphabet.states:
            raise RuleError(
                f"Fixed boundary symbol {self.frame.boundary.symbol} is not a state "
                f"symbol (|S| = {self.alphabet.states})"
            )

    @property
    def alphabet(self) -> Alphabet:
        return self.rule.alphabet

    @property
    def width(self) -> int:
        return self.rule.state_width

    @property
    def depth(self) -> int:
        return 1

    @property
    def plan(self) -> GatherPlan:
        return GatherPlan(self.structure, self.taps)

    def slice_shape(self) -> tuple[int, ...]:
        return (*self.frame.extents, self.width)


class SliceResult(NamedTuple):
    """One evaluated time slice."""

    states: np.ndarray
    outputs: np.ndarray


@dataclass
class ShiftStage:
    """Output of the shift stage B: k + l shifted copies of whole slices.

    Attributes:
        state_args: Array of shape (k, *extents).
        input_args: Array of shape (l, *extents).
    """

    state_args: np.ndarray
    input_args: np.ndarray

    def permuted(self, order: Sequence[int]) -> "ShiftStage":
        """Reorder the state arguments (1-based order)."""
        return ShiftStage(self.state_args[[i - 1 for i in order]], self.input_args)


@dataclass
class Trajectory:
    """State, input and output distributions over a frame, keyed by time.

    Attributes:
        frame: The frame the slices live on.
        states: t -> array of shape (*extents, m).
        inputs: t -> array of shape (*extents, l).
        outputs: t -> array of shape (*extents, l).
    """

    frame: SpaceTimeFrame
    states: dict[int, np.ndarray] = field(default_factory=dict)
    inputs: dict[int, np.ndarray] = field(default_factory=dict)
    outputs: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_window(
        cls,
        frame: SpaceTimeFrame,
        slices: Sequence[np.ndarray],
        start: int = 0,
    ) -> "Trajectory":
        """Build a history window with slices at times start, start + 1, ..."""
        states = {}
        for offset, plane in enumerate(slices):
            array = np.asarray(plane, dtype=SYMBOL_DTYPE)
            if array.shape == frame.extents:
                array = array[..., None]
            if array.shape[:-1] != frame.extents:
                raise HistoryError(
                    f"Slice {offset} has shape {array.shape}, expected "
                    f"{frame.extents} (+ state width)"
                )
            states[start + offset] = array
        return cls(frame=frame, states=states)

    @property
    def times(self) -> list[int]:
        return sorted(self.states)

    @property
    def last_time(self) -> int:
        if not self.states:
            raise HistoryError("Trajectory holds no slices")
        return max(self.states)

    def state_slice(self, t: int) -> np.ndarray:
        try:
            return self.states[t]
        except KeyError as e:
            raise HistoryError(
                f"History has no state slice at t={t} (holds {self.times})"
            ) from e

    def input_slice(self, t: int, width: int) -> np.ndarray:
        """Input slice at t; missing slices read as the input symbol 0."""
        if t in self.inputs:
            return self.inputs[t]
        return np.zeros((*self.frame.extents, width), dtype=SYMBOL_DTYPE)

    def require_depth(self, t: int, depth: int) -> None:
        missing = [s for s in range(t - depth, t) if s not in self.states]
        if missing:
            raise HistoryError(
                f"Step at t={t} needs history depth {depth}; missing slices at "
                f"{missing}"
            )


# ----------------------------------------------------------------------
# Direct local recurrence
# ----------------------------------------------------------------------


def _gather_state(
    automaton: Automaton,
    history: Trajectory,
    r: Coordinate,
    t: int,
    shift: Shift,
    tap: int,
) -> int:
    point = resolve(automaton.frame, r, shift)
    if isinstance(point, FixedSymbol):
        return point.symbol
    return int(history.state_slice(t - shift.dt)[(*point, tap - 1)])


def _gather_input(
    automaton: Automaton,
    history: Trajectory,
    r: Coordinate,
    t: int,
    shift: Shift,
    channel: int,
) -> int:
    point = resolve(automaton.frame, r, shift)
    if isinstance(point, FixedSymbol):
        return 0
    plane = history.input_slice(t - shift.dt, automaton.structure.l)
    return int(plane[(*point, channel)])


def step_direct(automaton: Automaton, history: Trajectory, t: int) -> SliceResult:
    """Evaluate slice t by the local recurrence, one cell at a time.

    s(r, t) = F(s(r - r_1, t - t_1)[tau_1], ..., x(r - r_l, t - t_l), ...)

    Raises:
        HistoryError: If a slice t - dt_i is missing.
    """
    structure = automaton.structure
    history.require_depth(t, structure.depth)
    extents = automaton.frame.extents
    states = np.empty((*extents, automaton.width), dtype=SYMBOL_DTYPE)
    outputs = np.empty((*extents, structure.l), dtype=SYMBOL_DTYPE)
    for r in automaton.frame.cells():
        state_args = tuple(
            _gather_state(automaton, history, r, t, shift, tap)
            for shift, tap in zip(structure.state_shifts, automaton.taps)
        )
        input_args = tuple(
            _gather_input(automaton, history, r, t, shift, channel)
            for channel, shift in enumerate(structure.input_shifts)
        )
        new_state, out = automaton.rule.evaluate(state_args, input_args)
        states[r] = new_state
        outputs[r] = out
    return SliceResult(states, outputs)


# ----------------------------------------------------------------------
# Factorized evaluation: shift stage B, pointwise stage C
# ----------------------------------------------------------------------


def shift_plane(
    frame: SpaceTimeFrame, plane: np.ndarray, shift: Shift, fill: int
) -> np.ndarray:
    """Return the plane read through ``shift``: out[r] = plane[r - dr].

    Points that leave a fixed-boundary lattice read ``fill``.
    """
    axes = tuple(range(frame.dims))
    shifted = np.roll(plane, shift.dr, axis=axes)
    if frame.boundary.is_periodic:
        return shifted
    for axis, (d, extent) in enumerate(zip(shift.dr, frame.extents)):
        if d == 0:
            continue
        index: list[slice] = [slice(None)] * frame.dims
        if d > 0:
            index[axis] = slice(0, min(d, extent))
        else:
            index[axis] = slice(max(extent + d, 0), extent)
        shifted[tuple(index)] = fill
    return shifted


def build_shift_stage(automaton: Automaton, history: Trajectory, t: int) -> ShiftStage:
    """Shift stage B: the k + l shifted distributions feeding slice t.

    State argument i at r equals component tau_i of the slice t - dt_i at
    resolve(r, shift_i); input argument j reads input channel j.
    """
    structure = automaton.structure
    history.require_depth(t, structure.depth)
    frame = automaton.frame
    state_planes = [
        shift_plane(
            frame,
            history.state_slice(t - shift.dt)[..., tap - 1],
            shift,
            frame.boundary.symbol,
        )
        for shift, tap in zip(structure.state_shifts, automaton.taps)
    ]
    input_planes = [
        shift_plane(
            frame,
            history.input_slice(t - shift.dt, structure.l)[..., channel],
            shift,
            0,
        )
        for channel, shift in enumerate(structure.input_shifts)
    ]
    empty = np.zeros((0, *frame.extents), dtype=SYMBOL_DTYPE)
    return ShiftStage(
        state_args=np.stack(state_planes),
        input_args=np.stack(input_planes) if input_planes else empty,
    )


def apply_pointwise_stage(rule: CellRule, stage: ShiftStage) -> SliceResult:
    """Pointwise stage C: (F, G) applied independently at every r.

    Raises:
        RuleError: If the stage arities differ from the rule's.
    """
    k, l = stage.state_args.shape[0], stage.input_args.shape[0]
    if (k, l) != (rule.arity_state, rule.arity_input):
        raise RuleError(
            f"Shift stage carries k={k}, l={l} arguments; rule expects "
            f"k={rule.arity_state}, l={rule.arity_input}"
        )
    states, outputs = rule.apply(stage.state_args, stage.input_args)
    return SliceResult(states, outputs)


def step_staged(
    automaton: Automaton,
    history: Trajectory,
    t: int,
    argument_order: Optional[Sequence[int]] = None,
) -> SliceResult:
    """One step of the factorized map: C after B."""
    stage = build_shift_stage(automaton, history, t)
    if argument_order is not None:
        stage = stage.permuted(argument_order)
    return apply_pointwise_stage(automaton.rule, stage)


Stepper = Callable[[Automaton, Trajectory, int], SliceResult]


def iterate_global(
    automaton: Automaton,
    initial: Trajectory,
    steps: int,
    inputs: Optional[Mapping[int, np.ndarray]] = None,
    stepper: Stepper = step_staged,
) -> Iterator[tuple[int, SliceResult]]:
    """Stream (t, slice) pairs, holding only a ring of depth max(dt).

    Args:
        automaton: Automaton to evolve.
        initial: History window; its last max(dt) slices seed the ring.
        steps: Number of new slices to produce.
        inputs: Optional input slices keyed by time.
        stepper: Step function (staged by default, step_direct for the
            local recurrence).

    Raises:
        HistoryError: If the initial window is shallower than max(dt).
    """
    depth = automaton.structure.depth
    start = initial.last_time + 1
    initial.require_depth(start, depth)
    ring: deque[tuple[int, np.ndarray]] = deque(
        ((t, initial.state_slice(t)) for t in range(start - depth, start)),
        maxlen=depth,
    )
    input_slices = dict(initial.inputs)
    if inputs:
        input_slices.update(inputs)
    if automaton.structure.l and not input_slices:
        logger.debug("No input slices supplied; inputs read as symbol 0")

    for t in range(start, start + steps):
        window_inputs = {
            s: input_slices[s] for s in range(t - depth, t) if s in input_slices
        }
        window = Trajectory(
            frame=automaton.frame, states=dict(ring), inputs=window_inputs
        )
        result = stepper(automaton, window, t)
        ring.append((t, result.states))
        yield t, result


def _evolve(
    automaton: Automaton,
    initial: Trajectory,
    steps: int,
    inputs: Optional[Mapping[int, np.ndarray]],
    stepper: Stepper,
) -> Trajectory:
    trajectory = Trajectory(
        frame=initial.frame,
        states=dict(initial.states),
        inputs=dict(initial.inputs),
        outputs=dict(initial.outputs),
    )
    if inputs:
        trajectory.inputs.update(inputs)
    for t, result in iterate_global(automaton, initial, steps, inputs, stepper):
        trajectory.states[t] = result.states
        trajectory.outputs[t] = result.outputs
    return trajectory


def evaluate_global(
    automaton: Automaton,
    initial: Trajectory,
    steps: int,
    inputs: Optional[Mapping[int, np.ndarray]] = None,
) -> Trajectory:
    """Evolve ``steps`` slices through the factorized global map.

    Deterministic: the result depends only on the arguments.

    Example:
        >>> xor = Automaton(
        ...     SpaceTimeFrame((8,)),
        ...     ShiftStructure((Shift((-1,)), Shift((1,)))),
        ...     CellRule.from_builtin("xor", Alphabet(2), 2),
        ... )
        >>> initial = Trajectory.from_window(xor.frame, [[0, 0, 0, 1, 0, 0, 0, 0]])
        >>> evaluate_global(xor, initial, 1).states[1][:, 0].tolist()
        [0, 0, 1, 0, 1, 0, 0, 0]
    """
    return _evolve(automaton, initial, steps, inputs, step_staged)


def evaluate_direct(
    automaton: Automaton,
    initial: Trajectory,
    steps: int,
    inputs: Optional[Mapping[int, np.ndarray]] = None,
) -> Trajectory:
    """Evolve ``steps`` slices by repeated step_direct()."""
    return _evolve(automaton, initial, steps, inputs, step_direct)


# ----------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    """A point where two evaluation paths disagree.

    Attributes:
        config: Index of the compared initial configuration.
        r: Cell coordinate.
        t: Time of the slice.
        component: "state" or "output".
    """

    config: int
    r: Coordinate
    t: int
    component: str = "state"


@dataclass
class VerificationReport:
    """Outcome of comparing two evaluation paths.

    Attributes:
        check: What was compared ("factorization" or "flattening").
        mode: "exhaustive" or "random".
        configurations: Number of initial configurations compared.
        steps: Slices compared per configuration.
        mismatch_count: Total number of disagreeing (config, r, t) points.
        mismatches: The first MAX_RECORDED_MISMATCHES of them.
        seed: Seed used in random mode.
    """

    check: str
    mode: str
    configurations: int = 0
    steps: int = 0
    mismatch_count: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.mismatch_count == 0

    def record(
        self,
        config: int,
        t: int,
        expected: np.ndarray,
        actual: np.ndarray,
        component: str = "state",
    ) -> None:
        """Record every cell where two slices differ."""
        if expected.shape != actual.shape:
            raise ValueError(
                f"Cannot compare slices of shape {expected.shape} and {actual.shape}"
            )
        differing = np.argwhere(np.any(expected != actual, axis=-1))
        for r in differing:
            self.mismatch_count += 1
            if len(self.mismatches) < MAX_RECORDED_MISMATCHES:
                self.mismatches.append(
                    Mismatch(config, tuple(int(c) for c in r), t, component)
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "mode": self.mode,
            "seed": self.seed,
            "configurations": self.configurations,
            "steps": self.steps,
            "passed": self.passed,
            "mismatch_count": self.mismatch_count,
            "mismatches": [
                {"config": m.config, "r": list(m.r), "t": m.t, "component": m.component}
                for m in self.mismatches
            ],
        }


def configuration_count(states: int, cells: int, width: int, depth: int) -> int:
    """|S|^(m x |R| x depth): number of distinct history windows."""
    return int(states ** (width * cells * depth))


def enumerate_windows(
    shape: tuple[int, ...],
    states: int,
    mode: str,
    samples: int,
    seed: int,
    max_configs: int,
) -> Iterator[np.ndarray]:
    """Yield history windows of ``shape`` (depth, *extents, m).

    Exhaustive mode enumerates every window in mixed-radix order; random
    mode draws ``samples`` windows from a seeded generator.

    Raises:
        CapExceededError: If exhaustive enumeration would exceed max_configs.
        ValueError: For an unknown mode.
    """
    cells = int(np.prod(shape))
    if mode == "exhaustive":
        total = states**cells
        if total > max_configs:
            raise CapExceededError(
                f"Exhaustive enumeration needs {states}^{cells} = {total} "
                f"configurations, above the cap of {max_configs}"
            )
        for digits in itertools.product(range(states), repeat=cells):
            yield np.asarray(digits, dtype=SYMBOL_DTYPE).reshape(shape)
    elif mode == "random":
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            yield rng.integers(0, states, size=shape, dtype=SYMBOL_DTYPE)
    else:
        raise ValueError(
            f"Unknown verification mode {mode!r}: use exhaustive or random"
        )


def verify_factorization(
    automaton: Automaton,
    mode: str = "exhaustive",
    steps: int = 16,
    samples: int = 1000,
    seed: int = 0,
    max_configs: int = 65536,
    argument_order: Optional[Sequence[int]] = None,
) -> VerificationReport:
    """Compare staged evaluation against repeated step_direct().

    Args:
        automaton: Automaton to check.
        mode: "exhaustive" (every initial window) or "random".
        steps: Slices evolved per initial window.
        samples: Windows drawn in random mode.
        seed: Generator seed for random mode.
        max_configs: Cap on exhaustive enumeration.
        argument_order: Permutes the staged path's state arguments; only
            test fixtures use it to inject a known fault.

    Returns:
        VerificationReport listing every mismatching (r, t).

    Raises:
        CapExceededError: If exhaustive mode exceeds max_configs.
    """
    depth = automaton.structure.depth
    shape = (depth, *automaton.slice_shape())
    report = VerificationReport(
        check="factorization",
        mode=mode,
        steps=steps,
        seed=seed if mode == "random" else None,
    )
    rng = np.random.default_rng(seed)
    l = automaton.structure.l

    def staged(a: Automaton, h: Trajectory, t: int) -> SliceResult:
        return step_staged(a, h, t, argument_order)

    for config, window in enumerate(
        enumerate_windows(
            shape, automaton.alphabet.states, mode, samples, seed, max_configs
        )
    ):
        initial = Trajectory.from_window(automaton.frame, list(window))
        inputs = None
        if l and mode == "random":
            inputs = {
                t: rng.integers(
                    0,
                    automaton.alphabet.inputs,
                    size=(*automaton.frame.extents, l),
                    dtype=SYMBOL_DTYPE,
                )
                for t in range(steps + depth)
            }
        direct = _evolve(automaton, initial, steps, inputs, step_direct)
        global_ = _evolve(automaton, initial, steps, inputs, staged)
        for t in range(depth, depth + steps):
            report.record(config, t, direct.states[t], global_.states[t])
            if l:
                report.record(
                    config, t, direct.outputs[t], global_.outputs[t], "output"
                )
        report.configurations += 1

    logger.info(
        "Factorization check (%s): %d configurations, %d mismatches",
        mode,
        report.configurations,
        report.mismatch_count,
    )
    return report
