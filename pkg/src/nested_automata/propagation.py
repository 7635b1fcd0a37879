"""Signal propagation through nested space-times in real-valued coordinates.

A point of a nested space-time is a list of (r, t) pairs, one per level,
outermost first. A signal moving at level speeds (v, w, ...) is read one step
earlier at the point translated at every level n by

    (nested_speed(n) * delay_n in space, delay_n in time)

Case evaluators:
    - propagate_pure(): the field carried without processing.
    - propagate_processed(): a unary rule F applied after every step.
    - propagate_multi(): a k-ary rule F over k signals of different speeds.
    - general_formula(): one step of the k-argument formula at all levels.

Coordinates stay real because nested speeds are generally irrational; the
lattice engine in automaton.py stays exact.
"""

import logging
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kinematics import NestedSpeedSpec, nested_speed

logger = logging.getLogger(__name__)

MAX_LEVELS = 3
DEFAULT_DELAY = 1.0
DEFAULT_TOLERANCE = 1e-9

FieldEvaluator = Callable[["NestedCoordinate"], int]


class PropagationError(ValueError):
    """Raised for bad coordinates, rule arity mismatches or missing speeds."""


@dataclass(frozen=True)
class LevelPoint:
    """A (r, t) point of one nesting level."""

    r: tuple[float, ...]
    t: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", tuple(float(c) for c in self.r))
        object.__setattr__(self, "t", float(self.t))
        if not self.r:
            raise PropagationError("A level point needs at least one spatial axis")

    def format(self) -> str:
        """Render as ``r1;r2@t`` with 12 significant digits."""
        space = ";".join(f"{c + 0.0:.12g}" for c in self.r)
        return f"{space}@{self.t + 0.0:.12g}"


@dataclass(frozen=True)
class NestedCoordinate:
    """A point of a nested space-time, outermost level first.

    Example:
        >>> NestedCoordinate.of(((2.0,), 4.0), ((0.0,), 4.0)).depth
        2
    """

    levels: tuple[LevelPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if not 1 <= len(self.levels) <= MAX_LEVELS:
            raise PropagationError(
                f"Nested coordinates have 1..{MAX_LEVELS} levels, got {len(self.levels)}"
            )

    @classmethod
    def of(cls, *pairs: tuple[Sequence[float], float]) -> "NestedCoordinate":
        return cls(tuple(LevelPoint(tuple(r), t) for r, t in pairs))

    @property
    def depth(self) -> int:
        return len(self.levels)

    def require_nonnegative_times(self) -> None:
        negative = [i for i, p in enumerate(self.levels) if p.t < 0]
        if negative:
            raise PropagationError(
                f"Query times must be >= 0; levels {negative} have negative t"
            )

    def as_vector(self) -> np.ndarray:
        return np.array([v for p in self.levels for v in (*p.r, p.t)], dtype=float)

    def formatted(self) -> tuple[str, ...]:
        """Per-level strings padded with "" up to MAX_LEVELS."""
        cells = [p.format() for p in self.levels]
        return tuple(cells + [""] * (MAX_LEVELS - len(cells)))


@dataclass(frozen=True)
class NestedField:
    """A symbol-valued field over nested coordinates.

    Attributes:
        evaluator: Total function NestedCoordinate -> symbol.
        levels: Number of levels the field expects.
    """

    evaluator: FieldEvaluator = field(compare=False)
    levels: int = 1

    def __call__(self, coord: NestedCoordinate) -> int:
        if coord.depth != self.levels:
            raise PropagationError(
                f"Field expects {self.levels}-level coordinates, got {coord.depth}"
            )
        return int(self.evaluator(coord))

    @classmethod
    def delta(
        cls,
        site: NestedCoordinate,
        tolerance: float = DEFAULT_TOLERANCE,
        value: int = 1,
        background: int = 0,
    ) -> "NestedField":
        """``value`` within ``tolerance`` of ``site``, else ``background``."""
        target = site.as_vector()

        def evaluate(coord: NestedCoordinate) -> int:
            vector = coord.as_vector()
            if vector.shape != target.shape:
                return background
            if np.all(np.abs(vector - target) <= tolerance):
                return value
            return background

        return cls(evaluate, site.depth)

    @classmethod
    def step(
        cls, threshold: float, levels: int, high: int = 1, low: int = 0
    ) -> "NestedField":
        """``high`` where the outermost first spatial coordinate is >= threshold."""

        def evaluate(coord: NestedCoordinate) -> int:
            if coord.levels[0].r[0] >= threshold - DEFAULT_TOLERANCE:
                return high
            return low

        return cls(evaluate, levels)

    @classmethod
    def sampled_grid(
        cls,
        samples: Mapping[NestedCoordinate, int],
        tolerance: float = DEFAULT_TOLERANCE,
        default: int = 0,
        periods: Optional[Sequence[Optional[Sequence[float]]]] = None,
    ) -> "NestedField":
        """Nearest-sample lookup; misses beyond ``tolerance`` read ``default``.

        Args:
            samples: Sampled points and their symbols; all with one depth.
            tolerance: Largest per-coordinate distance accepted as a hit.
            default: Symbol for points far from every sample.
            periods: Optional per-level spatial periods; distances along a
                periodic axis are wrapped.
        """
        if not samples:
            raise PropagationError("A sampled grid needs at least one sample")
        keys = list(samples)
        depth = keys[0].depth
        if any(k.depth != depth for k in keys):
            raise PropagationError("All grid samples must share one depth")
        points = np.stack([k.as_vector() for k in keys])
        values = np.array([int(samples[k]) for k in keys])
        wrap = np.zeros(points.shape[1])
        if periods is not None:
            column = 0
            for level, point in enumerate(keys[0].levels):
                level_periods = periods[level] if level < len(periods) else None
                for axis in range(len(point.r)):
                    if level_periods is not None:
                        wrap[column + axis] = float(level_periods[axis])
                column += len(point.r) + 1

        def evaluate(coord: NestedCoordinate) -> int:
            diff = points - coord.as_vector()
            periodic = wrap > 0
            turns = np.round(diff[:, periodic] / wrap[periodic])
            diff[:, periodic] -= wrap[periodic] * turns
            distance = np.max(np.abs(diff), axis=1)
            nearest = int(np.argmin(distance))
            if distance[nearest] <= tolerance:
                return int(values[nearest])
            return default

        return cls(evaluate, depth)


@dataclass(frozen=True)
class SignalPath:
    """Level speeds and per-step delays of one propagating signal.

    Attributes:
        speeds: Relative level speeds (v, w, ...), outermost first.
        delays: Per-step delays (t_1, t'_1, t''_1) of each level.
    """

    speeds: tuple[float, ...]
    delays: tuple[float, ...] = (DEFAULT_DELAY,) * MAX_LEVELS

    def __post_init__(self) -> None:
        object.__setattr__(self, "speeds", tuple(float(v) for v in self.speeds))
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        if not self.speeds:
            raise PropagationError("A signal needs at least its level-0 speed")
        if any(d <= 0 for d in self.delays):
            raise PropagationError(f"Delays must be > 0, got {list(self.delays)}")

    @classmethod
    def of(
        cls, speeds: Sequence[float], delays: Optional[Sequence[float]] = None
    ) -> "SignalPath":
        if delays is None:
            return cls(tuple(speeds))
        return cls(tuple(speeds), tuple(delays))

    def step_offsets(self, u: float, levels: int) -> tuple[tuple[float, float], ...]:
        """(spatial, temporal) translation per level for one step.

        Raises:
            PropagationError: If speeds or delays do not cover ``levels``.
            SpeedExceedsLimit: If the nesting is invalid at some level.
        """
        needed = max(1, levels - 1)
        if len(self.speeds) < needed:
            raise PropagationError(
                f"{levels}-level propagation needs {needed} level speeds, "
                f"got {len(self.speeds)}"
            )
        if len(self.delays) < levels:
            raise PropagationError(
                f"{levels}-level propagation needs {levels} delays, got {len(self.delays)}"
            )
        spec = NestedSpeedSpec(u, self.speeds)
        return tuple(
            (nested_speed(spec, level) * self.delays[level], self.delays[level])
            for level in range(levels)
        )


def _translate(
    coord: NestedCoordinate,
    offsets: Sequence[tuple[float, float]],
    count: float,
) -> NestedCoordinate:
    """Move ``count`` steps back along the first axis of every level."""
    levels = []
    for point, (space, time) in zip(coord.levels, offsets):
        r = (point.r[0] - count * space, *point.r[1:])
        levels.append(LevelPoint(r, point.t - count * time))
    return NestedCoordinate(tuple(levels))


def back_translate(
    coord: NestedCoordinate, u: float, path: SignalPath, steps: int
) -> NestedCoordinate:
    """Closed form: the point ``steps`` steps back along ``path``."""
    if steps < 0:
        raise PropagationError(f"Steps must be >= 0, got {steps}")
    return _translate(coord, path.step_offsets(u, coord.depth), steps)


def back_translate_loop(
    coord: NestedCoordinate, u: float, path: SignalPath, steps: int
) -> NestedCoordinate:
    """Unrolled form of back_translate(), one step at a time."""
    if steps < 0:
        raise PropagationError(f"Steps must be >= 0, got {steps}")
    offsets = path.step_offsets(u, coord.depth)
    current = coord
    for _ in range(steps):
        current = _translate(current, offsets, 1)
    return current


def _path(spec: NestedSpeedSpec, delays: Optional[Sequence[float]]) -> SignalPath:
    return SignalPath.of(spec.level_speeds, delays)


def propagate_pure(
    field: NestedField,
    spec: NestedSpeedSpec,
    coord: NestedCoordinate,
    steps: int,
    delays: Optional[Sequence[float]] = None,
    method: str = "closed",
) -> int:
    """Field value carried ``steps`` steps without processing.

    Args:
        field: Base field s_0.
        spec: Global speed u and level speeds (v, w, ...).
        coord: Query point.
        steps: Number of unrolled steps.
        delays: Per-level per-step delays (default 1 at every level).
        method: "closed" for the closed form or "loop" to unroll.

    Raises:
        PropagationError: For negative query times or missing speeds.
        SpeedExceedsLimit: If the nesting is invalid at the queried depth.
    """
    coord.require_nonnegative_times()
    path = _path(spec, delays)
    if method == "closed":
        source = back_translate(coord, spec.u, path, steps)
    elif method == "loop":
        source = back_translate_loop(coord, spec.u, path, steps)
    else:
        raise PropagationError(f"Unknown method {method!r}: use closed or loop")
    return field(source)


@dataclass(frozen=True)
class ProcessingRule:
    """A named symbol function F applied during propagation.

    Attributes:
        name: Rule name.
        function: The mapping of argument symbols to a symbol.
        arity: Number of arguments; None accepts any k >= 1.
    """

    name: str
    function: Callable[..., int] = field(compare=False)
    arity: Optional[int] = None

    def __call__(self, *args: int) -> int:
        self.check_arity(len(args))
        return int(self.function(*args))

    def check_arity(self, k: int) -> None:
        if k < 1 or (self.arity is not None and k != self.arity):
            expected = "any k >= 1" if self.arity is None else str(self.arity)
            raise PropagationError(
                f"Rule {self.name!r} takes {expected} arguments, got {k}"
            )


PROCESSING_RULES = ("identity", "negate", "increment", "max", "min", "first")


def processing_rule(name: str, states: int = 2) -> ProcessingRule:
    """Look up a named rule over the symbols 0..states-1.

    negate maps x to states-1-x; increment saturates at states-1.
    """
    top = states - 1
    if name == "identity":
        return ProcessingRule(name, lambda x: x, 1)
    if name == "negate":
        return ProcessingRule(name, lambda x: top - x, 1)
    if name == "increment":
        return ProcessingRule(name, lambda x: min(x + 1, top), 1)
    if name == "max":
        return ProcessingRule(name, lambda *xs: max(xs))
    if name == "min":
        return ProcessingRule(name, lambda *xs: min(xs))
    if name == "first":
        return ProcessingRule(name, lambda *xs: xs[0])
    raise PropagationError(
        f"Unknown processing rule {name!r}. Available: {', '.join(PROCESSING_RULES)}"
    )


def propagate_processed(
    field: NestedField,
    spec: NestedSpeedSpec,
    rule: Callable[[int], int],
    coord: NestedCoordinate,
    steps: int,
    delays: Optional[Sequence[float]] = None,
) -> int:
    """Field value after ``steps`` rounds of translate-then-apply F.

    F is unary, so the rounds collapse to F^n of the field at the fully
    back-translated point.
    """
    coord.require_nonnegative_times()
    value = field(back_translate(coord, spec.u, _path(spec, delays), steps))
    for _ in range(steps):
        value = int(rule(value))
    return value


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Every tuple of ``parts`` non-negative counts summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def propagate_multi(
    field: NestedField,
    u: float,
    rule: Callable[..., int],
    signals: Sequence[SignalPath],
    coord: NestedCoordinate,
    steps: int,
) -> int:
    """k signals of different speeds combined by a k-ary F at every step.

    Argument i of each step is read at the point moved back one step along
    ``signals[i]``. Translations commute, so a value depends only on how many
    steps were taken along each signal. Values are filled in layer by layer,
    from ``steps`` total steps down to the query point.

    Raises:
        PropagationError: On rule arity mismatch or bad coordinates.
    """
    coord.require_nonnegative_times()
    if not signals:
        raise PropagationError("propagate_multi needs at least one signal")
    if isinstance(rule, ProcessingRule):
        rule.check_arity(len(signals))
    if steps < 0:
        raise PropagationError(f"Steps must be >= 0, got {steps}")
    k = len(signals)
    offsets = [path.step_offsets(u, coord.depth) for path in signals]

    def point(counts: tuple[int, ...]) -> NestedCoordinate:
        levels = []
        for level, p in enumerate(coord.levels):
            space = math.fsum(c * o[level][0] for c, o in zip(counts, offsets))
            time = math.fsum(c * o[level][1] for c, o in zip(counts, offsets))
            levels.append(LevelPoint((p.r[0] - space, *p.r[1:]), p.t - time))
        return NestedCoordinate(tuple(levels))

    layer = {counts: field(point(counts)) for counts in _compositions(steps, k)}
    evaluated = len(layer)
    for total in range(steps - 1, -1, -1):
        below = layer
        layer = {}
        for counts in _compositions(total, k):
            args = [
                below[counts[:i] + (counts[i] + 1,) + counts[i + 1 :]]
                for i in range(k)
            ]
            layer[counts] = int(rule(*args))
        evaluated += len(layer)
    logger.debug("propagate_multi evaluated %d intermediate points", evaluated)
    return layer[(0,) * k]


def general_formula(
    field: NestedField,
    u: float,
    rule: Callable[..., int],
    signals: Sequence[SignalPath],
    coord: NestedCoordinate,
) -> int:
    """One step of the k-argument formula, translating all levels at once."""
    coord.require_nonnegative_times()
    if isinstance(rule, ProcessingRule):
        rule.check_arity(len(signals))
    args = [field(back_translate(coord, u, path, 1)) for path in signals]
    return int(rule(*args))


# ----------------------------------------------------------------------
# Traces
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    """One trace line: step, per-level coordinates and a field value."""

    step: int
    level0: str
    level1: str
    level2: str
    value: int

    @classmethod
    def at(cls, step: int, coord: NestedCoordinate, value: int) -> "TraceRow":
        level0, level1, level2 = coord.formatted()
        return cls(step, level0, level1, level2, value)


def trace_pure(
    field: NestedField,
    spec: NestedSpeedSpec,
    coord: NestedCoordinate,
    steps: int,
    delays: Optional[Sequence[float]] = None,
) -> list[TraceRow]:
    """One row per step 1..n: the back-translated point and its value."""
    path = _path(spec, delays)
    rows = []
    for step in range(1, steps + 1):
        source = back_translate(coord, spec.u, path, step)
        rows.append(TraceRow.at(step, source, field(source)))
    return rows


def trace_processed(
    field: NestedField,
    spec: NestedSpeedSpec,
    rule: Callable[[int], int],
    coord: NestedCoordinate,
    steps: int,
    delays: Optional[Sequence[float]] = None,
) -> list[TraceRow]:
    """As trace_pure(), with the processed value after each step count."""
    path = _path(spec, delays)
    rows = []
    for step in range(1, steps + 1):
        source = back_translate(coord, spec.u, path, step)
        value = propagate_processed(field, spec, rule, coord, step, delays)
        rows.append(TraceRow.at(step, source, value))
    return rows


def trace_multi(
    field: NestedField,
    u: float,
    signals: Sequence[SignalPath],
    coord: NestedCoordinate,
    steps: int,
) -> list[TraceRow]:
    """Per step, one row per signal with that signal's carried value."""
    rows = []
    for step in range(1, steps + 1):
        for path in signals:
            source = back_translate(coord, u, path, step)
            rows.append(TraceRow.at(step, source, field(source)))
    return rows


def trace_general(
    field: NestedField,
    u: float,
    signals: Sequence[SignalPath],
    coord: NestedCoordinate,
) -> list[TraceRow]:
    """One row per argument of a single general-formula step."""
    return trace_multi(field, u, signals, coord, 1)
