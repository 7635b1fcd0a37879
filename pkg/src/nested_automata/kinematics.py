"""Propagation speeds of shifts and their effective values at nesting levels.

A shift (dr, dt) moves a signal dr lattice units every dt steps, so its speed
is dr / dt. Nested space-times are taken as mutually orthogonal: a signal
nested n levels deep whose enclosing levels move at speeds v_1..v_n is left
with

    u * sqrt(1 - (v_1^2 + ... + v_n^2) / u^2)

where u is the global speed. The formula is evaluated as stated arithmetic.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Union

from .spacetime import Shift

if TYPE_CHECKING:
    from .automaton import Automaton
    from .nesting import NestedAutomaton

logger = logging.getLogger(__name__)

EXCEEDS_LIMIT = "exceeds_limit"


class SpeedExceedsLimit(ValueError):
    """Raised when the squared level speeds add up to more than u^2.

    Attributes:
        u: Global speed.
        speeds: Level speeds that were summed.
        level: Nesting level queried.
    """

    def __init__(self, u: float, speeds: Sequence[float], level: int) -> None:
        self.u = u
        self.speeds = tuple(speeds)
        self.level = level
        total = math.fsum(v * v for v in self.speeds)
        super().__init__(
            f"Level {level}: sum of squared speeds {total:.12g} exceeds "
            f"u^2 = {u * u:.12g} (speeds {list(self.speeds)}, u={u})"
        )


@dataclass(frozen=True)
class Speed:
    """A propagation speed in lattice units per time step.

    Attributes:
        components: Per-axis speed.
        magnitude: Euclidean norm of the components.
    """

    components: tuple[float, ...]
    magnitude: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(float(c) for c in self.components))
        object.__setattr__(self, "magnitude", math.hypot(*self.components))


def shift_speed(shift: Shift) -> Speed:
    """Speed dr / dt of a shift, computed exactly before conversion."""
    return Speed(tuple(float(Fraction(d, shift.dt)) for d in shift.dr))


@dataclass(frozen=True)
class NestedSpeedSpec:
    """Global speed and per-level relative speed magnitudes.

    Attributes:
        u: Global (limiting) speed, > 0.
        level_speeds: Speeds v, w, ... of the levels, outermost first.
    """

    u: float
    level_speeds: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "level_speeds", tuple(float(v) for v in self.level_speeds)
        )
        if not self.u > 0:
            raise ValueError(f"Global speed u must be > 0, got {self.u}")
        negative = [v for v in self.level_speeds if v < 0]
        if negative:
            raise ValueError(f"Level speeds must be >= 0, got {negative}")


def nested_speed(spec: NestedSpeedSpec, level: int) -> float:
    """Effective speed available at a nesting level.

    Level 0 is the outermost level and reports its own speed v_1. Level n
    reports u * sqrt(1 - sum(v_j^2 for j <= n) / u^2). Equality with u^2
    yields 0.

    Args:
        spec: Global speed and level speeds.
        level: Nesting level, 0 <= level <= len(spec.level_speeds).

    Raises:
        SpeedExceedsLimit: If the summed squares exceed u^2.
        ValueError: If fewer speeds than the level needs are given.

    Example:
        >>> round(nested_speed(NestedSpeedSpec(1.0, (0.6,)), 1), 12)
        0.8
    """
    speeds = spec.level_speeds
    if level < 0:
        raise ValueError(f"Level must be >= 0, got {level}")
    if level == 0:
        if not speeds:
            raise ValueError("Level 0 needs at least one level speed")
        return speeds[0]
    if level > len(speeds):
        raise ValueError(
            f"Level {level} needs {level} level speeds, got {len(speeds)}"
        )
    used = speeds[:level]
    total = math.fsum(v * v for v in used)
    u_squared = spec.u * spec.u
    if total > u_squared:
        raise SpeedExceedsLimit(spec.u, used, level)
    return spec.u * math.sqrt(max(0.0, 1.0 - total / u_squared))


@dataclass(frozen=True)
class SpeedRow:
    """One row of a speed table.

    Attributes:
        level: Nesting level, 0 = outermost.
        shift_index: 1-based index of the shift within its level.
        raw_speed: Magnitude of dr / dt.
        effective_speed: Nested speed at this level; None when flagged at a
            nested level.
        flag: "" or "exceeds_limit".
    """

    level: int
    shift_index: int
    raw_speed: float
    effective_speed: Optional[float]
    flag: str = ""

    @property
    def flagged(self) -> bool:
        return bool(self.flag)


def _level_structures(
    automaton: Union["Automaton", "NestedAutomaton"],
) -> list[tuple[Shift, ...]]:
    levels = getattr(automaton, "levels", None)
    if levels is None:
        return [automaton.structure.state_shifts]
    return [level.structure.state_shifts for level in levels()]


def speed_table(
    automaton: Union["Automaton", "NestedAutomaton"], u: float
) -> list[SpeedRow]:
    """Per-level, per-shift raw and effective speeds.

    Rows are ordered by level, then shift index. At level n > 0 shift i is
    paired with shift i of every enclosing level; an enclosing level without
    a shift i contributes speed 0. Entries that exceed the global speed are
    flagged, never dropped.
    """
    structures = _level_structures(automaton)
    raw = [[shift_speed(s).magnitude for s in shifts] for shifts in structures]
    rows: list[SpeedRow] = []
    for level, speeds in enumerate(raw):
        for index, speed in enumerate(speeds):
            if level == 0:
                flag = EXCEEDS_LIMIT if speed > u else ""
                rows.append(SpeedRow(level, index + 1, speed, speed, flag))
                continue
            enclosing = tuple(
                raw[j][index] if index < len(raw[j]) else 0.0 for j in range(level)
            )
            try:
                effective: Optional[float] = nested_speed(
                    NestedSpeedSpec(u, enclosing), level
                )
                flag = ""
            except SpeedExceedsLimit:
                effective, flag = None, EXCEEDS_LIMIT
            rows.append(SpeedRow(level, index + 1, speed, effective, flag))

    for row in rows:
        if row.flagged:
            logger.warning(
                "Level %d shift %d exceeds the global speed u=%s",
                row.level,
                row.shift_index,
                u,
            )
    return rows


@dataclass(frozen=True)
class Rationalization:
    """Best lattice shift for a real speed.

    Attributes:
        shift: The chosen (dr, dt).
        error: |dr / dt - target|.
    """

    shift: Shift
    error: float

    @property
    def speed(self) -> Fraction:
        return Fraction(self.shift.dr[0], self.shift.dt)


def exact_target(target: Union[float, Fraction]) -> Fraction:
    """Exact rational reading of a speed; floats are read by their repr."""
    if isinstance(target, Fraction):
        return target
    return Fraction(repr(float(target)))


def rationalize_speed(target: Union[float, Fraction], max_dt: int) -> Rationalization:
    """Find the shift (dr, dt), dt <= max_dt, closest to ``target``.

    Ties go to the smaller dt, then to the smaller |dr|.

    Raises:
        ValueError: If max_dt < 1.

    Example:
        >>> best = rationalize_speed(0.8, 5)
        >>> best.shift.dr, best.shift.dt, best.error
        ((4,), 5, 0.0)
    """
    if max_dt < 1:
        raise ValueError(f"max_dt must be >= 1, got {max_dt}")
    exact = exact_target(target)
    best: Optional[tuple[Fraction, int, int]] = None
    for dt in range(1, max_dt + 1):
        low = math.floor(exact * dt)
        for dr in sorted({low, low + 1}, key=abs):
            error = abs(Fraction(dr, dt) - exact)
            if best is None or error < best[0]:
                best = (error, dr, dt)
    assert best is not None
    error, dr, dt = best
    return Rationalization(Shift((dr,), dt), float(error))
