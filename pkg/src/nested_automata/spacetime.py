"""Finite discrete space-time frames, shifts and block indexing.

A cellular automaton lives on a lattice R evolving over discrete time T. The
lattice here is finite: every axis has an extent and the frame carries a
boundary rule deciding what a cell sees when a shift points outside of it.

The module provides:
    - SpaceTimeFrame: lattice extents, retained time horizon, boundary rule
    - Shift / ShiftStructure: the space-time structure v of a cell rule
    - resolve(): boundary completion of ``r - dr``
    - BlockIndex: the canonical bijection between positions 1..k of a cell's
      k-tuple and the points of an inner space-time block R' x T'

Canonical block order is time-major, then row-major over space.
"""

import itertools
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)

Coordinate = tuple[int, ...]

PERIODIC = "periodic"
FIXED = "fixed"


class FrameError(ValueError):
    """Raised for malformed frames, shifts or block positions."""


@dataclass(frozen=True)
class Boundary:
    """Boundary rule of a finite lattice.

    Attributes:
        kind: Either "periodic" (wrap around) or "fixed" (constant symbol
            outside the lattice).
        symbol: Symbol seen outside the lattice for fixed boundaries.
    """

    kind: str = PERIODIC
    symbol: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (PERIODIC, FIXED):
            raise FrameError(
                f"Unknown boundary kind: {self.kind!r}. Expected 'periodic' or 'fixed'."
            )
        if self.symbol < 0:
            raise FrameError(f"Boundary symbol must be >= 0, got {self.symbol}")

    @classmethod
    def periodic(cls) -> "Boundary":
        return cls(PERIODIC, 0)

    @classmethod
    def fixed(cls, symbol: int) -> "Boundary":
        return cls(FIXED, symbol)

    @property
    def is_periodic(self) -> bool:
        return self.kind == PERIODIC


@dataclass(frozen=True)
class FixedSymbol:
    """Sentinel returned by resolve() when a shifted point leaves the lattice."""

    symbol: int


@dataclass(frozen=True)
class SpaceTimeFrame:
    """A finite d-dimensional lattice paired with a time horizon.

    Attributes:
        extents: Lattice size per axis (d = len(extents)).
        horizon: Number of time slices retained (outer levels) or evolved per
            cell update (inner levels).
        boundary: Boundary rule applied by resolve().

    Example:
        >>> frame = SpaceTimeFrame(extents=(2,), horizon=2)
        >>> frame.cell_count, frame.block_size
        (2, 4)
    """

    extents: tuple[int, ...]
    horizon: int = 1
    boundary: Boundary = field(default_factory=Boundary.periodic)

    def __post_init__(self) -> None:
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        if not self.extents:
            raise FrameError("Frame needs at least one spatial axis")
        if any(e < 1 for e in self.extents):
            raise FrameError(f"Every extent must be >= 1, got {list(self.extents)}")
        if self.horizon < 1:
            raise FrameError(f"Horizon must be >= 1, got {self.horizon}")

    @property
    def dims(self) -> int:
        return len(self.extents)

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.extents))

    @property
    def block_size(self) -> int:
        """Size of the space-time window |R| x horizon."""
        return self.cell_count * self.horizon

    def cells(self) -> Iterator[Coordinate]:
        """Iterate lattice points in row-major order."""
        return itertools.product(*(range(e) for e in self.extents))

    def contains(self, r: Sequence[int]) -> bool:
        return len(r) == self.dims and all(
            0 <= c < e for c, e in zip(r, self.extents)
        )


@dataclass(frozen=True)
class Shift:
    """A space-time shift (dr, dt): the argument reads point (r - dr, t - dt).

    Attributes:
        dr: Spatial displacement per axis, in lattice units.
        dt: Time displacement in steps; must be >= 1.
    """

    dr: tuple[int, ...]
    dt: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "dr", tuple(int(d) for d in self.dr))
        if self.dt < 1:
            raise FrameError(
                f"Shift dt must be >= 1 (arguments reference earlier slices), "
                f"got dt={self.dt}"
            )

    @property
    def dims(self) -> int:
        return len(self.dr)

    def negated(self) -> "Shift":
        """Spatially reversed shift (same dt)."""
        return Shift(tuple(-d for d in self.dr), self.dt)


@dataclass(frozen=True)
class ShiftStructure:
    """The space-time structure v: ordered state and input shifts.

    Order is significant: position i feeds argument i of the cell rule.

    Attributes:
        state_shifts: k shifts feeding the state arguments (k >= 1).
        input_shifts: l shifts feeding the input arguments (l may be 0).
    """

    state_shifts: tuple[Shift, ...]
    input_shifts: tuple[Shift, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "state_shifts", tuple(self.state_shifts))
        object.__setattr__(self, "input_shifts", tuple(self.input_shifts))
        if not self.state_shifts:
            raise FrameError("Structure needs at least one state shift (k >= 1)")
        dims = {s.dims for s in self.all_shifts}
        if len(dims) != 1:
            raise FrameError(
                f"All shifts must share one spatial dimension, got {sorted(dims)}"
            )

    @property
    def k(self) -> int:
        return len(self.state_shifts)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.input_shifts)

    @property
    def dims(self) -> int:
        return self.state_shifts[0].dims

    @property
    def all_shifts(self) -> tuple[Shift, ...]:
        return self.state_shifts + self.input_shifts

    @property
    def depth(self) -> int:
        """History depth needed to evaluate one step: max dt over all shifts."""
        return max(s.dt for s in self.all_shifts)

    def check_frame(self, frame: SpaceTimeFrame) -> None:
        """Validate that this structure fits a frame.

        Raises:
            FrameError: If dimensions differ or the horizon is shorter than
                the deepest shift.
        """
        if self.dims != frame.dims:
            raise FrameError(
                f"Shift dimension {self.dims} does not match frame dimension "
                f"{frame.dims}"
            )
        if self.depth > frame.horizon:
            raise FrameError(
                f"Frame horizon {frame.horizon} is shorter than the deepest "
                f"shift (dt={self.depth})"
            )


def resolve(
    frame: SpaceTimeFrame, r: Sequence[int], shift: Shift
) -> Union[Coordinate, FixedSymbol]:
    """Resolve the lattice point read by ``shift`` from cell ``r``.

    Args:
        frame: Frame supplying extents and boundary rule.
        r: Cell coordinate within the extents.
        shift: Shift whose spatial part is subtracted from r.

    Returns:
        ``r - dr`` wrapped componentwise for periodic frames, or a
        FixedSymbol carrying the boundary symbol when a fixed frame is left.

    Raises:
        FrameError: If r or the shift does not match the frame dimension.

    Example:
        >>> resolve(SpaceTimeFrame((8,)), (0,), Shift((1,)))
        (7,)
    """
    if len(r) != frame.dims or shift.dims != frame.dims:
        raise FrameError(
            f"Cannot resolve r={tuple(r)} with dr={shift.dr} on a "
            f"{frame.dims}-dimensional frame"
        )
    target = tuple(c - d for c, d in zip(r, shift.dr))
    if frame.boundary.is_periodic:
        return tuple(c % e for c, e in zip(target, frame.extents))
    if frame.contains(target):
        return target
    return FixedSymbol(frame.boundary.symbol)


@dataclass(frozen=True)
class BlockIndex:
    """Canonical bijection between tuple positions 1..k and R' x T' points.

    Position p maps to time ``(p - 1) // |R'|`` and to the row-major cell
    ``(p - 1) % |R'|`` of the inner frame.
    """

    frame: SpaceTimeFrame

    @property
    def k(self) -> int:
        return self.frame.block_size

    def point(self, pos: int) -> tuple[Coordinate, int]:
        """Map a 1-based position to its inner point (r', t')."""
        if not 1 <= pos <= self.k:
            raise FrameError(f"Block position {pos} out of range 1..{self.k}")
        t, cell = divmod(pos - 1, self.frame.cell_count)
        r = tuple(int(c) for c in np.unravel_index(cell, self.frame.extents))
        return r, t

    def position(self, r: Sequence[int], t: int) -> int:
        """Inverse of point(): the 1-based position of (r', t')."""
        if not self.frame.contains(r) or not 0 <= t < self.frame.horizon:
            raise FrameError(
                f"Point ({list(r)}, {t}) lies outside the inner block "
                f"{list(self.frame.extents)} x {self.frame.horizon}"
            )
        cell = int(np.ravel_multi_index(tuple(r), self.frame.extents))
        return t * self.frame.cell_count + cell + 1


def block_index(bi: BlockIndex, pos: int) -> tuple[Coordinate, int]:
    """Position -> (r', t') under the canonical time-major order."""
    return bi.point(pos)


def block_position(bi: BlockIndex, r: Sequence[int], t: int) -> int:
    """(r', t') -> position under the canonical time-major order."""
    return bi.position(r, t)
