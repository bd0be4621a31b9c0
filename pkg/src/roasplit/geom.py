"""Semialgebraic set descriptions and axis-aligned partitioning.

Cells are axis-aligned boxes tiling the state box; facets are the shared
(n-1)-dimensional faces between neighbouring cells, each carrying a
constant unit normal along its collapsed axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .poly import Polynomial

__all__ = [
    "SemialgebraicSet",
    "Cell",
    "Facet",
    "TimeGrid",
    "split_box",
    "neighbor_facets",
    "halving_split_sequence",
    "box_inequalities",
]

Box = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SemialgebraicSet:
    """Intersection of polynomial inequalities g_j >= 0."""

    inequalities: tuple[Polynomial, ...]

    def __post_init__(self):
        if not self.inequalities:
            raise ValueError("a semialgebraic set needs at least one inequality")

    def variables(self) -> tuple[str, ...]:
        names: set[str] = set()
        for g in self.inequalities:
            names.update(g.universe)
        return tuple(sorted(names))

    def contains(self, point: Mapping[str, float], tol: float = 0.0) -> bool:
        return all(g.evaluate(point) >= -tol for g in self.inequalities)


def box_inequalities(box: Sequence[tuple[float, float]], names: Sequence[str]) -> SemialgebraicSet:
    """The box as 2n affine inequalities {x_j - lo_j >= 0, hi_j - x_j >= 0}."""
    gs = []
    for name, (lo, hi) in zip(names, box):
        x = Polynomial.variable(name)
        gs.append(x - lo)
        gs.append(-x + hi)
    return SemialgebraicSet(tuple(gs))


@dataclass(frozen=True)
class Cell:
    """One axis-aligned box of the state partition."""

    id: int
    box: Box

    def __post_init__(self):
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate cell interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.box)

    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.box:
            v *= hi - lo
        return v

    def center(self) -> tuple[float, ...]:
        return tuple((lo + hi) / 2.0 for lo, hi in self.box)

    def halfwidth(self) -> tuple[float, ...]:
        return tuple((hi - lo) / 2.0 for lo, hi in self.box)

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        return all(lo - tol <= xi <= hi + tol for xi, (lo, hi) in zip(x, self.box))

    def description(self, names: Sequence[str]) -> SemialgebraicSet:
        return box_inequalities(self.box, names)


@dataclass(frozen=True)
class Facet:
    """Shared face between cells ``a`` and ``b`` (a < b by id).

    The normal is +-e_axis, oriented from cell ``a`` into cell ``b``;
    ``box`` stores per-axis intervals with the collapsed axis degenerate
    at ``value``.
    """

    a: int
    b: int
    axis: int
    value: float
    sign: int  # +1 if cell b lies above cell a along the axis
    box: Box

    def normal(self, n: int) -> tuple[float, ...]:
        h = [0.0] * n
        h[self.axis] = float(self.sign)
        return tuple(h)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knots T_1 = 0 < ... < T_K = horizon."""

    knots: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) < 2:
            raise ValueError("need at least two knots")
        if self.knots[0] != 0.0:
            raise ValueError("first knot must be 0")
        for lo, hi in zip(self.knots, self.knots[1:]):
            if not lo < hi:
                raise ValueError("knots must be strictly increasing")

    @property
    def horizon(self) -> float:
        return self.knots[-1]

    @property
    def n_intervals(self) -> int:
        return len(self.knots) - 1

    def interval(self, k: int) -> tuple[float, float]:
        return (self.knots[k], self.knots[k + 1])

    def locate(self, t: float) -> int:
        """Index of the interval containing t; knot ties go to the lower k."""
        if t < self.knots[0] or t > self.knots[-1]:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        for k in range(self.n_intervals):
            if t <= self.knots[k + 1]:
                return k
        return self.n_intervals - 1

    @staticmethod
    def uniform(horizon: float, n_intervals: int) -> "TimeGrid":
        return TimeGrid(tuple(np.linspace(0.0, horizon, n_intervals + 1).tolist()))


def split_box(
    box: Sequence[tuple[float, float]],
    cuts: Mapping[int, Sequence[float]] | None = None,
    cells_per_axis: Sequence[int] | None = None,
) -> list[Cell]:
    """Tile a box into cells by axis-aligned cuts.

    Either pass explicit cut positions per axis index or uniform cell
    counts per axis.  Cut positions must lie strictly inside the axis
    interval and may not repeat.
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    n = len(box)
    axis_cuts: list[list[float]] = [[] for _ in range(n)]
    if cells_per_axis is not None:
        if cuts:
            raise ValueError("pass either cuts or cells_per_axis, not both")
        if len(cells_per_axis) != n:
            raise ValueError("one cell count per axis required")
        for j, count in enumerate(cells_per_axis):
            if count < 1:
                raise ValueError("cell counts must be >= 1")
            lo, hi = box[j]
            axis_cuts[j] = list(np.linspace(lo, hi, count + 1)[1:-1])
    elif cuts:
        for j, positions in cuts.items():
            lo, hi = box[j]
            seen = set()
            for c in positions:
                c = float(c)
                if not lo < c < hi:
                    raise ValueError(f"cut {c} outside the open interval ({lo}, {hi}) of axis {j}")
                if c in seen:
                    raise ValueError(f"duplicate cut {c} on axis {j}")
                seen.add(c)
            axis_cuts[j] = sorted(float(c) for c in positions)

    per_axis_intervals = []
    for j in range(n):
        pts = [box[j][0]] + axis_cuts[j] + [box[j][1]]
        per_axis_intervals.append(list(zip(pts, pts[1:])))

    cells = []
    def rec(j: int, prefix: list[tuple[float, float]]):
        if j == n:
            cells.append(tuple(prefix))
            return
        for iv in per_axis_intervals[j]:
            rec(j + 1, prefix + [iv])

    rec(0, [])
    return [Cell(i, b) for i, b in enumerate(cells)]


def neighbor_facets(cells: Sequence[Cell]) -> list[Facet]:
    """Facets between cells sharing an (n-1)-dimensional face.

    Pairs meeting only in edges or corners are excluded; the normal
    points from the lower cell id into the higher.
    """
    facets = []
    ordered = sorted(cells, key=lambda c: c.id)
    for ia in range(len(ordered)):
        for ib in range(ia + 1, len(ordered)):
            ca, cb = ordered[ia], ordered[ib]
            touch_axis = None
            sign = 0
            overlap: list[tuple[float, float]] = []
            degenerate_ok = True
            for j, ((alo, ahi), (blo, bhi)) in enumerate(zip(ca.box, cb.box)):
                lo, hi = max(alo, blo), min(ahi, bhi)
                if hi < lo:
                    degenerate_ok = False
                    break
                if hi == lo:
                    if touch_axis is not None:
                        degenerate_ok = False  # meets only in an edge/corner
                        break
                    touch_axis = j
                    sign = 1 if ahi == blo else -1
                overlap.append((lo, hi))
            if not degenerate_ok or touch_axis is None:
                continue
            facets.append(
                Facet(
                    a=ca.id,
                    b=cb.id,
                    axis=touch_axis,
                    value=overlap[touch_axis][0],
                    sign=sign,
                    box=tuple(overlap),
                )
            )
    return facets


def halving_split_sequence(
    box: Sequence[tuple[float, float]],
    n_cells: int,
    seed: int = 0,
) -> list[Cell]:
    """Random-axis halving partition.

    Repeatedly pick a random axis and halve the largest interval that
    any current cell has along it, until ``n_cells`` cells exist.
    Deterministic for a fixed seed.
    """
    if n_cells < 1:
        raise ValueError("need at least one cell")
    rng = np.random.default_rng(seed)
    boxes: list[Box] = [tuple((float(lo), float(hi)) for lo, hi in box)]
    n = len(boxes[0])
    while len(boxes) < n_cells:
        axis = int(rng.integers(0, n))
        widths = [b[axis][1] - b[axis][0] for b in boxes]
        target = max(range(len(boxes)), key=lambda i: (widths[i], -i))
        lo, hi = boxes[target][axis]
        mid = (lo + hi) / 2.0
        lower = tuple((lo, mid) if j == axis else iv for j, iv in enumerate(boxes[target]))
        upper = tuple((mid, hi) if j == axis else iv for j, iv in enumerate(boxes[target]))
        boxes[target : target + 1] = [lower, upper]
    return [Cell(i, b) for i, b in enumerate(boxes)]
