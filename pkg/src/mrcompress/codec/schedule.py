"""Hierarchical interpolation schedules for one axis.

An axis of N points is visited coarse to fine:

* level 0 seeds position 0 against a zero prediction,
* level 1 predicts position N-1 from position 0,
* then one level per stride S = 2^n (largest 2^n < N-1, halving each level)
  predicts the odd multiples of S. A target whose far neighbor at +S falls
  off the axis is extrapolated one-sided from the near neighbor instead.

Every position appears as a target exactly once, and every predictor reads
only positions from strictly earlier levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ShapeError

SEED_ZERO = "seed-zero"
ENDPOINT = "endpoint"
TWO_SIDED = "interp-two-sided"
ONE_SIDED = "extrap-one-sided"


@dataclass(frozen=True)
class ScheduleLevel:
    """Targets of one level, all sharing the neighbor distance ``step``."""

    level: int
    step: int
    targets: tuple[tuple[int, str], ...]  # (position, predictor), ascending

    def positions(self, kind: str) -> np.ndarray:
        return np.array([p for p, k in self.targets if k == kind], dtype=np.intp)


@dataclass(frozen=True)
class InterpolationSchedule:
    n_points: int
    levels: tuple[ScheduleLevel, ...]

    @property
    def maxlevel(self) -> int:
        return len(self.levels) - 1

    def one_sided_targets(self) -> list[int]:
        """Interior positions forced into one-sided extrapolation; the
        level-1 endpoint does not count."""
        out = []
        for lvl in self.levels:
            out.extend(int(p) for p, k in lvl.targets if k == ONE_SIDED)
        return sorted(out)


@lru_cache(maxsize=None)
def build_schedule(n: int) -> InterpolationSchedule:
    if n < 1:
        raise ShapeError(f"axis needs at least one point, got {n}")
    levels = [ScheduleLevel(0, 0, ((0, SEED_ZERO),))]
    if n >= 2:
        levels.append(ScheduleLevel(1, n - 1, ((n - 1, ENDPOINT),)))
        step = 1
        while step * 2 < n - 1:
            step *= 2
        while step >= 1:
            targets = []
            for pos in range(step, n, 2 * step):
                if pos == n - 1:
                    continue  # claimed by the endpoint level
                # pos - step is an even multiple of step, hence already
                # predicted; pos + step is too unless it leaves the axis
                if pos + step <= n - 1:
                    targets.append((pos, TWO_SIDED))
                else:
                    targets.append((pos, ONE_SIDED))
            levels.append(ScheduleLevel(len(levels), step, tuple(targets)))
            step //= 2
    return InterpolationSchedule(n_points=n, levels=tuple(levels))


@dataclass(frozen=True)
class GridSchedule:
    """Per-axis schedules for a 3D array plus the shared level counter.

    Axes of different lengths are aligned at the finishing end: every axis
    runs its stride-1 level at the global ``maxlevel``, so short axes start
    late and their early, structure-bearing levels still land on tight
    adaptive bounds.
    """

    axes: tuple[InterpolationSchedule, InterpolationSchedule, InterpolationSchedule]
    # order: x, y, z

    @property
    def maxlevel(self) -> int:
        return max(s.maxlevel for s in self.axes)

    def axis_level(self, axis: int, g: int) -> int | None:
        """The axis-local level running at global level ``g``, if any."""
        sched = self.axes[axis]
        j = g - (self.maxlevel - sched.maxlevel)
        if 1 <= j <= sched.maxlevel:
            return j
        return None


def build_grid_schedule(dims) -> GridSchedule:
    nx, ny, nz = dims
    return GridSchedule(axes=(build_schedule(nx), build_schedule(ny), build_schedule(nz)))
