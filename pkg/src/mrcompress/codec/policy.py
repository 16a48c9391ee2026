"""Pointwise error bounds, optionally tightened on early interpolation levels.

Early-level points seed every later prediction, so the adaptive policy divides
the user bound by alpha^(maxlevel - level), capped at beta. The final level
always quantizes at the full bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

DEFAULT_ALPHA = 2.25
DEFAULT_BETA = 8.0


@dataclass(frozen=True)
class ErrorBoundPolicy:
    eb: float
    adaptive: bool = False
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not (np.isfinite(self.eb) and self.eb > 0.0):
            raise ShapeError(f"error bound must be finite and positive, got {self.eb}")
        if self.adaptive:
            if not self.alpha > 1.0:
                raise ShapeError(f"alpha must exceed 1, got {self.alpha}")
            if not self.beta >= 1.0:
                raise ShapeError(f"beta must be at least 1, got {self.beta}")


def level_error_bound(policy: ErrorBoundPolicy, level: int, maxlevel: int) -> float:
    """Bound applied to targets on ``level`` of a hierarchy topping out at
    ``maxlevel``."""
    if level < 0 or level > maxlevel:
        raise ShapeError(f"level {level} outside [0, {maxlevel}]")
    if not policy.adaptive:
        return policy.eb
    shrink = min(policy.alpha ** (maxlevel - level), policy.beta)
    return policy.eb / shrink
