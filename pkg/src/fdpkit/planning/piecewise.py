"""Piecewise-linear over-approximation of exp on [-2W, 0].

The planners normalize the classical score exponent by subtracting W = |w|_1,
which maps every attainable exponent into [-2W, 0] and leaves the attack
distribution unchanged. On that interval exp is approximated from above by the
chords over a grid of segments of width eps (the last segment is truncated
when 2W is not a multiple of eps). Chords over a convex function sandwich it:

    1 <= fhat(z) / exp(z) <= 1 + eps^2 / 2.

Segment slopes decrease strictly, which is what lets the LP relaxations fill
segments in the correct order whenever smaller values are preferred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ValidationError

__all__ = ["PiecewiseExpApprox"]


@dataclass(frozen=True)
class PiecewiseExpApprox:
    """Chord approximation of exp(z) for z in [-2W, 0].

    breakpoints: 0 = b_0 > b_1 > ... > b_L = -2W
    caps:        segment widths cap_l = b_{l-1} - b_l  (length L)
    slopes:      gamma_l = (exp(b_{l-1}) - exp(b_l)) / cap_l, strictly
                 positive and strictly decreasing
    """

    W: float
    eps: float
    breakpoints: np.ndarray
    caps: np.ndarray
    slopes: np.ndarray

    @staticmethod
    def from_weights(weights: np.ndarray, eps: float) -> "PiecewiseExpApprox":
        if not 0 < eps < 1:
            raise ValidationError(f"eps must lie in (0, 1), got {eps}")
        W = float(np.abs(np.asarray(weights, dtype=float)).sum())
        if W == 0.0:
            # All-zero weights: the domain collapses to {0}; the score is
            # constant 1 and there is nothing to approximate.
            empty = np.array([])
            empty.flags.writeable = False
            bp = np.array([0.0])
            bp.flags.writeable = False
            return PiecewiseExpApprox(W=0.0, eps=eps, breakpoints=bp,
                                      caps=empty, slopes=empty)
        L = int(math.ceil(2.0 * W / eps))
        bp = -eps * np.arange(L + 1, dtype=float)
        bp[-1] = -2.0 * W
        # rounding in 2W/eps can land the second-to-last grid point on (or
        # past) the domain end, leaving a zero or negative width; merge it
        while len(bp) > 2 and bp[-2] <= bp[-1] + 1e-12:
            bp = np.delete(bp, -2)
        caps = bp[:-1] - bp[1:]
        ev = np.exp(bp)
        slopes = (ev[:-1] - ev[1:]) / caps
        for a in (bp, caps, slopes):
            a.flags.writeable = False
        return PiecewiseExpApprox(W=W, eps=eps, breakpoints=bp, caps=caps,
                                  slopes=slopes)

    @property
    def segments(self) -> int:
        return len(self.caps)

    def evaluate(self, z) -> np.ndarray:
        """fhat(z) for z in [-2W, 0] (vectorized)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z > 1e-12) or np.any(z < -2.0 * self.W - 1e-12):
            raise ValidationError("z outside the approximation domain [-2W, 0]")
        if self.segments == 0:
            return np.ones_like(z)
        t = np.clip(-z, 0.0, 2.0 * self.W)  # descent from 0
        cum = np.cumsum(self.caps)
        # prefix[l] = drop in fhat after l full segments
        prefix = np.concatenate([[0.0], np.cumsum(self.slopes * self.caps)])
        seg = np.searchsorted(cum, t, side="left")
        seg = np.minimum(seg, self.segments - 1)
        start = np.concatenate([[0.0], cum])[seg]
        return 1.0 - prefix[seg] - self.slopes[seg] * (t - start)

    def fill(self, z: float) -> np.ndarray:
        """Correctly ordered per-segment amounts summing to -z.

        Segment l is filled to its cap before l+1 receives anything; this is
        the fill pattern the interval-ordering constraints describe, used to
        reconstruct auxiliary variables of reported plans.
        """
        if self.segments == 0:
            return np.array([])
        t = float(np.clip(-z, 0.0, 2.0 * self.W))
        fills = np.minimum(self.caps, np.maximum(0.0, t - np.concatenate([[0.0], np.cumsum(self.caps)])[:-1]))
        return fills

    def value_from_fill(self, fills: np.ndarray) -> float:
        return 1.0 - float(np.dot(self.slopes, fills)) if self.segments else 1.0
