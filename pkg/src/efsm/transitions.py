"""Action discretization and per-action transition statistics.

The transition layer keeps, for every discrete action, an exponentially
weighted co-occurrence matrix F and its row-mass vector F_o.  Row-stochastic
transition matrices are read out as diag(F_o)^-1 F.  The stack grows a row
and a column whenever a new state is discovered, so matrix shape always
matches the number of states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ActionRangeError,
    DimensionMismatchError,
    InvalidDistributionError,
    NoStatesError,
)

__all__ = ["ActionCodec", "TransitionStack"]

# Row mass below this is rescaled back up.  Exponential forgetting shrinks
# rows that stop being excited by (1 - phi) per update; once both F and F_o
# reach denormal range the readout ratio degrades (at the bottom every entry
# of a row collapses onto the same denormal and the row reads as all ones).
# Rescaling numerator and denominator together leaves the readout unchanged.
_MASS_FLOOR = 1e-250


@dataclass(frozen=True)
class ActionCodec:
    """Uniform binning of a bounded continuous control into 1-based action ids.

    The control range (lo, hi] is split into q = ceil((hi - lo) / width)
    intervals of the given width; the last interval is truncated at hi.
    Interval r covers (lo + (r-1)*width, lo + r*width], except the first,
    which is closed at lo so the full range is covered.
    """

    lo: float
    hi: float
    width: float

    def __post_init__(self) -> None:
        if not (self.hi > self.lo):
            raise ActionRangeError(f"need hi > lo, got ({self.lo}, {self.hi})")
        if not (self.width > 0.0):
            raise ActionRangeError(f"need width > 0, got {self.width}")

    @property
    def q(self) -> int:
        """Number of actions."""
        return int(math.ceil((self.hi - self.lo) / self.width))

    def encode(self, u: float) -> int:
        """Map a control value to its action id, clamping outside the range."""
        if math.isnan(u):
            raise ActionRangeError("control value is NaN")
        u = min(max(u, self.lo), self.hi)
        if u <= self.lo:
            return 1
        r = int(math.ceil((u - self.lo) / self.width))
        return min(max(r, 1), self.q)

    def interval(self, r: int) -> tuple[float, float]:
        """Bounds (a, b] of action r's interval; the first is closed at a."""
        self._check_action(r)
        a = self.lo + (r - 1) * self.width
        b = min(self.lo + r * self.width, self.hi)
        return a, b

    def midpoint(self, r: int) -> float:
        """Representative control value for action r."""
        a, b = self.interval(r)
        return 0.5 * (a + b)

    def _check_action(self, r: int) -> None:
        if not (1 <= r <= self.q):
            raise ActionRangeError(f"action {r} outside 1..{self.q}")


class TransitionStack:
    """Per-action transition statistics over a growing state set.

    F has shape (q, n, n) and F_o shape (q, n).  Both are updated with the
    same exponential forgetting factor phi, so F_o stays equal to the row
    sums of F up to roundoff and diag(F_o)^-1 F is row stochastic.
    """

    def __init__(self, q: int, phi: float = 0.1, eps_bar: float = 1e-6) -> None:
        if q < 1:
            raise ActionRangeError(f"need at least one action, got q={q}")
        if not (0.0 <= phi <= 1.0):
            raise ValueError(f"phi must be in [0, 1], got {phi}")
        if not (eps_bar > 0.0):
            raise ValueError(f"eps_bar must be positive, got {eps_bar}")
        self.q = q
        self.phi = float(phi)
        self.eps_bar = float(eps_bar)
        self.F = np.zeros((q, 0, 0))
        self.F_o = np.zeros((q, 0))

    @property
    def n_states(self) -> int:
        return self.F.shape[1]

    def expand(self) -> None:
        """Grow every action's statistics by one state.

        Existing rows gain one cell of mass eps_bar (and their row mass grows
        by the same eps_bar); the new state's row starts uniform with total
        mass n_new * eps_bar.  Row stochasticity of the readout is preserved.
        """
        n = self.n_states
        e = self.eps_bar
        F = np.full((self.q, n + 1, n + 1), e)
        F[:, :n, :n] = self.F
        F_o = np.empty((self.q, n + 1))
        F_o[:, :n] = self.F_o + e
        F_o[:, n] = (n + 1) * e
        self.F = F
        self.F_o = F_o

    def identify(self, r: int, prev: np.ndarray, cur: np.ndarray) -> None:
        """Fold one observed soft transition under action r into F and F_o.

        prev and cur are state probability vectors over the current n states.
        Only action r's statistics move; the correction to F_o uses the row
        sums of the outer product so F_o tracks F's row sums exactly.
        """
        self._check_action(r)
        prev = self._check_dist(prev, "prev")
        cur = self._check_dist(cur, "cur")
        k = r - 1
        gamma = np.outer(prev, cur)
        self.F[k] += self.phi * (gamma - self.F[k])
        self.F_o[k] += self.phi * (gamma.sum(axis=1) - self.F_o[k])
        for i in np.nonzero(self.F_o[k] < _MASS_FLOOR)[0]:
            fo = self.F_o[k][i]
            if fo > 0.0:
                self.F[k][i] *= _MASS_FLOOR / fo
            else:
                # no surviving mass at all (phi = 1 with an unexcited row):
                # nothing to rescale, fall back to the uninformative row
                self.F[k][i] = _MASS_FLOOR / self.n_states
            self.F_o[k][i] = _MASS_FLOOR

    def matrix(self, r: int) -> np.ndarray:
        """Row-stochastic transition matrix for action r."""
        self._check_action(r)
        if self.n_states == 0:
            raise NoStatesError("no states discovered yet")
        return self.F[r - 1] / self.F_o[r - 1][:, None]

    def marginal(self) -> np.ndarray:
        """Mean of the per-action transition matrices."""
        if self.n_states == 0:
            raise NoStatesError("no states discovered yet")
        return (self.F / self.F_o[:, :, None]).mean(axis=0)

    def _check_action(self, r: int) -> None:
        if not (1 <= r <= self.q):
            raise ActionRangeError(f"action {r} outside 1..{self.q}")

    def _check_dist(self, p: np.ndarray, name: str) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_states,):
            raise DimensionMismatchError(
                f"{name} has shape {p.shape}, expected ({self.n_states},)"
            )
        if np.any(p < 0.0) or not np.isfinite(p).all():
            raise InvalidDistributionError(f"{name} has negative or non-finite mass")
        if abs(p.sum() - 1.0) > 1e-6:
            raise InvalidDistributionError(f"{name} sums to {p.sum()!r}, not 1")
        return p
