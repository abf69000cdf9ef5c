"""Decreasing rearrangements and the one-dimensional averaging integrals.

A step function on the tree has a decreasing rearrangement: a non-increasing,
left-continuous step function on (0, 1]. Power-law profiles ``c * t**(-a)``
are kept symbolic so their averaging integrals evaluate in closed form; for
step profiles the integrals fall back to piecewise adaptive Gauss quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentIntegralError, DomainError, ShapeError
from .tree import StepFunction, Tree

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(32)


# ---------------------------------------------------------------------------
# profiles on (0, 1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineStepFunction:
    """Step function on (0, 1]: ``values[i]`` on ``(breakpoints[i], breakpoints[i+1]]``.

    Breakpoints are strictly increasing from 0 to 1; left-continuity is the
    representation convention and matters only on the null set of jumps.
    """

    breakpoints: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size + 1:
            raise ShapeError("need k+1 breakpoints for k piece values")
        if t[0] != 0.0 or abs(t[-1] - 1.0) > 1e-12 or np.any(np.diff(t) <= 0):
            raise ShapeError("breakpoints must increase strictly from 0 to 1")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("piece values must be finite and nonnegative")
        t = t.copy()
        v = v.copy()
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    @property
    def piece_count(self) -> int:
        return self.values.size

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def prefix_integrals(self) -> np.ndarray:
        """Integral from 0 up to each breakpoint (leading 0 included)."""
        return np.concatenate(([0.0], np.cumsum(self.values * self.widths())))

    def integral(self) -> float:
        return float((self.values * self.widths()).sum())

    def power_integral(self, r: float) -> float:
        """Exact integral of ``g**r`` (finite sum; no quadrature needed)."""
        return float((self.values**r * self.widths()).sum())

    def is_non_increasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0))

    def __call__(self, t):
        """Left-continuous evaluation on (0, 1]."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, t, side="left") - 1
        idx = np.clip(idx, 0, self.piece_count - 1)
        return self.values[idx]

    def running_average(self, t):
        """``(1/t) * integral of g over (0, t]``, exact per piece."""
        t = np.asarray(t, dtype=np.float64)
        prefix = self.prefix_integrals()
        idx = np.clip(
            np.searchsorted(self.breakpoints, t, side="left") - 1,
            0,
            self.piece_count - 1,
        )
        partial = prefix[idx] + self.values[idx] * (t - self.breakpoints[idx])
        return partial / t

    def level_measure(self, lam: float) -> float:
        """Lebesgue measure of ``{g > lam}``; exact finite sum."""
        return float(self.widths()[self.values > lam].sum())


@dataclass(frozen=True)
class PowerLawFunction:
    """The profile ``g(t) = c * t**(-a)`` on (0, 1], kept in closed form.

    ``a`` must lie in [0, 1) so the mean exists; p-th power integrability
    (``a * p < 1``) is checked where it is needed. The normalization is
    ``integral == c / (1 - a)``.
    """

    c: float
    a: float

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError(f"coefficient must be positive, got {self.c}")
        if not 0.0 <= self.a < 1.0:
            raise DomainError(f"exponent must lie in [0, 1), got {self.a}")

    @classmethod
    def from_mean_and_exponent(cls, f: float, alpha: float) -> "PowerLawFunction":
        """Profile ``f*(1-alpha) * t**(-alpha)`` with mean exactly ``f``."""
        if f <= 0:
            raise DomainError(f"mean must be positive, got {f}")
        return cls(c=f * (1.0 - alpha), a=alpha)

    @classmethod
    def self_similar(cls, f: float, alpha: float) -> "PowerLawFunction":
        """Profile ``(f/alpha) * t**(-1+1/alpha)`` whose running average is
        ``alpha`` times itself; ``alpha >= 1`` is the extremal-curve location."""
        if f <= 0 or alpha < 1.0:
            raise DomainError(f"need f > 0 and alpha >= 1, got f={f}, alpha={alpha}")
        return cls(c=f / alpha, a=1.0 - 1.0 / alpha)

    def integral(self) -> float:
        return self.c / (1.0 - self.a)

    def power_integral(self, r: float) -> float:
        if self.a * r >= 1.0:
            raise DivergentIntegralError(
                f"t**(-{self.a * r:g}) is not integrable near 0"
            )
        return self.c**r / (1.0 - self.a * r)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.c * t ** (-self.a)

    def running_average(self, t):
        return self(t) / (1.0 - self.a)

    def level_measure(self, lam: float) -> float:
        if lam <= 0:
            return 1.0
        if self.a == 0.0:
            return 1.0 if self.c > lam else 0.0
        if lam < self.c:
            return 1.0  # even the value at t = 1 exceeds lam
        return (self.c / lam) ** (1.0 / self.a)


# ---------------------------------------------------------------------------
# rearrangement and discretization
# ---------------------------------------------------------------------------


def decreasing_rearrangement(phi: StepFunction) -> LineStepFunction:
    """Sort the leaf values descending onto (0, 1] with cumulative measures.

    The sort is stable, so equal values keep their canonical leaf order and
    repeated runs produce identical golden files. The result is
    equimeasurable with ``phi``: level sets match exactly for every lambda.
    """
    order = np.argsort(-phi.leaf_values, kind="stable")
    n = phi.tree.leaf_count
    breakpoints = np.arange(n + 1, dtype=np.float64) / n
    return LineStepFunction(breakpoints, phi.leaf_values[order])


def discretize(g, pieces: int) -> LineStepFunction:
    """Replace ``g`` by its exact cell averages on ``pieces`` equal cells.

    Averaging preserves the integral exactly and can only shrink p-th
    moments, so discretized profiles approach the original from below.
    """
    if pieces < 1:
        raise DomainError(f"need at least one piece, got {pieces}")
    edges = np.arange(pieces + 1, dtype=np.float64) / pieces
    if isinstance(g, PowerLawFunction):
        # antiderivative c * t**(1-a) / (1-a), exact per cell
        primitive = g.c * edges ** (1.0 - g.a) / (1.0 - g.a)
        cell_means = np.diff(primitive) * pieces
    elif isinstance(g, LineStepFunction):
        prefix = g.prefix_integrals()
        idx = np.clip(
            np.searchsorted(g.breakpoints, edges, side="left") - 1,
            0,
            g.piece_count - 1,
        )
        at_edges = prefix[idx] + g.values[idx] * (edges - g.breakpoints[idx])
        at_edges[0] = 0.0
        cell_means = np.diff(at_edges) * pieces
    else:
        raise DomainError(f"cannot discretize {type(g).__name__}")
    return LineStepFunction(edges, cell_means)


def random_rearrangement(g: LineStepFunction, tree: Tree, seed=None) -> StepFunction:
    """Scatter the pieces of ``g`` over the tree leaves as a step function.

    ``g`` must consist of exactly ``leaf_count`` equal-width pieces (use
    :func:`discretize` first). ``seed=None`` keeps the identity arrangement;
    an integer seed draws a uniformly random, reproducible permutation.
    Every moment of the result equals the corresponding integral of ``g``
    exactly, because the value multiset is unchanged.
    """
    n = tree.leaf_count
    if g.piece_count != n:
        raise ShapeError(f"profile has {g.piece_count} pieces, tree has {n} leaves")
    if np.max(np.abs(g.breakpoints - np.arange(n + 1) / n)) > 1e-12:
        raise ShapeError("profile pieces must have equal width 1/leaf_count")
    values = g.values
    if seed is not None:
        rng = np.random.default_rng(seed)
        values = values[rng.permutation(n)]
    return StepFunction(tree, values)


# ---------------------------------------------------------------------------
# averaging integrals
# ---------------------------------------------------------------------------


def _gauss_panel(fn, lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return half * float(np.dot(_GAUSS_W, fn(mid + half * _GAUSS_X)))


def _adaptive_gauss(fn, lo, hi, scale, rel_tol=1e-10, max_splits=24) -> float:
    """32-node Gauss panels, bisected until the refinement stops moving the
    panel value relative to ``scale``."""
    whole = _gauss_panel(fn, lo, hi)
    stack = [(lo, hi, whole, 0)]
    total = 0.0
    while stack:
        a, b, estimate, level = stack.pop()
        m = 0.5 * (a + b)
        left = _gauss_panel(fn, a, m)
        right = _gauss_panel(fn, m, b)
        if abs(left + right - estimate) <= rel_tol * scale or level >= max_splits:
            total += left + right
        else:
            stack.append((a, m, left, level + 1))
            stack.append((m, b, right, level + 1))
    return total


def _check_hardy_exponents(p: float, q: float) -> tuple[float, float]:
    if p <= 1.0:
        raise DomainError(f"p must be > 1, got {p}")
    if q != 0.0 and not 1.0 <= q <= p:
        raise DomainError(f"q must lie in [1, p] (or 0 for the pure power), got {q}")
    return float(p), float(q)


def hardy_moment(g, p: float, q: float) -> float:
    """``integral of (running average of g)**(p-q) * g**q over (0, 1]``.

    Power laws use the closed form ``c**p * (1-a)**(q-p) / (1 - a*p)``;
    step profiles are integrated piece by piece with adaptive Gauss panels
    (the running average restricted to one piece is smooth).
    """
    p, q = _check_hardy_exponents(p, q)
    if isinstance(g, PowerLawFunction):
        if g.a * p >= 1.0:
            raise DivergentIntegralError(
                f"averaging integral diverges: a*p = {g.a * p:g} >= 1"
            )
        return g.c**p * (1.0 - g.a) ** (q - p) / (1.0 - g.a * p)
    if not isinstance(g, LineStepFunction):
        raise DomainError(f"unsupported profile {type(g).__name__}")
    if q == p:
        return g.power_integral(p)

    t = g.breakpoints
    v = g.values
    prefix = g.prefix_integrals()
    scale = max(abs(g.integral()) ** p, 1.0)
    total = 0.0
    for i in range(g.piece_count):
        vi = v[i]
        offset = prefix[i] - vi * t[i]  # running avg = vi + offset/t on the piece

        if q == 0.0:
            fn = lambda x: (vi + offset / x) ** p
        elif vi == 0.0:
            continue  # g**q kills the piece
        else:
            weight = vi**q
            fn = lambda x: weight * (vi + offset / x) ** (p - q)
        if offset == 0.0:
            # running average equals vi on the whole piece: closed form
            total += (vi**p if q == 0.0 else vi**q * vi ** (p - q)) * (t[i + 1] - t[i])
            continue
        total += _adaptive_gauss(fn, t[i], t[i + 1], scale)
    return total


def hardy_power(g, p: float) -> float:
    """``integral of (running average of g)**p over (0, 1]``."""
    return hardy_moment(g, p, 0.0)
