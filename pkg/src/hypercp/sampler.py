"""Poisson point process sampling for the half-plane model.

The vertex set is a Poisson point process on H with intensity
dmu = (alpha/pi) e^{-alpha h} dx dh.  Windows are axis-aligned rectangles
(possibly height-unbounded); counts are Poisson(mu(window)), x is uniform,
and heights follow a truncated exponential sampled by inverse CDF.

Point sets are returned as float64 arrays of shape (N, 2) with columns
(x, h); this is the bulk representation every other module consumes.

Randomness comes from ``RngStream``: stream(seed, index) wraps a
``numpy.random.Generator`` on the counter-based Philox bit generator keyed by
(seed, index).  Identical (seed, index) reproduce identical draws on every
platform, and distinct indices give independent streams, so trial i of an
experiment always owns stream index i regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hypercp.geometry import HalfPlanePoint

__all__ = [
    "Window",
    "Region",
    "RngStream",
    "region_mass",
    "sample_window",
    "sample_root",
    "sample_conditioned",
]

_MASK64 = (1 << 64) - 1


class RngStream:
    """Deterministic pseudo-random stream derived from (master seed, index).

    Thin wrapper over ``numpy.random.Generator(Philox(key=[seed, index]))``.
    Each concurrent task should own one stream; draws interleave in call
    order, so a fixed call sequence is byte-reproducible.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        key = np.array([self.seed & _MASK64, self.index & _MASK64], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def uint64(self) -> int:
        """One raw 64-bit draw (used to seed jitted kernels)."""
        return int(self.gen.integers(0, 1 << 64, dtype=np.uint64))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, index={self.index})"


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle [x_min, x_max) x [h_min, h_max).

    ``h_max`` may be ``inf``; the mass stays finite.  The half-open convention
    only matters for membership tests (region conditioning); the sampling law
    does not see boundaries.
    """

    x_min: float
    x_max: float
    h_min: float = 0.0
    h_max: float = math.inf

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max})")
        if not 0.0 <= self.h_min < self.h_max:
            raise ValueError(f"need 0 <= h_min < h_max, got [{self.h_min}, {self.h_max})")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    def contains(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Vectorized membership under the half-open convention."""
        return (x >= self.x_min) & (x < self.x_max) & (h >= self.h_min) & (h < self.h_max)

    def covers(self, other: "Window") -> bool:
        return (
            self.x_min <= other.x_min
            and other.x_max <= self.x_max
            and self.h_min <= other.h_min
            and other.h_max <= self.h_max
        )


def _windows_overlap(a: Window, b: Window) -> bool:
    return (
        a.x_min < b.x_max
        and b.x_min < a.x_max
        and a.h_min < b.h_max
        and b.h_min < a.h_max
    )


@dataclass(frozen=True)
class Region:
    """Finite union of pairwise disjoint windows."""

    windows: tuple[Window, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        ws = tuple(self.windows)
        object.__setattr__(self, "windows", ws)
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                if _windows_overlap(ws[i], ws[j]):
                    raise ValueError(f"region windows overlap: {ws[i]} and {ws[j]}")

    def contains(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(x), dtype=bool)
        for w in self.windows:
            out |= w.contains(x, h)
        return out

    def mass(self, alpha: float) -> float:
        return sum(region_mass(w, alpha) for w in self.windows)


def region_mass(w: Window, alpha: float) -> float:
    """Intensity mass mu(w) = (width/pi) (e^{-alpha h_min} - e^{-alpha h_max})."""
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    tail_lo = math.exp(-alpha * w.h_min)
    tail_hi = 0.0 if math.isinf(w.h_max) else math.exp(-alpha * w.h_max)
    return (w.width / math.pi) * (tail_lo - tail_hi)


def _sample_heights(w: Window, alpha: float, count: int, gen: np.random.Generator) -> np.ndarray:
    """Truncated-exponential heights on [h_min, h_max) by inverse CDF."""
    u = gen.random(count)
    if math.isinf(w.h_max):
        return w.h_min - np.log1p(-u) / alpha
    span_mass = -math.expm1(-alpha * (w.h_max - w.h_min))
    return w.h_min - np.log1p(-u * span_mass) / alpha


def sample_window(w: Window, alpha: float, rng: RngStream) -> np.ndarray:
    """One PPP configuration on a window: float64 array of shape (N, 2).

    Count ~ Poisson(mu(w)); x uniform on the width, h truncated exponential.
    """
    mu = region_mass(w, alpha)
    count = int(rng.gen.poisson(mu))
    x = rng.gen.uniform(w.x_min, w.x_max, size=count)
    h = _sample_heights(w, alpha, count, rng.gen)
    return np.column_stack((x, h)) if count else np.empty((0, 2))


def sample_root(alpha: float, rng: RngStream) -> HalfPlanePoint:
    """The distinguished root (0, h) with h exponential of rate alpha."""
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    h = -math.log1p(-rng.gen.random()) / alpha
    return HalfPlanePoint(x=0.0, h=h)


def sample_conditioned(w: Window, forbidden: Region, alpha: float, rng: RngStream) -> np.ndarray:
    """PPP sample on w conditioned on no points in ``forbidden`` (thinning).

    For a PPP, deleting the points of independent sub-regions is an exact
    realization of the conditional law; no configuration-level rejection is
    needed.  Every forbidden window must lie inside w.
    """
    for fw in forbidden.windows:
        if not w.covers(fw):
            raise ValueError(f"forbidden window {fw} is not contained in {w}")
    pts = sample_window(w, alpha, rng)
    if len(pts) == 0 or not forbidden.windows:
        return pts
    keep = ~forbidden.contains(pts[:, 0], pts[:, 1])
    return pts[keep]
