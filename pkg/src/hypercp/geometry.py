"""Pure geometry of the half-plane model.

Vertices live on H = R x [0, inf) with coordinates (x, h); two vertices are
adjacent iff their horizontal distance is at most e^{(h+h')/2} (boundary
inclusive).  The finite model wraps the strip [-pi n/2, pi n/2] x [0, 2 log n]
into a cylinder of circumference pi n.  The classical disk picture maps onto
the half-plane via ``map_disk_to_halfplane``.

Everything here is stateless and safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PolarPoint",
    "HalfPlanePoint",
    "GraphParams",
    "expected_degree",
    "height_for_degree",
    "hyperbolic_distance",
    "map_disk_to_halfplane",
    "adjacent",
    "dist_x",
]


def _normalize_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t > math.pi:
        t -= 2.0 * math.pi
    elif t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class PolarPoint:
    """Point in the hyperbolic disk: radius r >= 0, angle in (-pi, pi]."""

    r: float
    theta: float

    def __post_init__(self) -> None:
        if self.r < 0.0:
            raise ValueError(f"radial coordinate must be >= 0, got {self.r}")
        object.__setattr__(self, "theta", _normalize_angle(self.theta))


@dataclass(frozen=True)
class HalfPlanePoint:
    """Point in the upper half-plane: any real x, height h >= 0."""

    x: float
    h: float

    def __post_init__(self) -> None:
        if self.h < 0.0:
            raise ValueError(f"height must be >= 0, got {self.h}")


@dataclass(frozen=True)
class GraphParams:
    """Model parameters: tail parameter alpha in (1/2, 1), optional scale n.

    ``n`` is the linear scale of the finite (wrapped) model; ``None`` means the
    infinite half-plane.  The intensity normalization nu is fixed at 1.
    """

    alpha: float
    n: float | None = None

    def __post_init__(self) -> None:
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (1/2, 1), got {self.alpha}")
        if self.n is not None and self.n <= 0.0:
            raise ValueError(f"scale n must be positive, got {self.n}")

    @property
    def radius(self) -> float:
        """Disk radius R = 2 log n of the finite model."""
        if self.n is None:
            raise ValueError("infinite model has no disk radius")
        return 2.0 * math.log(self.n)

    @property
    def circumference(self) -> float:
        """Circumference pi*n of the wrapped strip."""
        if self.n is None:
            raise ValueError("infinite model has no circumference")
        return math.pi * self.n


def _check_alpha(alpha: float) -> None:
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")


def expected_degree(h: float, alpha: float) -> float:
    """Degree scale D(h) = e^{h/2} / (alpha - 1/2) of a vertex at height h."""
    _check_alpha(alpha)
    return math.exp(0.5 * h) / (alpha - 0.5)


def height_for_degree(d: float, alpha: float, require_nonnegative: bool = False) -> float:
    """Height H(d) = 2 log((alpha - 1/2) d) at which the degree scale equals d.

    Inverse of :func:`expected_degree`.  For d < 1/(alpha - 1/2) the height is
    negative; pass ``require_nonnegative=True`` to make that a ValueError.
    """
    _check_alpha(alpha)
    prod = (alpha - 0.5) * d
    if prod <= 0.0:
        raise ValueError(f"degree must be positive, got {d}")
    h = 2.0 * math.log(prod)
    if require_nonnegative and h < 0.0:
        raise ValueError(f"degree {d} maps below the ground line (h = {h:.4g})")
    return h


def hyperbolic_distance(u: PolarPoint, v: PolarPoint) -> float:
    """Hyperbolic distance between two disk points via the cosh law.

    cosh d = cosh r_u cosh r_v - sinh r_u sinh r_v cos(theta_u - theta_v);
    the acosh argument is clamped to [1, inf) to absorb rounding near
    coincident points.
    """
    arg = math.cosh(u.r) * math.cosh(v.r) - math.sinh(u.r) * math.sinh(v.r) * math.cos(
        u.theta - v.theta
    )
    return math.acosh(max(arg, 1.0))


def map_disk_to_halfplane(p: PolarPoint, n: float) -> HalfPlanePoint:
    """Send a disk point to the half-plane: (r, theta) -> (theta e^{R/2}/2, R - r).

    R = 2 log n; the disk boundary r = R lands on the ground line h = 0.
    Raises ValueError if the point lies outside the disk (r > R).
    """
    if n <= 0.0:
        raise ValueError(f"scale n must be positive, got {n}")
    big_r = 2.0 * math.log(n)
    if p.r > big_r:
        raise ValueError(f"radial coordinate {p.r} exceeds disk radius {big_r}")
    return HalfPlanePoint(x=0.5 * p.theta * math.exp(0.5 * big_r), h=big_r - p.r)


def dist_x(x_u: float, x_v: float, circumference: float | None = None) -> float:
    """Horizontal distance: |x - x'| on the line, circular distance on the cylinder."""
    d = abs(x_u - x_v)
    if circumference is None:
        return d
    d = math.fmod(d, circumference)
    return min(d, circumference - d)


def adjacent(u: HalfPlanePoint, v: HalfPlanePoint, circumference: float | None = None) -> bool:
    """Adjacency predicate: horizontal distance at most e^{(h_u+h_v)/2}.

    The threshold is boundary inclusive.  Pass ``circumference`` (= pi*n) for
    the wrapped model, where the horizontal distance is circular.
    """
    return dist_x(u.x, v.x, circumference) <= math.exp(0.5 * (u.h + v.h))
