"""Domains, uniform tensor grids, quadrature weights, and the dispersal measure.

Bounded boxes carry closed trapezoid grids (face nodes included so boundary
values are first-class); tori carry midpoint grids with wrap-around metric.
All objects are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

BOUNDED = "bounded"
TORUS = "torus"

DEFAULT_G_FLOOR = 1e-8


@dataclass(frozen=True)
class Domain:
    """A box in R^n (n = 1 or 2), either bounded or a periodic torus cell.

    An unbounded line is declared through ``truncation_radii``: the radii of
    the nested windows (-R_k, R_k) used to exhaust it, optionally anchored to
    a ``core`` interval every window must contain.
    """

    bounds: tuple[tuple[float, float], ...]
    geometry: str = BOUNDED
    truncation_radii: tuple[float, ...] | None = None
    core: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if self.dim not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dim}")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"need lower < upper on every axis, got ({lo}, {hi})")
        if self.geometry not in (BOUNDED, TORUS):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.truncation_radii is not None:
            radii = tuple(float(r) for r in self.truncation_radii)
            object.__setattr__(self, "truncation_radii", radii)
            if self.geometry == TORUS:
                raise ValueError("a torus cell cannot carry an unbounded truncation sequence")
            if self.dim != 1:
                raise ValueError("unbounded exhaustion is supported in 1D only")
            if any(r <= 0 for r in radii):
                raise ValueError("truncation radii must be positive")
        if self.core is not None:
            lo, hi = self.core
            if not lo < hi:
                raise ValueError("core interval needs lower < upper")

    @classmethod
    def interval(cls, lo: float, hi: float, geometry: str = BOUNDED) -> "Domain":
        return cls(((lo, hi),), geometry)

    @classmethod
    def box(cls, bounds: Sequence[tuple[float, float]], geometry: str = BOUNDED) -> "Domain":
        return cls(tuple(bounds), geometry)

    @classmethod
    def line(
        cls,
        truncation_radii: Sequence[float],
        core: tuple[float, float] | None = None,
    ) -> "Domain":
        """The real line, represented by its nested truncation windows."""
        r_max = max(truncation_radii)
        return cls(((-r_max, r_max),), BOUNDED, tuple(truncation_radii), core)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def is_unbounded(self) -> bool:
        return self.truncation_radii is not None

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.bounds)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, other: "Domain") -> bool:
        """Axis-wise interval inclusion: other subset of self."""
        return all(
            lo_s <= lo_o and hi_o <= hi_s
            for (lo_s, hi_s), (lo_o, hi_o) in zip(self.bounds, other.bounds)
        )


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with quadrature weights and boundary tags."""

    domain: Domain
    shape: tuple[int, ...]
    points: np.ndarray  # (M, n)
    weights: np.ndarray  # (M,), positive, sums to |Omega|
    boundary_mask: np.ndarray  # (M,) bool, all False on a torus
    spacing: tuple[float, ...]

    def __post_init__(self) -> None:
        for arr in (self.points, self.weights, self.boundary_mask):
            arr.setflags(write=False)
        vol = self.domain.volume
        if abs(float(self.weights.sum()) - vol) > 1e-12 * vol:
            raise AssertionError("quadrature weights do not sum to the domain volume")
        if (self.weights <= 0).any():
            raise AssertionError("quadrature weights must be positive")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask


@dataclass(frozen=True)
class MeasureWeights:
    """Per-node masses of the dispersal measure w_i / g(x_i)^n.

    Nodes where g falls below the degeneracy floor are excluded: their mass
    is zeroed and flagged, so they contribute empty columns downstream.
    """

    dmu: np.ndarray
    degenerate_mask: np.ndarray

    def __post_init__(self) -> None:
        self.dmu.setflags(write=False)
        self.degenerate_mask.setflags(write=False)


def build_grid(domain: Domain, n: int | Sequence[int]) -> Grid:
    """Uniform tensor grid: closed trapezoid nodes on boxes, midpoints on tori."""
    if domain.is_unbounded:
        raise ValueError("build grids on bounded truncation windows, not the line itself")
    counts = (int(n),) * domain.dim if np.ndim(n) == 0 else tuple(int(c) for c in n)
    if len(counts) != domain.dim:
        raise ValueError("one node count per axis required")
    if any(c < 4 for c in counts):
        raise ValueError("need at least 4 nodes per axis")

    axes, axis_weights, axis_boundary, spacing = [], [], [], []
    for (lo, hi), count in zip(domain.bounds, counts):
        length = hi - lo
        if domain.geometry == TORUS:
            h = length / count
            axes.append(lo + (np.arange(count) + 0.5) * h)
            axis_weights.append(np.full(count, h))
            axis_boundary.append(np.zeros(count, dtype=bool))
        else:
            h = length / (count - 1)
            axes.append(np.linspace(lo, hi, count))
            w = np.full(count, h)
            w[0] = w[-1] = h / 2
            axis_weights.append(w)
            edge = np.zeros(count, dtype=bool)
            edge[0] = edge[-1] = True
            axis_boundary.append(edge)
        spacing.append(h)

    if domain.dim == 1:
        points = axes[0][:, None]
        weights = axis_weights[0].copy()
        boundary = axis_boundary[0].copy()
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([xx.ravel(), yy.ravel()])
        weights = np.multiply.outer(axis_weights[0], axis_weights[1]).ravel()
        bx, by = np.meshgrid(axis_boundary[0], axis_boundary[1], indexing="ij")
        boundary = (bx | by).ravel()

    return Grid(domain, counts, points, weights, boundary, tuple(spacing))


def integrate(grid: Grid, samples: np.ndarray) -> float:
    """Quadrature sum over the grid nodes."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} samples, got shape {samples.shape}")
    if not np.isfinite(samples).all():
        raise ValueError("samples must be finite at every node")
    return float(grid.weights @ samples)


def shrink_domain(domain: Domain, theta: float) -> Domain:
    """Move every face of a bounded box inward by theta (theta = 0 is the identity)."""
    if domain.geometry != BOUNDED or domain.is_unbounded:
        raise ValueError("shrinking is defined for bounded boxes only")
    theta = float(theta)
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if theta >= min(domain.lengths) / 2:
        raise ValueError("theta leaves an empty interior")
    if theta == 0.0:
        return domain
    return Domain(tuple((lo + theta, hi - theta) for lo, hi in domain.bounds), BOUNDED)


def exhaustion_sequence(domain: Domain, m: int) -> list[Domain]:
    """The first m nested windows (-R_k, R_k) of an unbounded line."""
    if not domain.is_unbounded:
        raise ValueError("exhaustion requires an unbounded domain declaration")
    if m < 2:
        raise ValueError("need at least two exhaustion levels")
    radii = domain.truncation_radii
    if len(radii) < m:
        raise ValueError(f"only {len(radii)} truncation radii declared, {m} requested")
    radii = radii[:m]
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("truncation radii must be strictly increasing")
    if domain.core is not None:
        lo, hi = domain.core
        if lo < -radii[0] or hi > radii[0]:
            raise ValueError("the core interval must be contained in the first window")
    return [Domain.interval(-r, r) for r in radii]


def measure_weights(
    grid: Grid, g_values: np.ndarray, g_floor: float = DEFAULT_G_FLOOR
) -> MeasureWeights:
    """dmu_i = w_i / g(x_i)^n, with sub-floor nodes excluded (zero mass)."""
    g_values = np.asarray(g_values, dtype=float)
    if g_values.shape != (grid.size,):
        raise ValueError("one dispersal value per node required")
    if (g_values < 0).any():
        raise ValueError("the dispersal budget must be nonnegative")
    degenerate = g_values < g_floor
    safe = np.where(degenerate, 1.0, g_values)
    dmu = np.where(degenerate, 0.0, grid.weights / safe ** grid.domain.dim)
    return MeasureWeights(dmu, degenerate)
