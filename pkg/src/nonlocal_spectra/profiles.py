"""Kernel, dispersal-budget, and zero-order coefficient profiles.

Each profile couples an evaluator with the analytic metadata the classifiers
need: support radius and mass for the jump kernel, positivity bounds for the
dispersal budget, supremum / contact exponent / plateau data for the
coefficient.  Shapes come from a closed enumeration so provenance stays
auditable; there is no expression parser.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

KERNEL_SHAPES = ("uniform", "triangular", "cosine")
DISPERSAL_SHAPES = ("constant", "affine", "power")
COEFFICIENT_SHAPES = ("constant", "quadratic-well", "power-contact", "plateau")


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None]
    return pts


@dataclass(frozen=True)
class KernelJ:
    """Radial jump kernel: profile(r) gives J at distance r, zero beyond support."""

    profile: Callable[[np.ndarray], np.ndarray]
    support: float
    dim: int
    mass: float  # declared integral over R^dim
    name: str = "custom"

    def __call__(self, radii) -> np.ndarray:
        return np.asarray(self.profile(np.asarray(radii, dtype=float)), dtype=float)

    @property
    def peak(self) -> float:
        """J(0), the sup of the kernel for the shapes in the enumeration."""
        return float(self(np.zeros(1))[0])

    def validate(self, samples: int = 20001, mass_tol: float = 1e-3) -> None:
        r = np.linspace(0.0, 2.0 * self.support, samples)
        vals = self(r)
        if (vals < -1e-15).any():
            raise ValueError("kernel must be nonnegative")
        if self.peak <= 0:
            raise ValueError("kernel must be positive at the origin")
        outside = vals[r > self.support]
        if (np.abs(outside) > 1e-12 * max(self.peak, 1.0)).any():
            raise ValueError("kernel must vanish outside its declared support radius")
        rs = np.linspace(0.0, self.support, samples)
        js = self(rs)
        if self.dim == 1:
            quad = 2.0 * float(np.trapezoid(js, rs))
        else:
            quad = 2.0 * np.pi * float(np.trapezoid(js * rs, rs))
        if abs(quad - self.mass) > mass_tol * max(abs(self.mass), 1.0):
            raise ValueError(
                f"numerical kernel mass {quad:.6f} disagrees with declared {self.mass:.6f}"
            )


def make_kernel(shape: str, support: float, dim: int = 1) -> KernelJ:
    """Mass-one radial kernel from the closed shape enumeration."""
    s = float(support)
    if s <= 0:
        raise ValueError("support radius must be positive")
    if shape in ("cosine-bump",):
        shape = "cosine"
    if shape == "uniform":
        c = 1.0 / (2.0 * s) if dim == 1 else 1.0 / (np.pi * s * s)
        profile = lambda r: np.where(r <= s, c, 0.0)
    elif shape == "triangular":
        c = 1.0 / s if dim == 1 else 3.0 / (np.pi * s * s)
        profile = lambda r: c * np.clip(1.0 - r / s, 0.0, None)
    elif shape == "cosine":
        c = 1.0 / s if dim == 1 else 1.0 / (s * s * (np.pi / 2.0 - 2.0 / np.pi))
        profile = lambda r: np.where(r <= s, c * 0.5 * (1.0 + np.cos(np.pi * np.minimum(r / s, 1.0))), 0.0)
    else:
        raise ValueError(f"unknown kernel shape {shape!r} (choose from {KERNEL_SHAPES})")
    kernel = KernelJ(profile, s, dim, 1.0, name=shape)
    kernel.validate()
    return kernel


def scale_kernel(kernel: KernelJ, factor: float) -> KernelJ:
    """Pointwise-scaled copy; mass scales along (used for kernel monotonicity)."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    base = kernel.profile
    return KernelJ(
        lambda r, _f=factor: _f * np.asarray(base(r), dtype=float),
        kernel.support,
        kernel.dim,
        factor * kernel.mass,
        name=f"{kernel.name}*{factor:g}",
    )


@dataclass(frozen=True)
class DispersalG:
    """Dispersal budget g with declared bounds 0 < alpha <= g <= beta.

    Degenerate mode allows alpha = 0: g may touch zero on the declared
    ``zero_points``, and 1/g^n is declared locally L^p with ``p_exponent`` > 1.
    """

    func: Callable[[np.ndarray], np.ndarray]
    alpha: float
    beta: float
    degenerate: bool = False
    p_exponent: float | None = None
    zero_points: tuple[tuple[float, ...], ...] = ()
    name: str = "custom"

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.func(_as_points(points)), dtype=float)

    def validate_on(self, points: np.ndarray, tol: float = 1e-12) -> None:
        vals = self(points)
        if self.degenerate:
            if (vals < -tol).any():
                raise ValueError("degenerate dispersal budget must stay nonnegative")
            if self.p_exponent is None or self.p_exponent <= 1:
                raise ValueError("degenerate mode requires a declared L^p exponent > 1")
        else:
            if (vals < self.alpha - tol).any() or (vals > self.beta + tol).any():
                raise ValueError("sampled dispersal budget leaves its declared [alpha, beta]")


def constant_dispersal(value: float) -> DispersalG:
    v = float(value)
    if v <= 0:
        raise ValueError("constant dispersal budget must be positive")
    return DispersalG(lambda p: np.full(p.shape[0], v), v, v, name=f"constant({v:g})")


def affine_dispersal(intercept: float, slope: float, domain_bounds) -> DispersalG:
    """g(x) = intercept + slope * x_1 on a box, with bounds from the corners."""
    corners = [lo for lo, _ in domain_bounds[:1]] + [hi for _, hi in domain_bounds[:1]]
    vals = [intercept + slope * c for c in corners]
    alpha, beta = min(vals), max(vals)
    if alpha <= 0:
        raise ValueError("affine dispersal budget must stay positive on the domain")
    return DispersalG(
        lambda p: intercept + slope * p[:, 0], alpha, beta, name="affine"
    )


def power_dispersal(
    exponent: float, cap: float, dim: int, center: float = 0.0
) -> DispersalG:
    """Degenerate budget g(x) = min(|x - center|^q, cap), vanishing at the center."""
    q, beta = float(exponent), float(cap)
    if q <= 0 or beta <= 0:
        raise ValueError("exponent and cap must be positive")
    if q * dim >= 1.0:
        raise ValueError("need exponent * dim < 1 so that 1/g^n stays locally L^p, p > 1")
    p_exp = 0.5 * (1.0 + 1.0 / (q * dim))

    def func(pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(pts - center, axis=1)
        return np.minimum(d**q, beta)

    return DispersalG(
        func,
        0.0,
        beta,
        degenerate=True,
        p_exponent=p_exp,
        zero_points=((center,) * dim,),
        name=f"power({q:g})",
    )


@dataclass(frozen=True)
class CoefficientA:
    """Zero-order coefficient a with its supremum and contact metadata.

    ``gamma`` is the contact exponent in a(x) ~ sigma - contact_constant *
    d(x, argmax)^gamma near the maximum set; ``plateau`` declares that a
    attains sigma on an open set instead.
    """

    func: Callable[[np.ndarray], np.ndarray]
    sigma: float
    gamma: float | None = None
    contact_constant: float | None = None
    plateau: bool = False
    max_location: tuple[float, ...] | None = None
    plateau_radius: float | None = None
    name: str = "custom"

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.func(_as_points(points)), dtype=float)

    def validate_on(self, points: np.ndarray, tol: float = 1e-12) -> None:
        vals = self(points)
        if (vals > self.sigma + tol).any():
            raise ValueError("sampled coefficient exceeds its declared supremum")
        if self.plateau and self.plateau_radius is not None and self.max_location is not None:
            pts = _as_points(points)
            d = np.linalg.norm(pts - np.asarray(self.max_location), axis=1)
            on_plateau = d <= self.plateau_radius - tol
            if on_plateau.any() and (np.abs(vals[on_plateau] - self.sigma) > tol).any():
                raise ValueError("coefficient must equal sigma on its declared plateau")


def constant_coefficient(value: float) -> CoefficientA:
    v = float(value)
    return CoefficientA(
        lambda p: np.full(p.shape[0], v),
        sigma=v,
        plateau=True,
        name=f"constant({v:g})",
    )


def quadratic_well(sigma: float, curvature: float, center: float | tuple = 0.0) -> CoefficientA:
    """a(x) = sigma - curvature * |x - center|^2 (contact exponent 2)."""
    return power_contact(sigma, 2.0, curvature, center)


def power_contact(
    sigma: float, gamma: float, constant: float, center: float | tuple = 0.0
) -> CoefficientA:
    """a(x) = sigma - constant * |x - center|^gamma."""
    if gamma < 0:
        raise ValueError("contact exponent must be nonnegative")
    if constant <= 0:
        raise ValueError("contact constant must be positive")
    c_arr = np.atleast_1d(np.asarray(center, dtype=float))

    def func(pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(pts - c_arr, axis=1)
        return sigma - constant * d**gamma

    return CoefficientA(
        func,
        sigma=float(sigma),
        gamma=float(gamma),
        contact_constant=float(constant),
        max_location=tuple(c_arr),
        name=f"contact(gamma={gamma:g})",
    )


def plateau_coefficient(
    sigma: float, radius: float, curvature: float = 1.0, center: float | tuple = 0.0
) -> CoefficientA:
    """a = sigma on the ball of the given radius, quadratic drop outside."""
    if radius <= 0:
        raise ValueError("plateau radius must be positive")
    c_arr = np.atleast_1d(np.asarray(center, dtype=float))

    def func(pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(pts - c_arr, axis=1)
        return sigma - curvature * np.clip(d - radius, 0.0, None) ** 2

    return CoefficientA(
        func,
        sigma=float(sigma),
        plateau=True,
        max_location=tuple(c_arr),
        plateau_radius=float(radius),
        name=f"plateau(r={radius:g})",
    )


def coefficient_from_callable(
    func: Callable[[np.ndarray], np.ndarray],
    sigma: float,
    gamma: float | None = None,
    plateau: bool = False,
    name: str = "custom",
) -> CoefficientA:
    """Wrap an arbitrary evaluator, declaring only the metadata actually known."""
    return CoefficientA(
        lambda p: np.asarray(func(_as_points(p)), dtype=float),
        sigma=float(sigma),
        gamma=gamma,
        plateau=plateau,
        name=name,
    )
