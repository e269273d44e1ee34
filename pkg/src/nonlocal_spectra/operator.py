"""Dense assembly of the jump-redistribution operator K + a*Id.

The kernel value between nodes is J((x_i - x_j)/g(x_j)) / g(x_j)^n; column j
carries the measure mass dmu_j = w_j / g(x_j)^n, so K[i, j] = J(...) * dmu_j.
Tori use minimal-image displacements.  Optional column renormalization scales
each column to its continuum mass, isolating spectral error from quadrature
error (default on for tori, off for bounded boxes where boundary mass loss is
physical).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegeneratePointError
from .grid import BOUNDED, TORUS, DEFAULT_G_FLOOR, Domain, Grid, measure_weights
from .profiles import CoefficientA, DispersalG, KernelJ


@dataclass
class NonlocalOperator:
    """Assembled dense operator: integral part K plus the diagonal coefficient."""

    grid: Grid
    kernel_part: np.ndarray  # (M, M), nonnegative
    diagonal: np.ndarray  # (M,) values of a at the nodes
    dmu: np.ndarray  # (M,) measure masses backing the columns
    degenerate_mask: np.ndarray  # (M,) bool, excluded columns
    column_mass: np.ndarray  # (M,) discrete weighted column sums of the kernel
    renormalized: bool = False
    kernel: KernelJ | None = None
    dispersal: DispersalG | None = None
    coefficient: CoefficientA | None = None
    shift: float | None = None  # recorded at first spectral use

    def __post_init__(self) -> None:
        for arr in (self.kernel_part, self.diagonal, self.dmu, self.degenerate_mask, self.column_mass):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.diagonal.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Dense K + diag(a); a fresh array each call."""
        A = self.kernel_part.copy()
        A[np.diag_indices(self.size)] += self.diagonal
        return A

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.kernel_part @ vec + self.diagonal * vec

    def kernel_sup(self) -> float:
        """Effective sup of the kernel values K[i,j]/dmu_j over live columns."""
        live = self.dmu > 0
        if not live.any():
            return 0.0
        return float((self.kernel_part[:, live] / self.dmu[live]).max())

    def with_diagonal(self, diagonal: np.ndarray, coefficient: CoefficientA | None = None) -> "NonlocalOperator":
        """Same integral part with a replaced zero-order coefficient."""
        diag = np.asarray(diagonal, dtype=float).copy()
        if diag.shape != self.diagonal.shape:
            raise ValueError("diagonal shape mismatch")
        return replace(self, diagonal=diag, coefficient=coefficient, shift=None)


def wrap_displacement(domain: Domain, disp: np.ndarray) -> np.ndarray:
    """Minimal-image displacement on a torus; identity on bounded boxes."""
    if domain.geometry != TORUS:
        return disp
    out = disp.copy()
    for axis, length in enumerate(domain.lengths):
        out[..., axis] -= length * np.round(out[..., axis] / length)
    return out


def eval_kernel(
    domain: Domain,
    kernel: KernelJ,
    dispersal: DispersalG,
    x,
    y,
    g_floor: float = DEFAULT_G_FLOOR,
) -> float:
    """Point kernel value J((x - y)/g(y)) / g(y)^n."""
    xp = np.atleast_1d(np.asarray(x, dtype=float))
    yp = np.atleast_1d(np.asarray(y, dtype=float))
    g_y = float(dispersal(yp[None, :])[0])
    if g_y < g_floor:
        raise DegeneratePointError(
            "dispersal budget vanishes at the source point; exclude or regularize it"
        )
    disp = wrap_displacement(domain, (xp - yp)[None, :])
    r = float(np.linalg.norm(disp[0]))
    return float(kernel(np.array([r / g_y]))[0]) / g_y**domain.dim


def assemble(
    grid: Grid,
    kernel: KernelJ,
    dispersal: DispersalG,
    coefficient: CoefficientA,
    renormalize: bool | None = None,
    g_floor: float = DEFAULT_G_FLOOR,
    row_block: int = 512,
) -> NonlocalOperator:
    """Dense K[i,j] = J(||x_i - x_j|| / g_j) * dmu_j plus the diagonal coefficient."""
    domain = grid.domain
    if kernel.dim != domain.dim:
        raise ValueError("kernel dimension disagrees with the domain")
    pts = grid.points
    g_vals = dispersal(pts)
    if not np.isfinite(g_vals).all():
        raise ValueError("dispersal budget produced non-finite values")
    dispersal.validate_on(pts)
    if (g_vals < g_floor).any() and not dispersal.degenerate:
        raise DegeneratePointError(
            "dispersal budget falls below the floor; declare degenerate mode to exclude"
        )
    mw = measure_weights(grid, g_vals, g_floor)
    live = ~mw.degenerate_mask
    g_safe = np.where(live, g_vals, 1.0)

    M = grid.size
    s = kernel.support
    K = np.empty((M, M))
    for start in range(0, M, row_block):
        stop = min(start + row_block, M)
        disp = wrap_displacement(domain, pts[start:stop, None, :] - pts[None, :, :])
        if domain.dim == 1:
            dist = np.abs(disp[..., 0])
        else:
            dist = np.linalg.norm(disp, axis=2)
        arg = dist / g_safe[None, :]
        block = kernel(arg)
        block[arg > s] = 0.0  # exact support locality, no roundoff tails
        K[start:stop] = block * mw.dmu[None, :]
    if not np.isfinite(K).all():
        raise ValueError("kernel matrix has non-finite entries")

    a_vals = coefficient(pts)
    if not np.isfinite(a_vals).all():
        raise ValueError("coefficient produced non-finite values")
    coefficient.validate_on(pts)

    if renormalize is None:
        renormalize = domain.geometry == TORUS
    col_mass = (grid.weights @ K) / grid.weights
    if renormalize:
        target = _renormalization_targets(grid, kernel, dispersal, g_vals, live, g_floor)
        scale = np.where(col_mass > 0, target / np.where(col_mass > 0, col_mass, 1.0), 1.0)
        K *= scale[None, :]
        col_mass = (grid.weights @ K) / grid.weights

    return NonlocalOperator(
        grid=grid,
        kernel_part=K,
        diagonal=a_vals,
        dmu=mw.dmu,
        degenerate_mask=mw.degenerate_mask,
        column_mass=col_mass,
        renormalized=bool(renormalize),
        kernel=kernel,
        dispersal=dispersal,
        coefficient=coefficient,
    )


def _renormalization_targets(grid, kernel, dispersal, g_vals, live, g_floor):
    domain = grid.domain
    if domain.geometry == TORUS:
        reach = kernel.support * g_vals.max()
        if reach > min(domain.lengths) / 2:
            raise ValueError("kernel reach exceeds half the period; renormalization invalid")
        return np.full(grid.size, kernel.mass)
    c = column_mass_c(grid, kernel, dispersal, g_floor=g_floor, degenerate_value="limit")
    return c


def kernel_floor_constants(kernel: KernelJ, dispersal: DispersalG) -> tuple[float, float]:
    """Radius r and level c0 = J(0)/2 with J >= c0 on the ball of radius 2r/alpha.

    Guarantees J((x-y)/g(y)) >= c0 whenever ||x - y|| <= r, since
    ||x - y||/g(y) <= r/alpha = delta/2 < delta.
    """
    j0 = kernel.peak
    if j0 <= 0:
        raise ValueError("kernel must be positive at the origin")
    if dispersal.degenerate or dispersal.alpha <= 0:
        raise ValueError("kernel floor constants require a positively bounded budget")
    c0 = j0 / 2.0

    def holds(delta: float) -> bool:
        rs = np.linspace(0.0, delta, 2048)
        return bool((kernel(rs) >= c0).all())

    lo, hi = 0.0, kernel.support
    if holds(hi):
        delta = hi
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if holds(mid):
                lo = mid
            else:
                hi = mid
        delta = lo
    return delta * dispersal.alpha / 2.0, c0


def column_mass_c(
    grid: Grid,
    kernel: KernelJ,
    dispersal: DispersalG,
    g_floor: float = DEFAULT_G_FLOOR,
    degenerate_value: str = "unit",
    refine: int = 2001,
) -> np.ndarray:
    """Per-node mass c(x_i) = integral of J((y - x_i)/g(x_i)) dy / g(x_i)^n.

    Nodes whose scaled kernel ball fits inside the domain get the exact value
    kernel.mass; near the boundary a refined quadrature is used.  At nodes
    below the degeneracy floor, ``degenerate_value`` selects the convention:
    "unit" returns 1, "limit" returns the vanishing-ball limit
    kernel.mass * 2^-(faces touched).
    """
    domain = grid.domain
    pts = grid.points
    g_vals = dispersal(pts)
    n = domain.dim
    s = kernel.support
    out = np.empty(grid.size)

    for i in range(grid.size):
        g_i = g_vals[i]
        if g_i < g_floor:
            if degenerate_value == "unit":
                out[i] = 1.0
            else:
                faces = sum(
                    int(abs(pts[i, ax] - lo) < 1e-12 or abs(hi - pts[i, ax]) < 1e-12)
                    for ax, (lo, hi) in enumerate(domain.bounds)
                ) if domain.geometry == BOUNDED else 0
                out[i] = kernel.mass * 0.5**faces
            continue
        reach = s * g_i
        if domain.geometry == TORUS:
            if reach <= min(domain.lengths) / 2:
                out[i] = kernel.mass
            else:
                raise ValueError("kernel reach exceeds half the period")
            continue
        inside = all(
            pts[i, ax] - lo >= reach and hi - pts[i, ax] >= reach
            for ax, (lo, hi) in enumerate(domain.bounds)
        )
        if inside:
            out[i] = kernel.mass
        elif n == 1:
            lo, hi = domain.bounds[0]
            ys = np.linspace(max(lo, pts[i, 0] - reach), min(hi, pts[i, 0] + reach), refine)
            out[i] = float(np.trapezoid(kernel(np.abs(ys - pts[i, 0]) / g_i), ys)) / g_i
        else:
            (lo0, hi0), (lo1, hi1) = domain.bounds
            m = 301
            ys0 = np.linspace(max(lo0, pts[i, 0] - reach), min(hi0, pts[i, 0] + reach), m)
            ys1 = np.linspace(max(lo1, pts[i, 1] - reach), min(hi1, pts[i, 1] + reach), m)
            Y0, Y1 = np.meshgrid(ys0, ys1, indexing="ij")
            r = np.hypot(Y0 - pts[i, 0], Y1 - pts[i, 1])
            vals = kernel(r / g_i)
            out[i] = float(np.trapezoid(np.trapezoid(vals, ys1, axis=1), ys0)) / g_i**2
    return out


def sigma_and_sigma_prime(
    grid: Grid,
    kernel: KernelJ,
    dispersal: DispersalG,
    coefficient: CoefficientA,
    g_floor: float = DEFAULT_G_FLOOR,
) -> tuple[float, float]:
    """Node maxima of a and of a + c (integral branch of the column mass)."""
    a_vals = coefficient(grid.points)
    c_vals = column_mass_c(grid, kernel, dispersal, g_floor=g_floor, degenerate_value="limit")
    return float(a_vals.max()), float((a_vals + c_vals).max())
