"""Maximum-principle verdicts and violation witnesses.

On a bounded box the operator satisfies the maximum principle (right-hand
sides pushed below zero inside, nonnegative boundary data, hence nonnegative
solutions) exactly when its principal eigenvalue is nonnegative.  The checker
realizes the nonnegative branch by inverse positivity on a random battery of
right-hand sides (plus an exact interior-inverse check at small sizes) and
the negative branch by constructing an explicit witness from the Perron
eigenfunction under a boundary cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    NumericalInconsistencyError,
    ResonanceError,
    WitnessConstructionError,
)
from .grid import BOUNDED
from .operator import NonlocalOperator
from .spectral import EigenReport, principal_eigenpair

RESONANCE_BAND = 1e-9

HOLDS = "holds"
VIOLATED = "violated"


@dataclass
class MPReport:
    """Verdict plus the evidence that produced it."""

    verdict: str
    lambda_p: float
    witness: np.ndarray | None
    battery_count: int
    battery_min: float  # min over all battery solution entries (nan if no battery ran)
    inverse_min: float | None  # min entry of the interior-block inverse, when computed
    battery_mins: list[float] | None = None  # per-item minima, in battery order


def check_mp(
    op: NonlocalOperator,
    battery: int = 50,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    witness_margin: float | None = None,
    inverse_check_limit: int = 256,
) -> MPReport:
    """Decide the maximum principle for an operator on a closed bounded grid."""
    grid = op.grid
    if grid.domain.geometry != BOUNDED:
        raise ValueError("the maximum principle needs a boundary; torus geometry has none")
    interior = grid.interior_mask
    if not grid.boundary_mask.any() or not interior.any():
        raise ValueError("grid must carry both boundary and interior nodes")

    eigen = principal_eigenpair(op, tol=tol, max_iter=max_iter)
    lam = eigen.lambda_p
    if abs(lam) < RESONANCE_BAND:
        raise ResonanceError(
            "principal eigenvalue within the resonance band around zero; "
            "perturb the coefficient and retry"
        )

    if lam > 0:
        A = op.matrix
        A_int = A[np.ix_(interior, interior)]
        lu = scipy.linalg.lu_factor(A_int)
        rng = np.random.default_rng(seed)
        battery_mins: list[float] = []
        for _ in range(battery):
            f = rng.uniform(0.0, 1.0, size=int(interior.sum()))
            u = scipy.linalg.lu_solve(lu, -f)
            if not np.isfinite(u).all():
                raise ResonanceError("interior block is singular; perturb the coefficient")
            battery_mins.append(float(u.min()))
        battery_min = min(battery_mins) if battery_mins else float("nan")
        if battery_min < -1e-10:
            raise NumericalInconsistencyError(
                f"inverse positivity failed (min {battery_min:.3e}) despite lambda_p > 0"
            )
        inverse_min = None
        if op.size <= inverse_check_limit:
            inv = scipy.linalg.lu_solve(lu, -np.eye(A_int.shape[0]))
            inverse_min = float(inv.min())
            if inverse_min < -1e-12:
                raise NumericalInconsistencyError(
                    f"interior-block inverse has entry {inverse_min:.3e} below -1e-12"
                )
        return MPReport(HOLDS, lam, None, battery, battery_min, inverse_min, battery_mins)

    witness = witness_from_eigenfunction(op, eigen, margin=witness_margin)
    return MPReport(VIOLATED, lam, witness, 0, float("nan"), None, [])


def witness_from_eigenfunction(
    op: NonlocalOperator,
    eigen: EigenReport,
    margin: float | None = None,
) -> np.ndarray:
    """Build w = -phi * eta violating the maximum principle when lambda_p < 0.

    eta ramps linearly from 0 on the boundary to 1 on the box shrunk by
    ``margin``; the construction is sound once the measure outside the inner
    box is at most min(phi) * min(delta, -lambda_p) / (2 sup J), with
    delta = -lambda_p - max(a).  The returned vector satisfies
    (M w) <= 0 at interior nodes, w = 0 on the boundary, and min w < 0.
    """
    if eigen.lambda_p >= 0:
        raise ValueError("a violation witness requires a negative principal eigenvalue")
    grid = op.grid
    domain = grid.domain
    if domain.geometry != BOUNDED:
        raise ValueError("witness construction needs a boundary")
    h_max = max(grid.spacing)
    if margin is None:
        margin = h_max
    if margin >= min(domain.lengths) / 2:
        raise ValueError("cutoff margin leaves no inner box")
    if margin < h_max - 1e-12:
        raise ValueError("cutoff margin must span at least one grid cell")

    pts = grid.points
    dist = np.min(
        np.stack(
            [
                np.minimum(pts[:, ax] - lo, hi - pts[:, ax])
                for ax, (lo, hi) in enumerate(domain.bounds)
            ]
        ),
        axis=0,
    )
    eta = np.clip(dist / margin, 0.0, 1.0)

    phi = eigen.eigenvector
    outside = eta < 1.0 - 1e-9  # ulp-noise at dist == margin stays inside the box
    outside_mass = float(op.dmu[outside].sum())
    phi_floor = float(phi.min())
    delta = -eigen.lambda_p - float(op.diagonal.max())
    level = min(delta, -eigen.lambda_p)
    j_sup = op.kernel_sup()
    bound = phi_floor * level / (2.0 * j_sup) if j_sup > 0 else np.inf
    if outside_mass > bound:
        raise WitnessConstructionError(
            f"cutoff measure {outside_mass:.3e} exceeds the admissible {bound:.3e}; "
            "refine the grid"
        )

    w = -phi * eta
    interior = grid.interior_mask
    mw = op.apply(w)
    if (mw[interior] > 1e-10).any():
        raise WitnessConstructionError("witness failed (M w <= 0 at interior nodes)")
    if (w[grid.boundary_mask] < -1e-12).any():
        raise WitnessConstructionError("witness failed (w = 0 on the boundary)")
    if not (w.min() < -1e-6):
        raise WitnessConstructionError("witness failed (no negative interior value)")
    return w
