"""Principal eigenpairs with certified Collatz-Wielandt brackets.

The shifted matrix A + kI is entrywise nonnegative with a positive diagonal,
so for any positive vector phi the ratios (A+kI)phi / phi bracket the spectral
radius; power iteration tightens that bracket to the requested width.  When
contraction stalls (tiny spectral gaps near degenerate regimes) the iteration
is driven by repeated squaring of the shifted matrix, which accelerates the
vector without touching the certificate: the reported bracket always comes
from plain ratios of the unsquared shifted matrix.

Also here: the secular-equation bisection for rank-one surrogates, the
integrability classifier, the eigenfunction-existence diagnostic on
refinement ladders, domain-exhaustion studies, and Harnack ratios.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    CriterionFailure,
    IrreducibilityError,
    NonConvergenceError,
    NumericalInconsistencyError,
)
from .grid import BOUNDED, Domain, Grid, build_grid, exhaustion_sequence
from .operator import NonlocalOperator, assemble, sigma_and_sigma_prime
from .profiles import CoefficientA, DispersalG, KernelJ

VERDICT_EXISTS = "eigenfunction-exists"
VERDICT_DEGENERATE = "degenerate"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass
class EigenReport:
    """Converged principal eigenpair with its certificate."""

    lambda_p: float
    eigenvector: np.ndarray  # positive, sup-normalized
    cw_lower: float  # bracket for the shifted spectral radius
    cw_upper: float
    iterations: int
    residual: float  # sup norm of (K + diag a) phi + lambda_p phi
    shift: float
    concentration: float  # sup phi / integral of phi dmu
    history: list[tuple[int, float, float]]


def cw_bracket(matrix: np.ndarray, phi: np.ndarray) -> tuple[float, float]:
    """Collatz-Wielandt bounds min_i (M phi)_i/phi_i <= rho(M) <= max_i."""
    phi = np.asarray(phi, dtype=float)
    if (phi <= 0).any():
        raise ValueError("test vector must be strictly positive")
    ratios = (matrix @ phi) / phi
    return float(ratios.min()), float(ratios.max())


def principal_eigenpair(
    op: NonlocalOperator,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> EigenReport:
    """Certified principal eigenvalue -rho(K + diag a) and Perron vector.

    The shift k = ||a||_inf + ||c||_inf + 1 makes the iteration matrix
    nonnegative with positive diagonal; the returned value is
    lambda_p = -(rho(A + kI) - k), taken at the bracket midpoint once the
    certified width drops below tol.
    """
    A = op.matrix
    M = op.size
    k = float(np.abs(op.diagonal).max() + max(op.column_mass.max(), 0.0) + 1.0)
    op.shift = k
    Ahat = A + k * np.eye(M)

    B = Ahat
    phi = np.ones(M)
    history: list[tuple[int, float, float]] = []
    lower = upper = np.nan
    width_marks: list[tuple[int, float]] = []
    squarings = 0

    for it in range(1, max_iter + 1):
        v = B @ phi
        vmax = v.max()
        if not np.isfinite(vmax) or vmax <= 0:
            raise IrreducibilityError("iteration collapsed; matrix appears reducible")
        if B is Ahat:
            lower, upper = float((v / phi).min()), float((v / phi).max())
            phi = v / vmax
        else:
            phi = v / vmax
            w = Ahat @ phi
            lower, upper = float((w / phi).min()), float((w / phi).max())
        if it > 8 and (phi <= 0).any():
            raise IrreducibilityError("Perron iterate lost strict positivity; matrix reducible")
        if it <= 4 or it % 32 == 0:
            history.append((it, lower, upper))
        width = upper - lower
        if width < tol:
            break
        # escalate to a squared operator when contraction stalls
        width_marks.append((it, width))
        if len(width_marks) >= 2 and it % 64 == 0 and squarings < 6 and M <= 4096:
            it_prev, w_prev = width_marks[-64] if len(width_marks) >= 64 else width_marks[0]
            if w_prev > 0 and width > 0 and w_prev / width < 4.0:
                B = B @ B
                B = B / B.max()
                squarings += 1
                width_marks.clear()
    else:
        raise NonConvergenceError(
            f"bracket width {upper - lower:.3e} after {max_iter} iterations "
            "(tiny spectral gap or reducible matrix)",
            bracket=(k - upper, k - lower),
            iterations=max_iter,
        )

    rho = 0.5 * (lower + upper)
    lambda_p = -(rho - k)
    phi = phi / phi.max()
    residual = float(np.abs(op.apply(phi) + lambda_p * phi).max())
    mass = float(op.dmu @ phi)
    concentration = float("inf") if mass <= 0 else 1.0 / mass
    if not history or history[-1][0] != it:
        history.append((it, lower, upper))
    return EigenReport(
        lambda_p=lambda_p,
        eigenvector=phi,
        cw_lower=lower,
        cw_upper=upper,
        iterations=it,
        residual=residual,
        shift=k,
        concentration=concentration,
        history=history,
    )


def rank_one_operator(grid: Grid, rho: float, coefficient: CoefficientA) -> NonlocalOperator:
    """Constant-kernel operator u -> rho * integral of u dx + a(x) u."""
    if rho <= 0:
        raise ValueError("rank-one weight must be positive")
    if grid.domain.geometry != BOUNDED:
        raise ValueError("the rank-one surrogate lives on a bounded domain")
    M = grid.size
    K = np.tile(rho * grid.weights, (M, 1))
    dmu = grid.weights.copy()
    col_mass = (grid.weights @ K) / grid.weights
    return NonlocalOperator(
        grid=grid,
        kernel_part=K,
        diagonal=coefficient(grid.points),
        dmu=dmu,
        degenerate_mask=np.zeros(M, dtype=bool),
        column_mass=col_mass,
        coefficient=coefficient,
    )


def rank_one_bisection(
    grid: Grid,
    coefficient: CoefficientA,
    c0: float,
    dmu: np.ndarray | None = None,
    ftol: float = 1e-10,
    eps_floor: float | None = None,
) -> tuple[float, np.ndarray]:
    """Solve F(lambda) = sum_i dmu_i * c0 / (-lambda - a_i) = 1 below -max(a).

    F is increasing toward -max(a); the bracket search walks the standoff
    eps = -lambda - max(a) down geometrically.  If F never reaches 1 before
    eps hits the resolution floor, the mass criterion fails (the regime where
    no bounded eigenfunction exists) and CriterionFailure is raised carrying
    the attained limit value.
    """
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    a_vals = coefficient(grid.points)
    if dmu is None:
        dmu = grid.weights
    sigma_bar = float(a_vals.max())

    def F(lam: float) -> float:
        return float(np.sum(dmu * c0 / (-lam - a_vals)))

    if eps_floor is None:
        eps_floor = float(np.sqrt(max(grid.spacing)))
    eps_hi = max(1.0, 2.0 * c0 * float(dmu.sum()))
    eps = eps_hi
    while F(-sigma_bar - eps) < 1.0:
        eps /= 2.0
        if eps < eps_floor:
            raise CriterionFailure(
                "mass functional stays below one down to the resolution floor; "
                "no principal eigenfunction in this regime",
                f_limit=F(-sigma_bar - eps_floor),
            )
    lo_eps, hi_eps = eps, min(2.0 * eps, eps_hi)  # F(lo_eps) >= 1 >= F(hi_eps)
    lam = -sigma_bar - eps
    for _ in range(400):
        mid = 0.5 * (lo_eps + hi_eps)
        lam = -sigma_bar - mid
        val = F(lam)
        if abs(val - 1.0) <= ftol:
            break
        if val > 1.0:
            lo_eps = mid
        else:
            hi_eps = mid
    else:
        raise NumericalInconsistencyError(
            f"secular bisection stalled at |F - 1| = {abs(F(lam) - 1.0):.3e}"
        )
    phi = c0 / (-lam - a_vals)
    return lam, phi


def integrability_classifier(coefficient: CoefficientA, dim: int) -> str:
    """Classify 1/(sigma - a) against the measure near the maximum set.

    Plateaus are their own class; otherwise the contact exponent gamma decides:
    the radial integral of r^(n-1-gamma) diverges at zero iff gamma >= n.
    """
    if coefficient.plateau:
        return "plateau"
    if coefficient.gamma is None:
        raise ValueError("coefficient carries no contact exponent metadata")
    return "non-integrable" if coefficient.gamma >= dim else "integrable"


@dataclass
class ExistenceDiagnostic:
    """Refinement-ladder evidence for or against a bounded eigenfunction."""

    ladder: tuple[int, ...]
    lambdas: tuple[float, ...]
    concentrations: tuple[float, ...]
    sigma: float
    verdict: str


def existence_diagnostic(
    build_operator: Callable[[int], NonlocalOperator],
    ladder: Sequence[int],
    sigma: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    margin: float = 1e-3,
    stability: float = 0.10,
    growth: float = 1.5,
) -> ExistenceDiagnostic:
    """Eigen-solve a doubling ladder and classify the concentration trend.

    Degenerate signature: the concentration ratio sup phi / integral phi dmu
    grows by at least ``growth`` per doubling while |lambda_p + sigma|
    shrinks monotonically.  Existence signature: the ratio is stable between
    the last two levels and lambda_p stays below -sigma by more than
    ``margin``.  Anything else is inconclusive.
    """
    ladder = tuple(int(n) for n in ladder)
    if len(ladder) < 4:
        raise ValueError("need at least four ladder levels")
    if any(n2 != 2 * n1 for n1, n2 in zip(ladder, ladder[1:])):
        raise ValueError("ladder levels must double")

    lambdas, rhos = [], []
    op = None
    for n in ladder:
        op = build_operator(n)
        report = principal_eigenpair(op, tol=tol, max_iter=max_iter)
        lambdas.append(report.lambda_p)
        rhos.append(report.concentration)
    if sigma is None:
        sigma = op.coefficient.sigma if op.coefficient is not None else float(op.diagonal.max())

    gaps = [abs(lam + sigma) for lam in lambdas]
    growths = [r2 / r1 for r1, r2 in zip(rhos, rhos[1:])]
    signed_gaps = [-sigma - lam for lam in lambdas]

    if all(g >= growth for g in growths) and all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:])):
        verdict = VERDICT_DEGENERATE
    elif (
        abs(rhos[-1] / rhos[-2] - 1.0) <= stability
        and signed_gaps[-1] > margin
        and signed_gaps[-2] > margin
    ):
        verdict = VERDICT_EXISTS
    else:
        verdict = VERDICT_INCONCLUSIVE
    return ExistenceDiagnostic(ladder, tuple(lambdas), tuple(rhos), float(sigma), verdict)


@dataclass
class ExhaustionResult:
    """Eigenvalues along nested windows of an unbounded line."""

    levels: list[tuple[Domain, float]]
    lambda_limit: float
    sigma: float
    sigma_prime: float
    in_bracket: bool
    final_increment: float


def exhaustion_lambda(
    domain: Domain,
    kernel: KernelJ,
    dispersal: DispersalG,
    coefficient: CoefficientA,
    m: int,
    h: float,
    tol: float = 1e-12,
    slack: float = 1e-10,
    max_iter: int = 200_000,
) -> ExhaustionResult:
    """lambda_p on m nested windows at fixed spacing h, checked non-increasing."""
    windows = exhaustion_sequence(domain, m)
    levels: list[tuple[Domain, float]] = []
    last_grid = None
    for window in windows:
        length = window.lengths[0]
        steps = length / h
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("window radii must align with the fixed spacing")
        grid = build_grid(window, int(round(steps)) + 1)
        op = assemble(grid, kernel, dispersal, coefficient, renormalize=False)
        report = principal_eigenpair(op, tol=tol, max_iter=max_iter)
        if levels and report.lambda_p > levels[-1][1] + slack:
            raise NumericalInconsistencyError(
                f"exhaustion eigenvalue increased by {report.lambda_p - levels[-1][1]:.3e}"
            )
        levels.append((window, report.lambda_p))
        last_grid = grid
    sigma, sigma_prime = sigma_and_sigma_prime(last_grid, kernel, dispersal, coefficient)
    lam = levels[-1][1]
    in_bracket = (-sigma_prime - 1e-8) < lam < (-sigma + 1e-8)
    final_increment = abs(levels[-1][1] - levels[-2][1])
    return ExhaustionResult(levels, lam, sigma, sigma_prime, in_bracket, final_increment)


def harnack_ratio(
    op: NonlocalOperator,
    phi: np.ndarray,
    sub_bounds: Sequence[tuple[float, float]],
) -> float:
    """max/min of a positive eigenvector over a compactly contained sub-box."""
    domain = op.grid.domain
    sub_bounds = tuple((float(lo), float(hi)) for lo, hi in sub_bounds)
    if len(sub_bounds) != domain.dim:
        raise ValueError("one bound pair per axis required")
    for (lo, hi), (lo_s, hi_s) in zip(domain.bounds, sub_bounds):
        if not lo_s < hi_s:
            raise ValueError("sub-box needs lower < upper")
        if domain.geometry == BOUNDED and not (lo_s > lo and hi_s < hi):
            raise ValueError("sub-box must be compactly contained in the domain")
        if domain.geometry != BOUNDED and not (lo_s >= lo and hi_s <= hi):
            raise ValueError("sub-box must sit inside the torus cell")
    pts = op.grid.points
    mask = np.ones(op.size, dtype=bool)
    for ax, (lo_s, hi_s) in enumerate(sub_bounds):
        mask &= (pts[:, ax] >= lo_s) & (pts[:, ax] <= hi_s)
    if not mask.any():
        raise ValueError("sub-box contains no grid nodes")
    vals = np.asarray(phi, dtype=float)[mask]
    if (vals <= 0).any():
        raise ValueError("eigenvector must be positive on the sub-box")
    return float(vals.max() / vals.min())
