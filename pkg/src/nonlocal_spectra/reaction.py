"""Semilinear steady states and evolution for KPP-type reactions.

The survival criterion reads the sign of the principal eigenvalue of the
linearization at zero.  Steady states come from the resolvent-shifted
monotone iteration (M - k) u_{m+1} = -k u_m - f(x, u_m), which produces
ordered iterates trapped between a subsolution and a supersolution once k
dominates the coefficient and the reaction slope.  A genuine subsolution is
manufactured from the Perron eigenfunction of a bump-perturbed coefficient
scaled small, and the evolution integrator (explicit Euler under a computed
stability bound, or IMEX) verifies the attractor predicted by the criterion.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    MonotonicityError,
    NonConvergenceError,
    ResolventError,
    StabilityError,
    SubsolutionFailureError,
)
from .operator import NonlocalOperator
from .profiles import _as_points
from .spectral import principal_eigenpair

PERSISTENCE = "persistence"
EXTINCTION = "extinction"
BORDERLINE = "borderline"

CONVERGED_TO_LIMIT = "converged-to-p"
CONVERGED_TO_ZERO = "converged-to-0"
UNDECIDED = "undecided"

SIGN_BAND = 1e-9
TRIVIAL_SUP = 1e-8


@dataclass(frozen=True)
class KPPNonlinearity:
    """Reaction f(x, u) with f(x, 0) = 0, f/u decreasing in u, f <= 0 above M."""

    rate: Callable[[np.ndarray, np.ndarray], np.ndarray]  # f(x, u)
    growth_at_zero: Callable[[np.ndarray], np.ndarray]  # f_u(x, 0)
    saturation: float  # M
    rate_slope: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def __call__(self, points, u) -> np.ndarray:
        return np.asarray(self.rate(_as_points(points), np.asarray(u, dtype=float)), dtype=float)

    def fu0(self, points) -> np.ndarray:
        return np.asarray(self.growth_at_zero(_as_points(points)), dtype=float)

    def lipschitz(self, points, lo: float, hi: float, samples: int = 33) -> float:
        """Bound on |df/du| over u in [lo, hi] at the given nodes."""
        pts = _as_points(points)
        us = np.linspace(lo, hi, samples)
        worst = 0.0
        if self.rate_slope is not None:
            for u in us:
                worst = max(worst, float(np.abs(self.rate_slope(pts, np.full(pts.shape[0], u))).max()))
        else:
            du = max((hi - lo) / (samples - 1), 1e-6)
            for u in us:
                lo_u = np.full(pts.shape[0], u)
                slope = (self(pts, lo_u + du) - self(pts, lo_u)) / du
                worst = max(worst, float(np.abs(slope).max()))
        return worst

    def validate_on(self, points, samples: int = 9) -> None:
        pts = _as_points(points)
        zero = np.zeros(pts.shape[0])
        if np.abs(self(pts, zero)).max() > 1e-12:
            raise ValueError("reaction must vanish at u = 0")
        for mult in (1.0, 2.0):
            if (self(pts, np.full(pts.shape[0], mult * self.saturation)) > 1e-12).any():
                raise ValueError("reaction must be nonpositive at and above saturation")
        us = np.linspace(self.saturation / samples, 2.0 * self.saturation, samples)
        prev = None
        for u in us:
            ratio = self(pts, np.full(pts.shape[0], u)) / u
            if prev is not None and (ratio > prev + 1e-10).any():
                raise ValueError("f(x, u)/u must be decreasing in u")
            prev = ratio


def logistic(mu, saturation: float | None = None) -> KPPNonlinearity:
    """f(x, u) = u (mu(x) - u); mu a constant or a per-point evaluator."""
    if callable(mu):
        mu_f = lambda pts: np.asarray(mu(pts), dtype=float)
        if saturation is None:
            raise ValueError("a variable growth profile needs an explicit saturation bound")
    else:
        mu_val = float(mu)
        mu_f = lambda pts: np.full(pts.shape[0], mu_val)
        if saturation is None:
            saturation = max(mu_val, 1.0)
    return KPPNonlinearity(
        rate=lambda pts, u: u * (mu_f(pts) - u),
        growth_at_zero=mu_f,
        saturation=float(saturation),
        rate_slope=lambda pts, u: mu_f(pts) - 2.0 * u,
        name="logistic",
    )


@dataclass
class KPPSolution:
    """Fixed point of the monotone iteration with its run log."""

    values: np.ndarray
    iterations: int
    monotone: bool
    residual: float
    trivial: bool
    lower_bound: float


@dataclass
class EvolutionTrace:
    """Checkpointed distances of u(t) to the candidate limits."""

    times: np.ndarray
    dist_to_limit: np.ndarray
    dist_to_zero: np.ndarray
    min_u: np.ndarray
    max_u: np.ndarray
    classification: str
    final_state: np.ndarray
    reference: np.ndarray


def survival_criterion(
    op_linearized: NonlocalOperator,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> tuple[float, str]:
    """Sign of lambda_p of the linearization at zero decides the dichotomy."""
    report = principal_eigenpair(op_linearized, tol=tol, max_iter=max_iter)
    lam = report.lambda_p
    if lam < -SIGN_BAND:
        return lam, PERSISTENCE
    if lam > SIGN_BAND:
        return lam, EXTINCTION
    return lam, BORDERLINE


def build_subsolution(
    op_linearized: NonlocalOperator,
    f: KPPNonlinearity,
    bump_index: int | None = None,
    eps: float = 0.1,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    max_halvings: int = 40,
) -> np.ndarray:
    """Scaled Perron vector of a bump-perturbed coefficient as a subsolution.

    The coefficient is lifted to its supremum on a small ball around the
    arg-max (blend a + (sigma - a) * chi with a smooth bump chi), the Perron
    eigenfunction of the lifted operator is computed, and eps is halved until
    M[eps phi] + f(x, eps phi) >= 0 holds at every node.
    """
    report = principal_eigenpair(op_linearized, tol=tol, max_iter=max_iter)
    lam = report.lambda_p
    if lam >= 0:
        raise ValueError("a subsolution requires a negative principal eigenvalue")
    grid = op_linearized.grid
    pts = grid.points
    a_lin = op_linearized.diagonal
    sigma = float(a_lin.max())
    if bump_index is None:
        bump_index = int(np.ceil(8.0 / abs(lam))) + 1
    drop = 2.0 / bump_index

    center = pts[int(np.argmax(a_lin))]
    disp = pts - center
    if grid.domain.geometry == "torus":
        for ax, length in enumerate(grid.domain.lengths):
            disp[:, ax] -= length * np.round(disp[:, ax] / length)
    dist = np.linalg.norm(disp, axis=1)
    order = np.argsort(dist)
    radius = 0.0
    for idx in order:
        if sigma - a_lin[idx] > drop:
            break
        radius = dist[idx]
    h = max(grid.spacing)
    if radius < h and (sigma - a_lin > drop).any():
        raise SubsolutionFailureError(
            "bump radius below grid resolution; refine the grid or lower the index"
        )
    radius = max(radius, h)

    t = dist / (radius / 2.0)
    chi = np.where(t <= 1.0, 1.0, np.where(t >= 2.0, 0.0, np.cos(np.pi * (t - 1.0) / 2.0) ** 2))
    a_bump = a_lin + (sigma - a_lin) * chi
    phi = principal_eigenpair(
        op_linearized.with_diagonal(a_bump), tol=tol, max_iter=max_iter
    ).eigenvector

    a_base = a_lin - f.fu0(pts)
    for _ in range(max_halvings):
        candidate = eps * phi
        residual = op_linearized.kernel_part @ candidate + a_base * candidate + f(pts, candidate)
        if residual.min() >= -1e-10:
            return candidate
        eps /= 2.0
    raise SubsolutionFailureError(
        "no scale made the perturbed eigenfunction a subsolution; "
        "lambda_p is too close to zero at this resolution"
    )


def _as_state(grid_size: int, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(grid_size, float(arr))
    if arr.shape != (grid_size,):
        raise ValueError("state vector shape mismatch")
    return arr.copy()


def steady_state(
    op: NonlocalOperator,
    f: KPPNonlinearity,
    sub,
    sup,
    k: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    start: str = "sub",
    enforce_monotone: bool = True,
) -> KPPSolution:
    """Monotone resolvent iteration between an ordered sub/supersolution pair.

    From the subsolution the iterates increase; ``start='sup'`` runs the
    decreasing branch (the route that certifies extinction).  Convergence is
    declared on the residual ||M p + f(., p)||_inf <= tol.
    """
    M = op.size
    sub = _as_state(M, sub)
    sup = _as_state(M, sup)
    if (sub > sup + 1e-12).any():
        raise ValueError("subsolution must lie below the supersolution")
    pts = op.grid.points
    if k is None:
        lip = f.lipschitz(pts, float(min(sub.min(), 0.0)), float(sup.max()))
        k = float(np.abs(op.diagonal).max()) + lip + 1.0

    A = op.matrix
    A_shift = A - k * np.eye(M)
    lu = scipy.linalg.lu_factor(A_shift)
    if not np.isfinite(lu[0]).all():
        raise ResolventError("shifted operator could not be factored")

    direction = 1.0 if start == "sub" else -1.0
    u = sub.copy() if start == "sub" else sup.copy()
    monotone = True
    slack = 1e-12 * max(1.0, float(np.abs(sup).max()))
    for it in range(1, max_iter + 1):
        rhs = -k * u - f(pts, u)
        u_new = scipy.linalg.lu_solve(lu, rhs)
        if not np.isfinite(u_new).all():
            raise ResolventError("resolvent solve produced non-finite iterates")
        step = direction * (u_new - u)
        if step.min() < -slack:
            monotone = False
            if enforce_monotone:
                raise MonotonicityError(
                    "iterates left the monotone corridor; increase k or supply a valid "
                    "sub/supersolution pair"
                )
        if (u_new > sup + slack).any() or (u_new < sub - slack).any():
            monotone = False
            if enforce_monotone:
                raise MonotonicityError("iterates escaped the [sub, sup] bracket; increase k")
        u = u_new
        residual = float(np.abs(A @ u + f(pts, u)).max())
        if residual <= tol:
            return KPPSolution(
                values=u,
                iterations=it,
                monotone=monotone,
                residual=residual,
                trivial=bool(np.abs(u).max() <= TRIVIAL_SUP),
                lower_bound=float(u.min()),
            )
    raise NonConvergenceError(
        f"steady-state residual {residual:.3e} above tol after {max_iter} iterations",
        iterations=max_iter,
    )


def evolve(
    op: NonlocalOperator,
    f: KPPNonlinearity,
    u0,
    dt: float | None = None,
    T: float = 200.0,
    checkpoints: int = 20,
    mode: str = "explicit",
    tol: float = 1e-6,
    reference: np.ndarray | None = None,
    steady_tol: float = 1e-10,
) -> EvolutionTrace:
    """March du/dt = M u + f(x, u) and classify the attractor it reaches.

    The reference limit is the positive steady state when the linearization
    is unstable (computed on demand via the constructed subsolution), zero
    otherwise.  Explicit stepping enforces the positivity-preserving bound
    dt <= 1/(||b|| + ||c|| + Lip f); IMEX mode accepts any dt.
    """
    M = op.size
    u = _as_state(M, u0)
    if (u < 0).any():
        raise ValueError("initial state must be nonnegative")
    if not (u > 0).any():
        raise ValueError("initial state must not be identically zero")
    if not np.isfinite(u).all():
        raise ValueError("initial state must be bounded")
    pts = op.grid.points

    lip = f.lipschitz(pts, 0.0, max(float(u.max()), 2.0 * f.saturation))
    stability = 1.0 / (float(np.abs(op.diagonal).max()) + float(op.column_mass.max()) + lip)
    if dt is None:
        dt = stability
    if mode == "explicit" and dt > stability * (1.0 + 1e-9):
        raise ValueError(f"explicit step {dt:g} exceeds the stability bound {stability:g}")

    if reference is None:
        lin = op.with_diagonal(op.diagonal + f.fu0(pts))
        lam, verdict = survival_criterion(lin)
        if verdict == PERSISTENCE:
            sub = build_subsolution(lin, f)
            sup = np.full(M, 2.0 * f.saturation)
            sup = np.maximum(sup, sub)
            reference = steady_state(op, f, sub, sup, tol=steady_tol).values
        else:
            reference = np.zeros(M)
    reference = _as_state(M, reference)

    n_steps = max(int(np.ceil(T / dt)), checkpoints)
    dt_eff = T / n_steps
    # one mark per checkpoint, last mark at T (steps are >= 1 apart since n >= c)
    marks = {int(round(j * n_steps / checkpoints)) for j in range(1, checkpoints + 1)}

    if mode == "imex":
        lu = scipy.linalg.lu_factor(np.eye(M) - dt_eff * op.matrix)

    times, d_ref, d_zero, mins, maxs = [], [], [], [], []
    classification = UNDECIDED
    for step in range(1, n_steps + 1):
        if mode == "explicit":
            u = u + dt_eff * (op.apply(u) + f(pts, u))
        elif mode == "imex":
            u = scipy.linalg.lu_solve(lu, u + dt_eff * f(pts, u))
        else:
            raise ValueError(f"unknown integrator mode {mode!r}")
        if u.min() < -1e-8:
            raise StabilityError(
                f"state dipped to {u.min():.3e} at t = {step * dt_eff:.3f}; reduce dt"
            )
        if step in marks:
            t = step * dt_eff
            times.append(t)
            d_ref.append(float(np.abs(u - reference).max()))
            d_zero.append(float(u.max()))
            mins.append(float(u.min()))
            maxs.append(float(u.max()))
            if classification == UNDECIDED:
                if d_zero[-1] < tol:
                    classification = CONVERGED_TO_ZERO
                elif d_ref[-1] < tol and np.abs(reference).max() > TRIVIAL_SUP:
                    classification = CONVERGED_TO_LIMIT

    return EvolutionTrace(
        times=np.asarray(times),
        dist_to_limit=np.asarray(d_ref),
        dist_to_zero=np.asarray(d_zero),
        min_u=np.asarray(mins),
        max_u=np.asarray(maxs),
        classification=classification,
        final_state=u,
        reference=reference,
    )


def uniqueness_check(
    op: NonlocalOperator,
    f: KPPNonlinearity,
    brackets,
    k: float | None = None,
    tol: float = 1e-10,
    start: str = "sub",
) -> float:
    """Max pairwise sup-distance between steady states from different brackets."""
    brackets = list(brackets)
    if len(brackets) < 2:
        raise ValueError("need at least two sub/supersolution brackets")
    solutions = [
        steady_state(op, f, sub, sup, k=k, tol=tol, start=start).values for sub, sup in brackets
    ]
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            worst = max(worst, float(np.abs(solutions[i] - solutions[j]).max()))
    return worst
