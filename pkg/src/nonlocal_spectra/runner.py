"""Experiment dispatch: run a scenario, emit CSV tables and a text report.

Each experiment family writes one CSV (one row per ladder level, checkpoint,
battery item, or node) and a plain-text report whose verdict lines read
"<check>: PASS|FAIL".  CSV output is deterministic for a fixed config and
seed: floats are printed with %.17g and the random battery is seeded.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ScenarioError
from .config import (
    ScenarioConfig,
    coefficient_from_config,
    domain_from_config,
    dispersal_from_config,
    echo_toml,
    kernel_from_config,
    nonlinearity_from_config,
)
from .grid import build_grid
from .maxprinciple import check_mp
from .operator import assemble, sigma_and_sigma_prime
from .reaction import (
    EXTINCTION,
    PERSISTENCE,
    build_subsolution,
    evolve,
    steady_state,
    survival_criterion,
)
from .spectral import (
    exhaustion_lambda,
    existence_diagnostic,
    integrability_classifier,
    principal_eigenpair,
    rank_one_operator,
)

SEED_ENV = "NONLOCAL_SPECTRA_SEED"

EXHAUSTION_INCREMENT_LIMIT = 1e-4


@dataclass
class RunReport:
    """Scenario echo, the experiment payload, and the verdict lines."""

    config: ScenarioConfig
    payload: dict
    verdicts: list[tuple[str, bool]]
    csv_header: list[str]
    csv_rows: list[list]
    wall_clock: float = 0.0
    version: str = __version__

    @property
    def failed(self) -> bool:
        return any(not ok for _, ok in self.verdicts)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_csv(report: RunReport, path: str | Path) -> None:
    """RFC-4180-style CSV: header, then one row per item (may be empty)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(report.csv_header)
        for row in report.csv_rows:
            writer.writerow([_fmt(v) for v in row])


def write_report(report: RunReport, path: str | Path) -> None:
    lines = [
        f"scenario: {report.config.name}",
        f"kind: {report.config.kind}",
        f"seed: {report.payload.get('seed', report.config.seed)}",
        f"version: {report.version}",
        f"wall_clock_s: {report.wall_clock:.3f}",
        "",
    ]
    for key, value in report.payload.items():
        if key == "seed":
            continue
        lines.append(f"{key} = {_fmt(value) if isinstance(value, float) else value}")
    lines.append("")
    for name, ok in report.verdicts:
        lines.append(f"{name}: {'PASS' if ok else 'FAIL'}")
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def run(config: ScenarioConfig, out_dir: str | Path | None = None) -> RunReport:
    """Execute one scenario; write its CSV, report, and echo when out_dir given."""
    seed = config.seed
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        seed = int(env_seed)

    t0 = time.perf_counter()
    handler = _HANDLERS[config.kind]
    try:
        payload, verdicts, header, rows = handler(config, seed)
    except Exception as exc:
        raise ScenarioError(
            f"scenario {config.name!r} ({config.kind}) failed: {exc}"
        ) from exc
    payload["seed"] = seed
    report = RunReport(config, payload, verdicts, header, rows)
    report.wall_clock = time.perf_counter() - t0

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_csv(report, out_dir / config.output["csv"])
        write_report(report, out_dir / config.output["report"])
        (out_dir / f"{config.name}.echo.toml").write_text(echo_toml(config))
    return report


def run_many(configs, out_dir=None, workers: int = 1) -> list[RunReport]:
    """Run scenarios, concurrently up to the worker limit (outputs are per-scenario)."""
    if workers <= 1 or len(configs) == 1:
        return [run(cfg, out_dir) for cfg in configs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda cfg: run(cfg, out_dir), configs))


# -- experiment families -----------------------------------------------------


def _solver_args(cfg):
    s = cfg.solver
    return s["tol"], s["max_iter"]


def _assemble_for(cfg: ScenarioConfig, n) -> tuple:
    domain = domain_from_config(cfg)
    grid = build_grid(domain, n)
    kernel = kernel_from_config(cfg, domain.dim)
    dispersal = dispersal_from_config(cfg)
    coefficient = coefficient_from_config(cfg.coefficient)
    renorm = cfg.solver.get("renormalize")
    op = assemble(grid, kernel, dispersal, coefficient, renormalize=renorm)
    return grid, kernel, dispersal, coefficient, op


def _run_eigen(cfg: ScenarioConfig, seed: int):
    tol, max_iter = _solver_args(cfg)
    grid, kernel, dispersal, coefficient, op = _assemble_for(cfg, cfg.grid["n"])
    report = principal_eigenpair(op, tol=tol, max_iter=max_iter)
    sigma, sigma_prime = sigma_and_sigma_prime(grid, kernel, dispersal, coefficient)
    classification = integrability_classifier(coefficient, grid.domain.dim)
    payload = {
        "lambda_p": report.lambda_p,
        "sigma": sigma,
        "sigma_prime": sigma_prime,
        "residual": report.residual,
        "iterations": report.iterations,
        "concentration_ratio": report.concentration,
        "classification": classification,
    }
    verdicts = [("residual within tol", report.residual <= tol)]
    if classification in ("non-integrable", "plateau"):
        sandwich = (-sigma_prime - 1e-8) < report.lambda_p < (-sigma + 1e-8)
        verdicts.append(("sandwich -sigma' < lambda_p < -sigma", sandwich))
    header = ["iteration", "cw_lower", "cw_upper", "width"]
    rows = [[it, lo, hi, hi - lo] for it, lo, hi in report.history]
    return payload, verdicts, header, rows


def _ladder_rows(cfg, build, sigma_hint):
    tol, max_iter = _solver_args(cfg)
    ladder = cfg.grid["ladder"]
    diag = existence_diagnostic(
        build,
        ladder,
        sigma=sigma_hint,
        tol=tol,
        max_iter=max_iter,
        margin=cfg.solver["margin"],
    )
    return diag


def _run_ladder(cfg: ScenarioConfig, seed: int):
    domain = domain_from_config(cfg)
    kernel = kernel_from_config(cfg, domain.dim)
    dispersal = dispersal_from_config(cfg)
    coefficient = coefficient_from_config(cfg.coefficient)
    renorm = cfg.solver.get("renormalize")

    def build(n):
        return assemble(build_grid(domain, n), kernel, dispersal, coefficient, renormalize=renorm)

    diag = _ladder_rows(cfg, build, coefficient.sigma)
    header = ["N", "h", "lambda_p", "sigma", "sigma_prime", "concentration_ratio"]
    rows = []
    for n, lam, conc in zip(diag.ladder, diag.lambdas, diag.concentrations):
        grid = build_grid(domain, n)
        sigma, sigma_prime = sigma_and_sigma_prime(grid, kernel, dispersal, coefficient)
        rows.append([n, max(grid.spacing), lam, sigma, sigma_prime, conc])
    payload = {"verdict": diag.verdict, "sigma": diag.sigma}
    verdicts = []
    if cfg.expect is not None:
        verdicts.append((f"verdict == {cfg.expect}", diag.verdict == cfg.expect))
    return payload, verdicts, header, rows


def _run_rankone(cfg: ScenarioConfig, seed: int):
    domain = domain_from_config(cfg)
    coefficient = coefficient_from_config(cfg.coefficient)
    rho = cfg.rho

    def build(n):
        return rank_one_operator(build_grid(domain, n), rho, coefficient)

    diag = _ladder_rows(cfg, build, coefficient.sigma)
    header = ["N", "h", "lambda_p", "sigma", "sigma_prime", "concentration_ratio"]
    rows = []
    for n, lam, conc in zip(diag.ladder, diag.lambdas, diag.concentrations):
        op = build(n)
        sigma = float(op.diagonal.max())
        sigma_prime = float((op.diagonal + op.column_mass).max())
        rows.append([n, max(op.grid.spacing), lam, sigma, sigma_prime, conc])
    payload = {"verdict": diag.verdict, "sigma": diag.sigma, "rho": rho}
    verdicts = []
    if cfg.expect is not None:
        verdicts.append((f"verdict == {cfg.expect}", diag.verdict == cfg.expect))
    return payload, verdicts, header, rows


def _run_mp(cfg: ScenarioConfig, seed: int):
    tol, max_iter = _solver_args(cfg)
    grid, _, _, _, op = _assemble_for(cfg, cfg.grid["n"])
    report = check_mp(
        op, battery=cfg.solver["battery"], seed=seed, tol=tol, max_iter=max_iter
    )
    payload = {
        "verdict": report.verdict,
        "lambda_p": report.lambda_p,
        "battery_count": report.battery_count,
        "battery_min": report.battery_min,
    }
    verdicts = [
        ("verdict matches sign(lambda_p)", (report.verdict == "holds") == (report.lambda_p >= 0)),
    ]
    if report.verdict == "violated":
        w = report.witness
        interior_ok = (op.apply(w)[grid.interior_mask] <= 1e-10).all()
        boundary_ok = (w[grid.boundary_mask] >= -1e-12).all()
        verdicts.append(
            ("witness satisfies the three clauses", bool(interior_ok and boundary_ok and w.min() < -1e-6))
        )
        header = ["index", *(f"x{ax}" for ax in range(grid.domain.dim)), "witness"]
        rows = [[i, *grid.points[i], w[i]] for i in range(grid.size)]
    else:
        if report.inverse_min is not None:
            payload["inverse_min"] = report.inverse_min
            verdicts.append(("interior inverse entrywise nonnegative", report.inverse_min >= -1e-12))
        header = ["battery_item", "min_u"]
        rows = [[i, m] for i, m in enumerate(report.battery_mins)]
    return payload, verdicts, header, rows


def _kpp_pieces(cfg: ScenarioConfig):
    tol, max_iter = _solver_args(cfg)
    grid, kernel, dispersal, coefficient, op = _assemble_for(cfg, cfg.grid["n"])
    f = nonlinearity_from_config(cfg)
    f.validate_on(grid.points)
    lin = op.with_diagonal(op.diagonal + f.fu0(grid.points))
    lam, verdict = survival_criterion(lin, tol=tol, max_iter=max_iter)
    return grid, op, f, lin, lam, verdict


def _run_kpp(cfg: ScenarioConfig, seed: int):
    tol, _ = _solver_args(cfg)
    grid, op, f, lin, lam, verdict = _kpp_pieces(cfg)
    k = cfg.solver["k"] or None
    if verdict == PERSISTENCE:
        sub = build_subsolution(lin, f)
        sup = np.maximum(np.full(op.size, 2.0 * f.saturation), sub)
        sol = steady_state(op, f, sub, sup, k=k, tol=tol)
    else:
        sol = steady_state(op, f, 0.0, 2.0 * f.saturation, k=k, tol=tol, start="sup")
    payload = {
        "lambda_p": lam,
        "verdict": f"{verdict} (lambda_p = {lam:.3f})",
        "residual": sol.residual,
        "p_min": float(sol.values.min()),
        "p_max": float(sol.values.max()),
        "trivial": sol.trivial,
        "iterations": sol.iterations,
    }
    verdicts = [
        ("steady-state residual within tol", sol.residual <= tol),
        ("dichotomy honored", sol.trivial == (verdict == EXTINCTION)),
    ]
    header = ["index", *(f"x{ax}" for ax in range(grid.domain.dim)), "p"]
    rows = [[i, *grid.points[i], sol.values[i]] for i in range(grid.size)]
    return payload, verdicts, header, rows


def _run_evolve(cfg: ScenarioConfig, seed: int):
    grid, op, f, lin, lam, verdict = _kpp_pieces(cfg)
    dt = cfg.solver["dt"] or None
    trace = evolve(
        op,
        f,
        cfg.initial["value"],
        dt=dt,
        T=cfg.solver["T"],
        checkpoints=cfg.solver["checkpoints"],
        mode=cfg.solver["mode"],
    )
    payload = {
        "lambda_p": lam,
        "survival": verdict,
        "classification": trace.classification,
        "final_sup": float(trace.final_state.max()),
    }
    verdicts = [("checkpoints nonnegative", bool((trace.min_u >= -1e-10).all()))]
    if cfg.expect is not None:
        verdicts.append((f"classification == {cfg.expect}", trace.classification == cfg.expect))
    header = ["t", "sup_dist_to_p", "sup_dist_to_0", "min_u", "max_u"]
    rows = [
        [t, dp, dz, mn, mx]
        for t, dp, dz, mn, mx in zip(
            trace.times, trace.dist_to_limit, trace.dist_to_zero, trace.min_u, trace.max_u
        )
    ]
    return payload, verdicts, header, rows


def _run_exhaustion(cfg: ScenarioConfig, seed: int):
    domain = domain_from_config(cfg)
    kernel = kernel_from_config(cfg, domain.dim)
    dispersal = dispersal_from_config(cfg)
    coefficient = coefficient_from_config(cfg.coefficient)
    result = exhaustion_lambda(
        domain,
        kernel,
        dispersal,
        coefficient,
        m=cfg.solver["levels"],
        h=cfg.grid["spacing"],
        tol=min(cfg.solver["tol"], 1e-12),
        max_iter=cfg.solver["max_iter"],
    )
    payload = {
        "lambda_limit": result.lambda_limit,
        "sigma": result.sigma,
        "sigma_prime": result.sigma_prime,
        "final_increment": result.final_increment,
    }
    verdicts = [
        ("lambda non-increasing across windows", True),  # enforced inside, raises otherwise
        ("final increment below 1e-4", result.final_increment < EXHAUSTION_INCREMENT_LIMIT),
        ("limit inside (-sigma', -sigma)", result.in_bracket),
    ]
    header = ["level", "radius", "N", "lambda_p"]
    rows = []
    for level, (window, lam) in enumerate(result.levels, start=1):
        radius = window.bounds[0][1]
        n_nodes = int(round(window.lengths[0] / cfg.grid["spacing"])) + 1
        rows.append([level, radius, n_nodes, lam])
    return payload, verdicts, header, rows


_HANDLERS = {
    "eigen": _run_eigen,
    "ladder": _run_ladder,
    "rankone": _run_rankone,
    "mp": _run_mp,
    "kpp": _run_kpp,
    "evolve": _run_evolve,
    "exhaustion": _run_exhaustion,
}
