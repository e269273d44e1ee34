"""Scenario files: TOML parsing, validation, defaulting, and echo.

A scenario file holds either one experiment at top level or several under
``[[scenario]]``.  Profile shapes come from closed enumerations; unknown keys
anywhere are rejected so that a config is always fully understood before it
runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .grid import BOUNDED, TORUS, Domain
from .profiles import (
    CoefficientA,
    DispersalG,
    KernelJ,
    affine_dispersal,
    constant_coefficient,
    constant_dispersal,
    make_kernel,
    plateau_coefficient,
    power_contact,
    power_dispersal,
    quadratic_well,
)
from .reaction import KPPNonlinearity, logistic

KINDS = ("eigen", "ladder", "mp", "kpp", "evolve", "exhaustion", "rankone")

_KERNEL_SHAPES = ("uniform", "triangular", "cosine", "cosine-bump")
_DISPERSAL_SHAPES = ("constant", "affine", "power")
_COEFFICIENT_SHAPES = ("constant", "quadratic-well", "power-contact", "plateau")

_TOP_KEYS = {
    "kind", "name", "seed", "expect", "rho",
    "domain", "grid", "kernel", "dispersal", "coefficient",
    "nonlinearity", "initial", "solver", "output", "scenario",
}
_BLOCK_KEYS = {
    "domain": {"dim", "bounds", "geometry", "radii", "core"},
    "grid": {"n", "ladder", "spacing"},
    "kernel": {"shape", "support"},
    "dispersal": {"shape", "value", "intercept", "slope", "exponent", "cap", "center"},
    "coefficient": {"shape", "value", "sigma", "curvature", "gamma", "constant", "center", "radius"},
    "nonlinearity": {"shape", "mu", "saturation"},
    "initial": {"value"},
    "solver": {
        "tol", "max_iter", "dt", "T", "k", "checkpoints", "battery",
        "levels", "renormalize", "mode", "margin",
    },
    "output": {"csv", "report"},
}

SOLVER_DEFAULTS = {
    "tol": 1e-10,
    "max_iter": 100000,
    "dt": 0.0,  # 0 means auto
    "T": 200.0,
    "k": 0.0,  # 0 means auto
    "checkpoints": 20,
    "battery": 50,
    "levels": 6,
    "mode": "explicit",
    "margin": 1e-3,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One validated experiment with every default resolved."""

    kind: str
    name: str
    seed: int
    expect: str | None
    rho: float | None
    domain: dict
    grid: dict
    kernel: dict | None
    dispersal: dict | None
    coefficient: dict | None
    nonlinearity: dict | None
    initial: dict | None
    solver: dict
    output: dict

    def __eq__(self, other):  # dict fields make the generated eq fine; keep explicit
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return self.__dict__ == other.__dict__


def _check_keys(block: str, table: dict) -> None:
    allowed = _BLOCK_KEYS[block]
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{block}]")


def _require(table: dict, key: str, block: str):
    if key not in table:
        raise ConfigError(f"missing required key {key!r} in [{block}]")
    return table[key]


def _normalize_scenario(raw: dict, index: int | None = None) -> ScenarioConfig:
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level key {key!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    name = str(raw.get("name", kind if index is None else f"{kind}-{index}"))
    seed = int(raw.get("seed", 0))
    expect = raw.get("expect")
    rho = float(raw["rho"]) if "rho" in raw else None

    domain = dict(_require(raw, "domain", "scenario"))
    _check_keys("domain", domain)
    bounds = _require(domain, "bounds", "domain")
    if not isinstance(bounds, list) or not all(isinstance(b, list) and len(b) == 2 for b in bounds):
        raise ConfigError("domain.bounds must be a list of [lo, hi] pairs")
    domain["bounds"] = [[float(lo), float(hi)] for lo, hi in bounds]
    domain.setdefault("dim", len(domain["bounds"]))
    if domain["dim"] != len(domain["bounds"]):
        raise ConfigError("domain.dim disagrees with the number of bound pairs")
    domain.setdefault("geometry", BOUNDED)
    if domain["geometry"] not in (BOUNDED, TORUS):
        raise ConfigError(f"unknown geometry {domain['geometry']!r}")
    if "radii" in domain:
        domain["radii"] = [float(r) for r in domain["radii"]]
    if "core" in domain:
        domain["core"] = [float(v) for v in domain["core"]]

    grid = dict(_require(raw, "grid", "scenario"))
    _check_keys("grid", grid)
    if "ladder" in grid:
        grid["ladder"] = [int(n) for n in grid["ladder"]]
    if "n" in grid:
        grid["n"] = int(grid["n"])
    if "spacing" in grid:
        grid["spacing"] = float(grid["spacing"])

    def block(key, shapes=None):
        if key not in raw:
            return None
        table = dict(raw[key])
        _check_keys(key, table)
        if shapes is not None:
            shape = _require(table, "shape", key)
            if shape not in shapes:
                raise ConfigError(f"unknown {key} shape {shape!r} (choose from {shapes})")
        return table

    kernel = block("kernel", _KERNEL_SHAPES)
    dispersal = block("dispersal", _DISPERSAL_SHAPES)
    coefficient = block("coefficient", _COEFFICIENT_SHAPES)
    nonlinearity = block("nonlinearity", ("logistic",))
    initial = block("initial")

    solver = dict(raw.get("solver", {}))
    _check_keys("solver", solver)
    merged = dict(SOLVER_DEFAULTS)
    merged.update(solver)
    merged["tol"] = float(merged["tol"])
    merged["max_iter"] = int(merged["max_iter"])
    merged["dt"] = float(merged["dt"])
    merged["T"] = float(merged["T"])
    merged["k"] = float(merged["k"])
    merged["checkpoints"] = int(merged["checkpoints"])
    merged["battery"] = int(merged["battery"])
    merged["levels"] = int(merged["levels"])
    merged["margin"] = float(merged["margin"])
    solver = merged

    output = dict(raw.get("output", {}))
    _check_keys("output", output)
    output.setdefault("csv", f"{name}.csv")
    output.setdefault("report", f"{name}.txt")

    cfg = ScenarioConfig(
        kind=kind,
        name=name,
        seed=seed,
        expect=expect,
        rho=rho,
        domain=domain,
        grid=grid,
        kernel=kernel,
        dispersal=dispersal,
        coefficient=coefficient,
        nonlinearity=nonlinearity,
        initial=initial,
        solver=solver,
        output=output,
    )
    _check_finite(cfg)
    _validate_for_kind(cfg)
    return cfg


def _check_finite(cfg: ScenarioConfig) -> None:
    def walk(block, value):
        if isinstance(value, dict):
            for v in value.values():
                walk(block, v)
        elif isinstance(value, list):
            for v in value:
                walk(block, v)
        elif isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"non-finite numeric value in [{block}]")

    if cfg.rho is not None and not math.isfinite(cfg.rho):
        raise ConfigError("non-finite rho")
    for block in ("domain", "grid", "kernel", "dispersal", "coefficient", "nonlinearity", "initial", "solver"):
        table = getattr(cfg, block)
        if table is not None:
            walk(block, table)


def _validate_for_kind(cfg: ScenarioConfig) -> None:
    kind = cfg.kind
    needs_kernel = kind in ("eigen", "ladder", "mp", "kpp", "evolve", "exhaustion")
    if needs_kernel:
        for key in ("kernel", "dispersal", "coefficient"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"kind {kind!r} needs a [{key}] block")
    if kind == "rankone":
        if cfg.coefficient is None:
            raise ConfigError("kind 'rankone' needs a [coefficient] block")
        if cfg.rho is None or cfg.rho <= 0:
            raise ConfigError("kind 'rankone' needs a positive top-level rho")
    if kind in ("ladder", "rankone"):
        if "ladder" not in cfg.grid:
            raise ConfigError(f"kind {kind!r} needs grid.ladder")
        if len(cfg.grid["ladder"]) < 4:
            raise ConfigError("grid.ladder needs at least four doubling levels")
    elif kind == "exhaustion":
        if "spacing" not in cfg.grid:
            raise ConfigError("kind 'exhaustion' needs grid.spacing")
        if "radii" not in cfg.domain:
            raise ConfigError("kind 'exhaustion' needs domain.radii")
    else:
        if "n" not in cfg.grid:
            raise ConfigError(f"kind {kind!r} needs grid.n")
    if kind == "mp" and cfg.domain["geometry"] == TORUS:
        raise ConfigError("the maximum principle needs a boundary; torus geometry has none")
    if kind == "rankone" and cfg.domain["geometry"] == TORUS:
        raise ConfigError("the rank-one surrogate lives on a bounded domain")
    if kind in ("kpp", "evolve"):
        if cfg.nonlinearity is None:
            raise ConfigError(f"kind {kind!r} is missing its nonlinearity")
        sigma = _coefficient_sigma(cfg.coefficient)
        if sigma > 1e-12:
            raise ConfigError(
                "reaction experiments require a nonpositive coefficient (a = -b <= 0)"
            )
    if kind == "evolve" and cfg.initial is None:
        raise ConfigError("kind 'evolve' needs an [initial] block")


def _coefficient_sigma(table: dict) -> float:
    if table["shape"] == "constant":
        return float(_require(table, "value", "coefficient"))
    return float(table.get("sigma", 0.0))


def parse_scenarios(path: str | Path) -> list[ScenarioConfig]:
    """All scenarios in a file (single top-level experiment or [[scenario]] list)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "scenario" in raw:
        extra = [k for k in raw if k != "scenario"]
        if extra:
            raise ConfigError(f"unexpected top-level keys next to [[scenario]]: {extra}")
        return [_normalize_scenario(dict(s), i) for i, s in enumerate(raw["scenario"])]
    return [_normalize_scenario(raw)]


def parse_config(path: str | Path) -> ScenarioConfig:
    """The single scenario in a file."""
    scenarios = parse_scenarios(path)
    if len(scenarios) != 1:
        raise ConfigError(f"expected exactly one scenario, found {len(scenarios)}")
    return scenarios[0]


# -- runtime object builders -------------------------------------------------


def domain_from_config(cfg: ScenarioConfig) -> Domain:
    d = cfg.domain
    bounds = tuple((lo, hi) for lo, hi in d["bounds"])
    if "radii" in d:
        return Domain(
            bounds,
            BOUNDED,
            truncation_radii=tuple(d["radii"]),
            core=tuple(d["core"]) if "core" in d else None,
        )
    return Domain(bounds, d["geometry"])


def kernel_from_config(cfg: ScenarioConfig, dim: int) -> KernelJ:
    k = cfg.kernel
    return make_kernel(k["shape"], float(_require(k, "support", "kernel")), dim)


def dispersal_from_config(cfg: ScenarioConfig) -> DispersalG:
    d = cfg.dispersal
    shape = d["shape"]
    if shape == "constant":
        return constant_dispersal(float(_require(d, "value", "dispersal")))
    if shape == "affine":
        return affine_dispersal(
            float(_require(d, "intercept", "dispersal")),
            float(_require(d, "slope", "dispersal")),
            [tuple(b) for b in cfg.domain["bounds"]],
        )
    return power_dispersal(
        float(_require(d, "exponent", "dispersal")),
        float(_require(d, "cap", "dispersal")),
        cfg.domain["dim"],
        float(d.get("center", 0.0)),
    )


def coefficient_from_config(table: dict) -> CoefficientA:
    shape = table["shape"]
    if shape == "constant":
        return constant_coefficient(float(_require(table, "value", "coefficient")))
    sigma = float(table.get("sigma", 0.0))
    center = table.get("center", 0.0)
    if shape == "quadratic-well":
        return quadratic_well(sigma, float(table.get("curvature", 1.0)), center)
    if shape == "power-contact":
        return power_contact(
            sigma,
            float(_require(table, "gamma", "coefficient")),
            float(table.get("constant", 1.0)),
            center,
        )
    return plateau_coefficient(
        sigma,
        float(_require(table, "radius", "coefficient")),
        float(table.get("curvature", 1.0)),
        center,
    )


def nonlinearity_from_config(cfg: ScenarioConfig) -> KPPNonlinearity:
    table = cfg.nonlinearity
    mu = table.get("mu", 0.0)
    if isinstance(mu, dict):
        _check_keys("coefficient", mu)
        if mu.get("shape") not in _COEFFICIENT_SHAPES:
            raise ConfigError("nonlinearity.mu table needs a coefficient shape")
        coeff = coefficient_from_config(mu)
        saturation = table.get("saturation", max(coeff.sigma, 1.0))
        return logistic(lambda pts: coeff(pts), saturation=float(saturation))
    return logistic(float(mu), table.get("saturation"))


# -- canonical echo ----------------------------------------------------------


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        return text if any(c in text for c in ".einf") else text + ".0"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot echo value of type {type(value)!r}")


def echo_toml(cfg: ScenarioConfig) -> str:
    """Canonical TOML text whose parse reproduces the config exactly."""
    lines = [
        f"kind = {_toml_value(cfg.kind)}",
        f"name = {_toml_value(cfg.name)}",
        f"seed = {_toml_value(cfg.seed)}",
    ]
    if cfg.expect is not None:
        lines.append(f"expect = {_toml_value(cfg.expect)}")
    if cfg.rho is not None:
        lines.append(f"rho = {_toml_value(cfg.rho)}")
    for block in ("domain", "grid", "kernel", "dispersal", "coefficient", "initial", "solver", "output"):
        table = getattr(cfg, block)
        if table is None:
            continue
        lines.append("")
        lines.append(f"[{block}]")
        for key in sorted(table):
            lines.append(f"{key} = {_toml_value(table[key])}")
    if cfg.nonlinearity is not None:
        table = dict(cfg.nonlinearity)
        mu = table.pop("mu", None)
        lines.append("")
        lines.append("[nonlinearity]")
        for key in sorted(table):
            lines.append(f"{key} = {_toml_value(table[key])}")
        if mu is not None:
            if isinstance(mu, dict):
                lines.append("")
                lines.append("[nonlinearity.mu]")
                for key in sorted(mu):
                    lines.append(f"{key} = {_toml_value(mu[key])}")
            else:
                lines.append(f"mu = {_toml_value(mu)}")
    return "\n".join(lines) + "\n"
