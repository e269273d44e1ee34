"""Nonlocal dispersal operators on grids: spectra, maximum principles, reactions."""

__version__ = "0.1.0"

from .grid import (
    Domain,
    Grid,
    MeasureWeights,
    build_grid,
    exhaustion_sequence,
    integrate,
    measure_weights,
    shrink_domain,
)
from .operator import (
    NonlocalOperator,
    assemble,
    column_mass_c,
    eval_kernel,
    kernel_floor_constants,
    sigma_and_sigma_prime,
)
from .profiles import (
    CoefficientA,
    DispersalG,
    KernelJ,
    constant_coefficient,
    constant_dispersal,
    make_kernel,
    plateau_coefficient,
    power_contact,
    power_dispersal,
    quadratic_well,
)
from .spectral import (
    EigenReport,
    ExistenceDiagnostic,
    cw_bracket,
    exhaustion_lambda,
    existence_diagnostic,
    harnack_ratio,
    integrability_classifier,
    principal_eigenpair,
    rank_one_bisection,
    rank_one_operator,
)
from .maxprinciple import MPReport, check_mp, witness_from_eigenfunction
from .reaction import (
    EvolutionTrace,
    KPPNonlinearity,
    KPPSolution,
    build_subsolution,
    evolve,
    logistic,
    steady_state,
    survival_criterion,
    uniqueness_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
