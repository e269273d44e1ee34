import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_spectra.errors import CriterionFailure, NonConvergenceError
from nonlocal_spectra.grid import Domain, build_grid
from nonlocal_spectra.operator import NonlocalOperator, assemble
from nonlocal_spectra.profiles import (
    coefficient_from_callable,
    constant_coefficient,
    constant_dispersal,
    make_kernel,
    power_contact,
    quadratic_well,
    scale_kernel,
)
from nonlocal_spectra.spectral import (
    cw_bracket,
    exhaustion_lambda,
    existence_diagnostic,
    harnack_ratio,
    integrability_classifier,
    principal_eigenpair,
    rank_one_bisection,
    rank_one_operator,
)

TRI = make_kernel("triangular", 0.2, 1)
UNIT_G = constant_dispersal(1.0)

# dense eigendecomposition oracle, frozen before the solver was written:
# trapezoid matrix for J triangular s=0.2, g=1, a=-x^2 on (-1,1), N=512
SANDWICH_LAMBDA_512 = -0.9433139324240297
# scalar bisection on the closed form F(t) = (2/sqrt(t)) atan(1/sqrt(t)), t=-lam-1
ANALYTIC_RANK_ONE_ROOT = -2.7070529755509227


def torus_op(a0=-0.3, n=64):
    grid = build_grid(Domain.interval(0, 1, "torus"), n)
    return assemble(grid, make_kernel("uniform", 0.25, 1), UNIT_G, constant_coefficient(a0))


def dense_lambda_p(op):
    return -float(np.max(scipy.linalg.eigvals(op.matrix).real))


def test_cw_bracket_examples():
    eye = np.eye(3)
    assert cw_bracket(eye, np.array([1.0, 2.0, 3.0])) == (1.0, 1.0)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert cw_bracket(swap, np.array([1.0, 1.0])) == (1.0, 1.0)
    upper = np.array([[2.0, 1.0], [0.0, 1.0]])
    assert cw_bracket(upper, np.array([1.0, 1.0])) == (1.0, 3.0)
    with pytest.raises(ValueError):
        cw_bracket(eye, np.array([1.0, 0.0, 1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_cw_bracket_contains_spectral_radius(seed):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.0, 1.0, size=(6, 6)) + np.eye(6)
    phi = rng.uniform(0.1, 2.0, size=6)
    lo, hi = cw_bracket(m, phi)
    rho = np.max(np.abs(np.linalg.eigvals(m)))
    assert lo - 1e-12 <= rho <= hi + 1e-12


def test_torus_constant_eigenpair_exact():
    for a0 in (-0.3, 0.0):
        report = principal_eigenpair(torus_op(a0))
        assert report.lambda_p == pytest.approx(-(a0 + 1.0), abs=1e-8)
        assert np.allclose(report.eigenvector, 1.0)
        assert report.residual <= 1e-10
        assert report.cw_lower <= report.cw_upper


def test_bounded_matches_dense_oracle():
    grid = build_grid(Domain.interval(-1, 1), 512)
    op = assemble(grid, TRI, UNIT_G, quadratic_well(0.0, 1.0))
    report = principal_eigenpair(op, tol=1e-10)
    assert report.lambda_p == pytest.approx(SANDWICH_LAMBDA_512, abs=1e-8)
    assert report.lambda_p == pytest.approx(dense_lambda_p(op), abs=1e-8)
    assert (report.eigenvector > 0).all()
    # residual duality at the converged report
    resid = np.abs(op.apply(report.eigenvector) + report.lambda_p * report.eigenvector).max()
    assert resid <= 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dense_oracle_equivalence_random(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(Domain.interval(-1, 1), 128)
    shape = ["uniform", "triangular", "cosine"][seed % 3]
    J = make_kernel(shape, float(rng.uniform(0.15, 0.4)), 1)
    a = coefficient_from_callable(
        lambda p, c=rng.uniform(-1, 0.3, 3): c[0] + c[1] * p[:, 0] + c[2] * p[:, 0] ** 2,
        sigma=2.0,
        name="rand",
    )
    op = assemble(grid, J, UNIT_G, a)
    report = principal_eigenpair(op, tol=1e-10)
    assert report.lambda_p == pytest.approx(dense_lambda_p(op), abs=1e-8)


def test_reducible_matrix_refuses_to_converge():
    # two decoupled blocks with distinct radii: the bracket cannot close
    grid = build_grid(Domain.interval(-1, 1), 16)
    K = np.zeros((16, 16))
    K[:8, :8] = 0.2
    K[8:, 8:] = 0.1
    op = NonlocalOperator(
        grid=grid,
        kernel_part=K,
        diagonal=np.zeros(16),
        dmu=grid.weights.copy(),
        degenerate_mask=np.zeros(16, dtype=bool),
        column_mass=(grid.weights @ K) / grid.weights,
    )
    with pytest.raises(NonConvergenceError) as err:
        principal_eigenpair(op, tol=1e-12, max_iter=300)
    assert err.value.bracket is not None


def test_rank_one_bisection_quadratic_profile():
    grid = build_grid(Domain.interval(-1, 1), 2048)
    lam1, phi = rank_one_bisection(grid, quadratic_well(1.0, 1.0), 1.0)
    assert lam1 == pytest.approx(ANALYTIC_RANK_ONE_ROOT, abs=0.01)
    a_vals = quadratic_well(1.0, 1.0)(grid.points)
    f_val = float(np.sum(grid.weights * 1.0 / (-lam1 - a_vals)))
    assert abs(f_val - 1.0) <= 1e-8
    assert (phi > 0).all()


def test_rank_one_bisection_closed_form():
    grid = build_grid(Domain.interval(0, 1), 512)
    lam1, _ = rank_one_bisection(grid, constant_coefficient(0.0), 1.0)
    assert lam1 == pytest.approx(-1.0, abs=1e-8)


def test_rank_one_bisection_criterion_failure():
    grid = build_grid(Domain.interval(-1, 1), 2048)
    with pytest.raises(CriterionFailure) as err:
        rank_one_bisection(grid, power_contact(1.0, 0.5, 1.0), 0.2)
    assert err.value.f_limit == pytest.approx(0.8, abs=0.06)


def test_rank_one_bisection_matches_dense_surrogate():
    grid = build_grid(Domain.interval(-1, 1), 512)
    coeff = quadratic_well(1.0, 1.0)
    lam1, _ = rank_one_bisection(grid, coeff, 1.0)
    surrogate = rank_one_operator(grid, 1.0, coeff)
    assert lam1 == pytest.approx(dense_lambda_p(surrogate), abs=1e-6)


def test_integrability_classifier():
    assert integrability_classifier(power_contact(0.0, 1.0, 1.0), 1) == "non-integrable"
    assert integrability_classifier(power_contact(0.0, 2.0, 1.0), 2) == "non-integrable"
    assert integrability_classifier(power_contact(0.0, 0.5, 1.0), 1) == "integrable"
    assert integrability_classifier(constant_coefficient(0.3), 1) == "plateau"
    bare = coefficient_from_callable(lambda p: -p[:, 0] ** 2, sigma=0.0)
    with pytest.raises(ValueError):
        integrability_classifier(bare, 1)


def test_rank_one_operator_structure():
    grid = build_grid(Domain.interval(-1, 1), 64)
    op = rank_one_operator(grid, 0.2, constant_coefficient(0.0))
    assert np.allclose(op.kernel_part.sum(axis=1), 0.2 * 2.0)
    report = principal_eigenpair(op)
    assert report.lambda_p == pytest.approx(-0.4, abs=1e-10)
    assert np.allclose(report.eigenvector, 1.0)
    with pytest.raises(ValueError):
        rank_one_operator(grid, -0.1, constant_coefficient(0.0))
    torus_grid = build_grid(Domain.interval(0, 1, "torus"), 16)
    with pytest.raises(ValueError):
        rank_one_operator(torus_grid, 0.2, constant_coefficient(0.0))


def test_existence_diagnostic_torus_constant():
    def build(n):
        return torus_op(-0.3, n)

    diag = existence_diagnostic(build, [16, 32, 64, 128], tol=1e-10)
    assert diag.verdict == "eigenfunction-exists"
    assert np.allclose(diag.concentrations, diag.concentrations[0])
    with pytest.raises(ValueError):
        existence_diagnostic(build, [16, 32, 64], tol=1e-10)
    with pytest.raises(ValueError):
        existence_diagnostic(build, [16, 32, 64, 100], tol=1e-10)


def test_domain_and_coefficient_monotonicity_small():
    # nested aligned windows and ordered coefficients at N = 64
    grid = build_grid(Domain.interval(-1, 1), 64)
    h = grid.spacing[0]
    sub = Domain.interval(-1 + 8 * h, 1 - 8 * h)
    sub_grid = build_grid(sub, 64 - 16)
    a = quadratic_well(0.0, 1.0)
    lam_small = principal_eigenpair(assemble(sub_grid, TRI, UNIT_G, a)).lambda_p
    lam_big = principal_eigenpair(assemble(grid, TRI, UNIT_G, a)).lambda_p
    assert lam_small >= lam_big - 1e-10
    a_lower = coefficient_from_callable(lambda p: -p[:, 0] ** 2 - 0.25, sigma=-0.25)
    lam_lower = principal_eigenpair(assemble(grid, TRI, UNIT_G, a_lower)).lambda_p
    assert lam_lower >= lam_big + 0.25 - 1e-10
    # Lipschitz in the coefficient
    assert abs(lam_lower - lam_big) <= 0.25 + 1e-10
    # kernel monotonicity
    lam_scaled = principal_eigenpair(assemble(grid, scale_kernel(TRI, 0.5), UNIT_G, a)).lambda_p
    assert lam_scaled >= lam_big - 1e-10


def test_exhaustion_lambda_monotone():
    line = Domain.line([2, 3, 4])
    a = coefficient_from_callable(
        lambda p: -p[:, 0] ** 2 / (1 + p[:, 0] ** 2), sigma=0.0, gamma=2.0
    )
    result = exhaustion_lambda(line, TRI, UNIT_G, a, m=3, h=1 / 32)
    lams = [lam for _, lam in result.levels]
    assert all(l2 <= l1 + 1e-10 for l1, l2 in zip(lams, lams[1:]))
    assert result.in_bracket
    with pytest.raises(ValueError):
        exhaustion_lambda(line, TRI, UNIT_G, a, m=1, h=1 / 32)
    with pytest.raises(ValueError):
        exhaustion_lambda(Domain.line([2.0004, 3.0]), TRI, UNIT_G, a, m=2, h=1 / 32)


def test_exhaustion_constant_coefficient_limit():
    # on wide windows a constant coefficient approaches the whole-line value -(a0 + 1);
    # the smooth kernel keeps the quadrature bias below the window-truncation effect
    line = Domain.line([4, 6, 8])
    a0 = -0.3
    smooth = make_kernel("cosine", 0.2, 1)
    result = exhaustion_lambda(line, smooth, UNIT_G, constant_coefficient(a0), m=3, h=1 / 32)
    assert result.lambda_limit == pytest.approx(-(a0 + 1.0), abs=1e-3)


def test_harnack_ratio():
    report = principal_eigenpair(torus_op(-0.3))
    op = torus_op(-0.3)
    assert harnack_ratio(op, report.eigenvector, [(0.25, 0.75)]) == pytest.approx(1.0)
    grid = build_grid(Domain.interval(-1, 1), 128)
    opb = assemble(grid, TRI, UNIT_G, quadratic_well(0.0, 1.0))
    rep = principal_eigenpair(opb)
    ratio = harnack_ratio(opb, rep.eigenvector, [(-0.5, 0.5)])
    assert ratio > 1.0
    with pytest.raises(ValueError):
        harnack_ratio(opb, rep.eigenvector, [(-1.0, 1.0)])


@settings(max_examples=12, deadline=None)
@given(
    c_a=st.tuples(st.floats(-1, 0.4), st.floats(-0.5, 0.5), st.floats(-0.8, 0.2)),
    c_b=st.tuples(st.floats(-1, 0.4), st.floats(-0.5, 0.5), st.floats(-0.8, 0.2)),
)
def test_lambda_p_lipschitz_in_coefficient_fuzz(c_a, c_b):
    grid = build_grid(Domain.interval(-1, 1), 32)

    def coeff(c):
        return coefficient_from_callable(
            lambda p: c[0] + c[1] * p[:, 0] + c[2] * p[:, 0] ** 2,
            sigma=c[0] + abs(c[1]) + abs(c[2]),
            name="fuzz",
        )

    op_a = assemble(grid, TRI, UNIT_G, coeff(c_a))
    op_b = assemble(grid, TRI, UNIT_G, coeff(c_b))
    lam_a = principal_eigenpair(op_a, tol=1e-11).lambda_p
    lam_b = principal_eigenpair(op_b, tol=1e-11).lambda_p
    dist = float(np.abs(op_a.diagonal - op_b.diagonal).max())
    assert abs(lam_a - lam_b) <= dist + 1e-10


def test_shift_recorded_on_operator():
    op = torus_op(-0.3)
    assert op.shift is None
    principal_eigenpair(op)
    assert op.shift == pytest.approx(np.abs(op.diagonal).max() + op.column_mass.max() + 1.0)
