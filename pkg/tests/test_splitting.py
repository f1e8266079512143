import numpy as np
import pytest

from hiersplit.errors import ConfigError, DivergenceError, StructuralError
from hiersplit.linop import LinearMap
from hiersplit.prox import (
    BoxIndicator,
    HingeLoss,
    L1Norm,
    PointIndicator,
    Scaled,
    SquaredDeviation,
    Zero,
)
from hiersplit.splitting import (
    FixedPointOperator,
    KMConfig,
    SplitProblem,
    drs_operator,
    drs_product_I,
    drs_product_II,
    km_iterate,
    lal_operator,
    nonexpansiveness_check,
)

TIGHT = KMConfig(alpha=0.5, max_iter=20_000, fp_residual_tol=1e-13)


def _solve(T, cfg=TIGHT, z0=None):
    z0 = np.zeros(T.dim) if z0 is None else z0
    z, trace = km_iterate(T, cfg, z0)
    return T.extract(z), trace


def _abs_quad_problem():
    """min |x| + (x-3)^2/2, unique minimizer 2 (soft threshold of 3)."""
    return SplitProblem(L1Norm(1),
                        [(SquaredDeviation(1, center=[3.0]), LinearMap.identity(1))])


# ----------------------------------------------------------- drs_operator

def test_drs_double_point_indicator_is_identity(rng):
    T = drs_operator(PointIndicator(1), PointIndicator(1))
    for _ in range(10):
        z = rng.standard_normal(1)
        assert np.allclose(T.apply(z), z)
    assert T.extract(rng.standard_normal(1))[0] == pytest.approx(0.0)


def test_drs_abs_quad_desk_instance():
    T = drs_operator(L1Norm(1), SquaredDeviation(1, center=[3.0]))
    x, _ = _solve(T)
    assert x[0] == pytest.approx(2.0, abs=1e-8)


def test_drs_two_quadratics_fix_origin():
    T = drs_operator(SquaredDeviation(1), SquaredDeviation(1))
    z, _ = km_iterate(T, TIGHT, np.array([1.0]))
    assert T.extract(z)[0] == pytest.approx(0.0, abs=1e-10)


def test_drs_requires_matching_dims():
    with pytest.raises(StructuralError):
        drs_operator(L1Norm(1), L1Norm(2))


# ----------------------------------------------------------- drs_product_I

def test_drs1_box_feasibility():
    prob = SplitProblem(Zero(1), [(BoxIndicator(1, 1.0, 2.0),
                                   LinearMap.identity(1))])
    x, _ = _solve(drs_product_I(prob))
    assert 1.0 - 1e-8 <= x[0] <= 2.0 + 1e-8


def test_drs1_matches_plain_drs():
    x1, _ = _solve(drs_operator(L1Norm(1), SquaredDeviation(1, center=[3.0])))
    x2, _ = _solve(drs_product_I(_abs_quad_problem()))
    assert x2[0] == pytest.approx(2.0, abs=1e-6)
    assert abs(x1[0] - x2[0]) <= 1e-6


def test_drs1_point_constraint_forces_origin():
    prob = SplitProblem(PointIndicator(2),
                        [(SquaredDeviation(2, center=[1.0, 1.0]),
                          LinearMap.identity(2))])
    x, _ = _solve(drs_product_I(prob))
    assert np.allclose(x, [0.0, 0.0], atol=1e-8)


# ----------------------------------------------------------- drs_product_II

def test_drs2_unconstrained_quadratic():
    prob = SplitProblem(Zero(1), [(SquaredDeviation(1, center=[3.0]),
                                   LinearMap.identity(1))])
    x, _ = _solve(drs_product_II(prob))
    assert x[0] == pytest.approx(3.0, abs=1e-8)


def test_drs2_two_half_quadratics_match_type_I():
    prob = SplitProblem(
        L1Norm(1),
        [(Scaled(SquaredDeviation(1, center=[3.0]), 0.5), LinearMap.identity(1)),
         (Scaled(SquaredDeviation(1, center=[3.0]), 0.5), LinearMap.identity(1))],
    )
    x, _ = _solve(drs_product_II(prob))
    x1, _ = _solve(drs_product_I(_abs_quad_problem()))
    assert x[0] == pytest.approx(2.0, abs=1e-6)
    assert abs(x[0] - x1[0]) <= 1e-6


def test_drs2_hinge_toy_reaches_zero_loss():
    # two samples at +-1 with labels +-1: margins y_i x_i w = w for both
    prob = SplitProblem(Zero(1), [(HingeLoss(1), LinearMap.row([1.0])),
                                  (HingeLoss(1), LinearMap.row([1.0]))])
    x, _ = _solve(drs_product_II(prob))
    assert max(0.0, 1.0 - x[0]) * 2 == pytest.approx(0.0, abs=1e-9)


def test_drs2_rejects_wide_terms():
    prob = SplitProblem(Zero(2), [(SquaredDeviation(2), LinearMap.identity(2))])
    with pytest.raises(StructuralError):
        drs_product_II(prob)


def test_drs2_rejects_zero_row():
    prob = SplitProblem(Zero(2), [(HingeLoss(1), LinearMap.row([0.0, 0.0]))])
    with pytest.raises(StructuralError):
        drs_product_II(prob)


# ----------------------------------------------------------- lal_operator

def _lal_ls_problem():
    """min ||x - (2,3)||^2/2 subject to x_1 = 0 via the row (0.5, 0)."""
    return SplitProblem(SquaredDeviation(2, center=[2.0, 3.0]),
                        [(PointIndicator(1), LinearMap(np.array([[0.5, 0.0]])))])


def test_lal_equality_constrained_least_squares():
    T = lal_operator(_lal_ls_problem(), u=0.5)
    cfg = KMConfig(alpha=0.5, max_iter=40_000, fp_residual_tol=1e-14)
    x, _ = _solve(T, cfg)
    assert np.allclose(x, [0.0, 3.0], atol=1e-6)


def test_lal_double_zero_constraint():
    prob = SplitProblem(PointIndicator(1),
                        [(PointIndicator(1), LinearMap.scaled_identity(1, 0.5))])
    x, _ = _solve(lal_operator(prob))
    assert x[0] == pytest.approx(0.0, abs=1e-9)


def test_lal_analytic_primal_dual_pair_is_fixed():
    # KKT for the least-squares instance: u A* nu = x - c with x = (0, 3)
    T = lal_operator(_lal_ls_problem(), u=0.5)
    w_star = np.array([0.0, 3.0, 0.0, -8.0])
    assert np.allclose(T.apply(w_star), w_star, atol=1e-8)


def test_lal_scaling_precondition_checked():
    with pytest.raises(ConfigError, match="LAL scaling"):
        lal_operator(_lal_ls_problem(), u=5.0)


# ----------------------------------------------------------- km_iterate

def test_km_identity_stops_immediately():
    T = FixedPointOperator(2, lambda z: z, lambda z: z, "DRS")
    z, trace = km_iterate(T, KMConfig(alpha=0.7, max_iter=100), np.array([1.0, -2.0]))
    assert np.allclose(z, [1.0, -2.0])
    assert len(trace) == 1
    assert trace.fp_residual[0] == 0.0


def test_km_alpha_one_on_abs_quad():
    T = drs_operator(L1Norm(1), SquaredDeviation(1, center=[3.0]))
    cfg = KMConfig(alpha=1.0, max_iter=2000, fp_residual_tol=1e-12)
    z, _ = km_iterate(T, cfg, np.zeros(1))
    assert T.extract(z)[0] == pytest.approx(2.0, abs=1e-6)


def test_km_divergence_guard():
    T = FixedPointOperator(1, lambda z: 2.0 * z, lambda z: z, "DRS")
    cfg = KMConfig(alpha=1.0, max_iter=10_000, divergence_guard=1e6)
    with pytest.raises(DivergenceError) as err:
        km_iterate(T, cfg, np.array([1.0]))
    assert err.value.trace is not None and len(err.value.trace) > 1


def test_km_records_objective_per_iteration():
    T = drs_product_I(_abs_quad_problem())
    _, trace = km_iterate(T, KMConfig(alpha=0.5, max_iter=50,
                                      fp_residual_tol=0.0), np.zeros(T.dim))
    assert len(trace) == 50
    assert np.isfinite(trace.objective[-1])


def test_km_config_validation():
    with pytest.raises(ConfigError):
        KMConfig(alpha=0.0)
    with pytest.raises(ConfigError):
        KMConfig(alpha=2.0)
    with pytest.raises(ConfigError):
        KMConfig(divergence_guard=0.0)


# ----------------------------------------------------------- properties

def _desk_operators():
    prob = _abs_quad_problem()
    return [
        drs_operator(L1Norm(1), SquaredDeviation(1, center=[3.0])),
        drs_product_I(prob),
        drs_product_II(prob),
        lal_operator(prob),
    ]


def test_all_operators_nonexpansive(rng):
    for T in _desk_operators():
        assert nonexpansiveness_check(T, trials=100, seed=11, scale=5.0), T.kind


def test_route_equivalence_on_singleton_instance():
    xs = []
    for T in _desk_operators():
        cfg = KMConfig(alpha=0.5, max_iter=60_000, fp_residual_tol=1e-14)
        x, _ = _solve(T, cfg)
        xs.append(x[0])
    for a in xs:
        for b in xs:
            assert abs(a - b) <= 1e-5
    assert xs[0] == pytest.approx(2.0, abs=1e-6)


def test_fejer_monotonicity_and_residual_decay():
    T = drs_product_I(_abs_quad_problem())
    z_star, _ = km_iterate(T, KMConfig(alpha=0.5, max_iter=60_000,
                                       fp_residual_tol=1e-15), np.zeros(T.dim))
    z = np.full(T.dim, 2.0)
    dists, residuals = [], []
    for _ in range(300):
        z_new = 0.5 * z + 0.5 * T.apply(z)
        dists.append(np.linalg.norm(z - z_star))
        residuals.append(np.linalg.norm(z_new - z))
        z = z_new
    assert all(b <= a + 1e-10 for a, b in zip(dists, dists[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))


def test_split_problem_prox_decomposition(rng):
    prob = SplitProblem(Zero(2), [(L1Norm(1), LinearMap.row([1.0, 0.0])),
                                  (HingeLoss(2), LinearMap.identity(2))])
    y = rng.standard_normal(3)
    out = prob.g.prox(0.8, y)
    assert np.allclose(out[:1], L1Norm(1).prox(0.8, y[:1]))
    assert np.allclose(out[1:], HingeLoss(2).prox(0.8, y[1:]))


def test_split_problem_normalizes_empty_terms():
    prob = SplitProblem(SquaredDeviation(1, center=[5.0]))
    assert len(prob.terms) == 1
    assert prob.first_stage_value([5.0]) == pytest.approx(0.0)


def test_trex_subproblem_cross_relaxation(rng):
    """Over-relaxed (1.95) and moderate (0.9) runs reach the same objective."""
    from hiersplit.trex import RegressionData, TrexSpec, trex_subproblem

    X = rng.standard_normal((3, 2))
    z = rng.standard_normal(3)
    spec = TrexSpec(RegressionData(X, z))
    b_hi, tr_hi = trex_subproblem(spec, 1, alpha=1.95, max_iter=8000)
    b_lo, tr_lo = trex_subproblem(spec, 1, alpha=0.9, max_iter=8000)
    obj_hi = spec.subproblem_objective(1, b_hi)
    obj_lo = spec.subproblem_objective(1, b_lo)
    assert abs(obj_hi - obj_lo) <= 1e-5 * (1.0 + abs(obj_lo))
    tail = np.asarray(tr_hi.objective[-500:])
    assert np.all(np.diff(tail) <= 1e-10)
