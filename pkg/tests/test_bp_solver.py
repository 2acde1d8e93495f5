import numpy as np
import pytest

from l1bp.bp_solver import (BpConfig, cavity_sums, finalize, init_state, run_bp, sweep,
                            update_check_to_variable, update_variable_to_check)
from l1bp.instance_gen import EnsembleSpec, RngSeed, SparseMeasurementMatrix, make_instance
from l1bp.kernel import soft_threshold, soft_threshold_deriv
from l1bp.l1_oracle import brute_force_l1

EPS = BpConfig().epsilon_c


def _complete_3x2(seed=0):
    rng = np.random.default_rng(seed)
    return SparseMeasurementMatrix.from_dense(rng.standard_normal((2, 3)))


def _edge(F):
    return {(int(r), int(c)): e for e, (r, c) in enumerate(zip(F.rows, F.cols))}


def _v2c_reference(F, y, C, D):
    """A, B by explicit loops over the dense neighbourhoods."""
    idx = _edge(F)
    A, B = np.zeros(F.n_edges), np.zeros(F.n_edges)
    for (mu, i), e in idx.items():
        for (nu, l), f in idx.items():
            if l == i and nu != mu:
                A[e] += F.vals[f] ** 2 / C[f]
                B[e] += F.vals[f] / C[f] * (y[nu] - D[f])
    return A, B


def _c2v_reference(F, A, B):
    idx = _edge(F)
    C, D = np.zeros(F.n_edges), np.zeros(F.n_edges)
    for (mu, i), e in idx.items():
        for (nu, l), f in idx.items():
            if nu == mu and l != i:
                C[e] += F.vals[f] ** 2 * soft_threshold_deriv(B[f], A[f])
                D[e] += F.vals[f] * soft_threshold(B[f], A[f])
    return np.maximum(C, EPS), D


def test_v2c_plug_in():
    F = _complete_3x2()
    y = np.array([0.7, -1.3])
    s = update_variable_to_check(init_state(F), F, y)
    dense = F.to_dense()
    for e, (mu, i) in enumerate(zip(F.rows, F.cols)):
        other = 1 - mu
        assert s.a_msg[e] == pytest.approx(dense[other, i] ** 2, rel=1e-14)
        assert s.b_msg[e] == pytest.approx(dense[other, i] * y[other], rel=1e-14)


def test_v2c_zero_measurements():
    F = _complete_3x2()
    s = update_variable_to_check(init_state(F), F, np.zeros(2))
    assert not np.any(s.b_msg)


def test_v2c_straight_line():
    F = _complete_3x2(1)
    rng = np.random.default_rng(2)
    y = rng.standard_normal(2)
    s = init_state(F)
    s.c_msg = rng.uniform(0.2, 3.0, F.n_edges)
    s.d_msg = rng.standard_normal(F.n_edges)
    A, B = _v2c_reference(F, y, s.c_msg.copy(), s.d_msg.copy())
    update_variable_to_check(s, F, y)
    np.testing.assert_allclose(s.a_msg, A, rtol=1e-12)
    np.testing.assert_allclose(s.b_msg, B, rtol=1e-12, atol=1e-14)


def test_c2v_dead_zone():
    F = _complete_3x2()
    s = init_state(F)
    s.a_msg = np.ones(F.n_edges)
    s.b_msg = np.full(F.n_edges, 0.5)
    update_check_to_variable(s, F)
    assert np.all(s.c_msg == EPS) and not np.any(s.d_msg)


def test_c2v_single_active_neighbour():
    dense = np.array([[0.5, 1.0, 1.0], [1.0, 1.0, 1.0]])
    F = SparseMeasurementMatrix.from_dense(dense)
    idx = _edge(F)
    s = init_state(F)
    s.a_msg = np.ones(F.n_edges)
    s.b_msg = np.full(F.n_edges, 0.1)
    s.b_msg[idx[(0, 0)]] = 2.0
    update_check_to_variable(s, F)
    for i in (1, 2):
        assert s.c_msg[idx[(0, i)]] == pytest.approx(0.25)
        assert s.d_msg[idx[(0, i)]] == pytest.approx(0.5)
    assert s.c_msg[idx[(0, 0)]] == EPS


def test_c2v_straight_line_random_graph():
    F, _, _ = make_instance(EnsembleSpec.regular(12, 3, 6), 0.3, RngSeed(4))
    rng = np.random.default_rng(5)
    s = init_state(F)
    s.a_msg = rng.uniform(0.1, 2.0, F.n_edges)
    s.b_msg = rng.normal(0, 2.0, F.n_edges)
    C, D = _c2v_reference(F, s.a_msg.copy(), s.b_msg.copy())
    update_check_to_variable(s, F)
    np.testing.assert_allclose(s.c_msg, C, rtol=1e-12)
    np.testing.assert_allclose(s.d_msg, D, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_cavity_exclusion_identity(seed):
    F, x, y = make_instance(EnsembleSpec.regular(60, 4, 8), 0.2, RngSeed(seed))
    s = init_state(F)
    for _ in range(3):
        sweep(s, F, y.values, BpConfig())
    rng = np.random.default_rng(seed)
    for table, groups in ((F.col_table, F.cols), (F.row_table, F.rows)):
        terms = rng.standard_normal(F.n_edges) * rng.uniform(0.1, 10, F.n_edges)
        totals, loo = cavity_sums(terms, table)
        scale = np.bincount(groups, weights=np.abs(terms))[groups]
        assert np.max(np.abs(totals[groups] - terms - loo) / scale) < 1e-12
    # the solver's own messages: full site sums minus one edge
    inv_c = 1.0 / s.c_msg
    a_terms = F.vals ** 2 * inv_c
    b_terms = F.vals * inv_c * (y.values[F.rows] - s.d_msg)
    update_variable_to_check(s, F, y.values)
    for terms, msg in ((a_terms, s.a_msg), (b_terms, s.b_msg)):
        site = np.bincount(F.cols, weights=terms, minlength=F.n)
        scale = np.bincount(F.cols, weights=np.abs(terms), minlength=F.n)[F.cols]
        assert np.max(np.abs(site[F.cols] - terms - msg) / scale) < 1e-12


def test_cavity_sums_padded_table():
    table = np.array([[0, 2, 4], [1, 3, 4]])  # pad index 4 == E
    terms = np.array([1.0, 10.0, 2.0, 20.0])
    totals, loo = cavity_sums(terms, table)
    assert totals.tolist() == [3.0, 30.0]
    assert loo.tolist() == [2.0, 20.0, 1.0, 10.0]


def test_positivity_after_sweeps():
    F, x, y = make_instance(EnsembleSpec.regular(400, 10, 20), 0.15, RngSeed(3))
    s = init_state(F)
    for _ in range(30):
        sweep(s, F, y.values, BpConfig())
        assert np.all(s.a_msg > 0) and np.all(s.c_msg >= EPS)
        assert np.all(np.isfinite(s.b_msg)) and np.all(np.isfinite(s.d_msg))


def test_zero_fixed_point():
    F, _, _ = make_instance(EnsembleSpec.regular(200, 3, 6), 0.2, RngSeed(0))
    res = run_bp(F, np.zeros(F.m))
    assert res.converged and res.iterations == 1 and not np.any(res.x_hat)


def test_finalize_plug_in():
    F, x, y = make_instance(EnsembleSpec.regular(40, 3, 6), 0.2, RngSeed(1))
    res = finalize(init_state(F), F, y)
    A = np.bincount(F.cols, weights=F.vals ** 2, minlength=F.n)
    B = F.rmatvec(y.values)
    np.testing.assert_allclose(res.x_hat, soft_threshold(B, A), rtol=1e-13, atol=1e-15)


def test_finalize_zero():
    F, _, _ = make_instance(EnsembleSpec.regular(40, 3, 6), 0.2, RngSeed(1))
    y = np.zeros(F.m)
    s = init_state(F)
    update_variable_to_check(s, F, y)
    update_check_to_variable(s, F)
    assert not np.any(finalize(s, F, y).x_hat)


def test_operation_count_scales_linearly():
    per_sweep = []
    for n in (800, 1600, 3200):
        F, x, y = make_instance(EnsembleSpec.regular(n, 10, 20), 0.1, RngSeed(0))
        s = init_state(F)
        sweep(s, F, y.values, BpConfig())
        before = s.ops
        sweep(s, F, y.values, BpConfig())
        per_sweep.append(s.ops - before)
    assert abs(per_sweep[1] / per_sweep[0] - 2) < 0.1
    assert abs(per_sweep[2] / per_sweep[1] - 2) < 0.1


@pytest.mark.parametrize("seed", range(4))
def test_success_implies_small_residual(seed):
    F, x, y = make_instance(EnsembleSpec.regular(800, 10, 20), 0.1, RngSeed(seed))
    res = run_bp(F, y, truth=x)
    assert res.success
    assert res.residual_inf <= 1e-3 * (1 + np.max(np.abs(y.values)))


def test_reports_non_convergence():
    F, x, y = make_instance(EnsembleSpec.regular(400, 10, 20), 0.3, RngSeed(2))
    res = run_bp(F, y, BpConfig(max_iters=20), truth=x)
    assert res.iterations == 20 and not res.converged and not res.success


def test_matches_oracle_on_small_instances():
    matched = 0
    for seed in range(200):
        F, x, y = make_instance(EnsembleSpec.regular(12, 3, 6), 0.15, RngSeed(seed))
        if not np.any(x.values):
            continue
        try:
            orc = brute_force_l1(F, y)
        except ValueError:
            continue
        if not (orc.unique and np.max(np.abs(orc.x_star - x.values)) < 1e-9):
            continue
        res = run_bp(F, y, truth=x)
        if res.converged and res.success:
            assert np.max(np.abs(res.x_hat - orc.x_star)) < 1e-4
            matched += 1
    assert matched >= 5


def test_dimension_checks():
    F, x, y = make_instance(EnsembleSpec.regular(40, 3, 6), 0.2, RngSeed(1))
    with pytest.raises(ValueError):
        run_bp(F, np.zeros(F.m + 1))
    with pytest.raises(TypeError):
        run_bp(F.to_dense(), y)


@pytest.mark.parametrize("kw", [dict(max_iters=0), dict(damping=1.0), dict(epsilon_c=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BpConfig(**kw)


def test_damping_mixes_b_and_d_only():
    F, x, y = make_instance(EnsembleSpec.regular(100, 3, 6), 0.2, RngSeed(7))
    s0 = init_state(F)
    for _ in range(3):
        sweep(s0, F, y.values, BpConfig())
    plain, damped = (init_state(F) for _ in range(2))
    for st in (plain, damped):
        st.c_msg, st.d_msg = s0.c_msg.copy(), s0.d_msg.copy()
        st.a_msg, st.b_msg = s0.a_msg.copy(), s0.b_msg.copy()
    update_variable_to_check(plain, F, y.values)
    update_variable_to_check(damped, F, y.values, BpConfig(damping=0.25))
    np.testing.assert_array_equal(plain.a_msg, damped.a_msg)
    np.testing.assert_allclose(damped.b_msg, 0.75 * plain.b_msg + 0.25 * s0.b_msg, rtol=1e-14)
    update_check_to_variable(plain, F)
    damped.a_msg, damped.b_msg = plain.a_msg.copy(), plain.b_msg.copy()
    update_check_to_variable(damped, F, BpConfig(damping=0.25))
    np.testing.assert_array_equal(plain.c_msg, damped.c_msg)
    np.testing.assert_allclose(damped.d_msg, 0.75 * plain.d_msg + 0.25 * s0.d_msg,
                               rtol=1e-14, atol=1e-15)
