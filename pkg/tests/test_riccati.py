import numpy as np
import pytest

from certlq.analysis import sample_regular_instance
from certlq.errors import MarginViolation, UnstableClosedLoop
from certlq.model import CostSpec, SystemModel
from certlq.riccati import (
    SolverOptions,
    closed_loop,
    gains_from_p,
    gains_schur,
    gare_residual,
    solve_gare,
    solve_lyapunov,
    spectral_radius,
)


def dare_value_iteration(A, B, Q, R, tol=1e-13, max_iter=100000):
    """Textbook Riccati recursion for the one-player problem; test oracle."""
    P = Q.copy()
    for _ in range(max_iter):
        G = B.T @ P @ A
        Pn = Q + A.T @ P @ A - G.T @ np.linalg.solve(R + B.T @ P @ B, G)
        Pn = (Pn + Pn.T) / 2
        if np.linalg.norm(Pn - P, "fro") < tol:
            return Pn
        P = Pn
    raise AssertionError("oracle did not converge")


def test_lqr_reduction_matches_dare_oracle(demo_spec, demo_cfg):
    m = SystemModel(A=demo_spec.truth.A, B1=demo_spec.truth.B1,
                    B2=np.zeros_like(demo_spec.truth.B2))
    sol = solve_gare(m, demo_spec.cost, demo_cfg.solver)
    P_oracle = dare_value_iteration(m.A, m.B1, demo_spec.cost.Q, demo_spec.cost.Ru)
    assert np.linalg.norm(sol.P - P_oracle, "fro") <= 1e-9
    import scipy.linalg

    P_scipy = scipy.linalg.solve_discrete_are(m.A, m.B1, demo_spec.cost.Q, demo_spec.cost.Ru)
    assert np.linalg.norm(sol.P - P_scipy, "fro") <= 1e-8
    assert np.linalg.norm(sol.L) == 0.0


def test_zero_a_solves_in_one_step():
    m = SystemModel(A=np.zeros((2, 2)), B1=np.ones((2, 1)), B2=0.1 * np.ones((2, 1)))
    c = CostSpec(Q=np.eye(2), Ru=np.eye(1), Rv=2 * np.eye(1))
    sol = solve_gare(m, c)
    assert np.allclose(sol.P, c.Q, atol=1e-14)
    assert np.allclose(sol.K, 0) and np.allclose(sol.L, 0)
    assert sol.iterations == 1


def test_demo_solution_matches_golden(demo_spec, demo_cfg, truth_sol, golden):
    assert np.linalg.norm(truth_sol.P - golden["P"], "fro") <= 1e-10
    assert np.linalg.norm(truth_sol.K - golden["K"], "fro") <= 1e-10
    assert np.linalg.norm(truth_sol.L - golden["L"], "fro") <= 1e-10
    assert truth_sol.margin == pytest.approx(golden["margin"], rel=1e-10)
    assert truth_sol.rho_cl == pytest.approx(golden["rho_cl"], rel=1e-10)
    assert truth_sol.margin > 0
    assert truth_sol.rho_cl < 1
    assert truth_sol.residual <= 1e-10


def test_demo_stationarity_identities(demo_spec, truth_sol):
    m, c = demo_spec.truth, demo_spec.cost
    Acl = closed_loop(m, truth_sol.K, truth_sol.L)
    r1 = np.linalg.norm(m.B1.T @ truth_sol.P @ Acl - c.Ru @ truth_sol.K, "fro")
    r2 = np.linalg.norm(m.B2.T @ truth_sol.P @ Acl + c.Rv @ truth_sol.L, "fro")
    assert r1 <= 1e-8 and r2 <= 1e-8


def test_gains_zero_p(demo_spec):
    m, c = demo_spec.truth, demo_spec.cost
    K, L, H = gains_from_p(np.zeros((3, 3)), m, c)
    assert np.allclose(K, 0) and np.allclose(L, 0)
    assert np.allclose(H, np.block([[c.Ru, np.zeros((1, 1))], [np.zeros((1, 1)), -c.Rv]]))


def test_gains_b2_zero_is_lqr_gain(demo_spec, truth_sol):
    m = SystemModel(A=demo_spec.truth.A, B1=demo_spec.truth.B1,
                    B2=np.zeros_like(demo_spec.truth.B2))
    c = demo_spec.cost
    P = truth_sol.P  # any symmetric PSD matrix works for this identity
    K, L, _ = gains_from_p(P, m, c)
    K_lqr = np.linalg.solve(c.Ru + m.B1.T @ P @ m.B1, m.B1.T @ P @ m.A)
    assert np.allclose(K, K_lqr, atol=1e-12)
    assert np.allclose(L, 0, atol=1e-15)


def test_gains_block_solve_vs_schur_demo(demo_spec, truth_sol):
    K, L, _ = gains_from_p(truth_sol.P, demo_spec.truth, demo_spec.cost)
    Ks, Ls = gains_schur(truth_sol.P, demo_spec.truth, demo_spec.cost)
    assert np.linalg.norm(K - Ks, "fro") <= 1e-9
    assert np.linalg.norm(L - Ls, "fro") <= 1e-9


def test_gains_block_solve_vs_schur_random():
    rng = np.random.default_rng(42)
    for _ in range(100):
        m, c, sol = sample_regular_instance(rng)
        Ks, Ls = gains_schur(sol.P, m, c)
        assert np.linalg.norm(sol.K - Ks, "fro") <= 1e-8
        assert np.linalg.norm(sol.L - Ls, "fro") <= 1e-8


def test_closed_loop_cases(demo_spec, truth_sol):
    m = demo_spec.truth
    n = 3
    assert np.array_equal(closed_loop(m, np.zeros((1, n)), np.zeros((1, n))), m.A)
    Acl = closed_loop(m, truth_sol.K, truth_sol.L)
    assert spectral_radius(Acl) < 1
    m0 = SystemModel(A=m.A, B1=np.zeros((3, 1)), B2=np.zeros((3, 1)))
    assert np.array_equal(closed_loop(m0, np.ones((1, 3)), np.ones((1, 3))), m.A)


def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9, abs=1e-12)


def test_spectral_radius_rotation():
    th = 0.7
    R = 0.7 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert spectral_radius(R) == pytest.approx(0.7, rel=1e-10)


def power_iteration(M, iters=20000):
    rng = np.random.default_rng(3)
    v = rng.standard_normal(M.shape[0])
    for _ in range(iters):
        v = M @ v
        v /= np.linalg.norm(v)
    return float(np.linalg.norm(M @ v) / np.linalg.norm(v))


def test_spectral_radius_power_iteration_oracle(demo_spec):
    # demo A has a real dominant eigenvalue, so plain power iteration applies
    rho = spectral_radius(demo_spec.truth.A)
    assert rho == pytest.approx(power_iteration(demo_spec.truth.A), rel=1e-6)


def test_lyapunov_zero_acl():
    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(solve_lyapunov(np.zeros((2, 2)), W), W)


def test_lyapunov_scalar_contraction():
    X = solve_lyapunov(0.5 * np.eye(3), np.eye(3))
    assert np.allclose(X, (4.0 / 3.0) * np.eye(3), atol=1e-12)


def test_lyapunov_saddle_consistency(demo_spec, truth_sol):
    m, c = demo_spec.truth, demo_spec.cost
    Acl = closed_loop(m, truth_sol.K, truth_sol.L)
    W = c.Q + truth_sol.K.T @ c.Ru @ truth_sol.K - truth_sol.L.T @ c.Rv @ truth_sol.L
    X = solve_lyapunov(Acl, W)
    assert np.linalg.norm(X - truth_sol.P, "fro") <= 1e-8


def test_lyapunov_matches_truncated_series(demo_spec, truth_sol):
    Acl = closed_loop(demo_spec.truth, truth_sol.K, truth_sol.L)
    rho = spectral_radius(Acl)
    N = int(np.ceil(np.log(1e-12) / np.log(rho + 0.01)))
    rng = np.random.default_rng(5)
    W = rng.standard_normal((3, 3))
    W = (W + W.T) / 2
    X = solve_lyapunov(Acl, W)
    series = np.zeros_like(W)
    term = W.copy()
    for _ in range(N):
        series += term
        term = Acl.T @ term @ Acl
    assert np.linalg.norm(X - series, "fro") <= 1e-9


def test_lyapunov_rejects_unstable():
    with pytest.raises(UnstableClosedLoop):
        solve_lyapunov(np.eye(2), np.eye(2))


def test_gare_residual_cases(demo_spec, truth_sol):
    m, c = demo_spec.truth, demo_spec.cost
    assert np.linalg.norm(gare_residual(truth_sol.P, m, c), "fro") <= 1e-10
    assert np.allclose(gare_residual(np.zeros((3, 3)), m, c), -c.Q, atol=1e-14)
    eps = 1e-4
    r = np.linalg.norm(gare_residual(truth_sol.P + eps * np.eye(3), m, c), "fro")
    assert 0.01 * eps < r < 100 * eps


def test_margin_violation_raised(demo_spec):
    # huge floor cannot be met even at the initial iterate P0 = Q
    with pytest.raises(MarginViolation):
        solve_gare(demo_spec.truth, demo_spec.cost, SolverOptions(mu_floor=10.0))


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
    with pytest.raises(ValueError):
        SolverOptions(mu_floor=-1.0)


def test_random_instances_solution_certificates():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m, c, sol = sample_regular_instance(rng)
        assert np.linalg.norm(gare_residual(sol.P, m, c), "fro") <= sol.tol
        assert sol.margin > 0
        assert sol.rho_cl < 1
        assert np.abs(sol.P - sol.P.T).max() <= 1e-10
        assert np.linalg.eigvalsh(sol.P)[0] >= -1e-10
