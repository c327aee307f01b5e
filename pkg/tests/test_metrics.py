import numpy as np
import pytest

from certlq.analysis import sample_regular_instance
from certlq.metrics import RegretSeries, benchmark_cost, closed_loop_cost, stage_cost
from certlq.model import CostSpec, NoiseSpec
from certlq.riccati import closed_loop, spectral_radius


def test_stage_cost_origin(demo_spec):
    assert stage_cost(np.zeros(3), np.zeros(1), np.zeros(1), demo_spec.cost) == 0.0


def test_stage_cost_demo_weights(demo_spec):
    c = stage_cost(np.array([1.0, 0.0, 0.0]), np.array([1.0]), np.array([1.0]), demo_spec.cost)
    assert c == pytest.approx(1.0 + 1.1 - 2.5, abs=1e-14)


def test_stage_cost_decreasing_in_v():
    rng = np.random.default_rng(0)
    c = CostSpec(Q=np.eye(2), Ru=np.eye(1), Rv=2.0 * np.eye(2))
    for _ in range(20):
        x, u = rng.standard_normal(2), rng.standard_normal(1)
        v = rng.standard_normal(2)
        assert stage_cost(x, u, 2.0 * v, c) < stage_cost(x, u, v, c)


def test_benchmark_cost_cases(truth_sol, demo_spec):
    zero = NoiseSpec(sigma_w=0.0, Sigma_w=np.zeros((3, 3)))
    assert benchmark_cost(truth_sol, zero) == 0.0
    iso = NoiseSpec.isotropic(0.2, 3)
    assert benchmark_cost(truth_sol, iso) == pytest.approx(0.04 * np.trace(truth_sol.P), rel=1e-12)


def test_benchmark_matches_long_run_average(demo_spec, truth_sol):
    # ergodic check: realized average cost under FIXED saddle gains
    # approaches tr(P Sigma_w) within 5% at T = 2e5
    T = 200_000
    rng = np.random.default_rng(17)
    Acl = closed_loop(demo_spec.truth, truth_sol.K, truth_sol.L)
    M = (demo_spec.cost.Q + truth_sol.K.T @ demo_spec.cost.Ru @ truth_sol.K
         - truth_sol.L.T @ demo_spec.cost.Rv @ truth_sol.L)
    w = demo_spec.noise.sigma_w * rng.standard_normal((T, 3))
    x = np.zeros(3)
    total = 0.0
    for t in range(T):
        total += x @ M @ x
        x = Acl @ x + w[t]
    avg = total / T
    j_star = benchmark_cost(truth_sol, demo_spec.noise)
    assert abs(avg - j_star) <= 0.05 * j_star


def test_closed_loop_cost_saddle_consistency(demo_spec, truth_sol):
    j_bench = benchmark_cost(truth_sol, demo_spec.noise)
    j_cl = closed_loop_cost(truth_sol.K, truth_sol.L, demo_spec.truth, demo_spec.cost,
                            demo_spec.noise)
    assert abs(j_cl - j_bench) <= 1e-9


def test_closed_loop_cost_saddle_consistency_random():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m, c, sol = sample_regular_instance(rng)
        noise = NoiseSpec.isotropic(0.1, m.A.shape[0])
        assert abs(closed_loop_cost(sol.K, sol.L, m, c, noise)
                   - benchmark_cost(sol, noise)) <= 1e-9


def test_closed_loop_cost_zero_noise(demo_spec, truth_sol):
    zero = NoiseSpec(sigma_w=0.0, Sigma_w=np.zeros((3, 3)))
    assert closed_loop_cost(truth_sol.K, truth_sol.L, demo_spec.truth, demo_spec.cost,
                            zero) == 0.0


def test_small_k_perturbation_quadratic_gap(demo_spec, truth_sol):
    rng = np.random.default_rng(2)
    dK = rng.standard_normal(truth_sol.K.shape)
    dK /= np.linalg.norm(dK)
    j_star = benchmark_cost(truth_sol, demo_spec.noise)
    j = closed_loop_cost(truth_sol.K + 1e-3 * dK, truth_sol.L, demo_spec.truth,
                         demo_spec.cost, demo_spec.noise)
    gap = j - j_star
    assert gap > 0
    assert gap < 1e-4  # order eps^2, far below eps


def test_quadratic_gap_slope(demo_spec, truth_sol):
    rng = np.random.default_rng(3)
    j_star = benchmark_cost(truth_sol, demo_spec.noise)
    for pert_k in (True, False):
        scales = np.array([1e-3, 1e-4, 1e-5])
        gaps = []
        d = rng.standard_normal(truth_sol.K.shape if pert_k else truth_sol.L.shape)
        d /= np.linalg.norm(d)
        for s in scales:
            K = truth_sol.K + s * d if pert_k else truth_sol.K
            L = truth_sol.L if pert_k else truth_sol.L + s * d
            gaps.append(abs(closed_loop_cost(K, L, demo_spec.truth, demo_spec.cost,
                                             demo_spec.noise) - j_star))
        slope = np.polyfit(np.log(scales), np.log(gaps), 1)[0]
        assert 1.9 <= slope <= 2.1


def test_saddle_sign_structure(demo_spec, truth_sol):
    # minimizer deviation raises cost; maximizer deviation lowers it
    rng = np.random.default_rng(4)
    j_star = benchmark_cost(truth_sol, demo_spec.noise)
    for s in (1e-3, 1e-4):
        dK = rng.standard_normal(truth_sol.K.shape)
        dK /= np.linalg.norm(dK)
        dL = rng.standard_normal(truth_sol.L.shape)
        dL /= np.linalg.norm(dL)
        j_k = closed_loop_cost(truth_sol.K + s * dK, truth_sol.L, demo_spec.truth,
                               demo_spec.cost, demo_spec.noise)
        j_l = closed_loop_cost(truth_sol.K, truth_sol.L + s * dL, demo_spec.truth,
                               demo_spec.cost, demo_spec.noise)
        assert j_k - j_star >= -1e-12
        assert j_l - j_star <= 1e-12


def test_unstable_gains_rejected(demo_spec, truth_sol):
    from certlq.errors import UnstableClosedLoop

    K_bad = truth_sol.K - 10.0  # wildly destabilizing
    assert spectral_radius(closed_loop(demo_spec.truth, K_bad, truth_sol.L)) >= 1
    with pytest.raises(UnstableClosedLoop):
        closed_loop_cost(K_bad, truth_sol.L, demo_spec.truth, demo_spec.cost,
                         demo_spec.noise)


def test_regret_series_invariants():
    s = RegretSeries(j_star=0.5)
    for _ in range(10):
        s.accumulate(0.5)
    assert np.allclose(s.regret, 0.0, atol=1e-15)

    s2 = RegretSeries.from_costs(np.full(100, 1.5), j_star=0.5)
    t = np.arange(1, 101)
    assert np.allclose(s2.regret, t)
    assert np.allclose(s2.normalized, np.sqrt(t))
    assert s2.regret_at(10) == pytest.approx(10.0)
    assert s2.normalized_at(9) == pytest.approx(3.0)
    # identity regret(t) = cumulative(t) - t * J_star
    assert np.allclose(s2.regret, s2.cumulative_cost - t * s2.j_star)
