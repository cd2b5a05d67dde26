import dataclasses
import math

import numpy as np
import pytest

from rfuniform.asymptotics import ModelParams
from rfuniform.errors import (AllReplicatesInfeasible, NotNegativeDefinite,
                              RankDeficient, RequiresOverparam)
from rfuniform.simulator import (empirical_log_det, maximizer_T, maximizer_U,
                                 min_norm_interpolator, replicate_run, risks,
                                 sample_instance)


@pytest.fixture(scope="module")
def small_params(relu_centered):
    return ModelParams(2.5, 1.5, 1.0, 0.0, relu_centered)


@pytest.fixture(scope="module")
def noisy_params(relu_centered):
    return ModelParams(2.5, 1.5, 1.0, 0.25, relu_centered)


@pytest.fixture(scope="module")
def inst(small_params):
    return sample_instance(d=80, N=200, n=120, params=small_params, seed=7)


@pytest.fixture(scope="module")
def noisy_inst(noisy_params):
    return sample_instance(d=80, N=200, n=120, params=noisy_params, seed=11)


def test_row_norms(inst):
    assert np.allclose(np.linalg.norm(inst.X, axis=1), math.sqrt(inst.d), rtol=1e-12)
    assert np.allclose(np.linalg.norm(inst.Theta, axis=1), math.sqrt(inst.d), rtol=1e-12)
    assert abs(np.linalg.norm(inst.beta) - 1.0) < 1e-12


def test_determinism(small_params):
    a = sample_instance(40, 100, 60, small_params, seed=123)
    b = sample_instance(40, 100, 60, small_params, seed=123)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.Z, b.Z)
    assert np.array_equal(a.y, b.y)
    c = sample_instance(40, 100, 60, small_params, seed=124)
    assert not np.array_equal(a.X, c.X)


def test_sphere_inner_product_clt(small_params):
    """CLT bound: <x1, x2>/sqrt(d) has unit variance across draws."""
    d, reps = 24, 1000
    vals = []
    for k in range(reps):
        s = sample_instance(d, 4, 2, small_params, seed=50_000 + k)
        vals.append(float(s.X[0] @ s.X[1]) / math.sqrt(d))
    assert abs(np.mean(vals)) < 4.0 / math.sqrt(reps)


def test_derived_matrices(inst, small_params):
    prof = small_params.profile
    sqd = math.sqrt(inst.d)
    assert np.allclose(inst.Z, prof.evaluator(inst.X @ inst.Theta.T / sqd) / sqd)
    assert np.allclose(inst.Q, inst.Theta @ inst.Theta.T / inst.d)
    assert np.allclose(inst.Uc, prof.mu1_sq * inst.Q + prof.mustar_sq * np.eye(inst.N))
    assert np.allclose(inst.v, prof.mu1 / sqd * (inst.Theta @ inst.beta))
    assert inst.Ey2 == 1.0


def test_zero_target_zero_noise(relu_centered):
    p = ModelParams(2.5, 1.5, 0.0, 0.0, relu_centered)
    s = sample_instance(40, 100, 60, p, seed=3)
    a = min_norm_interpolator(s)
    assert np.all(a == 0.0)
    R, Rhat = risks(s, a)
    assert R == 0.0 and Rhat == 0.0


def test_min_norm_interpolates_and_is_orthogonal(inst):
    a = min_norm_interpolator(inst)
    _, rhat = risks(inst, a)
    assert rhat < 1e-18
    # least-norm characterization: no component in null(Z)
    null_part = inst.null_basis().T @ a
    assert np.linalg.norm(null_part) < 1e-10


def test_min_norm_requires_overparam(small_params):
    s = sample_instance(40, 50, 60, small_params, seed=5)
    with pytest.raises(RequiresOverparam):
        min_norm_interpolator(s)


def test_rank_deficient_detected(inst):
    broken = dataclasses.replace(inst, Z=inst.Z.copy(), _svals=None, _null_basis=None)
    broken.Z[1] = broken.Z[0]          # duplicate sample row
    with pytest.raises(RankDeficient):
        min_norm_interpolator(broken)


def test_risks_at_zero(noisy_inst):
    R, Rhat = risks(noisy_inst, np.zeros(noisy_inst.N))
    assert abs(R - noisy_inst.Ey2) < 1e-14
    assert abs(Rhat - noisy_inst.y @ noisy_inst.y / noisy_inst.n) < 1e-14


def test_empirical_risk_quadratic_form_matches_residuals(noisy_inst):
    from rfuniform.simulator import emp_risk_quadratic_form
    rng = np.random.default_rng(0)
    a = rng.standard_normal(noisy_inst.N) / noisy_inst.N
    _, rhat = risks(noisy_inst, a)
    assert abs(rhat - emp_risk_quadratic_form(noisy_inst, a)) < 1e-12 * max(1.0, rhat)


def test_maximizer_u_stationarity_and_maximality(inst):
    lam = 1.0
    res = maximizer_U(inst, lam)
    M = (inst.Uc - inst.Z.T @ inst.Z / inst.psi2
         - inst.psi1 * lam * np.eye(inst.N))
    vbar = inst.v - inst.Z.T @ inst.y / (inst.psi2 * math.sqrt(inst.d))
    assert np.linalg.norm(M @ res.a - vbar) < 1e-10 * np.linalg.norm(vbar)
    rng = np.random.default_rng(1)

    def objective(a):
        R, Rhat = risks(inst, a)
        return R - Rhat - inst.psi1 * lam * float(a @ a)

    base = objective(res.a)
    assert abs(base - res.objective) < 1e-12 * max(1.0, abs(base))
    for k in rng.integers(0, inst.N, size=8):
        bumped = res.a.copy()
        bumped[k] += 1e-3
        assert objective(bumped) < base


def test_maximizer_u_infeasible_small_lambda(inst):
    with pytest.raises(NotNegativeDefinite):
        maximizer_U(inst, 1e-6)


def test_maximizer_t_kkt(inst):
    lam = 1.0
    res = maximizer_T(inst, lam)
    rhs = inst.y / math.sqrt(inst.d)
    assert np.linalg.norm(inst.Z @ res.a - rhs) < 1e-10 * np.linalg.norm(rhs)
    amin = min_norm_interpolator(inst)
    assert res.a @ res.a >= amin @ amin - 1e-12
    # stationarity row of the block system
    P = inst.Uc - inst.psi1 * lam * np.eye(inst.N)
    r1 = P @ res.a + inst.Z.T @ res.mu - inst.v
    assert np.linalg.norm(r1) < 1e-9 * max(1.0, np.linalg.norm(inst.v))


def test_maximizer_t_norm_dominates_min_norm_across_lambdas(inst):
    amin_sq = float(min_norm_interpolator(inst) @ min_norm_interpolator(inst))
    for lam in (0.5, 1.0, 2.0, 5.0):
        res = maximizer_T(inst, lam)
        assert float(res.a @ res.a) >= amin_sq - 1e-12


def test_maximizer_t_requires_overparam(small_params):
    s = sample_instance(40, 50, 60, small_params, seed=5)
    with pytest.raises(RequiresOverparam):
        maximizer_T(s, 1.0)


def test_penalized_dominance_spot_check(inst):
    """Lagrangian optimality: no sampled vector beats the maximizer."""
    lam = 1.0
    res = maximizer_U(inst, lam)
    rng = np.random.default_rng(2)
    for _ in range(5):
        a = res.a + 0.1 * rng.standard_normal(inst.N)
        R, Rhat = risks(inst, a)
        gap = R - Rhat
        lhs = res.gap - (R - Rhat)
        rhs = inst.psi1 * lam * (float(res.a @ res.a) - float(a @ a))
        assert lhs >= rhs - 1e-9


# --- log-determinant --------------------------------------------------------

def schur_log_det(inst, s1, t1):
    """Independent oracle via det [[s1 I, Z^T], [Z, t1 I]]
    = s1^N * prod_i (t1 - sigma_i(Z)^2 / s1)."""
    svals = np.linalg.svd(inst.Z, compute_uv=False)
    terms = np.concatenate([np.full(inst.N, math.log(s1)),
                            np.log(t1 - svals ** 2 / s1),
                            np.full(inst.n - len(svals), math.log(t1))])
    return float(np.sum(terms)) / inst.d


def test_log_det_schur_identity(inst):
    q = (2.0, 0.0, 5.0, 0.0, 0.0)
    got = empirical_log_det(inst, q, 0.0)
    assert abs(got.imag) < 1e-12
    assert abs(got.real - schur_log_det(inst, 2.0, 5.0)) < 1e-10


def test_log_det_permutation_invariance(inst):
    rngp = np.random.default_rng(9)
    pn = rngp.permutation(inst.n)
    pN = rngp.permutation(inst.N)
    permuted = dataclasses.replace(
        inst,
        X=inst.X[pn], Theta=inst.Theta[pN],
        Z=inst.Z[pn][:, pN], Q=inst.Q[pN][:, pN], H=inst.H[pn][:, pn],
        Uc=inst.Uc[pN][:, pN], v=inst.v[pN], y=inst.y[pn], eps=inst.eps[pn],
        _svals=None, _null_basis=None)
    q = (1.5, 0.3, 2.5, 0.2, 0.1)
    a = empirical_log_det(inst, q, 0.3j)
    b = empirical_log_det(permuted, q, 0.3j)
    assert abs(a - b) < 1e-12 * max(1.0, abs(a))


# --- replicated runs --------------------------------------------------------

def test_replicate_run_deterministic(small_params):
    kw = dict(d=40, N=100, n=60, params=small_params, lambda_grid=[1.0, 2.0],
              replicates=3, base_seed=77)
    s1, r1 = replicate_run(**kw)
    s2, r2 = replicate_run(**kw)
    assert s1 == s2
    assert [(r.family, r.lam, r.norm_sq, r.value) for r in r1] == \
           [(r.family, r.lam, r.norm_sq, r.value) for r in r2]


def test_replicate_run_threaded_matches_serial(small_params):
    kw = dict(d=40, N=100, n=60, params=small_params, lambda_grid=[1.0],
              replicates=4, base_seed=5)
    s1, _ = replicate_run(**kw)
    s2, _ = replicate_run(threads=3, **kw)
    assert s1 == s2


def test_replicate_stats_convention(small_params):
    stats, rows = replicate_run(40, 100, 60, small_params, [1.0],
                                replicates=5, base_seed=11, families=("U",))
    st = stats[("U", 1.0)]
    vals = np.array([r.norm_sq for r in rows if r.family == "U"])
    assert st.count == 5
    assert abs(st.norm_sq[0] - vals.mean()) < 1e-14
    assert abs(st.norm_sq[1] - vals.std(ddof=1) / math.sqrt(5)) < 1e-14


def test_stderr_scaling(small_params):
    s20, _ = replicate_run(30, 80, 45, small_params, [], replicates=20,
                           base_seed=0, families=("MIN",))
    s80, _ = replicate_run(30, 80, 45, small_params, [], replicates=80,
                           base_seed=0, families=("MIN",))
    ratio = s20[("MIN", 0.0)].norm_sq[1] / s80[("MIN", 0.0)].norm_sq[1]
    assert 1.6 <= ratio <= 2.4


def test_infeasible_lambda_skipped_and_recorded(small_params):
    # pick a lambda between the per-instance feasibility thresholds, so the
    # sweep sees a mix of feasible and infeasible replicates
    d, N, n, reps = 30, 80, 45, 8
    thresholds = []
    for k in range(reps):
        s = sample_instance(d, N, n, small_params, seed=200 + k)
        M0 = s.Uc - s.Z.T @ s.Z / s.psi2
        thresholds.append(float(np.linalg.eigvalsh(M0)[-1]) / s.psi1)
    lam_mixed = float(np.median(thresholds))
    stats, rows = replicate_run(d, N, n, small_params, [lam_mixed, 1.0],
                                replicates=reps, base_seed=200, families=("U",))
    skipped = [r for r in rows if r.lam == lam_mixed and "infeasible" in r.diagnostics]
    kept = [r for r in rows if r.lam == lam_mixed and math.isfinite(r.norm_sq)]
    assert skipped and kept and len(skipped) + len(kept) == reps
    assert stats[("U", lam_mixed)].count == len(kept)
    assert ("U", 1.0) in stats
    with pytest.raises(AllReplicatesInfeasible):
        replicate_run(d, N, n, small_params, [1e-6], replicates=3,
                      base_seed=2, families=("U",))


def test_replicate_run_needs_two(small_params):
    with pytest.raises(ValueError):
        replicate_run(30, 80, 45, small_params, [1.0], replicates=1, base_seed=0)
