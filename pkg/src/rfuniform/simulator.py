"""Finite-size Monte Carlo for random-feature regression.

One instance is a draw (X, Theta, beta, eps) with rows of X and Theta
uniform on the sphere of radius sqrt(d) and beta uniform on the sphere of
radius F1.  Derived objects follow the quadratic reformulation of the risks:

    Z    = sigma(X Theta^T / sqrt(d)) / sqrt(d)          (activation centered)
    Q    = Theta Theta^T / d,   H = X X^T / d
    U_c  = mu1^2 Q + mustar^2 I_N        (population second-moment surrogate)
    v    = (mu1 / sqrt(d)) Theta beta
    R(a)     = <a, U_c a> - 2 <a, v> + E[y^2]
    Rhat(a)  = psi2^{-1} <a, Z^T Z a> - 2 psi2^{-1} <Z^T y, a>/sqrt(d) + |y|^2/n

with realized ratios psi1 = N/d, psi2 = n/d.  The three closed-form
optimizers (min-norm interpolator, penalized sup-gap maximizer, penalized
interpolating maximizer) are all direct linear solves.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import (AllReplicatesInfeasible, NotNegativeDefinite,
                     RankDeficient, RequiresOverparam, SingularKKT,
                     SpectrumHit)

_EIG_MARGIN = 1e-8        # negative-definiteness margin for the maximizers
_RANK_RTOL = 1e-10        # sigma_min/sigma_max below this: rank deficient


def _rng_for(seed):
    """Counter-based generator; a pure function of the integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _sphere_rows(rng, rows, dim, radius):
    g = rng.standard_normal((rows, dim))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):       # probability-zero guard: re-draw
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1)
    return g * (radius / norms)[:, None]


@dataclass
class SimInstance:
    d: int
    N: int
    n: int
    seed: int
    X: np.ndarray
    Theta: np.ndarray
    beta: np.ndarray
    eps: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    Uc: np.ndarray
    v: np.ndarray
    y: np.ndarray
    Ey2: float
    mu1: float
    mustar_sq: float
    _svals: Optional[np.ndarray] = field(default=None, repr=False)
    _null_basis: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def psi1(self):
        return self.N / self.d

    @property
    def psi2(self):
        return self.n / self.d

    def singular_values(self):
        if self._svals is None:
            self._svals = sla.svdvals(self.Z)
        return self._svals

    def null_basis(self):
        """Orthonormal basis of null(Z) (columns), from the full SVD."""
        if self._null_basis is None:
            _, s, Vt = sla.svd(self.Z, full_matrices=True)
            rank = int(np.sum(s > _RANK_RTOL * s[0]))
            self._null_basis = Vt[rank:].T
            self._svals = s
        return self._null_basis


def sample_instance(d, N, n, params, seed):
    """Draw one problem instance; bit-reproducible for a fixed seed."""
    profile = params.profile
    profile.require_centered()
    rng = _rng_for(seed)
    X = _sphere_rows(rng, n, d, math.sqrt(d))
    Theta = _sphere_rows(rng, N, d, math.sqrt(d))
    f1 = math.sqrt(params.f1_sq)
    beta = _sphere_rows(rng, 1, d, f1)[0] if f1 > 0 else np.zeros(d)
    tau = math.sqrt(params.tau_sq)
    eps = tau * rng.standard_normal(n) if tau > 0 else np.zeros(n)
    sqd = math.sqrt(d)
    Z = np.asarray(profile.evaluator(X @ Theta.T / sqd)) / sqd
    Q = Theta @ Theta.T / d
    H = X @ X.T / d
    Uc = profile.mu1_sq * Q + profile.mustar_sq * np.eye(N)
    v = (profile.mu1 / sqd) * (Theta @ beta)
    y = X @ beta + eps
    return SimInstance(d=d, N=N, n=n, seed=int(seed), X=X, Theta=Theta,
                       beta=beta, eps=eps, Z=Z, Q=Q, H=H, Uc=Uc, v=v, y=y,
                       Ey2=params.f1_sq + params.tau_sq,
                       mu1=profile.mu1, mustar_sq=profile.mustar_sq)


def risks(inst, a):
    """(population risk, empirical risk) of coefficient vector a.

    The empirical risk is the quadratic form psi2^{-1} <a, Z^T Z a>
    - 2 psi2^{-1} <Z^T y, a>/sqrt(d) + |y|^2/n, evaluated in its residual
    factorization |y - sqrt(d) Z a|^2 / n (identical algebraically, exact at
    interpolation where the expanded form cancels catastrophically).
    """
    R = float(a @ inst.Uc @ a - 2.0 * a @ inst.v + inst.Ey2)
    resid = inst.y - math.sqrt(inst.d) * (inst.Z @ a)
    Rhat = float(resid @ resid) / inst.n
    return R, Rhat


def emp_risk_quadratic_form(inst, a):
    """The expanded quadratic form of the empirical risk (consistency check)."""
    Za = inst.Z @ a
    inv_psi2 = inst.d / inst.n
    return float(inv_psi2 * (Za @ Za)
                 - 2.0 * inv_psi2 * (Za @ inst.y) / math.sqrt(inst.d)
                 + inst.y @ inst.y / inst.n)


def min_norm_interpolator(inst):
    """Least-norm solution of Z a = y / sqrt(d) via the n x n Gram system."""
    if inst.N <= inst.n:
        raise RequiresOverparam(f"need N > n, got N={inst.N}, n={inst.n}")
    s = inst.singular_values()
    if s[-1] < _RANK_RTOL * s[0]:
        raise RankDeficient(f"sigma_min/sigma_max = {s[-1] / s[0]:.3e}")
    G = inst.Z @ inst.Z.T
    rhs = inst.y / math.sqrt(inst.d)
    try:
        cf = sla.cho_factor(G)
    except sla.LinAlgError:
        # numerical rank deficiency: tiny documented ridge (ridgeless limit)
        ridge = 1e-12 * float(np.trace(G)) / inst.n
        cf = sla.cho_factor(G + ridge * np.eye(inst.n))
    w = sla.cho_solve(cf, rhs)
    w += sla.cho_solve(cf, rhs - G @ w)       # one refinement step
    return inst.Z.T @ w


@dataclass(frozen=True)
class MaximizerU:
    a: np.ndarray
    objective: float     # R - Rhat - psi1 lam |a|^2
    gap: float           # R - Rhat


@dataclass(frozen=True)
class MaximizerT:
    a: np.ndarray
    mu: np.ndarray
    objective: float     # R - psi1 lam |a|^2
    risk: float          # R(a)


def maximizer_U(inst, lam):
    """Closed-form maximizer of the penalized sup-gap at penalty lam.

    Requires M = U_c - psi2^{-1} Z^T Z - psi1 lam I to be negative definite
    (margin 1e-8); the maximizer is M^{-1} (v - psi2^{-1} Z^T y / sqrt(d)).
    """
    psi1, psi2 = inst.psi1, inst.psi2
    M = inst.Uc - (inst.Z.T @ inst.Z) / psi2 - psi1 * lam * np.eye(inst.N)
    top = float(sla.eigh(M, eigvals_only=True, subset_by_index=(inst.N - 1, inst.N - 1))[0])
    if top > -_EIG_MARGIN:
        raise NotNegativeDefinite(lam, top)
    vbar = inst.v - (inst.Z.T @ inst.y) / (psi2 * math.sqrt(inst.d))
    cf = sla.cho_factor(-M)
    a = -sla.cho_solve(cf, vbar)
    a += sla.cho_solve(cf, -(vbar - M @ a))   # one refinement step
    R, Rhat = risks(inst, a)
    gap = R - Rhat
    return MaximizerU(a=a, objective=gap - psi1 * lam * float(a @ a), gap=gap)


def maximizer_T(inst, lam):
    """Maximizer of the penalized risk over interpolators (KKT block solve)."""
    if inst.N <= inst.n:
        raise RequiresOverparam(f"need N > n, got N={inst.N}, n={inst.n}")
    psi1 = inst.psi1
    P = inst.Uc - psi1 * lam * np.eye(inst.N)
    B = inst.null_basis()
    k = B.shape[1]
    proj_top = float(sla.eigh(B.T @ P @ B, eigvals_only=True,
                              subset_by_index=(k - 1, k - 1))[0])
    if proj_top > -_EIG_MARGIN:
        raise NotNegativeDefinite(lam, proj_top)
    K = np.block([[P, inst.Z.T],
                  [inst.Z, np.zeros((inst.n, inst.n))]])
    rhs = np.concatenate([inst.v, inst.y / math.sqrt(inst.d)])
    # symmetric indefinite (Bunch-Kaufman) factorization, factors reused for
    # one step of iterative refinement
    ldu, piv, sol, info = sla.lapack.dsysv(K, rhs)
    if info != 0:
        raise SingularKKT(f"sytrf/sysv info={info}")
    corr, info = sla.lapack.dsytrs(ldu, piv, rhs - K @ sol)
    if info == 0:
        sol = sol + corr
    if not np.all(np.isfinite(sol)):
        raise SingularKKT("non-finite KKT solution")
    a, mu = sol[:inst.N], sol[inst.N:]
    R, _ = risks(inst, a)
    return MaximizerT(a=a, mu=mu, objective=R - psi1 * lam * float(a @ a), risk=R)


def empirical_log_det(inst, q, xi):
    """Normalized complex log-determinant of the block matrix at q, xi."""
    s1, s2, t1, t2, p = q
    Z1 = inst.mu1 * (inst.X @ inst.Theta.T) / inst.d
    ZP = inst.Z + p * Z1
    A = np.block([[s1 * np.eye(inst.N) + s2 * inst.Q, ZP.T],
                  [ZP, t1 * np.eye(inst.n) + t2 * inst.H]])
    eigs = sla.eigvalsh(A)
    shifted = eigs - complex(xi)
    scale = float(np.max(np.abs(eigs))) or 1.0
    if np.min(np.abs(shifted)) < 1e-12 * scale:
        raise SpectrumHit(f"xi={xi} within 1e-12 of the spectrum")
    return complex(np.sum(np.log(shifted)) / inst.d)


# ---------------------------------------------------------------------------
# replicated runs


@dataclass(frozen=True)
class ReplicateStats:
    """Mean and standard error of (psi1 |a|^2, objective) across replicates."""
    norm_sq: tuple     # (mean, stderr)
    value: tuple       # (mean, stderr)
    count: int


@dataclass(frozen=True)
class ReplicateRow:
    family: str
    lam: float
    replicate: int
    seed: int
    norm_sq: float
    value: float
    diagnostics: dict


def _stats(pairs):
    arr = np.asarray(pairs, dtype=float)
    mean = arr.mean(axis=0)
    stderr = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
    return ReplicateStats(norm_sq=(float(mean[0]), float(stderr[0])),
                          value=(float(mean[1]), float(stderr[1])),
                          count=arr.shape[0])


def _run_one(inst, lambda_grid, families):
    psi1 = inst.psi1
    rows = []
    if "MIN" in families:
        a = min_norm_interpolator(inst)
        R, Rhat = risks(inst, a)
        null_proj = inst.null_basis().T @ a
        rows.append(ReplicateRow(
            family="MIN", lam=0.0, replicate=-1, seed=inst.seed,
            norm_sq=psi1 * float(a @ a), value=R,
            diagnostics={"emp_risk": Rhat,
                         "null_component": float(np.linalg.norm(null_proj)),
                         "min_norm_sq": float(a @ a)}))
    for lam in lambda_grid:
        if "U" in families:
            try:
                res = maximizer_U(inst, lam)
                M = (inst.Uc - (inst.Z.T @ inst.Z) / inst.psi2
                     - psi1 * lam * np.eye(inst.N))
                vbar = inst.v - (inst.Z.T @ inst.y) / (inst.psi2 * math.sqrt(inst.d))
                stat = float(np.linalg.norm(M @ res.a - vbar)
                             / max(np.linalg.norm(vbar), 1e-300))
                rows.append(ReplicateRow(
                    family="U", lam=lam, replicate=-1, seed=inst.seed,
                    norm_sq=psi1 * float(res.a @ res.a), value=res.gap,
                    diagnostics={"stationarity": stat}))
            except NotNegativeDefinite as exc:
                rows.append(ReplicateRow(
                    family="U", lam=lam, replicate=-1, seed=inst.seed,
                    norm_sq=math.nan, value=math.nan,
                    diagnostics={"infeasible": str(exc)}))
        if "T" in families:
            try:
                res = maximizer_T(inst, lam)
                feas = float(np.linalg.norm(inst.Z @ res.a - inst.y / math.sqrt(inst.d))
                             / max(np.linalg.norm(inst.y) / math.sqrt(inst.d), 1e-300))
                rows.append(ReplicateRow(
                    family="T", lam=lam, replicate=-1, seed=inst.seed,
                    norm_sq=psi1 * float(res.a @ res.a), value=res.risk,
                    diagnostics={"feasibility": feas,
                                 "norm_sq_raw": float(res.a @ res.a)}))
            except (NotNegativeDefinite, SingularKKT) as exc:
                rows.append(ReplicateRow(
                    family="T", lam=lam, replicate=-1, seed=inst.seed,
                    norm_sq=math.nan, value=math.nan,
                    diagnostics={"infeasible": str(exc)}))
    return rows


def replicate_run(d, N, n, params, lambda_grid, replicates, base_seed,
                  families=("U", "T", "MIN"), threads=1):
    """The replicated protocol: mean and 1/sqrt(count) x std per (family, lam).

    Replicate k is drawn from seed base_seed + k; infeasible (family, lam)
    cells are skipped and recorded rather than aborting the sweep.  Returns
    (stats, rows) where stats maps (family, lam) -> ReplicateStats and rows
    holds every per-replicate record, in replicate order (aggregation is a
    deterministic fold even when replicates run on a thread pool).
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")

    def one(k):
        inst = sample_instance(d, N, n, params, seed=base_seed + k)
        return [ReplicateRow(family=row.family, lam=row.lam, replicate=k,
                             seed=row.seed, norm_sq=row.norm_sq,
                             value=row.value, diagnostics=row.diagnostics)
                for row in _run_one(inst, lambda_grid, families)]

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(one, range(replicates)))
    else:
        per_rep = [one(k) for k in range(replicates)]
    all_rows = [row for rows in per_rep for row in rows]
    stats = {}
    keys = {("MIN", 0.0)} if "MIN" in families else set()
    for fam in ("U", "T"):
        if fam in families:
            keys.update((fam, lam) for lam in lambda_grid)
    for fam, lam in sorted(keys):
        good = [(r.norm_sq, r.value) for r in all_rows
                if r.family == fam and r.lam == lam and math.isfinite(r.norm_sq)]
        if not good:
            raise AllReplicatesInfeasible(lam)
        stats[(fam, lam)] = _stats(good)
    return stats, all_rows
