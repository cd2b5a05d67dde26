"""Coupled self-consistent equations for the partial Stieltjes transforms.

Two equation families live here:

* the general five-parameter family, for q = (s1, s2, t1, t2, p),

      m1 = psi1 / ( -xi + s1 - mustar^2 m2 + [(1+t2 m2) s2 - c m2] / B )
      m2 = psi2 / ( -xi + t1 - mustar^2 m1 + [(1+s2 m1) t2 - c m1] / B )

  with c = mu1^2 (1+p)^2 and B = (1+s2 m1)(1+t2 m2) - c m1 m2.  The
  Lagrangian U/T families are its sections q_U = (mustar^2 - lam psi1,
  mu1^2, psi2, 0, 0) and q_T = (mustar^2 - lam psi1, mu1^2, 0, 0, 0) with
  lam = lambda_bar * mustar^2;

* the nu-family behind the min-norm interpolator risk,

      nu1 = psi1 / ( -xi - nu2 - zsq nu2 / (1 - zsq nu1 nu2) )
      nu2 = psi2 / ( -xi - nu1 - zsq nu1 / (1 - zsq nu1 nu2) )

  with zsq = mu1^2 / mustar^2.  Only the product chi = nu1 nu2 has a finite
  xi -> 0 limit when psi1 != psi2 (one factor grows like 1/u along xi = iu),
  so that family is tracked through chi.

Solutions are continued from the large-Im(xi) resolvent asymptote down the
imaginary axis by damped fixed-point iteration with a Newton polish, which
is also how the xi -> 0+ limits are defined.
"""

import cmath
import math
from dataclasses import dataclass
from typing import Union

from .errors import (BranchCutHit, BranchInstability, NoConvergence,
                     SingularDenominator)

_DENOM_FLOOR = 1e-14

DEFAULT_DAMPING = 0.5
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 10_000
DEFAULT_NODES = 40
U_HIGH = 1e3
U_LOW = 1e-7


# ---------------------------------------------------------------------------
# equation families


@dataclass(frozen=True)
class GeneralQ:
    """q = (s1, s2, t1, t2, p) of the block-matrix log-determinant."""
    s1: float
    s2: float
    t1: float
    t2: float
    p: float

    @property
    def q(self):
        return (self.s1, self.s2, self.t1, self.t2, self.p)

    def validate(self, profile):
        # admissibility region of the log-determinant limit
        bound = profile.mu1_sq * (1.0 + self.p) ** 2 / 2.0
        if abs(self.s2 * self.t2) > bound + 1e-12:
            raise ValueError(f"q outside admissible set: |s2 t2| = "
                             f"{abs(self.s2 * self.t2):.3e} > {bound:.3e}")


@dataclass(frozen=True)
class Ubar:
    """Lagrangian family of the norm-ball sup-gap, parameterized by lambda_bar."""
    lambda_bar: float

    def __post_init__(self):
        if self.lambda_bar <= 0:
            raise ValueError("lambda_bar must be positive")


@dataclass(frozen=True)
class Tbar:
    """Lagrangian family of the sup over interpolators, lambda_bar > 0."""
    lambda_bar: float

    def __post_init__(self):
        if self.lambda_bar <= 0:
            raise ValueError("lambda_bar must be positive")


@dataclass(frozen=True)
class RiskNu:
    """nu-equations of the min-norm interpolator risk.

    squared_ratio=True reads the coupling literally as (mu1^2/mustar^2)^2;
    the default uses zsq = mu1^2/mustar^2, which reproduces the Monte Carlo
    min-norm risk (an audit flag, see the decisions ledger).
    """
    squared_ratio: bool = False


EquationFamily = Union[GeneralQ, Ubar, Tbar, RiskNu]


@dataclass(frozen=True)
class FixedPointState:
    xi: complex
    m1: complex
    m2: complex
    residual: float
    family: EquationFamily


@dataclass(frozen=True)
class ZeroLimitResult:
    """Terminal state of the xi = i u continuation, with its tail."""
    state: FixedPointState
    tail: tuple          # ((u, m1, m2), ...) last few accepted nodes
    min_im: float        # smallest Im(m) over path nodes with u >= 1e-6

    @property
    def m1(self):
        return self.state.m1

    @property
    def m2(self):
        return self.state.m2

    @property
    def chi(self):
        return self.state.m1 * self.state.m2


def family_coeffs(family, params):
    """Resolve a family to ('general', q) or ('nu', zsq) coefficients."""
    prof = params.profile
    if isinstance(family, GeneralQ):
        family.validate(prof)
        return ("general", family.q)
    if isinstance(family, Ubar):
        lam = family.lambda_bar * prof.mustar_sq
        return ("general", (prof.mustar_sq - lam * params.psi1, prof.mu1_sq,
                            params.psi2, 0.0, 0.0))
    if isinstance(family, Tbar):
        lam = family.lambda_bar * prof.mustar_sq
        return ("general", (prof.mustar_sq - lam * params.psi1, prof.mu1_sq,
                            0.0, 0.0, 0.0))
    if isinstance(family, RiskNu):
        zsq = prof.zeta ** 2 if family.squared_ratio else prof.zeta
        return ("nu", zsq)
    raise TypeError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# right-hand sides and Jacobians


def _rhs_general(m1, m2, xi, q, psi1, psi2, mu1_sq, mustar_sq):
    s1, s2, t1, t2, p = q
    c = mu1_sq * (1.0 + p) ** 2
    B = (1.0 + s2 * m1) * (1.0 + t2 * m2) - c * m1 * m2
    if abs(B) < _DENOM_FLOOR:
        raise SingularDenominator(f"inner denominator |B|={abs(B):.2e}")
    d1 = -xi + s1 - mustar_sq * m2 + ((1.0 + t2 * m2) * s2 - c * m2) / B
    d2 = -xi + t1 - mustar_sq * m1 + ((1.0 + s2 * m1) * t2 - c * m1) / B
    if abs(d1) < _DENOM_FLOOR or abs(d2) < _DENOM_FLOOR:
        raise SingularDenominator("resolvent denominator collapsed")
    return psi1 / d1, psi2 / d2


def _jac_general(m1, m2, xi, q, psi1, psi2, mu1_sq, mustar_sq):
    """2x2 complex Jacobian d(F1,F2)/d(m1,m2) of the general family."""
    s1, s2, t1, t2, p = q
    c = mu1_sq * (1.0 + p) ** 2
    B = (1.0 + s2 * m1) * (1.0 + t2 * m2) - c * m1 * m2
    n1 = (1.0 + t2 * m2) * s2 - c * m2      # = dB/dm1
    n2 = (1.0 + s2 * m1) * t2 - c * m1      # = dB/dm2
    d1 = -xi + s1 - mustar_sq * m2 + n1 / B
    d2 = -xi + t1 - mustar_sq * m1 + n2 / B
    cross = s2 * t2 - c
    dd1_dm1 = -n1 * n1 / (B * B)
    dd1_dm2 = -mustar_sq + (cross * B - n1 * n2) / (B * B)
    dd2_dm1 = -mustar_sq + (cross * B - n2 * n1) / (B * B)
    dd2_dm2 = -n2 * n2 / (B * B)
    f1 = -psi1 / (d1 * d1)
    f2 = -psi2 / (d2 * d2)
    return (f1 * dd1_dm1, f1 * dd1_dm2, f2 * dd2_dm1, f2 * dd2_dm2)


def _rhs_nu(m1, m2, xi, zsq, psi1, psi2):
    G = 1.0 - zsq * m1 * m2
    if abs(G) < _DENOM_FLOOR:
        raise SingularDenominator(f"nu inner denominator |G|={abs(G):.2e}")
    d1 = -xi - m2 - zsq * m2 / G
    d2 = -xi - m1 - zsq * m1 / G
    if abs(d1) < _DENOM_FLOOR or abs(d2) < _DENOM_FLOOR:
        raise SingularDenominator("nu resolvent denominator collapsed")
    return psi1 / d1, psi2 / d2


def _jac_nu(m1, m2, xi, zsq, psi1, psi2):
    G = 1.0 - zsq * m1 * m2
    d1 = -xi - m2 - zsq * m2 / G
    d2 = -xi - m1 - zsq * m1 / G
    # d/dm2 [m2/G] = 1/G^2 since G + zsq m1 m2 = 1; symmetric for m1
    dd1_dm1 = -(zsq * m2) ** 2 / (G * G)
    dd1_dm2 = -1.0 - zsq / (G * G)
    dd2_dm1 = -1.0 - zsq / (G * G)
    dd2_dm2 = -(zsq * m1) ** 2 / (G * G)
    f1 = -psi1 / (d1 * d1)
    f2 = -psi2 / (d2 * d2)
    return (f1 * dd1_dm1, f1 * dd1_dm2, f2 * dd2_dm1, f2 * dd2_dm2)


def _dispatch(kind, coeffs, params):
    psi1, psi2 = params.psi1, params.psi2
    prof = params.profile
    if kind == "general":
        rhs = lambda m1, m2, xi: _rhs_general(m1, m2, xi, coeffs, psi1, psi2,
                                              prof.mu1_sq, prof.mustar_sq)
        jac = lambda m1, m2, xi: _jac_general(m1, m2, xi, coeffs, psi1, psi2,
                                              prof.mu1_sq, prof.mustar_sq)
    else:
        rhs = lambda m1, m2, xi: _rhs_nu(m1, m2, xi, coeffs, psi1, psi2)
        jac = lambda m1, m2, xi: _jac_nu(m1, m2, xi, coeffs, psi1, psi2)
    return rhs, jac


def _scaled_residual(f1, f2, m1, m2):
    return max(abs(f1 - m1) / max(1.0, abs(m1)),
               abs(f2 - m2) / max(1.0, abs(m2)))


def iterate_once(state, params, damping=DEFAULT_DAMPING):
    """One damped update m <- (1-damping) m + damping F(m)."""
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    kind, coeffs = family_coeffs(state.family, params)
    rhs, _ = _dispatch(kind, coeffs, params)
    f1, f2 = rhs(state.m1, state.m2, state.xi)
    m1 = (1.0 - damping) * state.m1 + damping * f1
    m2 = (1.0 - damping) * state.m2 + damping * f2
    g1, g2 = rhs(m1, m2, state.xi)
    return FixedPointState(xi=state.xi, m1=m1, m2=m2,
                           residual=_scaled_residual(g1, g2, m1, m2),
                           family=state.family)


def _newton_burst(rhs, jac, xi, m1, m2, res, tol, steps=60):
    """Backtracking Newton on the defect map Phi(m) = m - F(m)."""
    for _ in range(steps):
        if res < tol:
            break
        f1, f2 = rhs(m1, m2, xi)
        j11, j12, j21, j22 = jac(m1, m2, xi)
        a11, a12, a21, a22 = 1.0 - j11, -j12, -j21, 1.0 - j22
        det = a11 * a22 - a12 * a21
        if abs(det) < 1e-300:
            break
        r1, r2 = f1 - m1, f2 - m2
        d1 = (a22 * r1 - a12 * r2) / det
        d2 = (a11 * r2 - a21 * r1) / det
        accepted = False
        scale = 1.0
        for _bt in range(12):
            t1, t2 = m1 + scale * d1, m2 + scale * d2
            try:
                g1, g2 = rhs(t1, t2, xi)
            except SingularDenominator:
                scale *= 0.5
                continue
            trial = _scaled_residual(g1, g2, t1, t2)
            if trial < res:
                m1, m2, res = t1, t2, trial
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
    return m1, m2, res


def _converge(rhs, jac, xi, m1, m2, damping, tol, max_iters,
              newton_threshold=1e-6):
    """Damped iteration alternating with Newton bursts until the scaled
    residual drops below tol; raises NoConvergence when the budget runs out.
    Newton handles the slow tail near spectral edges, damping provides the
    globally stable approach."""
    f1, f2 = rhs(m1, m2, xi)
    res = _scaled_residual(f1, f2, m1, m2)
    used = 0
    chunk = 400
    while used < max_iters:
        if res < tol:
            return m1, m2, res
        limit = min(chunk, max_iters - used)
        for _ in range(limit):
            m1 = (1.0 - damping) * m1 + damping * f1
            m2 = (1.0 - damping) * m2 + damping * f2
            f1, f2 = rhs(m1, m2, xi)
            res = _scaled_residual(f1, f2, m1, m2)
            used += 1
            if res < tol or res < newton_threshold:
                break
        m1, m2, res = _newton_burst(rhs, jac, xi, m1, m2, res, tol)
        if res < tol:
            return m1, m2, res
    if res < tol:
        return m1, m2, res
    raise NoConvergence(max_iters, res)


def _path(u_start, u_stop, nodes_full=DEFAULT_NODES):
    """Geometric descent u_start -> u_stop, node count scaled to span."""
    full_span = math.log(U_HIGH / U_LOW)
    span = math.log(u_start / u_stop)
    n = max(2, int(math.ceil(nodes_full * span / full_span)) + 1)
    ratio = (u_stop / u_start) ** (1.0 / (n - 1))
    return [u_start * ratio ** k for k in range(n)]


def solve_at(xi, family, params, damping=DEFAULT_DAMPING, tol=DEFAULT_TOL,
             max_iters=DEFAULT_MAX_ITERS, nodes=DEFAULT_NODES):
    """Solve the family at a spectral parameter with Im(xi) > 0.

    Warm-starts from the large-Im asymptote (m = 0 seed at Im = 1e3) and
    continues geometrically down in Im(xi) at fixed Re(xi).
    """
    u_target = xi.imag
    if u_target <= 0:
        raise ValueError("solve_at requires Im(xi) > 0")
    kind, coeffs = family_coeffs(family, params)
    rhs, jac = _dispatch(kind, coeffs, params)
    m1, m2 = 0j, 0j
    if u_target >= U_HIGH:
        m1, m2, res = _converge(rhs, jac, xi, m1, m2, damping, tol, max_iters)
        return FixedPointState(xi=xi, m1=m1, m2=m2, residual=res, family=family)
    for u in _path(U_HIGH, u_target, nodes):
        node_xi = complex(xi.real, u)
        m1, m2, res = _converge(rhs, jac, node_xi, m1, m2, damping, tol, max_iters)
    return FixedPointState(xi=complex(xi.real, u_target), m1=m1, m2=m2,
                           residual=res, family=family)


def _tail_report(kind, m1, m2):
    # nu states are tracked through the product (single factors can blow up);
    # the limit lives in the real part -- Im(m) decays linearly in u by the
    # Herglotz property, so the Cauchy check must ignore it
    if kind == "nu":
        return ((m1 * m2).real,)
    return (m1.real, m2.real)


def _tail_drift(kind, prev, last):
    """Scaled drift between consecutive tail reports (limit components)."""
    a = _tail_report(kind, *prev)
    b = _tail_report(kind, *last)
    return max(abs(x - y) / max(1.0, abs(x), abs(y)) for x, y in zip(a, b))


_zero_cache = {}


def clear_cache():
    _zero_cache.clear()


def solve_at_zero(family, params, damping=DEFAULT_DAMPING, tol=DEFAULT_TOL,
                  max_iters=DEFAULT_MAX_ITERS, nodes=DEFAULT_NODES,
                  u_low=U_LOW, tail_tol=1e-6, use_cache=True):
    """Analytic continuation of the solution to xi = 0+ along xi = i u.

    Continues from u = 1e3 down to ``u_low`` geometrically plus one node at
    u_low/2, warm-starting every node, and reports the terminal state as the
    limit.  The last accepted nodes are kept as the extrapolation tail; the
    limit is required to be Cauchy between the u_low and u_low/2 nodes, or
    BranchInstability is raised.  For the nu-family the check applies to the
    product chi = nu1 nu2.
    """
    kind, coeffs = family_coeffs(family, params)
    key = (kind, coeffs, params.psi1, params.psi2, params.profile.mu1_sq,
           params.profile.mustar_sq, u_low, tol, nodes)
    if use_cache and key in _zero_cache:
        return _zero_cache[key]
    rhs, jac = _dispatch(kind, coeffs, params)
    m1, m2 = 0j, 0j
    tail = []
    min_im = math.inf
    for u in _path(U_HIGH, u_low, nodes) + [u_low / 2.0]:
        xi = complex(0.0, u)
        m1, m2, res = _converge(rhs, jac, xi, m1, m2, damping, tol, max_iters)
        if u >= 1e-6:
            min_im = min(min_im, m1.imag, m2.imag)
        tail.append((u, m1, m2))
    drift = _tail_drift(kind, tail[-2][1:], tail[-1][1:])
    # a convergent limit has drift shrinking like u^2 (its scale is set by
    # the problem, e.g. ~ (u/chi4)^2 at large lambda_bar); descend further
    # until the tail is Cauchy, and call it unstable only when the drift
    # stops shrinking -- that is what an actual branch jump looks like
    u = tail[-1][0]
    while drift > tail_tol and u > 1e-12:
        prev_drift = drift
        for _ in range(3):
            u /= 2.154434690031884    # one decade per three nodes
            m1, m2, res = _converge(rhs, jac, complex(0.0, u), m1, m2,
                                    damping, tol, max_iters)
            tail.append((u, m1, m2))
        drift = _tail_drift(kind, tail[-2][1:], tail[-1][1:])
        if drift > 0.7 * prev_drift:
            raise BranchInstability(
                f"terminal tail drift {drift:.3e} not shrinking (family {family!r})")
    if drift > tail_tol:
        raise BranchInstability(f"terminal tail drift {drift:.3e} (family {family!r})")
    tail = tail[-6:]
    state = FixedPointState(xi=complex(0.0, u), m1=m1, m2=m2,
                            residual=res, family=family)
    result = ZeroLimitResult(state=state, tail=tuple(tail), min_im=min_im)
    if use_cache:
        _zero_cache[key] = result
    return result


# ---------------------------------------------------------------------------
# log-determinant variational functional


def evaluate_Xi(xi, z1, z2, q, psi, mu1_sq, mustar_sq):
    """The variational log-determinant expression at (z1, z2).

    Principal complex logarithms throughout; raises BranchCutHit when a log
    argument comes within 1e-14 of the branch point.  Its stationary point
    in (z1, z2) is exactly the fixed point of the general family.
    """
    s1, s2, t1, t2, p = q
    psi1, psi2 = psi
    c = mu1_sq * (1.0 + p) ** 2
    L = (s2 * z1 + 1.0) * (t2 * z2 + 1.0) - c * z1 * z2
    for w in (L, z1 / psi1, z2 / psi2):
        if abs(w) < _DENOM_FLOOR:
            raise BranchCutHit(f"log argument magnitude {abs(w):.2e}")
    return (cmath.log(L) - mustar_sq * z1 * z2 + s1 * z1 + t1 * z2
            - psi1 * cmath.log(z1 / psi1) - psi2 * cmath.log(z2 / psi2)
            - xi * (z1 + z2) - psi1 - psi2)


def xi_gradient(xi, z1, z2, q, psi, mu1_sq, mustar_sq):
    """(dXi/dz1, dXi/dz2); both vanish at the fixed point."""
    s1, s2, t1, t2, p = q
    psi1, psi2 = psi
    c = mu1_sq * (1.0 + p) ** 2
    L = (s2 * z1 + 1.0) * (t2 * z2 + 1.0) - c * z1 * z2
    g1 = (s2 * (t2 * z2 + 1.0) - c * z2) / L - mustar_sq * z2 + s1 - psi1 / z1 - xi
    g2 = (t2 * (s2 * z1 + 1.0) - c * z1) / L - mustar_sq * z1 + t1 - psi2 / z2 - xi
    return g1, g2


def xi_q_gradient(z1, z2, q, mu1_sq):
    """Partial derivatives of Xi in q at fixed (z1, z2).

    At the stationary point these are the q-derivatives of the limiting
    log-determinant (envelope theorem), which is how the Lagrangian values
    are assembled.
    """
    s1, s2, t1, t2, p = q
    c = mu1_sq * (1.0 + p) ** 2
    L = (s2 * z1 + 1.0) * (t2 * z2 + 1.0) - c * z1 * z2
    return {
        "s1": z1,
        "s2": z1 * (t2 * z2 + 1.0) / L,
        "t1": z2,
        "t2": z2 * (s2 * z1 + 1.0) / L,
        "p": -2.0 * mu1_sq * (1.0 + p) * z1 * z2 / L,
    }


def limit_direction_diagnostic(family, params):
    """Both candidate limits of the continuation (u -> 0+ and u -> inf).

    The printed definition of the terminal transforms reads "lim u -> inf",
    under which every transform vanishes and the formulas degenerate; this
    package uses u -> 0+.  Exposed so the two readings can be dumped side
    by side.
    """
    zero = solve_at_zero(family, params)
    kind, _ = family_coeffs(family, params)
    big = solve_at(complex(0.0, 1e9), family, params)
    return {
        "u_to_zero": _tail_report(kind, zero.m1, zero.m2),
        "u_to_inf": _tail_report(kind, big.m1, big.m2),
    }
