"""Gaussian (Hermite) moments of activation functions.

Every asymptotic formula in this package is parameterized by three numbers
attached to the activation sigma:

    mu0        = E[sigma(G)]
    mu1        = E[G sigma(G)]
    mustar_sq  = E[sigma(G)^2] - mu0^2 - mu1^2,     G ~ N(0, 1).

mu1 is the linear component of the feature map and mustar_sq the variance of
its nonlinear residual; a valid model needs mu1^2 > 0 and mustar_sq > 0.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_hermitenorm

from .errors import DegenerateActivation, NonFiniteActivation

SQRT_2PI = math.sqrt(2.0 * math.pi)

_DEGENERACY_TOL = 1e-12
_MEAN_TOL = 1e-8          # |mu0| bound required downstream (centered model)
_TAIL_HALF_WIDTH = 40.0   # Gaussian mass beyond here is far below 1e-300


@dataclass(frozen=True)
class ActivationProfile:
    """Hermite data of one activation, as used by the asymptotic formulas."""

    name: str
    evaluator: callable
    mu0: float
    mu1: float
    mustar_sq: float
    quad_order: int

    @property
    def mu1_sq(self):
        return self.mu1 ** 2

    @property
    def zeta(self):
        """mu1^2 / mustar^2, the coupling ratio of the fixed-point equations."""
        return self.mu1 ** 2 / self.mustar_sq

    def require_centered(self):
        if abs(self.mu0) >= _MEAN_TOL:
            raise DegenerateActivation(
                f"activation {self.name!r} has mu0={self.mu0:.3e}; center it "
                f"(subtract mu0) before use in the asymptotic model")


def _gauss_nodes(quad_order, kinks):
    """Nodes/weights integrating f(x) exp(-x^2/2)/sqrt(2 pi) dx over R.

    Plain Gauss-Hermite handles smooth integrands.  For activations with
    kinks (e.g. ReLU at 0) Gauss-Hermite converges only algebraically, so the
    integral is split at the kinks and each smooth piece gets a Gauss-Legendre
    rule with the Gaussian weight folded into the node weights.
    """
    if not kinks:
        x, w = roots_hermitenorm(quad_order)
        return x, w / SQRT_2PI
    edges = [-_TAIL_HALF_WIDTH] + sorted(kinks) + [_TAIL_HALF_WIDTH]
    t, w = leggauss(quad_order)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * t + 0.5 * (a + b)
        xs.append(x)
        ws.append(0.5 * (b - a) * w * np.exp(-0.5 * x * x) / SQRT_2PI)
    return np.concatenate(xs), np.concatenate(ws)


def hermite_coeffs(sigma, quad_order=200, kinks=(), name="custom"):
    """Quadrature estimate of (mu0, mu1, mustar_sq) for a scalar activation.

    ``kinks`` lists points where sigma is continuous but not smooth; pieces
    between kinks must be smooth.  Deterministic for fixed quad_order.

    Raises NonFiniteActivation if sigma blows up on a node, and
    DegenerateActivation when mu1^2 or mustar_sq is numerically zero
    (linear or even activations are both degenerate for this model).
    """
    if quad_order < 20:
        raise ValueError("quad_order must be >= 20")
    x, w = _gauss_nodes(quad_order, kinks)
    s = np.asarray(sigma(x), dtype=float)
    if not np.all(np.isfinite(s)):
        raise NonFiniteActivation(f"activation {name!r} non-finite on quadrature nodes")
    mu0 = float(w @ s)
    mu1 = float(w @ (x * s))
    second = float(w @ (s * s))
    mustar_sq = second - mu0 ** 2 - mu1 ** 2
    # same quantity as the direct projection residual E[(sigma - mu0 - mu1 G)^2]
    if mustar_sq < -_DEGENERACY_TOL:
        raise NonFiniteActivation(f"negative residual variance {mustar_sq:.3e}")
    mustar_sq = max(mustar_sq, 0.0)
    profile = ActivationProfile(name=name, evaluator=sigma, mu0=mu0, mu1=mu1,
                                mustar_sq=mustar_sq, quad_order=quad_order)
    if profile.mu1_sq <= _DEGENERACY_TOL or profile.mustar_sq <= _DEGENERACY_TOL:
        raise DegenerateActivation(
            f"activation {name!r}: mu1^2={profile.mu1_sq:.3e}, "
            f"mustar_sq={profile.mustar_sq:.3e}; both must be positive")
    return profile


def residual_projection_variance(profile, quad_order=None):
    """mustar_sq recomputed as E[(sigma(G) - mu0 - mu1 G)^2], a cross-check."""
    order = quad_order or profile.quad_order
    kinks = _BUILTIN_KINKS.get(profile.name, ())
    x, w = _gauss_nodes(order, kinks)
    r = np.asarray(profile.evaluator(x), dtype=float) - profile.mu0 - profile.mu1 * x
    return float(w @ (r * r))


def _relu(x):
    return np.maximum(x, 0.0)


def _shifted_relu(x):
    return np.maximum(x, 0.0) - 1.0 / SQRT_2PI


_BUILTIN_EVALUATORS = {
    "relu": _relu,                  # mu0 = 1/sqrt(2 pi); simulator centers it
    "shifted_relu": _shifted_relu,  # max(0,x) - 1/sqrt(2 pi), mu0 = 0
}

_BUILTIN_KINKS = {"relu": (0.0,), "shifted_relu": (0.0,)}


def activation_by_name(name, quad_order=200):
    """Look up a built-in activation and compute its profile.

    Plain "relu" has mu0 = 1/sqrt(2 pi) != 0; callers feeding the asymptotic
    model must center it first (see ``centered``).
    """
    try:
        ev = _BUILTIN_EVALUATORS[name]
    except KeyError:
        raise KeyError(f"unknown activation {name!r}; "
                       f"available: {sorted(_BUILTIN_EVALUATORS)}") from None
    return hermite_coeffs(ev, quad_order=quad_order, kinks=_BUILTIN_KINKS[name],
                          name=name)


def centered(profile):
    """Profile of sigma - mu0 (identical mu1 and mustar_sq, zero mean)."""
    if abs(profile.mu0) < _MEAN_TOL:
        return profile
    mu0 = profile.mu0
    base = profile.evaluator

    def ev(x, _base=base, _mu0=mu0):
        return _base(x) - _mu0

    return ActivationProfile(name=profile.name + "_centered", evaluator=ev,
                             mu0=0.0, mu1=profile.mu1,
                             mustar_sq=profile.mustar_sq,
                             quad_order=profile.quad_order)
