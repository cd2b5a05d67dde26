"""Exception taxonomy shared across the package."""


class RFUniformError(Exception):
    """Base class for all package errors."""


# --- activation ---

class NonFiniteActivation(RFUniformError):
    """Activation evaluated to a non-finite value on a quadrature node."""


class DegenerateActivation(RFUniformError):
    """mu1^2 or mustar_sq is (numerically) zero; the model is degenerate."""


# --- fixed point ---

class SingularDenominator(RFUniformError):
    """An inner denominator of the self-consistent equations collapsed."""


class NoConvergence(RFUniformError):
    def __init__(self, max_iters, residual):
        super().__init__(f"no convergence after {max_iters} iterations, residual {residual:.3e}")
        self.max_iters = max_iters
        self.residual = residual


class BranchInstability(RFUniformError):
    """The terminal tail of the spectral-parameter continuation is not Cauchy."""


class BranchCutHit(RFUniformError):
    """Argument of a principal logarithm came too close to the branch cut."""


# --- asymptotics ---

class OutsideAdmissibleRegion(RFUniformError):
    """lambda is below the admissible boundary for this Lagrangian family."""


class RequiresOverparam(RFUniformError):
    """Operation needs psi1 > psi2 (interpolation over a nonempty set)."""


class NormLevelOutOfRange(RFUniformError):
    """Requested squared-norm level is not attained on the admissible branch."""


class ExtrapolationUnstable(RFUniformError):
    """The 1/psi1 extrapolation fit has too large a residual."""


# --- simulator ---

class RankDeficient(RFUniformError):
    """Feature matrix is numerically rank deficient."""


class NotNegativeDefinite(RFUniformError):
    def __init__(self, lam, top_eig):
        super().__init__(f"quadratic form not negative definite at lambda={lam} "
                         f"(largest eigenvalue {top_eig:.3e})")
        self.lam = lam
        self.top_eig = top_eig


class SingularKKT(RFUniformError):
    """Interpolation KKT block system is singular."""


class SpectrumHit(RFUniformError):
    """Spectral parameter too close to an eigenvalue of the block matrix."""


class AllReplicatesInfeasible(RFUniformError):
    def __init__(self, lam):
        super().__init__(f"every replicate was infeasible at lambda={lam}")
        self.lam = lam


# --- analysis ---

class InsufficientPoints(RFUniformError):
    """Too few usable points for a fit."""


class NonPositiveOrdinate(RFUniformError):
    """All ordinates are <= 0 inside the fit window."""


class GridMismatch(RFUniformError):
    """Theory and simulation grids do not line up."""


# --- cli ---

class ConfigInvalid(RFUniformError):
    """Run configuration failed validation."""
