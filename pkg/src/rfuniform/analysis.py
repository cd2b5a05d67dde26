"""Power-law slope extraction and theory-vs-simulation comparison."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InsufficientPoints, NonPositiveOrdinate

_MIN_POINTS = 4


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float       # of log y on log x (natural logs)
    r_squared: float
    window: tuple          # (x_min, x_max) actually used
    n_points: int          # points fitted (after y > 0 and window filters)
    n_excluded: int        # nonpositive/nonfinite ordinates dropped


def powerlaw_slope(points, window=None):
    """Least-squares slope of log y on log x.

    Only points with y > 0 enter the fit; the default window is the top
    decade of x.  The slope is computed from doubly centered logs, so it
    depends on y only through log-ratios (scaling y shifts the intercept).
    """
    points = list(points)
    pts = [(float(x), float(y)) for x, y in points if y > 0 and math.isfinite(y)]
    n_excluded = len(points) - len(pts)
    if not pts:
        raise NonPositiveOrdinate("no positive ordinates")
    if window is None:
        x_max = max(x for x, _ in pts)
        window = (x_max / 10.0, x_max)
    lo, hi = window
    pts = [(x, y) for x, y in pts if lo <= x <= hi]
    if len(pts) < _MIN_POINTS:
        raise InsufficientPoints(f"{len(pts)} points in window {window}, need >= {_MIN_POINTS}")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    cx = lx - lx.mean()
    cy = ly - ly.mean()
    sxx = float(cx @ cx)
    slope = float(cx @ cy) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    ss_res = float(np.sum((cy - slope * cx) ** 2))
    ss_tot = float(cy @ cy)
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return PowerLawFit(slope=slope, intercept=intercept, r_squared=r_squared,
                       window=(float(lo), float(hi)), n_points=len(pts),
                       n_excluded=n_excluded)


@dataclass(frozen=True)
class ZScore:
    lam: float
    coordinate: str        # "norm_sq" | "value"
    sim_mean: float
    sim_stderr: float
    theory: float
    z: float               # nan when the stderr is degenerate
    passed: bool
    degenerate_stderr: bool = False


@dataclass(frozen=True)
class ComparisonResult:
    scores: tuple
    pass_rate: float

    @property
    def passed_all(self):
        return self.pass_rate == 1.0


def compare_theory_sim(theory, stats, z_max=3.0):
    """Per-lambda z-scores of simulation against theory.

    ``theory`` maps lam -> (norm_sq, value); ``stats`` maps lam ->
    ReplicateStats.  z = (sim_mean - theory)/stderr per coordinate; a zero
    stderr with a mismatch is flagged degenerate instead of producing an
    infinite z, and counts as a failure.
    """
    if set(theory) != set(stats):
        raise GridMismatch(f"lambda grids differ: {sorted(theory)} vs {sorted(stats)}")
    scores = []
    for lam in sorted(theory):
        th_norm, th_value = theory[lam]
        st = stats[lam]
        for coord, (mean, stderr), th in (("norm_sq", st.norm_sq, th_norm),
                                          ("value", st.value, th_value)):
            if stderr == 0.0:
                exact = mean == th
                scores.append(ZScore(lam=lam, coordinate=coord, sim_mean=mean,
                                     sim_stderr=stderr, theory=th,
                                     z=0.0 if exact else math.nan,
                                     passed=exact, degenerate_stderr=not exact))
            else:
                z = (mean - th) / stderr
                scores.append(ZScore(lam=lam, coordinate=coord, sim_mean=mean,
                                     sim_stderr=stderr, theory=th, z=z,
                                     passed=abs(z) <= z_max))
    pass_rate = sum(s.passed for s in scores) / len(scores)
    return ComparisonResult(scores=tuple(scores), pass_rate=pass_rate)
