import math

import numpy as np
import pytest

from rfuniform.analysis import compare_theory_sim, powerlaw_slope
from rfuniform.errors import (GridMismatch, InsufficientPoints,
                              NonPositiveOrdinate)
from rfuniform.simulator import ReplicateStats


def test_exact_power_law():
    xs = np.arange(1.0, 101.0)
    fit = powerlaw_slope([(x, 3.0 * x ** 2) for x in xs], window=(1.0, 100.0))
    assert abs(fit.slope - 2.0) < 1e-12
    assert abs(fit.intercept - math.log(3.0)) < 1e-10
    assert fit.r_squared == 1.0


def test_default_window_is_top_decade():
    xs = np.geomspace(1.0, 100.0, 20)
    fit = powerlaw_slope([(x, x ** -1.5) for x in xs])
    assert fit.window == (10.0, 100.0)
    assert abs(fit.slope + 1.5) < 1e-10


def test_scale_equivariance():
    # scaling y rescales the intercept only; the slope is computed from
    # centered log-ratios, so it moves by at most float rounding of the logs
    rng = np.random.default_rng(4)
    xs = np.geomspace(1.0, 50.0, 12)
    ys = xs ** 0.7 * np.exp(0.01 * rng.standard_normal(12))
    base = powerlaw_slope(list(zip(xs, ys)), window=(1.0, 50.0))
    for c in (math.pi, 1e6, 2.0 ** 10):
        scaled = powerlaw_slope(list(zip(xs, c * ys)), window=(1.0, 50.0))
        assert abs(scaled.slope - base.slope) < 1e-12
        assert abs(scaled.intercept - (base.intercept + math.log(c))) < 1e-9


def test_nonpositive_points_filtered():
    pts = [(x, x - 5.0) for x in np.geomspace(1.0, 100.0, 24)]
    fit = powerlaw_slope(pts, window=(1.0, 100.0))     # y <= 0 dropped
    assert np.isfinite(fit.slope)
    with pytest.raises(NonPositiveOrdinate):
        powerlaw_slope([(x, -1.0) for x in (1, 2, 3, 4, 5)])


def test_insufficient_points():
    with pytest.raises(InsufficientPoints):
        powerlaw_slope([(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], window=(1.0, 3.0))


def _stats(norm, value, stderr=0.1, count=20):
    return ReplicateStats(norm_sq=(norm, stderr), value=(value, stderr), count=count)


def test_compare_exact_match():
    theory = {0.5: (1.0, 2.0), 1.0: (0.5, 1.0)}
    stats = {lam: _stats(*theory[lam]) for lam in theory}
    result = compare_theory_sim(theory, stats)
    assert result.pass_rate == 1.0
    assert all(s.z == 0.0 for s in result.scores)


def test_compare_z_values_and_failures():
    theory = {1.0: (0.0, 0.0)}
    stats = {1.0: _stats(0.25, 0.5, stderr=0.1)}
    result = compare_theory_sim(theory, stats)
    by_coord = {s.coordinate: s for s in result.scores}
    assert abs(by_coord["norm_sq"].z - 2.5) < 1e-12
    assert by_coord["norm_sq"].passed
    assert abs(by_coord["value"].z - 5.0) < 1e-12
    assert not by_coord["value"].passed
    assert result.pass_rate == 0.5


def test_compare_degenerate_stderr():
    theory = {1.0: (1.0, 2.0)}
    stats = {1.0: ReplicateStats(norm_sq=(1.0, 0.0), value=(2.5, 0.0), count=20)}
    result = compare_theory_sim(theory, stats)
    by_coord = {s.coordinate: s for s in result.scores}
    assert by_coord["norm_sq"].passed and not by_coord["norm_sq"].degenerate_stderr
    assert by_coord["value"].degenerate_stderr
    assert math.isnan(by_coord["value"].z)
    assert not by_coord["value"].passed


def test_compare_grid_mismatch():
    with pytest.raises(GridMismatch):
        compare_theory_sim({1.0: (0.0, 0.0)}, {2.0: _stats(0.0, 0.0)})
