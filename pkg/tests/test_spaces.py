import math

import numpy as np
import pytest
from scipy import stats

from katoflow import spaces
from katoflow.errors import InvalidPointError, TimeDomainError, TooSmallTimeError


E1 = spaces.euclidean(1)
E3 = spaces.euclidean(3)
S2 = spaces.sphere2(1.0)


def test_distance_pythagoras():
    assert spaces.euclidean(3).distance((0, 0, 0), (3, 4, 0)) == 5.0


def test_distance_sphere_antipodal_and_identity():
    north = np.array([0.0, 0.0, 1.0])
    south = -north
    assert S2.distance(north, south) == pytest.approx(math.pi, abs=1e-14)
    assert S2.distance(north, north) == 0.0


def test_invalid_sphere_point_rejected():
    with pytest.raises(InvalidPointError):
        S2.distance(np.array([0.0, 0.0, 1.1]), np.array([0.0, 0.0, 1.0]))


def test_curvature_parameters():
    assert E3.ricci_lower_bound == 0.0
    assert spaces.sphere2(2.0).ricci_lower_bound == pytest.approx(0.25)
    assert spaces.sphere2(2.0).dimension == 2


def test_heat_kernel_normalization_at_origin():
    t = 1.0 / (4.0 * math.pi)
    x = np.zeros(1)
    assert E1.heat_kernel(t, x, x) == pytest.approx(1.0, rel=1e-14)


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(TimeDomainError):
        E1.heat_kernel(0.0, np.zeros(1), np.zeros(1))
    with pytest.raises(TimeDomainError):
        E1.heat_kernel(-1.0, np.zeros(1), np.zeros(1))


def test_heat_kernel_symmetry_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.standard_normal(3)
        y = rng.standard_normal(3)
        assert E3.heat_kernel(0.3, x, y) == E3.heat_kernel(0.3, y, x)
    for _ in range(20):
        x = rng.standard_normal(3)
        x /= np.linalg.norm(x)
        y = rng.standard_normal(3)
        y /= np.linalg.norm(y)
        assert S2.heat_kernel(0.7, x, y) == S2.heat_kernel(0.7, y, x)


@pytest.mark.parametrize("space,t,x", [
    (E1, 0.5, np.zeros(1)),
    (E3, 0.25, np.array([0.3, -0.1, 1.0])),
    (S2, 0.5, np.array([0.0, 0.0, 1.0])),
    (S2, 1.0, np.array([1.0, 0.0, 0.0])),
])
def test_conservativeness(space, t, x):
    assert spaces.conservativeness_defect(space, t, x) < 1e-8


def test_chapman_kolmogorov_euclidean_1d():
    x = np.array([0.2])
    y = np.array([-0.5])
    assert spaces.chapman_kolmogorov_defect(E1, 0.3, 0.4, x, y) < 1e-8


def test_sphere_too_small_time():
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(TooSmallTimeError):
        S2.heat_kernel(5e-4, x, x)


def test_sphere_series_length_is_dynamic():
    assert S2.sphere_series_length(1.0) < S2.sphere_series_length(2e-3)


def test_degenerate_transition_returns_start():
    x = np.array([1.0, 2.0, 3.0])
    out = E3.sample_transition(0.0, x, np.random.default_rng(0))
    assert np.array_equal(out, x)


def test_euclidean_transition_moments():
    rng = np.random.default_rng(123)
    x = np.array([0.5, -1.0, 2.0])
    t = 0.7
    ys = E3.sample_transition_batch(t, x, 200_000, rng)
    assert np.allclose(ys.mean(axis=0), x, atol=0.02)
    assert np.allclose(ys.var(axis=0), 2.0 * t, rtol=0.02)


@pytest.mark.parametrize("d,t,order", [(3, 0.25, 2), (1, 1.0, 4)])
def test_moment_check_matches_closed_form(d, t, order):
    space = spaces.euclidean(d)
    est = spaces.moment_check(space, t, np.zeros(d), order, 100_000, seed=11)
    expected = spaces.exact_euclidean_moment(d, t, order)
    assert abs(est.value - expected) < 4.0 * est.stderr + 1e-12
    assert est.stderr > 0


def test_moment_check_requires_enough_samples():
    with pytest.raises(TimeDomainError):
        spaces.moment_check(E1, 0.1, np.zeros(1), 2, 100, seed=0)


def test_moments_decrease_to_zero_small_time():
    prev = math.inf
    for t in [0.4, 0.1, 0.025, 0.00625]:
        est = spaces.moment_check(S2, t, np.array([0.0, 0.0, 1.0]), 2, 20_000, seed=3)
        assert est.value < prev
        prev = est.value
    assert prev < 0.05


def test_transition_marginal_ks_euclidean():
    rng = np.random.default_rng(2024)
    t = 0.6
    x = np.array([0.0, 1.0, -2.0])
    ys = E3.sample_transition_batch(t, x, 100_000, rng)
    for axis in range(3):
        res = stats.kstest(ys[:, axis], "norm", args=(x[axis], math.sqrt(2 * t)))
        assert res.pvalue > 1e-3


def test_transition_marginal_ks_sphere():
    rng = np.random.default_rng(55)
    t = 0.5
    north = np.array([0.0, 0.0, 1.0])
    ys = S2._sphere_walk(t, np.tile(north, (100_000, 1)), rng)
    cosang = np.clip(ys[:, 2], -1.0, 1.0)
    grid = np.linspace(-1.0, 1.0, 4001)
    dens = 2.0 * math.pi * S2.sphere_kernel_theta(t, np.arccos(np.clip(grid, -1, 1)))
    cdf_vals = np.concatenate(
        [[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))]
    )
    cdf_vals /= cdf_vals[-1]

    res = stats.kstest(cosang, lambda c: np.interp(c, grid, cdf_vals))
    assert res.pvalue > 1e-3


def test_sphere_walk_stays_on_sphere():
    rng = np.random.default_rng(9)
    pts = S2.sample_transition_batch(0.25, np.array([1.0, 0.0, 0.0]), 1000, rng)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


def test_li_yau_scan_finds_constant():
    c = spaces.li_yau_constant_scan(
        E3, t_grid=[0.1, 0.5, 0.9], dist_grid=np.linspace(0.0, 4.0, 9)
    )
    assert math.isfinite(c)
    c_sphere = spaces.li_yau_constant_scan(
        S2, t_grid=[0.1, 0.5, 0.9], dist_grid=np.linspace(0.0, math.pi, 7)
    )
    assert math.isfinite(c_sphere)
