from __future__ import annotations

import math

import numpy as np
import pytest

from blacknoise.gridfn import Grid, cumulative_integral
from blacknoise.measures import (
    CANONICAL_SIGMA,
    RngSeed,
    WienerScale,
    gamma_covariance,
    gamma_paths,
    sample_gamma,
    sample_prior,
    sample_scaled_wiener,
    white_paths,
    wiener_paths,
)


def test_constants():
    assert gamma_covariance(0.0) == pytest.approx(0.7267604552648373, abs=1e-15)
    assert gamma_covariance(1.0) == pytest.approx(0.3633802276324186, abs=1e-15)
    assert gamma_covariance(2.0) == 0.0
    assert CANONICAL_SIGMA == pytest.approx(1.2056205499781738, abs=1e-15)


def test_rng_seed_validation():
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(0, 2**64)


def test_streams_replay_and_differ():
    a = RngSeed(5, 1).generator().standard_normal(8)
    b = RngSeed(5, 1).generator().standard_normal(8)
    c = RngSeed(5, 2).generator().standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngSeed(5).derive("chain", 1) != RngSeed(5).derive("chain", 2)
    assert RngSeed(5).derive("chain", 1) == RngSeed(5).derive("chain", 1)


def test_wiener_scale_validation():
    with pytest.raises(ValueError):
        WienerScale(0.0)


def test_moving_average_overlap():
    # Cov(W(x+1)-W(x-1), W(y+1)-W(y-1)) = overlap length, by direct enumeration
    for lag in [0.0, 0.3, 1.0, 1.7, 2.0, 2.5]:
        lo, hi = max(-1.0, lag - 1.0), min(1.0, lag + 1.0)
        assert max(0.0, hi - lo) == pytest.approx(max(0.0, 2 - lag))


def test_gamma_covariance_matrix():
    grid = Grid(0.0, 4.0, 9)
    xs = gamma_paths(grid, 10_000, RngSeed(11))
    emp = np.cov(xs, rowvar=False)
    target = gamma_covariance(grid.x[:, None] - grid.x[None, :])
    assert np.max(np.abs(emp - target)) < 0.03


def test_gamma_off_grid_knots():
    grid = Grid(0.0, 1.3, 8)  # step does not divide 1
    xs = gamma_paths(grid, 20_000, RngSeed(2))
    emp = np.cov(xs, rowvar=False)
    target = gamma_covariance(grid.x[:, None] - grid.x[None, :])
    assert np.max(np.abs(emp - target)) < 0.03


def test_sample_gamma_deterministic():
    g = Grid(-1, 1, 21)
    assert np.array_equal(sample_gamma(g, RngSeed(3)).values, sample_gamma(g, RngSeed(3)).values)


class TestWiener:
    def test_variance_at_one(self):
        paths = wiener_paths(WienerScale(), Grid(0, 1, 11), 10_000, RngSeed(4))
        assert np.var(paths[:, -1]) == pytest.approx(4 * (math.pi - 2) / math.pi, rel=0.05)

    def test_starts_at_zero(self):
        w = sample_scaled_wiener(WienerScale(2.0), Grid(0, 3, 31), RngSeed(1))
        assert w.values[0] == 0.0

    def test_centered_and_independent_increments(self):
        n = 10_000
        paths = wiener_paths(WienerScale(), Grid(0, 2, 21), n, RngSeed(8))
        assert abs(paths[:, 10].mean()) <= 3 * CANONICAL_SIGMA * math.sqrt(1 / n)
        a, b = paths[:, 10], paths[:, 20] - paths[:, 10]
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05

    def test_requires_origin(self):
        with pytest.raises(ValueError):
            wiener_paths(WienerScale(), Grid(1, 2, 3), 1, RngSeed(0))


class TestPrior:
    def test_moments(self):
        x = np.stack([sample_prior(6, RngSeed(1, i)) for i in range(10_000)])
        assert np.allclose(x.var(axis=0), 1.0, atol=0.05)
        corr = np.corrcoef(x, rowvar=False)
        assert np.max(np.abs(corr - np.eye(6))) < 0.05

    def test_replay(self):
        assert np.array_equal(sample_prior(50, RngSeed(9)), sample_prior(50, RngSeed(9)))

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            sample_prior(0, RngSeed(0))


class TestWhite:
    def test_ito_isometry(self):
        g = Grid(0, 1, 65)
        w = white_paths(g, 10_000, RngSeed(6))
        F = cumulative_integral(g, w)[:, -1]
        assert np.var(F) == pytest.approx(1.0, abs=0.1)
        assert abs(F.mean()) < 4 / math.sqrt(10_000)

    def test_disjoint_windows_uncorrelated(self):
        g = Grid(0, 2, 129)
        w = white_paths(g, 10_000, RngSeed(7))
        F = cumulative_integral(g, w)
        a, b = F[:, 64], F[:, -1] - F[:, 65]
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
