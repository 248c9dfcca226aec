from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blacknoise.gridfn import (
    DomainError,
    Grid,
    GridFunction,
    Interval,
    evaluate,
    integrate,
    read_grid_function,
    resample,
    sliding_mean,
    write_grid_function,
)


def const(lo, hi, step, c):
    g = Grid.from_step(lo, hi, step)
    return GridFunction(g, np.full(g.n, c))


def test_interval_rejects_reversed_endpoints():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)


def test_interval_intersect_empty_is_none():
    assert Interval(0, 1).intersect(Interval(2, 3)) is None
    assert Interval(0, 2).intersect(Interval(1, 3)) == Interval(1, 2)


def test_grid_needs_two_nodes():
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 1)


def test_grid_function_is_immutable():
    f = const(0, 1, 0.5, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_grid_function_rejects_nonfinite():
    with pytest.raises(ValueError):
        GridFunction(Grid(0, 1, 2), [0.0, np.nan])


class TestIntegrate:
    def test_constant(self):
        assert integrate(const(0, 10, 0.1, 1.0), 0, 3) == pytest.approx(3.0, abs=1e-12)

    def test_linear_exact(self):
        f = GridFunction(Grid(0, 1, 3), [0.0, 0.5, 1.0])
        assert integrate(f, 0, 1) == pytest.approx(0.5, abs=1e-15)

    def test_orientation(self):
        assert integrate(const(0, 10, 0.1, 1.0), 3, 0) == pytest.approx(-3.0, abs=1e-12)

    def test_off_grid_endpoints_are_exact_for_linear(self):
        f = GridFunction.from_callable(Grid(0, 1, 11), lambda x: 2 * x + 1)
        assert integrate(f, 0.13, 0.77) == pytest.approx((0.77**2 + 0.77) - (0.13**2 + 0.13), rel=1e-13)

    def test_outside_domain_names_interval(self):
        with pytest.raises(DomainError, match=r"\[-1, 0.5\]"):
            integrate(const(0, 1, 0.1, 1.0), -1, 0.5)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0, 5), b=st.floats(0, 5), c=st.floats(0, 5), seed=st.integers(0, 2**32 - 1))
    def test_additive(self, a, b, c, seed):
        g = Grid(0.0, 5.0, 37)
        f = GridFunction(g, np.random.default_rng(seed).normal(size=g.n))
        lhs = integrate(f, a, b) + integrate(f, b, c)
        rhs = integrate(f, a, c)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestEvaluate:
    def test_midpoint(self):
        assert evaluate(GridFunction(Grid(0, 1, 2), [0.0, 2.0]), 0.5) == 1.0

    def test_left_endpoint(self):
        f = GridFunction(Grid(0, 1, 5), [3.0, 1.0, 4.0, 1.0, 5.0])
        assert evaluate(f, 0.0) == 3.0

    def test_linear(self):
        f = GridFunction.from_callable(Grid(0, 1, 5), lambda x: x)
        assert evaluate(f, 0.25) == 0.25

    def test_exact_on_nodes(self):
        g = Grid(-1.3, 2.9, 43)
        f = GridFunction(g, np.random.default_rng(0).normal(size=g.n))
        assert [evaluate(f, x) for x in g.x] == list(f.values)

    def test_out_of_domain(self):
        with pytest.raises(DomainError):
            evaluate(const(0, 1, 0.1, 0.0), 1.5)


class TestSlidingMean:
    def test_constant(self):
        g = sliding_mean(const(-3, 3, 0.01, 2.5), 1.0, Grid(-1, 1, 21))
        assert np.allclose(g.values, 2.5, atol=1e-12)

    def test_odd(self):
        f = GridFunction.from_callable(Grid.from_step(-2, 2, 0.01), lambda x: x)
        assert evaluate(sliding_mean(f, 1.0, Grid(-0.5, 0.5, 3)), 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_square(self):
        f = GridFunction.from_callable(Grid.from_step(-2, 2, 0.001), lambda x: x * x)
        got = evaluate(sliding_mean(f, 1.0, Grid(-0.5, 0.5, 3)), 0.0)
        assert got == pytest.approx(1 / 3, abs=1e-6)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(4)
        f = GridFunction(Grid(0.0, 10.0, 401), rng.normal(size=401))
        out = Grid(1.3, 8.1, 57)
        fast = sliding_mean(f, 1.17, out)
        # naive: trapezoid on an explicit fine resampling of each window
        for x, v in zip(out.x, fast.values):
            t = np.linspace(x - 1.17, x + 1.17, 20001)
            y = np.interp(t, f.x, f.values)
            naive = np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)) / 2.34
            assert v == pytest.approx(naive, abs=1e-4)
        direct = [integrate(f, x - 1.17, x + 1.17) / 2.34 for x in out.x]
        assert np.allclose(fast.values, direct, atol=1e-10)

    def test_insufficient_domain(self):
        with pytest.raises(DomainError):
            sliding_mean(const(0, 1, 0.1, 1.0), 0.5, Grid(0, 1, 3))


def test_resample_linear_is_exact():
    f = GridFunction.from_callable(Grid(0, 2, 5), lambda x: 3 * x - 1)
    g = resample(f, Grid(0.1, 1.9, 13))
    assert np.allclose(g.values, 3 * g.x - 1, atol=1e-14)


def test_csv_round_trip(tmp_path):
    g = Grid(-0.8, 3.8, 47)
    f = GridFunction(g, np.random.default_rng(1).normal(size=g.n))
    path = tmp_path / "f.csv"
    write_grid_function(f, path)
    assert path.read_text().splitlines()[0] == "x,value"
    meta = json.loads((tmp_path / "f.json").read_text())
    assert set(meta) == {"domain_lo", "domain_hi", "step", "n"}
    back = read_grid_function(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
