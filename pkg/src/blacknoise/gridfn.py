"""
Uniformly sampled functions on intervals.

A :class:`GridFunction` denotes the piecewise-linear interpolant of its node
values.  Every integral in the package is the exact integral of that
interpolant (trapezoid rule, with partial trapezoids at off-grid endpoints),
so all window maps are consistent with one another.

The ``*_values`` helpers operate on raw arrays of shape ``(..., n)`` so that
batches of functions sharing one grid can be processed in a single pass.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Relative slack when testing interval containment and snapping to nodes.
_REL_TOL = 1e-9


class DomainError(ValueError):
    """A query reaches outside the domain of a grid function."""


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with ``lo <= hi``.

    There is no empty ``Interval``; :meth:`intersect` returns ``None`` instead.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"interval has lo > hi: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def _slack(self) -> float:
        return _REL_TOL * max(1.0, abs(self.lo), abs(self.hi))

    def contains(self, a: float, b: float | None = None) -> bool:
        """Whether ``[min(a,b), max(a,b)]`` (or the point ``a``) lies inside."""
        if b is None:
            b = a
        lo, hi = min(a, b), max(a, b)
        tol = self._slack()
        return lo >= self.lo - tol and hi <= self.hi + tol

    def intersect(self, other: Interval) -> Interval | None:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def __str__(self):
        return f"[{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n >= 2`` nodes spanning ``[lo, hi]``.

    This is the value-free skeleton of a :class:`GridFunction`.
    """

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        Interval(self.lo, self.hi)
        if self.n < 2:
            raise ValueError(f"a grid needs at least 2 nodes, got {self.n}")
        if self.hi == self.lo:
            raise ValueError("a grid needs a non-degenerate interval")

    @classmethod
    def from_step(cls, lo: float, hi: float, step: float) -> Grid:
        """Grid on ``[lo, hi]`` whose step is as close to ``step`` as the
        interval allows (``n = round((hi - lo) / step) + 1``)."""
        if not step > 0:
            raise ValueError(f"step must be positive, got {step}")
        n = max(2, int(round((hi - lo) / step)) + 1)
        return cls(lo, hi, n)

    @classmethod
    def on(cls, interval: Interval, step: float) -> Grid:
        return cls.from_step(interval.lo, interval.hi, step)

    @property
    def domain(self) -> Interval:
        return Interval(self.lo, self.hi)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.n)

    def locate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Cell index ``i`` and fractional offset ``u`` in ``[0, 1]`` of
        abscissae ``t``, so that ``t = x[i] + u * step``.

        Abscissae within a relative ``1e-9`` of a node snap onto it, which
        makes interpolation exact on the grid.
        """
        t = np.asarray(t, dtype=float)
        dom = self.domain
        if t.size and not dom.contains(float(np.min(t)), float(np.max(t))):
            raise DomainError(
                f"abscissae [{np.min(t):g}, {np.max(t):g}] not inside grid domain {dom}"
            )
        pos = (t - self.lo) / self.step
        near = np.rint(pos)
        pos = np.where(np.abs(pos - near) < 1e-7, near, pos)
        pos = np.clip(pos, 0.0, self.n - 1)
        i = np.minimum(np.floor(pos), self.n - 2).astype(np.intp)
        return i, pos - i


def _check_values(grid: Grid, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.n:
        raise ValueError(f"values have {values.shape[-1]} nodes, grid has {grid.n}")
    return values


class GridFunction:
    """Immutable uniformly sampled real function.

    Parameters
    ----------
    grid : Grid
        Node layout.
    values : array_like
        Node values, shape ``(grid.n,)``; must be finite.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid, f) -> GridFunction:
        return cls(grid, f(grid.x))

    @property
    def domain(self) -> Interval:
        return self.grid.domain

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.grid.n

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self):
        return f"GridFunction(domain={self.domain}, n={self.grid.n})"

    def to_csv(self, path) -> None:
        """Write ``x,value`` rows plus a JSON sidecar next to ``path``."""
        write_grid_function(self, path)


# -- batched kernels ---------------------------------------------------------


def interpolate_values(grid: Grid, values, t) -> np.ndarray:
    """Linear interpolation of node values (shape ``(..., n)``) at ``t``."""
    values = _check_values(grid, values)
    i, u = grid.locate(t)
    return (1.0 - u) * values[..., i] + u * values[..., i + 1]


def cumulative_integral(grid: Grid, values) -> np.ndarray:
    """Trapezoid prefix sums ``F[j] = int_{lo}^{x_j} f``; ``F[..., 0] = 0``."""
    values = _check_values(grid, values)
    out = np.zeros(values.shape, dtype=float)
    np.cumsum(0.5 * grid.step * (values[..., 1:] + values[..., :-1]), axis=-1, out=out[..., 1:])
    return out


class Antiderivative:
    """Precomputed evaluation plan for ``t -> int_{lo}^{t} f`` on a grid.

    The plan depends only on the grid and the query abscissae, so it is
    reused across every function (and every batch row) sampled on that grid.
    Within a cell the integral of the linear interpolant from ``x_i`` to
    ``x_i + u h`` is ``h (u - u^2/2) f_i + h (u^2/2) f_{i+1}``.
    """

    def __init__(self, grid: Grid, t):
        self.grid = grid
        self.t = np.asarray(t, dtype=float)
        self.index, u = grid.locate(self.t)
        h = grid.step
        self.w_left = h * u * (1.0 - 0.5 * u)
        self.w_right = h * 0.5 * u * u

    def __call__(self, values, prefix=None) -> np.ndarray:
        if prefix is None:
            prefix = cumulative_integral(self.grid, values)
        i = self.index
        return prefix[..., i] + self.w_left * values[..., i] + self.w_right * values[..., i + 1]


def window_integral_values(grid: Grid, values, lo, hi) -> np.ndarray:
    """Signed integrals ``int_{lo_j}^{hi_j} f`` for batched node values."""
    values = _check_values(grid, values)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    prefix = cumulative_integral(grid, values)
    return Antiderivative(grid, hi)(values, prefix) - Antiderivative(grid, lo)(values, prefix)


# -- scalar-level operations -------------------------------------------------


def integrate(f: GridFunction, a: float, b: float) -> float:
    """Signed integral ``int_a^b f`` of the piecewise-linear interpolant.

    Raises
    ------
    DomainError
        If ``[min(a,b), max(a,b)]`` is not inside ``f.domain``.
    """
    if not f.domain.contains(a, b):
        raise DomainError(f"integration interval [{min(a, b):g}, {max(a, b):g}] "
                          f"not inside domain {f.domain}")
    F = Antiderivative(f.grid, [a, b])(f.values)
    return float(F[1] - F[0])


def evaluate(f: GridFunction, x: float) -> float:
    """Value of the linear interpolant at ``x``; exact at grid nodes."""
    if not f.domain.contains(x):
        raise DomainError(f"point {x:g} not inside domain {f.domain}")
    return float(interpolate_values(f.grid, f.values, x))


def sliding_mean(f: GridFunction, half_width: float, out_grid: Grid) -> GridFunction:
    """Moving average ``g(x) = (1/2w) int_{x-w}^{x+w} f`` on ``out_grid``.

    Uses one prefix-sum pass over ``f`` plus a constant amount of work per
    output node.
    """
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    need = Interval(out_grid.lo - half_width, out_grid.hi + half_width)
    if not f.domain.contains(need.lo, need.hi):
        raise DomainError(f"sliding mean needs input on {need}, have {f.domain}")
    x = out_grid.x
    total = window_integral_values(f.grid, f.values, x - half_width, x + half_width)
    return GridFunction(out_grid, total / (2.0 * half_width))


def resample(f: GridFunction, grid: Grid) -> GridFunction:
    """Linear-interpolation resampling onto another uniform grid."""
    return GridFunction(grid, interpolate_values(f.grid, f.values, grid.x))


# -- serialization -----------------------------------------------------------


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_grid_function(f: GridFunction, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "value"])
        for xi, vi in zip(f.x, f.values):
            writer.writerow([repr(float(xi)), repr(float(vi))])
    meta = {"domain_lo": f.grid.lo, "domain_hi": f.grid.hi, "step": f.step, "n": f.grid.n}
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_grid_function(path) -> GridFunction:
    """Inverse of :func:`write_grid_function`; the sidecar fixes the grid."""
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    grid = Grid(float(meta["domain_lo"]), float(meta["domain_hi"]), int(meta["n"]))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        values = [float(row[1]) for row in reader]
    return GridFunction(grid, values)
