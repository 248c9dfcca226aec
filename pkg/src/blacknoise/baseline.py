"""
White-noise control: the same tower built with linear smoothing.

Level ``N`` is grid white noise; each step down convolves with a triangular
kernel ``V_k`` of radius ``r_k = M^{-k}``.  Every level is then a smoothed
Wiener integral, so ``H1(f_k)`` approaches 1 as ``k`` grows, in contrast with
the clipped cascade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .blackstat import H1Report, Partition, h1_from_cells, shrunk_cell
from .gridfn import Antiderivative, DomainError, Grid, GridFunction
from .measures import RngSeed, white_paths


@dataclass(frozen=True)
class WhiteCascadeParams:
    """``grid_step`` defaults to ``r_N / 4``, so for integer ``M`` every
    kernel radius is a whole number of cells."""

    M: float
    N: int
    grid_step: float | None = None
    normalize_kernel: bool = True

    def __post_init__(self):
        problems = []
        if not self.M > 1:
            problems.append(f"M must exceed 1 (got {self.M})")
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"N must be an integer >= 1 (got {self.N})")
        if self.grid_step is not None:
            if not self.grid_step > 0:
                problems.append(f"grid_step must be positive (got {self.grid_step})")
            elif self.grid_step > self.M ** (-self.N) / 4 * (1 + 1e-12):
                problems.append(f"grid_step {self.grid_step:g} must be <= r_N/4 = "
                                f"{self.M ** (-self.N) / 4:g}")
        if problems:
            raise ValueError("; ".join(problems))

    def r(self, k: int) -> float:
        return self.M ** (-k)

    @property
    def step(self) -> float:
        return self.grid_step if self.grid_step is not None else self.r(self.N) / 4

    def s(self, k: int) -> float:
        """Dependence radius of level ``k`` on level ``N``: ``sum_{k<l<=N} r_l``."""
        return sum(self.r(l) for l in range(k + 1, self.N + 1))

    @property
    def margin(self) -> float:
        return 2.0 * sum(self.r(l) for l in range(1, self.N + 1))


def kernel_v(k: int, x, params: WhiteCascadeParams):
    """Triangular bump ``r_k^2 - r_k |x|`` on ``|x| < r_k``, divided by its
    mass ``r_k^3`` when ``params.normalize_kernel`` is set."""
    if k < 1:
        raise ValueError(f"kernel level must be >= 1, got {k}")
    r = params.r(k)
    x = np.abs(np.asarray(x, dtype=float))
    v = np.where(x < r, r * r - r * x, 0.0)
    if params.normalize_kernel:
        v = v / r**3
    return v if v.ndim else float(v)


def _kernel_weights(k: int, step: float, params: WhiteCascadeParams) -> np.ndarray:
    J = int(math.floor(params.r(k) / step + 1e-9))
    return kernel_v(k, step * np.arange(-J, J + 1), params) * step


def white_step_values(grid: Grid, values, k: int, params: WhiteCascadeParams):
    """Batched ``omega_k -> omega_{k-1}``: returns ``(out_grid, values)``."""
    w = _kernel_weights(k, grid.step, params)
    J = w.size // 2
    if grid.n - 2 * J < 2:
        raise DomainError(f"level {k} kernel radius {params.r(k):g} exhausts domain {grid.domain}")
    out_grid = Grid(grid.lo + J * grid.step, grid.lo + (grid.n - 1 - J) * grid.step,
                    grid.n - 2 * J)
    values = np.asarray(values, dtype=float)
    kernel = w.reshape((1,) * (values.ndim - 1) + (-1,))
    return out_grid, fftconvolve(values, kernel, mode="valid", axes=-1)


def white_step(omega_next: GridFunction, k: int, params: WhiteCascadeParams) -> GridFunction:
    """``omega_{k-1}(x) = int V_k(y - x) omega_k(y) dy`` on the shrunken domain."""
    grid, vals = white_step_values(omega_next.grid, omega_next.values, k, params)
    return GridFunction(grid, vals)


def _white_sampler(grid: Grid, rng: RngSeed) -> np.ndarray:
    return white_paths(grid, 1, rng)[0]


@dataclass
class WhiteBaselineResult:
    reports: dict[int, H1Report]
    f_values: np.ndarray
    towers: list = field(repr=False, default_factory=list)


def run_white_baseline(params: WhiteCascadeParams, n_samples: int, rng: RngSeed,
                       sampler=None, chunk: int = 20, keep_towers: int = 3,
                       partition_floor: float = 0.1) -> WhiteBaselineResult:
    """Sample ``omega_N`` as white noise, smooth down to ``omega_1`` and report
    ``H1(f_k)`` for every level with margin ``s'_k``.

    ``sampler(grid, rng)`` returns the level-``N`` node values; sample ``i``
    always uses stream ``rng.derive("white", i)``, so ``chunk`` only affects
    memory use.  The first ``keep_towers`` towers are returned in full.
    """
    if n_samples < 30:
        raise ValueError(f"white baseline needs at least 30 samples, got {n_samples}")
    sampler = sampler or _white_sampler
    N = params.N
    top = Grid.from_step(-params.margin, 1.0 + params.margin, params.step)
    parts = {k: Partition.for_level(params.s(k), partition_floor) for k in range(1, N + 1)}
    limits = {k: np.array([shrunk_cell(a, b, params.s(k)) for a, b in parts[k].cells()])
              for k in parts}
    cells = {k: np.zeros((n_samples, parts[k].n_intervals)) for k in parts}
    f_values = np.zeros((n_samples, N))
    towers = []
    plans: dict = {}

    for start in range(0, n_samples, chunk):
        idx = range(start, min(n_samples, start + chunk))
        vals = np.stack([sampler(top, rng.derive("white", i)) for i in idx])
        grid = top
        for k in range(N, 0, -1):
            if k < N:
                grid, vals = white_step_values(grid, vals, k + 1, params)
            if k not in plans:
                lim = limits[k]
                ok = lim[:, 0] < lim[:, 1]
                ends = np.concatenate([lim[ok].ravel(), [0.0, 1.0]])
                plans[k] = (ok, Antiderivative(grid, ends))
            ok, F = plans[k]
            vals_F = F(vals).reshape(len(idx), -1, 2)
            g = np.zeros((len(idx), ok.size))
            g[:, ok] = vals_F[:, :-1, 1] - vals_F[:, :-1, 0]
            cells[k][start:start + len(idx)] = g
            f_values[start:start + len(idx), k - 1] = vals_F[:, -1, 1] - vals_F[:, -1, 0]
            for j, i in enumerate(idx):
                if i < keep_towers:
                    if len(towers) <= i:
                        towers.append({})
                    towers[i][k] = GridFunction(grid, vals[j])

    reports = {k: h1_from_cells(cells[k], k, parts[k], rng.derive("bootstrap", k))
               for k in range(1, N + 1)}
    return WhiteBaselineResult(reports=reports, f_values=f_values, towers=towers)
