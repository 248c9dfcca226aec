"""
Tsirelson-Vershik cascade in rescaled coordinates.

Level ``k`` of the tower is carried by ``xi_k``; the clipped field is
recovered as ``omega_k(x) = phi(L * xi_k(x / s_k))``.  The recursion

    xi_k(x) = 1 / (2 sqrt(M-1)) * int_{Mx-M+1}^{Mx+M-1} phi(L xi_{k+1}(y)) dy

does not involve ``k``, so one :class:`LevelMap` per pair of adjacent grids
serves all levels.  ``M`` need not be an integer, but the planner is exact
(rational arithmetic) only when it is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .gridfn import (
    Antiderivative,
    DomainError,
    Grid,
    GridFunction,
    Interval,
    interpolate_values,
)


def _as_rows(values):
    values = np.ascontiguousarray(values, dtype=float)
    lead = values.shape[:-1]
    return values.reshape(-1, values.shape[-1]), lead


def phi(x):
    """Clipping activation: ``-1`` below ``-1``, identity inside, ``1`` above."""
    return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class CascadeParams:
    """Parameters of the projective system.

    ``grid_step`` is the node spacing of the finest (level ``N``) grid.  When
    omitted it is chosen so that the level-``N`` interval carries exactly
    ``prior_size`` nodes.
    """

    M: float
    L: float
    N: int
    r1: float = 1.0
    grid_step: float | None = None

    def __post_init__(self):
        problems = []
        if not self.M > 1:
            problems.append(f"M must exceed 1 (got {self.M})")
        if not self.L > 0:
            problems.append(f"L must be positive (got {self.L})")
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"N must be an integer >= 1 (got {self.N})")
        if not self.r1 > 0:
            problems.append(f"r1 must be positive (got {self.r1})")
        if self.grid_step is not None and not self.grid_step > 0:
            problems.append(f"grid_step must be positive (got {self.grid_step})")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def standard(cls, M: float, N: int, **kw) -> CascadeParams:
        """The experimental choice ``L = sqrt(M - 1)``."""
        # a placeholder L keeps the M error the only one reported
        return cls(M=M, L=math.sqrt(M - 1) if M > 1 else 1.0, N=N, **kw)

    def r(self, k: int) -> float:
        return self.r1 * self.M ** (-(k - 1))

    def s(self, k: int) -> float:
        """Remote-past radius ``sum_{l>k} r_l = r_k / (M - 1)``."""
        return self.r(k) / (self.M - 1)


@dataclass(frozen=True)
class DomainPlan:
    """Where each ``xi_k`` must be known.

    ``levels[k]`` is the required interval for ``xi_k`` (``k = 1..N``);
    ``exact`` holds the same endpoints as fractions; ``prior_size`` is the
    number of nodes ``d`` of the level-``N`` grid.
    """

    levels: dict[int, Interval]
    exact: dict[int, tuple[Fraction, Fraction]]
    prior_size: int
    s_image: Interval
    s_image_exact: tuple[Fraction, Fraction]


def _as_fraction(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**12) if float(x) != int(x) else Fraction(int(x))


def plan_domains(params: CascadeParams) -> DomainPlan:
    """Unroll the window recursion from the top of the tower.

    ``S xi_1`` is wanted on ``[-1 + 1/M, (M-1) - 1/M]`` and ``omega_1`` on
    ``[0, 1]``; both need ``xi_1`` on ``[-(M-1), M^2 - M - 1]``.  Each step up
    widens ``[lo, hi]`` to ``[M lo - (M-1), M hi + (M-1)]``.
    """
    M = _as_fraction(params.M)
    s_lo, s_hi = -1 + 1 / M, (M - 1) - 1 / M
    lo, hi = M * s_lo, M * s_hi
    exact = {}
    for k in range(1, params.N + 1):
        exact[k] = (lo, hi)
        lo, hi = M * lo - (M - 1), M * hi + (M - 1)
    d = M * (M ** (params.N + 1) - 1)
    levels = {k: Interval(float(a), float(b)) for k, (a, b) in exact.items()}
    return DomainPlan(
        levels=levels,
        exact=exact,
        prior_size=int(round(d)),
        s_image=Interval(float(s_lo), float(s_hi)),
        s_image_exact=(s_lo, s_hi),
    )


def level_grids(params: CascadeParams, plan: DomainPlan | None = None) -> dict[int, Grid]:
    """Grids for ``xi_N, ..., xi_1``.

    Level ``N`` has step ``grid_step`` (default: ``d`` nodes); every step down
    divides the spacing by ``M``, matching the abscissa rescaling, so each
    averaging window spans about ``2 (M-1) M`` input cells.
    """
    plan = plan or plan_domains(params)
    top = plan.levels[params.N]
    if params.grid_step is None:
        grids = {params.N: Grid(top.lo, top.hi, plan.prior_size)}
    else:
        grids = {params.N: Grid.on(top, params.grid_step)}
    step = grids[params.N].step
    for k in range(params.N - 1, 0, -1):
        step /= params.M
        grids[k] = Grid.on(plan.levels[k], step)
    return grids


class LevelMap:
    """Precomputed ``xi_{k+1} -> xi_k`` map between two fixed grids.

    Calling it on node values of shape ``(..., n_in)`` returns ``(..., n_out)``.
    Windows lying entirely in the saturated region of ``phi`` are assigned
    ``+-2 (M - 1)`` directly, which keeps constant inputs exact.
    """

    def __init__(self, in_grid: Grid, out_grid: Grid, params: CascadeParams):
        M = params.M
        half = M - 1.0
        centers = M * out_grid.x
        lo, hi = centers - half, centers + half
        if not in_grid.domain.contains(lo[0], hi[-1]):
            raise DomainError(
                f"xi step needs input on [{lo[0]:g}, {hi[-1]:g}], have {in_grid.domain}"
            )
        self.in_grid, self.out_grid, self.params = in_grid, out_grid, params
        self.F_lo = Antiderivative(in_grid, lo)
        self.F_hi = Antiderivative(in_grid, hi)
        # nodes touched by each window: first cell index to last node index
        self.node_lo = self.F_lo.index
        self.node_hi = np.minimum(self.F_hi.index + 1, in_grid.n - 1)
        self.full = 2.0 * half
        self.scale = 1.0 / (2.0 * math.sqrt(M - 1.0))

    def __call__(self, xi_values) -> np.ndarray:
        xi, lead = _as_rows(xi_values)
        lo, hi = self.F_lo, self.F_hi
        out = _kernels.level_map(
            xi, float(self.params.L), self.in_grid.step,
            lo.index, lo.w_left, lo.w_right, hi.index, hi.w_left, hi.w_right,
            self.node_lo, self.node_hi, self.full, self.scale,
        )
        return out.reshape(lead + (self.out_grid.n,))


def _default_out_grid(xi_next: GridFunction, params: CascadeParams) -> Grid:
    A, B = xi_next.domain.lo, xi_next.domain.hi
    M = params.M
    if B - A < 2 * (M - 1):
        raise DomainError(f"xi step needs an input interval of length >= {2 * (M - 1):g}, "
                          f"have {xi_next.domain}")
    lo, hi = (A + M - 1) / M, (B - M + 1) / M
    if hi <= lo:
        raise DomainError(f"xi step output interval [{lo:g}, {hi:g}] is degenerate")
    return Grid.from_step(lo, hi, xi_next.step / M)


def xi_step(xi_next: GridFunction, params: CascadeParams, out_grid: Grid | None = None) -> GridFunction:
    """One application of the k-independent recursion ``xi_{k+1} -> xi_k``.

    The output lives on ``[(A + M - 1)/M, (B - M + 1)/M]`` for input domain
    ``[A, B]`` unless ``out_grid`` says otherwise.
    """
    if out_grid is None:
        out_grid = _default_out_grid(xi_next, params)
    return GridFunction(out_grid, LevelMap(xi_next.grid, out_grid, params)(xi_next.values))


def omega_grid(xi_grid: Grid, k: int, params: CascadeParams, target: Interval) -> Grid:
    """Grid for ``omega_k`` on ``target`` at the resolution of ``xi_k``."""
    return Grid.on(target, params.s(k) * xi_grid.step)


def reconstruct_omega(xi_k: GridFunction, k: int, params: CascadeParams, target: Interval,
                      out_grid: Grid | None = None) -> GridFunction:
    """``omega_k(x) = phi(L xi_k(x / s_k))`` on ``target``."""
    s = params.s(k)
    if not xi_k.domain.contains(target.lo / s, target.hi / s):
        raise DomainError(f"omega_{k} on {target} needs xi_{k} on "
                          f"[{target.lo / s:g}, {target.hi / s:g}], have {xi_k.domain}")
    if out_grid is None:
        out_grid = omega_grid(xi_k.grid, k, params, target)
    vals = phi(params.L * interpolate_values(xi_k.grid, xi_k.values, out_grid.x / s))
    return GridFunction(out_grid, vals)


class ScalingMap:
    """Precomputed ``xi -> S^{L,M} xi`` evaluated at fixed abscissae ``x``.

    ``S(x) = M^{-1/2} int_0^{Mx} phi(L xi(y)) dy``; both antiderivatives share
    one plan so ``S(0)`` is exactly zero.
    """

    def __init__(self, xi_grid: Grid, x, params: CascadeParams):
        x = np.asarray(x, dtype=float)
        M = params.M
        need_lo, need_hi = min(0.0, M * float(np.min(x))), max(0.0, M * float(np.max(x)))
        if not xi_grid.domain.contains(need_lo, need_hi):
            raise DomainError(f"S map needs xi on [{need_lo:g}, {need_hi:g}], have {xi_grid.domain}")
        self.grid, self.x, self.params = xi_grid, x, params
        self.F = Antiderivative(xi_grid, np.append(M * x, 0.0))
        self.scale = 1.0 / math.sqrt(M)

    def __call__(self, xi_values) -> np.ndarray:
        xi, lead = _as_rows(xi_values)
        F = _kernels.antiderivative_phi(xi, float(self.params.L), self.grid.step,
                                        self.F.index, self.F.w_left, self.F.w_right)
        return (self.scale * (F[:, :-1] - F[:, -1:])).reshape(lead + (self.x.size,))


def s_map(xi: GridFunction, params: CascadeParams, target: Interval,
          out_grid: Grid | None = None) -> GridFunction:
    """``S^{L,M} xi`` on ``target``."""
    if out_grid is None:
        out_grid = Grid.on(target, xi.step / params.M)
    return GridFunction(out_grid, ScalingMap(xi.grid, out_grid.x, params)(xi.values))


def b_functional_values(grid: Grid, values, L: float) -> float:
    """Batch form of :func:`b_functional` for rows of ``values`` on ``grid``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 0:
        raise ValueError("b_functional needs at least one sample")
    if not grid.domain.contains(0.0, 2.0):
        raise DomainError(f"b_functional needs samples on [0, 2], have {grid.domain}")
    p = phi(L * values)
    at0 = interpolate_values(grid, p, 0.0)
    F = Antiderivative(grid, [0.0, 2.0])(p)
    return float(np.mean(at0 * (F[:, 1] - F[:, 0])))


def b_functional(samples: Sequence[GridFunction], L: float) -> float:
    """Monte-Carlo ``B_L``: mean over samples of ``int_0^2 phi(L xi(0)) phi(L xi(x)) dx``."""
    samples = list(samples)
    if not samples:
        raise ValueError("b_functional needs at least one sample")
    total = 0.0
    for xi in samples:
        total += b_functional_values(xi.grid, xi.values[None, :], L)
    return total / len(samples)


@dataclass
class NoiseSample:
    """One realized tower ``xi_N..xi_1``, ``omega_N..omega_1`` and ``S xi_1``.

    ``margins[k]`` is the radius excluded around partition points when
    estimating conditional expectations of ``int_0^1 omega_k``.
    """

    xi: dict[int, GridFunction]
    omega: dict[int, GridFunction]
    s_image: GridFunction
    seed: int
    w_id: int
    draw: int = 0
    margins: dict[int, float] = field(default_factory=dict)

    @property
    def levels(self) -> list[int]:
        return sorted(self.omega, reverse=True)


class Tower:
    """Forward map ``xi_N -> (xi_N, ..., xi_1)`` on the planned grids.

    Every consumer of the cascade (likelihood, tower materialization,
    diagnostics) goes through this object so the arithmetic is shared.
    """

    def __init__(self, params: CascadeParams, s_points=None):
        self.params = params
        self.plan = plan_domains(params)
        self.grids = level_grids(params, self.plan)
        self.maps = {k: LevelMap(self.grids[k + 1], self.grids[k], params)
                     for k in range(1, params.N)}
        if s_points is None:
            s_points = self.s_grid().x
        self.s_points = np.asarray(s_points, dtype=float)
        self.s_map = ScalingMap(self.grids[1], self.s_points, params)
        self.omega_targets = {k: self._omega_target(k) for k in range(1, params.N + 1)}

    def s_grid(self) -> Grid:
        """Grid for ``S xi_1`` at step ``1 / (M m)`` no coarser than the level-1
        step over ``M``; for integer ``M`` the origin is a node."""
        m = math.ceil(1.0 / self.grids[1].step - 1e-9)
        return Grid.on(self.plan.s_image, 1.0 / (self.params.M * m))

    @property
    def prior_size(self) -> int:
        return self.grids[self.params.N].n

    def _omega_target(self, k: int) -> Interval:
        s = self.params.s(k)
        dom = self.grids[k].domain
        lo = max(-2.0 * s, dom.lo * s)
        hi = min(1.0 + 2.0 * s, dom.hi * s)
        return Interval(lo, hi)

    def xi_levels(self, xi_top) -> dict[int, np.ndarray]:
        N = self.params.N
        out = {N: np.asarray(xi_top, dtype=float)}
        for k in range(N - 1, 0, -1):
            out[k] = self.maps[k](out[k + 1])
        return out

    def forward(self, xi_top) -> np.ndarray:
        """``S^{L,M} xi_1`` at ``s_points`` for batched ``xi_N`` values."""
        xi = np.asarray(xi_top, dtype=float)
        for k in range(self.params.N - 1, 0, -1):
            xi = self.maps[k](xi)
        return self.s_map(xi)

    def materialize(self, xi_top, seed: int = 0, w_id: int = 0, draw: int = 0,
                    s_grid: Grid | None = None) -> NoiseSample:
        """Full :class:`NoiseSample` for one ``xi_N`` vector."""
        params = self.params
        levels = self.xi_levels(xi_top)
        xi = {k: GridFunction(self.grids[k], v) for k, v in levels.items()}
        omega = {k: reconstruct_omega(xi[k], k, params, self.omega_targets[k]) for k in xi}
        if s_grid is None:
            s_grid = self.s_grid()
        s_img = s_map(xi[1], params, self.plan.s_image, out_grid=s_grid)
        return NoiseSample(xi=xi, omega=omega, s_image=s_img, seed=seed, w_id=w_id, draw=draw,
                           margins={k: params.s(k) for k in xi})
