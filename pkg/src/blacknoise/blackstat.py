"""
The H1 blackness statistic and distributional diagnostics.

For ``f_k = int_0^1 omega_k`` and a partition ``t_1 < ... < t_n`` of ``(0, 1)``
(with ``t_0 = -inf`` and ``t_{n+1} = +inf``) the conditional expectation of
``f_k`` given the noise on ``(t_{l-1}, t_l)`` is estimated by the integral of
``omega_k`` over the cell shrunk by the remote-past radius ``s_k`` on each
finite side.  ``H1`` sums the across-sample variances of those estimates; it
is about 1 for white noise and tends to 0 for black noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .cascade import NoiseSample
from .gridfn import Antiderivative, DomainError, GridFunction, integrate, interpolate_values
from .measures import CANONICAL_SIGMA, RngSeed, gamma_covariance

MIN_SAMPLES = 30
N_BOOTSTRAP = 200
# Fixed stream for bootstrap resampling so reports are reproducible.
_BOOTSTRAP_SEED = RngSeed(0x5EED, 1)


@dataclass(frozen=True)
class Partition:
    """Interior points ``0 < t_1 < ... < t_n < 1``."""

    points: tuple

    def __post_init__(self):
        pts = tuple(float(t) for t in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("a partition needs at least one point")
        if any(not 0.0 < t < 1.0 for t in pts):
            raise ValueError(f"partition points must lie in (0, 1), got {pts}")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"partition points must be strictly increasing, got {pts}")

    @classmethod
    def uniform(cls, cells: int) -> Partition:
        """``cells - 1`` equally spaced points, i.e. ``cells`` equal pieces of [0, 1]."""
        if cells < 2:
            raise ValueError(f"need at least 2 cells, got {cells}")
        return cls(tuple(j / cells for j in range(1, cells)))

    @classmethod
    def for_level(cls, s_k: float, floor: float = 0.1) -> Partition:
        """``n = floor(1 / mesh)`` points ``l / (n + 1)`` (at least one), where
        ``mesh = max(4 s_k, floor)``."""
        mesh = max(4.0 * s_k, floor)
        n = max(1, int(math.floor(1.0 / mesh + 1e-12)))
        return cls.uniform(n + 1)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def n_intervals(self) -> int:
        return len(self.points) + 1

    @property
    def min_gap(self) -> float:
        pts = self.points
        return min((b - a for a, b in zip(pts, pts[1:])), default=math.inf)

    def cells(self) -> list[tuple[float, float]]:
        ext = (-math.inf,) + self.points + (math.inf,)
        return list(zip(ext[:-1], ext[1:]))

    def check_level(self, s_k: float) -> None:
        if not self.min_gap > 2.0 * s_k:
            raise ValueError(f"partition gap {self.min_gap:g} must exceed 2 s_k = {2 * s_k:g}")


@dataclass(frozen=True)
class H1Report:
    k: int
    partition: Partition
    estimate: float
    std_error: float
    n_samples: int
    contributions: tuple


def shrunk_cell(t_prev: float, t: float, margin: float) -> tuple[float, float]:
    """Integration limits ``[a, b]`` for one cell; ``a >= b`` means empty."""
    a = 0.0 if t_prev == -math.inf else max(0.0, t_prev + margin)
    b = 1.0 if t == math.inf else min(1.0, t - margin)
    return a, b


def _omega(sample: NoiseSample, k: int) -> GridFunction:
    try:
        return sample.omega[k]
    except KeyError:
        raise ValueError(f"sample has no level {k} (levels {sorted(sample.omega)})") from None


def f_k(sample: NoiseSample, k: int) -> float:
    """``int_0^1 omega_k``."""
    return integrate(_omega(sample, k), 0.0, 1.0)


def cond_exp_estimate(sample: NoiseSample, k: int, t_prev: float, t: float,
                      margin: float | None = None) -> float:
    """Estimate of ``E[f_k | noise on (t_prev, t)]``: ``int_a^b omega_k``."""
    if not t_prev < t:
        raise ValueError(f"need t_prev < t, got {t_prev}, {t}")
    if margin is None:
        margin = sample.margins[k]
    a, b = shrunk_cell(t_prev, t, margin)
    if a >= b:
        return 0.0
    return integrate(_omega(sample, k), a, b)


def cell_integrals(samples: Sequence[NoiseSample], k: int, partition: Partition,
                   margin: float | None = None) -> np.ndarray:
    """Matrix ``g[i, l]`` of cell estimates, shape ``(n_samples, n + 1)``.

    Samples sharing an ``omega_k`` grid are handled in one batched pass.
    """
    samples = list(samples)
    if margin is None and samples:
        margin = samples[0].margins[k]
    limits = [shrunk_cell(a, b, margin) for a, b in partition.cells()]
    nonempty = [j for j, (a, b) in enumerate(limits) if a < b]
    ends = np.array([limits[j] for j in nonempty]).reshape(-1, 2)
    out = np.zeros((len(samples), partition.n_intervals))
    by_grid: dict = {}
    for i, s in enumerate(samples):
        by_grid.setdefault(_omega(s, k).grid, []).append(i)
    for grid, idx in by_grid.items():
        if not grid.domain.contains(0.0, 1.0):
            raise DomainError(f"omega_{k} must cover [0, 1], have {grid.domain}")
        vals = np.stack([samples[i].omega[k].values for i in idx])
        F = Antiderivative(grid, ends.ravel())(vals).reshape(len(idx), -1, 2)
        out[np.ix_(idx, nonempty)] = F[..., 1] - F[..., 0]
    return out


def _bootstrap_se(g: np.ndarray, rng: RngSeed, n_boot: int) -> float:
    gen = rng.generator()
    n = g.shape[0]
    est = np.empty(n_boot)
    for b in range(n_boot):
        rows = g[gen.integers(0, n, n)]
        est[b] = np.var(rows, axis=0, ddof=1).sum()
    return float(np.std(est, ddof=1))


def h1_from_cells(g, k: int, partition: Partition, rng: RngSeed | None = None,
                  n_boot: int = N_BOOTSTRAP) -> H1Report:
    """H1 report from a precomputed cell matrix ``g`` (rows are samples)."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 2 and g.shape[0]:
        # shifting by one row leaves variances unchanged and makes identical rows exactly 0
        g = g - g[0]
    if g.ndim != 2 or g.shape[1] != partition.n_intervals:
        raise ValueError(f"cell matrix must have {partition.n_intervals} columns, got {g.shape}")
    if g.shape[0] < MIN_SAMPLES:
        raise ValueError(f"H1 needs at least {MIN_SAMPLES} samples, got {g.shape[0]}")
    contrib = np.var(g, axis=0, ddof=1)
    se = _bootstrap_se(g, rng or _BOOTSTRAP_SEED.derive("h1", k), n_boot)
    return H1Report(k=k, partition=partition, estimate=float(contrib.sum()), std_error=se,
                    n_samples=g.shape[0], contributions=tuple(float(c) for c in contrib))


def h1_estimate(samples: Sequence[NoiseSample], k: int, partition: Partition,
                rng: RngSeed | None = None) -> H1Report:
    """``sum_l Var(g_l)`` over pooled samples, with a bootstrap standard error."""
    samples = list(samples)
    if len(samples) < MIN_SAMPLES:
        raise ValueError(f"H1 needs at least {MIN_SAMPLES} samples, got {len(samples)}")
    partition.check_level(samples[0].margins[k])
    return h1_from_cells(cell_integrals(samples, k, partition), k, partition, rng)


# -- diagnostics -------------------------------------------------------------


class DiagnosticRow(NamedTuple):
    kind: str
    abscissa: float
    empirical: float
    target: float


def empirical_covariance(values, grid, lag: float) -> float:
    """Covariance of ``v(x)`` and ``v(x + lag)`` pooled over samples and over
    every node ``x`` for which ``x + lag`` stays in the domain."""
    x = grid.x
    x = x[x + lag <= grid.hi + 1e-9 * max(1.0, abs(grid.hi))]
    if x.size == 0:
        raise DomainError(f"lag {lag:g} exceeds grid domain {grid.domain}")
    a = interpolate_values(grid, values, x)
    b = interpolate_values(grid, values, np.minimum(x + lag, grid.hi))
    return float(np.mean(a * b) - np.mean(a) * np.mean(b))


def gamma_diagnostic(samples: Sequence[GridFunction], lags) -> list[DiagnosticRow]:
    """Empirical covariance of ``xi_k`` samples vs the triangular kernel."""
    samples = list(samples)
    grid = samples[0].grid
    if any(s.grid != grid for s in samples):
        raise ValueError("gamma_diagnostic needs samples on a common grid")
    vals = np.stack([s.values for s in samples])
    return [DiagnosticRow("gamma_cov", float(lag), empirical_covariance(vals, grid, lag),
                          float(gamma_covariance(lag))) for lag in lags]


def pushforward_diagnostic(samples: Sequence[GridFunction], x_list,
                           sigma: float = CANONICAL_SIGMA) -> list[DiagnosticRow]:
    """``Var(S(x) - S(0))`` across samples vs ``sigma^2 x``."""
    samples = list(samples)
    rows = []
    for x in x_list:
        if x < 0:
            raise ValueError(f"abscissae must be >= 0, got {x}")
        incr = np.array([float(interpolate_values(s.grid, s.values, x)
                               - interpolate_values(s.grid, s.values, 0.0)) for s in samples])
        rows.append(DiagnosticRow("pushforward_var", float(x), float(np.var(incr, ddof=1)),
                                  sigma * sigma * float(x)))
    return rows


def write_h1_csv(reports: Sequence[H1Report], path, M=None) -> None:
    """Write ``M,k,n_intervals,estimate,std_error,n_samples`` rows.

    ``M`` is one value for every report or a sequence parallel to ``reports``.
    """
    reports = list(reports)
    Ms = list(M) if isinstance(M, (list, tuple)) else [M] * len(reports)
    if len(Ms) != len(reports):
        raise ValueError("need one M per report")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "k", "n_intervals", "estimate", "std_error", "n_samples"])
        for m, r in zip(Ms, reports):
            w.writerow(["" if m is None else repr(float(m)), r.k, r.partition.n_intervals,
                        repr(r.estimate), repr(r.std_error), r.n_samples])


def read_h1_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"M": float(row["M"]) if row["M"] else None, "k": int(row["k"]),
                 "n_intervals": int(row["n_intervals"]), "estimate": float(row["estimate"]),
                 "std_error": float(row["std_error"]), "n_samples": int(row["n_samples"])}
                for row in csv.DictReader(fh)]


def write_diagnostics_csv(rows: Sequence[DiagnosticRow], path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "abscissa", "empirical", "target"])
        for r in rows:
            w.writerow([r.kind, repr(r.abscissa), repr(r.empirical), repr(r.target)])
