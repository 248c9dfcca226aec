"""
Seeded samplers for the Gaussian laws used by the simulator.

Randomness is addressed by :class:`RngSeed` ``(seed, stream_id)`` pairs.  Each
pair maps to its own Philox (counter-based) stream, so parallel chains and
samples can be generated in any order and still replay bit for bit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .gridfn import Grid, GridFunction

#: Variance scale of the triangular-covariance measure, ``(pi - 2) / pi``.
GAMMA_SCALE = (math.pi - 2.0) / math.pi
#: Limiting Wiener scale ``2 sqrt((pi - 2) / pi)``.
CANONICAL_SIGMA = 2.0 * math.sqrt(GAMMA_SCALE)

_U64 = 2**64


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, *path) -> RngSeed:
        """Child stream labelled by ``path`` (e.g. ``("chain", 3)``).

        Stream ids are a hash of the parent id and the label, so children of
        distinct labels are distinct streams with overwhelming probability.
        """
        h = hashlib.blake2b(repr((int(self.stream_id),) + tuple(path)).encode(), digest_size=8)
        return RngSeed(self.seed, int.from_bytes(h.digest(), "little"))


@dataclass(frozen=True)
class WienerScale:
    sigma: float = CANONICAL_SIGMA

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


def gamma_covariance(lag):
    """Target covariance ``2 (pi-2)/pi * max(0, 1 - |lag|/2)``."""
    lag = np.abs(np.asarray(lag, dtype=float))
    return 2.0 * GAMMA_SCALE * np.maximum(0.0, 1.0 - 0.5 * lag)


def gamma_paths(grid: Grid, n: int, rng: RngSeed) -> np.ndarray:
    """``n`` samples of the triangular-covariance Gaussian field on ``grid``.

    Uses ``xi(x) = sqrt((pi-2)/pi) * (W(x+1) - W(x-1))`` with one Brownian path
    ``W`` sampled exactly at the union of the shifted abscissae, so the
    covariance is exact for any grid.  Returns shape ``(n, grid.n)``.
    """
    x = grid.x
    knots, inv = np.unique(np.concatenate([x - 1.0, x + 1.0]), return_inverse=True)
    gaps = np.diff(knots)
    gen = rng.generator()
    incr = gen.standard_normal((n, gaps.size)) * np.sqrt(gaps)
    W = np.zeros((n, knots.size))
    np.cumsum(incr, axis=1, out=W[:, 1:])
    left, right = inv[: x.size], inv[x.size:]
    return math.sqrt(GAMMA_SCALE) * (W[:, right] - W[:, left])


def sample_gamma(grid: Grid, rng: RngSeed) -> GridFunction:
    return GridFunction(grid, gamma_paths(grid, 1, rng)[0])


def wiener_paths(scale: WienerScale, grid: Grid, n: int, rng: RngSeed) -> np.ndarray:
    """``n`` scaled Brownian paths started at 0 on a grid with ``lo == 0``."""
    if grid.lo != 0.0:
        raise ValueError(f"Wiener grid must start at 0, got {grid.lo}")
    gen = rng.generator()
    incr = gen.standard_normal((n, grid.n - 1)) * (scale.sigma * math.sqrt(grid.step))
    out = np.zeros((n, grid.n))
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def sample_scaled_wiener(scale: WienerScale, grid: Grid, rng: RngSeed) -> GridFunction:
    return GridFunction(grid, wiener_paths(scale, grid, 1, rng)[0])


def sample_prior(d: int, rng: RngSeed) -> np.ndarray:
    """``d`` i.i.d. standard normals: the prior on the discretized top level."""
    if int(d) != d or d < 1:
        raise ValueError(f"prior dimension must be a positive integer, got {d}")
    return rng.generator().standard_normal(int(d))


def white_paths(grid: Grid, n: int, rng: RngSeed) -> np.ndarray:
    """Grid white noise: i.i.d. node values of variance ``1 / step``."""
    gen = rng.generator()
    return gen.standard_normal((n, grid.n)) / math.sqrt(grid.step)


def sample_white_grid(grid: Grid, rng: RngSeed) -> GridFunction:
    return GridFunction(grid, white_paths(grid, 1, rng)[0])
