"""
Posterior sampling of the top level ``xi_N`` given a Brownian observation.

The prior is ``N(0, I_d)`` on the level-``N`` grid and the likelihood is a
Gaussian kernel around ``S^{L,M} xi_1`` at a set of observation abscissae.
Sampling uses preconditioned Crank-Nicolson proposals, which leave the prior
invariant, so the Metropolis ratio involves the likelihood only.

Many chains (one per observation ``w``) are advanced in lockstep so the
forward map runs on a batch.  Every chain draws from its own random streams,
which makes results independent of how chains are batched or distributed
over workers.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cascade import CascadeParams, NoiseSample, Tower, plan_domains
from .gridfn import Grid, GridFunction, interpolate_values
from .measures import RngSeed, WienerScale, wiener_paths

log = logging.getLogger(__name__)

# Upper bound on buffered proposal normals per batch (elements).
_BLOCK_BUDGET = 4_000_000


class ChainError(RuntimeError):
    """A chain hit a non-finite log-likelihood.

    ``state`` holds the diagnostic dump: chain id, iteration, beta, the
    offending log-likelihood and the current and proposed states.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}

    def dump(self, path) -> Path:
        path = Path(path)
        arrays = {k: np.asarray(v) for k, v in self.state.items()}
        np.savez(path, **arrays)
        return path


@dataclass(frozen=True)
class LikelihoodSpec:
    """Gaussian-kernel substitute for the point-mass likelihood.

    Parameters
    ----------
    obs_grid : array_like
        Increasing abscissae inside the ``S`` image interval (``d'`` points).
    noise_sd : float
        Per-point standard deviation; ``math.inf`` gives a flat likelihood.
    """

    obs_grid: tuple
    noise_sd: float = 0.05

    def __post_init__(self):
        obs = np.asarray(self.obs_grid, dtype=float)
        object.__setattr__(self, "obs_grid", tuple(float(v) for v in obs))
        if obs.ndim != 1 or obs.size < 2:
            raise ValueError("obs_grid needs at least 2 abscissae")
        if np.any(np.diff(obs) <= 0):
            raise ValueError("obs_grid must be strictly increasing")
        if not self.noise_sd > 0:
            raise ValueError(f"noise_sd must be positive, got {self.noise_sd}")

    @classmethod
    def default(cls, params: CascadeParams, spacing: float = 0.1, noise_sd: float = 0.05):
        """One observation per ``spacing`` across ``[-1 + 1/M, (M-1) - 1/M]``."""
        dom = plan_domains(params).s_image
        return cls(tuple(Grid.on(dom, spacing).x), noise_sd)

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.obs_grid)


@dataclass(frozen=True)
class ChainConfig:
    """pCN settings.

    ``beta`` is the initial proposal weight; during burn-in it is rescaled
    every ``adapt_interval`` iterations by ``exp(2 (rate - adapt_target))``
    (capped at 1) and then frozen.
    """

    beta: float = 0.1
    n_burn: int = 5000
    n_keep: int = 200
    thin: int = 10
    adapt_target: float = 0.25
    adapt_interval: int = 50

    def __post_init__(self):
        problems = []
        if not 0 <= self.beta <= 1:
            problems.append(f"beta must lie in [0, 1] (got {self.beta})")
        if self.n_burn < 0:
            problems.append(f"n_burn must be >= 0 (got {self.n_burn})")
        if self.n_keep < 1:
            problems.append(f"n_keep must be >= 1 (got {self.n_keep})")
        if self.thin < 1:
            problems.append(f"thin must be >= 1 (got {self.thin})")
        if not 0 < self.adapt_target < 1:
            problems.append(f"adapt_target must lie in (0, 1) (got {self.adapt_target})")
        if self.adapt_interval < 1:
            problems.append(f"adapt_interval must be >= 1 (got {self.adapt_interval})")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def n_iter(self) -> int:
        return self.n_burn + self.n_keep * self.thin


@dataclass
class PosteriorDraws:
    draws: np.ndarray
    acceptance_rate: float
    log_likelihood_trace: np.ndarray
    w_id: int
    accepted_trace: np.ndarray = field(repr=False, default=None)
    beta_trace: np.ndarray = field(repr=False, default=None)
    initial: np.ndarray = field(repr=False, default=None)


def observation_values(w: GridFunction, spec: LikelihoodSpec) -> np.ndarray:
    return interpolate_values(w.grid, w.values, spec.points)


def _log_likelihood_from_image(image, obs, noise_sd) -> np.ndarray:
    r = image - obs
    return -np.sum(r * r, axis=-1) / (2.0 * noise_sd * noise_sd)


def log_likelihood(xi_N, w: GridFunction, spec: LikelihoodSpec, params: CascadeParams,
                   tower: Tower | None = None) -> float:
    """``-sum_j (S xi_1(x_j) - w(x_j))^2 / (2 noise_sd^2)`` for one ``xi_N``."""
    tower = tower or Tower(params, s_points=spec.points)
    xi_N = np.asarray(xi_N, dtype=float)
    if xi_N.shape != (tower.prior_size,):
        raise ValueError(f"xi_N must have {tower.prior_size} entries, got shape {xi_N.shape}")
    return float(_log_likelihood_from_image(tower.forward(xi_N), observation_values(w, spec),
                                            spec.noise_sd))


def pcn_log_acceptance(ll_current, ll_proposed):
    """Log Metropolis ratio for a pCN move: the prior terms cancel."""
    return ll_proposed - ll_current


def _chain_streams(rng: RngSeed):
    return (rng.derive("init").generator(), rng.derive("proposal").generator(),
            rng.derive("accept").generator())


def run_chains(obs, spec: LikelihoodSpec, cfg: ChainConfig, params: CascadeParams,
               rngs, w_ids=None, tower: Tower | None = None) -> list:
    """Advance one pCN chain per row of ``obs`` in lockstep.

    Parameters
    ----------
    obs : ndarray, shape (C, d')
        Observation values at ``spec.obs_grid`` for each chain.
    rngs : sequence of RngSeed
        One seed per chain.

    Returns
    -------
    list
        Per chain either a :class:`PosteriorDraws` or the :class:`ChainError`
        that stopped it; a failing chain never affects the others.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    C = obs.shape[0]
    rngs = list(rngs)
    if len(rngs) != C:
        raise ValueError(f"need one RngSeed per chain ({C}), got {len(rngs)}")
    w_ids = list(range(C)) if w_ids is None else list(w_ids)
    tower = tower or Tower(params, s_points=spec.points)
    d = tower.prior_size
    sd = spec.noise_sd

    streams = [_chain_streams(r) for r in rngs]
    x = np.stack([s[0].standard_normal(d) for s in streams])
    initial = x.copy()
    ll = _log_likelihood_from_image(tower.forward(x), obs, sd)

    n_iter = cfg.n_iter
    beta = np.full(C, float(cfg.beta))
    alive = np.isfinite(ll)
    errors: dict[int, ChainError] = {}
    for c in np.flatnonzero(~alive):
        errors[c] = ChainError(f"chain w_id={w_ids[c]}: non-finite log-likelihood at start",
                               {"w_id": w_ids[c], "iteration": 0, "beta": beta[c],
                                "log_lhd": ll[c], "state": x[c]})

    ll_trace = np.empty((C, n_iter))
    acc_trace = np.zeros((C, n_iter), dtype=bool)
    beta_trace = np.empty((C, n_iter))
    kept = np.empty((C, cfg.n_keep, d))
    window_acc = np.zeros(C)

    block = max(1, min(n_iter, _BLOCK_BUDGET // max(1, C * d)))
    z_block = np.empty((C, block, d))
    u_block = np.empty((C, block))
    n_kept = 0
    for t in range(n_iter):
        j = t % block
        if j == 0:
            size = min(block, n_iter - t)
            for c, (_, g_prop, g_acc) in enumerate(streams):
                z_block[c, :size] = g_prop.standard_normal((size, d))
                u_block[c, :size] = g_acc.random(size)
        a = np.sqrt(1.0 - beta * beta)[:, None]
        prop = a * x + beta[:, None] * z_block[:, j]
        ll_prop = _log_likelihood_from_image(tower.forward(prop), obs, sd)

        bad = alive & ~np.isfinite(ll_prop)
        for c in np.flatnonzero(bad):
            errors[c] = ChainError(
                f"chain w_id={w_ids[c]}: non-finite log-likelihood at iteration {t}",
                {"w_id": w_ids[c], "iteration": t, "beta": beta[c], "log_lhd": ll_prop[c],
                 "state": x[c], "proposal": prop[c]})
        alive &= ~bad

        with np.errstate(divide="ignore", invalid="ignore"):
            accept = alive & (np.log(u_block[:, j]) < pcn_log_acceptance(ll, ll_prop))
        x[accept] = prop[accept]
        ll = np.where(accept, ll_prop, ll)

        ll_trace[:, t] = ll
        acc_trace[:, t] = accept
        beta_trace[:, t] = beta

        if t < cfg.n_burn:
            window_acc += accept
            if (t + 1) % cfg.adapt_interval == 0:
                rate = window_acc / cfg.adapt_interval
                beta = np.minimum(1.0, beta * np.exp(2.0 * (rate - cfg.adapt_target)))
                window_acc[:] = 0.0
        elif (t + 1 - cfg.n_burn) % cfg.thin == 0:
            kept[:, n_kept] = x
            n_kept += 1

    out = []
    post = acc_trace[:, cfg.n_burn:]
    for c in range(C):
        if c in errors:
            out.append(errors[c])
            continue
        out.append(PosteriorDraws(
            draws=kept[c].copy(),
            acceptance_rate=float(post[c].mean()) if post.shape[1] else 1.0,
            log_likelihood_trace=ll_trace[c].copy(),
            w_id=w_ids[c],
            accepted_trace=acc_trace[c].copy(),
            beta_trace=beta_trace[c].copy(),
            initial=initial[c].copy(),
        ))
    return out


def run_pcn_chain(w: GridFunction, spec: LikelihoodSpec, cfg: ChainConfig, params: CascadeParams,
                  rng: RngSeed, w_id: int = 0, tower: Tower | None = None) -> PosteriorDraws:
    """Single-chain front end to :func:`run_chains`; raises :class:`ChainError`."""
    (res,) = run_chains(observation_values(w, spec)[None, :], spec, cfg, params, [rng],
                        [w_id], tower)
    if isinstance(res, ChainError):
        raise res
    return res


def observation_path(params: CascadeParams, rng: RngSeed, spacing: float = 0.1,
                     scale: WienerScale | None = None, refine: int = 10) -> GridFunction:
    """Scaled Brownian observation on the ``S`` image interval.

    The path is sampled on ``[0, T]`` with ``T`` the interval length, moved so
    that its time origin is the left endpoint, and shifted so it vanishes at
    abscissa 0, where ``S xi_1`` vanishes identically.
    """
    scale = scale or WienerScale()
    dom = plan_domains(params).s_image
    n = (Grid.on(dom, spacing).n - 1) * refine + 1
    path = wiener_paths(scale, Grid(0.0, dom.length, n), 1, rng)[0]
    grid = Grid(dom.lo, dom.hi, n)
    path = path - interpolate_values(grid, path, 0.0)
    return GridFunction(grid, path)


@dataclass
class MixtureRun:
    """Everything produced by one mixture run, keyed by ``w_id``."""

    samples: list
    observations: dict
    chains: dict
    failures: dict
    tower: Tower = field(repr=False, default=None)


def run_mixture(n_w: int, draws_per_w: int, spec: LikelihoodSpec, cfg: ChainConfig,
                params: CascadeParams, rng: RngSeed, workers: int = 1,
                obs_spacing: float | None = None, timings: dict | None = None) -> MixtureRun:
    """Draw ``n_w`` observations, run one chain per observation and pool the
    kept ``xi_N`` draws into materialized towers.

    ``draws_per_w`` replaces ``cfg.n_keep``.  Chains are split round-robin
    over ``workers`` threads; the split does not affect any number.
    Wall-clock seconds for the prior, chain and cascade phases are added to
    ``timings`` when given.
    """
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    if n_w < 1 or draws_per_w < 1:
        raise ValueError(f"n_w and draws_per_w must be >= 1, got {n_w}, {draws_per_w}")
    if obs_spacing is None:
        pts = spec.points
        obs_spacing = float(pts[1] - pts[0])
    cfg = replace(cfg, n_keep=draws_per_w)
    tower = Tower(params, s_points=spec.points)
    ids = list(range(n_w))
    observations = {i: observation_path(params, rng.derive("w", i), spacing=obs_spacing)
                    for i in ids}
    obs = np.stack([observation_values(observations[i], spec) for i in ids])
    chain_seeds = [rng.derive("chain", i) for i in ids]

    timings["prior"] = timings.get("prior", 0.0) + time.perf_counter() - t0
    t0 = time.perf_counter()
    workers = max(1, min(int(workers), n_w))
    groups = [ids[g::workers] for g in range(workers)]

    def work(group):
        return run_chains(obs[group], spec, cfg, params, [chain_seeds[i] for i in group],
                          group, tower)

    if workers == 1:
        results = [work(groups[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, groups))

    chains, failures = {}, {}
    for group, res in zip(groups, results):
        for i, r in zip(group, res):
            if isinstance(r, ChainError):
                failures[i] = r
                log.warning("%s", r)
            else:
                chains[i] = r

    timings["chain"] = timings.get("chain", 0.0) + time.perf_counter() - t0
    t0 = time.perf_counter()
    samples = []
    for i in sorted(chains):
        for j, xi_top in enumerate(chains[i].draws):
            samples.append(tower.materialize(xi_top, seed=rng.seed, w_id=i, draw=j))
    timings["cascade"] = timings.get("cascade", 0.0) + time.perf_counter() - t0
    return MixtureRun(samples=samples, observations=observations, chains=chains,
                      failures=failures, tower=tower)


def sample_mixture(n_w: int, draws_per_w: int, spec: LikelihoodSpec, cfg: ChainConfig,
                   params: CascadeParams, rng: RngSeed, workers: int = 1) -> list[NoiseSample]:
    """Pooled samples of the mixture over observations; raises on any chain failure."""
    run = run_mixture(n_w, draws_per_w, spec, cfg, params, rng, workers)
    if run.failures:
        w_id = min(run.failures)
        raise ChainError(f"chain for w_id={w_id} failed: {run.failures[w_id]}",
                         run.failures[w_id].state)
    return run.samples
