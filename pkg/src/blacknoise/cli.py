"""
Command-line runner.

Subcommands ``simulate-black``, ``simulate-white``, ``diagnostics`` and
``plot``.  Every simulate/diagnostics run writes to ``<root>/<run_id>/``::

    manifest.json   resolved config, seed, phase timings, acceptance rates
    h1.csv          M,k,n_intervals,estimate,std_error,n_samples
    diagnostics.csv kind,abscissa,empirical,target
    chains.csv      thinned pCN traces (black runs)
    samples/        saved towers, observations and a prior draw
    plots/          SVG figures written by ``plot``

The output root is ``--out``, else ``$BLACKNOISE_RUNS``, else ``./runs``.
Passing a ``manifest.json`` as ``--config`` replays that run.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .baseline import WhiteCascadeParams, run_white_baseline
from .blackstat import (
    DiagnosticRow,
    Partition,
    empirical_covariance,
    gamma_diagnostic,
    h1_estimate,
    pushforward_diagnostic,
    read_h1_csv,
    write_diagnostics_csv,
    write_h1_csv,
)
from .cascade import CascadeParams, ScalingMap, b_functional_values
from .gridfn import Grid, GridFunction, read_grid_function, write_grid_function
from .inference import ChainConfig, LikelihoodSpec, run_mixture
from .measures import (
    CANONICAL_SIGMA,
    GAMMA_SCALE,
    RngSeed,
    gamma_covariance,
    gamma_paths,
    sample_prior,
)

log = logging.getLogger("blacknoise")

SCHEMA_VERSION = 1
ENV_OUT = "BLACKNOISE_RUNS"
MODES = ("black", "white", "diagnostics")

DEFAULTS = {
    "cascade": {"M": 4.0, "N": 3, "L": None, "r1": 1.0, "grid_step": None},
    "chain": {"beta": 0.1, "n_burn": 5000, "thin": 10, "adapt_target": 0.25,
              "adapt_interval": 50},
    "likelihood": {"obs_spacing": 0.1, "noise_sd": 0.05},
    "mixture": {"n_w": 20, "draws_per_w": 10},
    "white": {"M": [3.0, 4.0, 5.0], "N": 6, "n_samples": 500, "grid_step": None,
              "normalize_kernel": True},
    "diagnostics": {"n_gamma": 10000, "lags": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0], "L": 100.0,
                    "push_M": 20.0, "n_push": 2000, "push_x": [0.5, 1.0, 2.0],
                    "gamma_step": 0.05},
    "output": {"save_towers": 3, "trace_every": 10, "partition_floor": 0.1},
}


class ConfigError(ValueError):
    """Every problem found in a configuration, reported together."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class RunConfig:
    mode: str
    config: dict
    seed: int
    output_root: Path
    n_threads: int = 1
    cascade: CascadeParams | None = field(default=None, repr=False)
    chain: ChainConfig | None = field(default=None, repr=False)
    likelihood: LikelihoodSpec | None = field(default=None, repr=False)
    white: list = field(default_factory=list, repr=False)


# -- configuration -----------------------------------------------------------


def parse_value(text: str):
    """TOML scalar/array literal, falling back to the raw string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(config: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError([f"--set expects key=value, got {item!r}"])
    key, _, value = item.partition("=")
    section, _, name = key.strip().partition(".")
    if not name:
        raise ConfigError([f"--set key must be section.name, got {key!r}"])
    config.setdefault(section, {})[name] = parse_value(value.strip())


def load_config_file(path) -> tuple[dict, dict | None]:
    """Config dict plus the manifest when ``path`` is a run manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file {path} does not exist"])
    if path.suffix == ".json":
        manifest = json.loads(path.read_text())
        return copy.deepcopy(manifest["config"]), manifest
    with open(path, "rb") as fh:
        return tomli.load(fh), None


def merge_defaults(raw: dict) -> tuple[dict, list[str]]:
    problems = []
    out = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if section not in DEFAULTS:
            problems.append(f"unknown section [{section}]")
            continue
        if not isinstance(values, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key, value in values.items():
            if key not in DEFAULTS[section]:
                problems.append(f"unknown key {section}.{key}")
            else:
                out[section][key] = value
    return out, problems


def _try(problems, label, build):
    try:
        return build()
    except (ValueError, TypeError) as exc:
        problems.append(f"{label}: {exc}")
        return None


def build_run_config(mode: str, raw: dict, seed: int, output_root, n_threads: int = 1) -> RunConfig:
    """Resolve defaults and validate everything the mode needs at once."""
    if mode not in MODES:
        raise ConfigError([f"unknown mode {mode!r}"])
    config, problems = merge_defaults(raw)
    if not (isinstance(seed, int) and 0 <= seed < 2**64):
        problems.append(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if not (isinstance(n_threads, int) and n_threads >= 1):
        problems.append(f"threads must be a positive integer, got {n_threads!r}")
    out = config["output"]
    for key in ("save_towers", "trace_every"):
        if not (isinstance(out[key], int) and out[key] >= (0 if key == "save_towers" else 1)):
            problems.append(f"output.{key} has invalid value {out[key]!r}")
    rc = RunConfig(mode=mode, config=config, seed=seed, output_root=Path(output_root),
                   n_threads=n_threads)

    if mode == "black":
        c = config["cascade"]
        if c["L"] is None:
            rc.cascade = _try(problems, "cascade", lambda: CascadeParams.standard(
                c["M"], c["N"], r1=c["r1"], grid_step=c["grid_step"]))
        else:
            rc.cascade = _try(problems, "cascade", lambda: CascadeParams(
                c["M"], c["L"], c["N"], c["r1"], c["grid_step"]))
        mix = config["mixture"]
        rc.chain = _try(problems, "chain", lambda: ChainConfig(n_keep=mix["draws_per_w"],
                                                               **config["chain"]))
        for key in ("n_w", "draws_per_w"):
            if not (isinstance(mix[key], int) and mix[key] >= 1):
                problems.append(f"mixture.{key} must be a positive integer, got {mix[key]!r}")
        if rc.cascade is not None:
            lk = config["likelihood"]
            rc.likelihood = _try(problems, "likelihood", lambda: LikelihoodSpec.default(
                rc.cascade, spacing=lk["obs_spacing"], noise_sd=lk["noise_sd"]))
    elif mode == "white":
        w = config["white"]
        Ms = w["M"] if isinstance(w["M"], list) else [w["M"]]
        for M in Ms:
            p = _try(problems, f"white M={M}", lambda: WhiteCascadeParams(
                M, w["N"], w["grid_step"], bool(w["normalize_kernel"])))
            if p is not None:
                rc.white.append(p)
        if not (isinstance(w["n_samples"], int) and w["n_samples"] >= 30):
            problems.append(f"white.n_samples must be an integer >= 30, got {w['n_samples']!r}")
    else:
        d = config["diagnostics"]
        for key in ("n_gamma", "n_push"):
            if not (isinstance(d[key], int) and d[key] >= 2):
                problems.append(f"diagnostics.{key} must be an integer >= 2, got {d[key]!r}")
        if not (d["L"] > 0 and d["push_M"] > 1 and d["gamma_step"] > 0):
            problems.append("diagnostics needs L > 0, push_M > 1 and gamma_step > 0")
        if any(x < 0 for x in d["push_x"]) or any(g < 0 for g in d["lags"]):
            problems.append("diagnostics lags and push_x must be >= 0")
    if problems:
        raise ConfigError(problems)
    return rc


def default_output_root() -> Path:
    return Path(os.environ.get(ENV_OUT, "runs"))


# -- run bookkeeping ---------------------------------------------------------


def make_run_dir(rc: RunConfig) -> tuple[Path, str]:
    digest = hashlib.sha256(json.dumps([rc.mode, rc.config, rc.seed], sort_keys=True)
                            .encode()).hexdigest()[:8]
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    base = f"{rc.mode}-{stamp}-{digest}"
    run_id, n = base, 1
    while (rc.output_root / run_id).exists():
        n += 1
        run_id = f"{base}-{n}"
    run_dir = rc.output_root / run_id
    (run_dir / "samples").mkdir(parents=True)
    return run_dir, run_id


def write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def base_manifest(rc: RunConfig, run_id: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "mode": rc.mode,
        "config": rc.config,
        "seed": rc.seed,
        "threads": rc.n_threads,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "phases": {},
        "acceptance_rates": {},
        "failures": {},
        "outputs": [],
    }


def _tower_files(tag: str, omega: dict, extra: dict) -> dict:
    files = {f"{tag}_omega{k}.csv": f for k, f in omega.items()}
    files.update({f"{tag}_{name}.csv": f for name, f in extra.items()})
    return files


def write_chain_trace(chains: dict, path: Path, every: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["w_id", "iter", "log_lhd", "accepted", "beta"])
        for w_id in sorted(chains):
            ch = chains[w_id]
            for t in range(0, ch.log_likelihood_trace.size, every):
                w.writerow([w_id, t, repr(float(ch.log_likelihood_trace[t])),
                            int(ch.accepted_trace[t]), repr(float(ch.beta_trace[t]))])


# -- commands ----------------------------------------------------------------


def cmd_simulate_black(rc: RunConfig) -> tuple[Path, dict]:
    run_dir, run_id = make_run_dir(rc)
    manifest = base_manifest(rc, run_id)
    phases = manifest["phases"]
    params, spec, cfg = rc.cascade, rc.likelihood, rc.chain
    out = rc.config["output"]
    mix = rc.config["mixture"]
    rng = RngSeed(rc.seed)

    run = run_mixture(mix["n_w"], mix["draws_per_w"], spec, cfg, params, rng,
                      workers=rc.n_threads, obs_spacing=rc.config["likelihood"]["obs_spacing"],
                      timings=phases)
    manifest["acceptance_rates"] = {str(i): ch.acceptance_rate for i, ch in sorted(run.chains.items())}
    manifest["final_beta"] = {str(i): float(ch.beta_trace[-1]) for i, ch in sorted(run.chains.items())}
    manifest["failures"] = {str(i): str(e) for i, e in sorted(run.failures.items())}
    for i, err in run.failures.items():
        err.dump(run_dir / f"chain_failure_w{i:03d}.npz")

    t0 = time.perf_counter()
    reports, rows = [], []
    if len(run.samples) >= 30:
        for k in range(1, params.N + 1):
            part = Partition.for_level(params.s(k), out["partition_floor"])
            reports.append(h1_estimate(run.samples, k, part, rng.derive("bootstrap", k)))
    else:
        log.warning("only %d pooled samples; H1 needs 30, h1.csv left empty", len(run.samples))
    for k in range(1, params.N):
        rows += [r._replace(kind=f"gamma_cov_xi{k}") for r in
                 gamma_diagnostic([s.xi[k] for s in run.samples], rc.config["diagnostics"]["lags"])]
    dom = run.tower.plan.s_image
    push_x = [x for x in rc.config["diagnostics"]["push_x"] if dom.contains(x)]
    if len(run.samples) >= 2:
        rows += pushforward_diagnostic([s.s_image for s in run.samples], push_x)
    phases["stats"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    write_h1_csv(reports, run_dir / "h1.csv", M=params.M)
    write_diagnostics_csv(rows, run_dir / "diagnostics.csv")
    write_chain_trace(run.chains, run_dir / "chains.csv", out["trace_every"])
    samples_dir = run_dir / "samples"
    write_grid_function(GridFunction(run.tower.grids[params.N],
                                     sample_prior(run.tower.prior_size, rng.derive("prior_trace"))),
                        samples_dir / "prior_xiN.csv")
    for s in run.samples[: out["save_towers"]]:
        tag = f"tower_w{s.w_id:03d}_d{s.draw:03d}"
        for name, f in _tower_files(tag, s.omega, {"xiN": s.xi[params.N], "S": s.s_image}).items():
            write_grid_function(f, samples_dir / name)
        obs_path = samples_dir / f"w{s.w_id:03d}_obs.csv"
        if not obs_path.exists():
            write_grid_function(run.observations[s.w_id], obs_path)
    phases["write"] = time.perf_counter() - t0
    manifest["n_samples"] = len(run.samples)
    return run_dir, manifest


def cmd_simulate_white(rc: RunConfig) -> tuple[Path, dict]:
    run_dir, run_id = make_run_dir(rc)
    manifest = base_manifest(rc, run_id)
    manifest["baseline"] = True
    out = rc.config["output"]
    n = rc.config["white"]["n_samples"]
    reports, Ms, rows = [], [], []
    t_sim = 0.0
    for params in rc.white:
        t0 = time.perf_counter()
        rng = RngSeed(rc.seed).derive("white", repr(float(params.M)))
        res = run_white_baseline(params, n, rng, keep_towers=out["save_towers"],
                                 partition_floor=out["partition_floor"])
        t_sim += time.perf_counter() - t0
        for k in range(1, params.N + 1):
            reports.append(res.reports[k])
            Ms.append(params.M)
            rows.append(DiagnosticRow(f"white_var_f_M{params.M:g}", float(k),
                                      float(np.var(res.f_values[:, k - 1], ddof=1)), 1.0))
        for i, tower in enumerate(res.towers):
            for name, f in _tower_files(f"tower_M{params.M:g}_s{i:03d}", tower, {}).items():
                write_grid_function(f, run_dir / "samples" / name)
    manifest["phases"]["cascade"] = t_sim
    manifest["levels"] = [{"M": M, "k": r.k, "baseline": True} for M, r in zip(Ms, reports)]
    write_h1_csv(reports, run_dir / "h1.csv", M=Ms)
    write_diagnostics_csv(rows, run_dir / "diagnostics.csv")
    manifest["n_samples"] = n
    return run_dir, manifest


def cmd_diagnostics(rc: RunConfig) -> tuple[Path, dict]:
    """Gaussian-side checks: triangular covariance, ``B_L`` and the ``S``
    pushforward variance for ``xi ~ gamma``."""
    run_dir, run_id = make_run_dir(rc)
    manifest = base_manifest(rc, run_id)
    d = rc.config["diagnostics"]
    rng = RngSeed(rc.seed)
    t0 = time.perf_counter()
    lags = d["lags"]
    grid = Grid.from_step(0.0, max(3.0, max(lags)), d["gamma_step"])
    vals = gamma_paths(grid, d["n_gamma"], rng.derive("gamma"))
    rows = [DiagnosticRow("gamma_cov", r.abscissa, r.empirical, r.target)
            for r in gamma_diagnostic_values(grid, vals, lags)]
    rows.append(DiagnosticRow("b_functional", float(d["L"]),
                              b_functional_values(grid, vals, d["L"]), 2.0 * GAMMA_SCALE))
    del vals
    M = d["push_M"]
    x = np.array(sorted(set([0.0] + list(d["push_x"]))))
    pgrid = Grid.from_step(0.0, M * float(x.max()), d["gamma_step"])
    params = CascadeParams.standard(M, 1)
    smap = ScalingMap(pgrid, x, params)
    img = smap(gamma_paths(pgrid, d["n_push"], rng.derive("push")))
    for j, xv in enumerate(x):
        if xv == 0.0:
            continue
        rows.append(DiagnosticRow("pushforward_var", float(xv), float(np.var(img[:, j] - img[:, 0], ddof=1)),
                                  CANONICAL_SIGMA**2 * float(xv)))
    manifest["phases"]["stats"] = time.perf_counter() - t0
    write_h1_csv([], run_dir / "h1.csv")
    write_diagnostics_csv(rows, run_dir / "diagnostics.csv")
    return run_dir, manifest


def gamma_diagnostic_values(grid: Grid, vals, lags) -> list[DiagnosticRow]:
    return [DiagnosticRow("gamma_cov", float(g), empirical_covariance(vals, grid, g),
                          float(gamma_covariance(g))) for g in lags]


EXPECTED_OUTPUTS = {
    "black": ["manifest.json", "h1.csv", "diagnostics.csv", "chains.csv"],
    "white": ["manifest.json", "h1.csv", "diagnostics.csv"],
    "diagnostics": ["manifest.json", "h1.csv", "diagnostics.csv"],
}


def run(rc: RunConfig) -> tuple[Path, dict, int]:
    """Execute a run; returns ``(run_dir, manifest, exit_code)``."""
    t0 = time.perf_counter()
    command = {"black": cmd_simulate_black, "white": cmd_simulate_white,
               "diagnostics": cmd_diagnostics}[rc.mode]
    run_dir, manifest = command(rc)
    manifest["phases"]["total"] = time.perf_counter() - t0
    manifest["outputs"] = sorted(str(p.relative_to(run_dir)) for p in run_dir.rglob("*")
                                 if p.is_file())
    write_json_atomic(run_dir / "manifest.json", manifest)
    missing = [f for f in EXPECTED_OUTPUTS[rc.mode] if not (run_dir / f).is_file()]
    if rc.mode == "black" and rc.config["output"]["save_towers"] > 0 and not any(
            (run_dir / "samples").glob("tower_*")):
        missing.append("samples/tower_*")
    if missing:
        log.error("missing outputs: %s", ", ".join(missing))
    code = 1 if (missing or manifest["failures"]) else 0
    return run_dir, manifest, code


# -- plotting ----------------------------------------------------------------


class PlotInputError(FileNotFoundError):
    pass


def _towers(samples_dir: Path) -> dict[str, dict[int, GridFunction]]:
    towers: dict = {}
    for path in sorted(samples_dir.glob("tower_*_omega*.csv")):
        tag, _, k = path.stem.rpartition("_omega")
        towers.setdefault(tag, {})[int(k)] = read_grid_function(path)
    return towers


def collect_plot_inputs(run_dir: Path) -> dict:
    """Load everything the figures need, failing before any SVG is written."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    h1_path = run_dir / "h1.csv"
    for p in (manifest_path, h1_path):
        if not p.is_file():
            raise PlotInputError(f"missing {p}")
    manifest = json.loads(manifest_path.read_text())
    samples_dir = run_dir / "samples"
    if not samples_dir.is_dir() or not any(samples_dir.iterdir()):
        raise PlotInputError(f"no sample files in {samples_dir}")
    data = {"mode": manifest["mode"], "h1": read_h1_csv(h1_path), "towers": _towers(samples_dir)}
    if not data["h1"]:
        raise PlotInputError(f"{h1_path} has no rows")
    if not data["towers"]:
        raise PlotInputError(f"no tower_*_omega*.csv files in {samples_dir}")
    if data["mode"] == "black":
        prior = samples_dir / "prior_xiN.csv"
        if not prior.is_file():
            raise PlotInputError(f"missing {prior}")
        data["prior"] = read_grid_function(prior)
        data["S"] = [read_grid_function(p) for p in sorted(samples_dir.glob("tower_*_S.csv"))]
        data["w"] = {p.stem: read_grid_function(p) for p in sorted(samples_dir.glob("w*_obs.csv"))}
        if not data["S"] or not data["w"]:
            raise PlotInputError(f"missing S images or observation paths in {samples_dir}")
    return data


def zoom_limits(rows) -> tuple[float, float]:
    """Ordinate range ``[0, 0.1 max H1]`` of the zoomed H1 figure."""
    top = max(r["estimate"] for r in rows)
    return 0.0, (0.1 * top if top > 0 else 1.0)


def cmd_plot(run_dir) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = collect_plot_inputs(run_dir)
    plt.rcParams["svg.fonttype"] = "none"
    plot_dir = Path(run_dir) / "plots"
    plot_dir.mkdir(exist_ok=True)
    written = []

    def save(fig, name):
        path = plot_dir / name
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    tag, tower = next(iter(data["towers"].items()))
    levels = sorted(tower, reverse=True)
    fig, axes = plt.subplots(len(levels), 1, figsize=(7, 1.6 * len(levels)), sharex=True)
    for ax, k in zip(np.atleast_1d(axes), levels):
        f = tower[k]
        ax.plot(f.x, f.values, lw=0.6)
        ax.set_ylabel(f"omega_{k}")
    np.atleast_1d(axes)[-1].set_xlabel("x")
    fig.suptitle(tag)
    save(fig, "towers.svg")

    by_M: dict = {}
    for row in data["h1"]:
        by_M.setdefault(row["M"], []).append(row)
    for name, zoom in (("h1.svg", False), ("h1_zoom.svg", True)):
        fig, ax = plt.subplots(figsize=(6, 4))
        for M, rows in by_M.items():
            rows = sorted(rows, key=lambda r: r["k"])
            ax.errorbar([r["k"] for r in rows], [r["estimate"] for r in rows],
                        yerr=[r["std_error"] for r in rows], marker="o", capsize=3,
                        label=f"M={M:g}" if M is not None else None)
        ax.set_xlabel("k")
        ax.set_ylabel("H1(f_k)")
        if zoom:
            ax.set_ylim(*zoom_limits(data["h1"]))
        if any(M is not None for M in by_M):
            ax.legend()
        save(fig, name)

    if data["mode"] == "black":
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(data["prior"].x, data["prior"].values, lw=0.4)
        ax.set_xlabel("y")
        ax.set_ylabel("xi_N")
        save(fig, "prior_xiN.svg")

        fig, ax = plt.subplots(figsize=(7, 4))
        for f in data["S"]:
            ax.plot(f.x, f.values, lw=0.6, alpha=0.7)
        save(fig, "s_ensemble.svg")

        fig, ax = plt.subplots(figsize=(7, 4))
        for name, f in data["w"].items():
            ax.plot(f.x, f.values, lw=0.6, label=name)
        ax.legend()
        save(fig, "w_path.svg")
    return written


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blacknoise", description=__doc__.split("\n\n")[1])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate-black", "simulate-white", "diagnostics"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config, or a manifest.json to replay")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", help="output root directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. cascade.M=6")
    p = sub.add_parser("plot")
    p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "plot":
        try:
            for path in cmd_plot(args.run_dir):
                print(path)
        except (PlotInputError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    mode = {"simulate-black": "black", "simulate-white": "white",
            "diagnostics": "diagnostics"}[args.command]
    try:
        raw, manifest = ({}, None) if args.config is None else load_config_file(args.config)
        if manifest is not None and manifest.get("mode") != mode:
            raise ConfigError([f"manifest is for mode {manifest.get('mode')!r}, not {mode!r}"])
        for item in args.set:
            apply_override(raw, item)
        seed = args.seed if args.seed is not None else (manifest["seed"] if manifest else 0)
        root = Path(args.out) if args.out else default_output_root()
        rc = build_run_config(mode, raw, seed, root, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run_dir, _, code = run(rc)
    print(run_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
