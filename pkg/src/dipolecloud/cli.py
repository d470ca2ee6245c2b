"""
Scripted experiments: configuration, realization averaging and output files.

Usage::

    dipolecloud decay --config decay.toml --out results/
    dipolecloud sweep --config sweep.toml --threads 4

The configuration is a TOML file whose keys carry their units, e.g.::

    master_seed = 1
    realizations = 4

    [cloud]
    n_atoms = 1000
    sigma_um = [1.0, 1.0, 8.0]      # or a list of triples (decay only)
    lambda_um = 0.78
    gamma_per_s = 2.0e7
    coupling = "full"               # full | isotropic | farfield | none

    [pulse]                          # raman only
    shape = "erf"
    omega0_per_s = 1.0e7
    t0_us = 1.0
    sigma_t_us = 0.4
    delta_c_mhz = 0.0               # Delta_c / 2pi

    [grid]
    t_max_gamma = 6.0
    n_times = 400

    [sweep]
    experiment = "angular"
    key = "cloud.sigma_z_um"
    values = [4, 8, 12]
    fixed_volume_um3 = 8.0          # keeps sigma_x sigma_y sigma_z fixed

Every output CSV starts with ``#`` comment lines holding the package
version, the SHA-256 of the resolved configuration and all realization
seeds. Results are reduced in realization order, so ``--threads`` never
changes an output byte.
"""

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import fit_triexponential, geometry_factor
from .dynamics import Pulse, evolve_three_level, evolve_two_level, storage_state, timed_dicke_state
from .ensemble import (GAMMA_PER_S, LAMBDA_E_UM, SIGMA_PLUS, CloudSpec, fixed_volume_sigma,
                       realization_seed, sample_cloud)
from .errors import ConfigError, NumericalError
from .kernel import MODES, build_interaction_matrix
from .radiation import (GaussianMode, analytic_P_noninteracting, collection_probability,
                        divergence, far_field, fit_lobe_width, forward_cone_fraction,
                        lobe_profile, make_angular_grid)
from .spectrum import eigenspectrum, empty_histogram, excitation_spectrum, spectrum_stats

log = logging.getLogger(__name__)

EXPERIMENTS = ("decay", "spectrum", "angular", "raman", "sweep")

GRID_DEFAULTS = {
    "decay": {"t_max_gamma": 6.0, "n_times": 400},
    "spectrum": {"delta_min_gamma": -6.0, "delta_max_gamma": 6.0, "n_delta": 481,
                 "hist_bins": 120},
    "angular": {"t_max_gamma": 12.0, "n_times": 400, "n_theta": 128, "n_phi": 256,
                "cap_theta_rad": 0.6, "n_cap": 64},
    "raman": {"t_max_us": 2.0, "n_times": 401, "far_field": False, "n_theta": 128,
              "n_phi": 256, "cap_theta_rad": 0.6, "n_cap": 64},
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


@dataclass
class SimulationConfig:
    experiment: str
    clouds: list
    coupling: str = "full"
    pulse: Pulse = None
    realizations: int = 1
    master_seed: int = 0
    grid: dict = field(default_factory=dict)
    sweep: dict = None
    out: str = "results"
    threads: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def cloud(self):
        return self.clouds[0]

    def digest(self):
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# configuration


def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", key="--config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", key="--config") from None


def _get(table, key, prefix, default=None, cast=None, required=False):
    if key not in table:
        if required:
            raise ConfigError("missing required key", key=f"{prefix}{key}")
        return default
    value = table[key]
    if cast is None:
        return value
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r}", key=f"{prefix}{key}") from None


def _parse_dipole(value):
    if value in (None, "sigma+"):
        return SIGMA_PLUS
    if value == "sigma-":
        return (SIGMA_PLUS[0], -SIGMA_PLUS[1], 0.0)
    if value == "pi":
        return (0.0, 0.0, 1.0)
    vec = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in value]
    norm = math.sqrt(sum(abs(c) ** 2 for c in vec))
    return tuple(c / norm for c in vec)


def _parse_clouds(table):
    known = {"n_atoms", "sigma_um", "lambda_um", "gamma_per_s", "dipole", "min_separation_um",
             "k_c_dir", "coupling"}
    for key in table:
        if key not in known:
            raise ConfigError("unknown key", key=f"cloud.{key}")
    n = _get(table, "n_atoms", "cloud.", cast=int, required=True)
    sigma = _get(table, "sigma_um", "cloud.", required=True)
    if not isinstance(sigma, list) or not sigma:
        raise ConfigError("expected a 3-list or a list of 3-lists", key="cloud.sigma_um")
    sigmas = sigma if isinstance(sigma[0], list) else [sigma]
    try:
        dipole = _parse_dipole(table.get("dipole"))
    except (TypeError, ValueError):
        raise ConfigError("invalid dipole", key="cloud.dipole") from None
    clouds = []
    for s in sigmas:
        try:
            clouds.append(CloudSpec(
                n_atoms=n,
                sigma=tuple(float(x) for x in s),
                lambda_e=_get(table, "lambda_um", "cloud.", LAMBDA_E_UM, float),
                gamma=_get(table, "gamma_per_s", "cloud.", GAMMA_PER_S, float),
                dipole=dipole,
                k_c_dir=tuple(_get(table, "k_c_dir", "cloud.", (0.0, 0.0, 1.0))),
                min_separation=_get(table, "min_separation_um", "cloud.", None, float),
            ))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key="cloud") from None
    coupling = table.get("coupling", "full")
    if coupling not in MODES:
        raise ConfigError(f"must be one of {MODES}", key="cloud.coupling")
    return clouds, coupling


def _parse_pulse(table):
    known = {"shape", "omega0_per_s", "t0_us", "sigma_t_us", "delta_c_mhz"}
    for key in table:
        if key not in known:
            raise ConfigError("unknown key", key=f"pulse.{key}")
    try:
        return Pulse.from_mhz(
            _get(table, "delta_c_mhz", "pulse.", 0.0, float),
            shape=table.get("shape", "erf"),
            omega0=_get(table, "omega0_per_s", "pulse.", required=True, cast=float),
            t0=_get(table, "t0_us", "pulse.", 1.0, float),
            sigma_t=_get(table, "sigma_t_us", "pulse.", 0.4, float),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="pulse") from None


def parse_config(raw, experiment=None, seed=None, realizations=None, out=None, threads=None):
    """Validate a raw config mapping (with CLI overrides) into a SimulationConfig."""
    raw = copy.deepcopy(raw)
    experiment = experiment or raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"must be one of {EXPERIMENTS}", key="experiment")
    raw["experiment"] = experiment
    if seed is not None:
        raw["master_seed"] = seed
    if realizations is not None:
        raw["realizations"] = realizations

    master_seed = _get(raw, "master_seed", "", 0, int)
    if not 0 <= master_seed < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", key="master_seed")
    n_real = _get(raw, "realizations", "", 1, int)
    if n_real < 1:
        raise ConfigError("must be at least 1", key="realizations")
    if "cloud" not in raw:
        raise ConfigError("missing required table", key="cloud")
    clouds, coupling = _parse_clouds(raw["cloud"])

    sweep = None
    base = experiment
    if experiment == "sweep":
        sweep = raw.get("sweep")
        if not isinstance(sweep, dict):
            raise ConfigError("missing required table", key="sweep")
        base = sweep.get("experiment")
        if base not in EXPERIMENTS or base == "sweep":
            raise ConfigError("must name a base experiment", key="sweep.experiment")
        keys = [k for k in ("key", "keys") if k in sweep]
        if keys == ["keys"] or isinstance(sweep.get("key"), list):
            raise ConfigError("exactly one swept key is allowed", key="sweep.key")
        if "key" not in sweep:
            raise ConfigError("missing required key", key="sweep.key")
        values = sweep.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("expected a non-empty list", key="sweep.values")
    if base != "decay" and len(clouds) > 1:
        raise ConfigError("several geometries are only supported by decay", key="cloud.sigma_um")

    pulse = None
    if "pulse" in raw:
        pulse = _parse_pulse(raw["pulse"])
    if base == "raman" and pulse is None:
        raise ConfigError("raman requires a [pulse] table", key="pulse")

    grid = dict(GRID_DEFAULTS.get(base, {}))
    for key, value in raw.get("grid", {}).items():
        if key not in grid:
            raise ConfigError("unknown key", key=f"grid.{key}")
        grid[key] = value

    out = out or raw.get("output", {}).get("path", "results")
    threads = threads or 1
    if threads < 1:
        raise ConfigError("must be at least 1", key="--threads")
    return SimulationConfig(experiment, clouds, coupling, pulse, n_real, master_seed, grid,
                            sweep, out, threads, raw)


# --------------------------------------------------------------------------
# per-realization workers (module level so they pickle)


def _decay_worker(task):
    spec, coupling, seed, times = task
    cloud = sample_cloud(spec, seed)
    A = build_interaction_matrix(cloud, "tilde", coupling)
    traj = evolve_two_level(A, timed_dicke_state(cloud.n), times)
    return traj.p_td


def _spectrum_worker(task):
    spec, coupling, seed, delta, bins = task
    cloud = sample_cloud(spec, seed)
    eig = eigenspectrum(build_interaction_matrix(cloud, "tilde", coupling), seed=seed)
    hist = empty_histogram(bins=(bins, bins)).add(eig)
    return excitation_spectrum(eig, delta), hist


def _angular_grid(grid):
    cap = grid.get("cap_theta_rad")
    if cap:
        return make_angular_grid(grid["n_theta"], grid["n_phi"], math.cos(cap), grid["n_cap"])
    return make_angular_grid(grid["n_theta"], grid["n_phi"])


def _radiation_summary(traj, cloud, grid):
    rmap = far_field(traj, cloud, _angular_grid(grid))
    spec = cloud.spec
    dtheta = divergence(spec.k_e, spec.sigma[0])
    theta, lobe = lobe_profile(rmap)
    return {
        "P": collection_probability(rmap, GaussianMode.matched(spec)),
        "forward_fraction": forward_cone_fraction(rmap, dtheta),
        "emitted_energy": rmap.emitted_energy(),
    }, theta, lobe, rmap


def _angular_worker(task):
    spec, coupling, seed, times, grid = task
    cloud = sample_cloud(spec, seed)
    A = build_interaction_matrix(cloud, "tilde", coupling)
    traj = evolve_two_level(A, timed_dicke_state(cloud.n), times)
    summary, theta, lobe, rmap = _radiation_summary(traj, cloud, grid)
    try:
        summary["lobe_width"] = fit_lobe_width(rmap)
    except RuntimeError:
        summary["lobe_width"] = float("nan")
    summary["remaining_population"] = float(traj.p_e[-1])
    return summary, theta, lobe


def _raman_worker(task):
    spec, coupling, seed, times, pulse, grid = task
    cloud = sample_cloud(spec, seed)
    A = build_interaction_matrix(cloud, "tilde", coupling)
    traj = evolve_three_level(A, pulse, storage_state(cloud.n), times, spec.gamma)
    pops = np.stack([traj.p_s, traj.p_e, traj.p_g], axis=1)
    summary = {}
    if grid.get("far_field"):
        summary = _radiation_summary(traj, cloud, grid)[0]
    return pops, summary


def _map(func, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks))


def _replay_seed(func, tasks, threads):
    """Run tasks; on a numerical failure, name the realization seed."""
    try:
        return _map(func, tasks, threads)
    except NumericalError:
        raise
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericalError(str(exc)) from exc


# --------------------------------------------------------------------------
# output


def _header(cfg, seeds, extra=()):
    lines = [f"dipolecloud {__version__}", f"experiment: {cfg.experiment}",
             f"config_sha256: {cfg.digest()}", f"master_seed: {cfg.master_seed}",
             f"realizations: {cfg.realizations}",
             "realization_seeds: " + " ".join(str(s) for s in seeds)]
    lines.extend(extra)
    return "".join(f"# {line}\n" for line in lines)


def _fmt(x):
    return format(float(x), ".12e")


def write_csv(path, header, columns, data):
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_grid_csv(path, header, row_centers, col_centers, values):
    """Dense 2-D grid: first row holds column centres, first column row centres."""
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        fh.write("delta\\gamma," + ",".join(_fmt(c) for c in col_centers) + "\n")
        for r, row in zip(row_centers, values):
            fh.write(_fmt(r) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary(path, cfg, seeds, summary):
    record = {"dipolecloud": __version__, "experiment": cfg.experiment,
              "config_sha256": cfg.digest(), "master_seed": cfg.master_seed,
              "realizations": cfg.realizations, "realization_seeds": seeds,
              "summary": summary}
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# experiments


def _seeds(cfg, offset=0):
    return [realization_seed(cfg.master_seed, offset + r) for r in range(cfg.realizations)]


def _run_decay(cfg, write=True):
    g = cfg.grid
    times = np.linspace(0.0, float(g["t_max_gamma"]), int(g["n_times"]))
    all_seeds, curves, fits = [], [], []
    for gi, spec in enumerate(cfg.clouds):
        seeds = _seeds(cfg, gi * cfg.realizations)
        all_seeds += seeds
        tasks = [(spec, cfg.coupling, s, times) for s in seeds]
        mean = np.mean(_replay_seed(_decay_worker, tasks, cfg.threads), axis=0)
        curves.append(mean)
        fit = fit_triexponential(times, mean)
        fits.append({
            "sigma_um": list(spec.sigma), "p1": fit.p1, "p2": fit.p2, "p3": fit.p3,
            "gamma_S": fit.gamma_S, "gamma_s": fit.gamma_s, "residual": fit.residual,
            "geometry_factor": geometry_factor(fit.gamma_S, spec.n_atoms, spec.k_e,
                                               spec.sigma[0]),
        })
    summary = {"fits": fits, "gamma_S": fits[0]["gamma_S"]}
    if write:
        cols = ["t_gamma"] + [f"p_td_{i}" for i in range(len(curves))]
        extra = [f"geometry_{i}: sigma_um={list(s.sigma)}" for i, s in enumerate(cfg.clouds)]
        write_csv(os.path.join(cfg.out, "decay.csv"), _header(cfg, all_seeds, extra), cols,
                  np.column_stack([times] + curves))
        write_summary(os.path.join(cfg.out, "summary.json"), cfg, all_seeds, summary)
    return summary


def _run_spectrum(cfg, write=True):
    g = cfg.grid
    delta = np.linspace(float(g["delta_min_gamma"]), float(g["delta_max_gamma"]),
                        int(g["n_delta"]))
    bins = int(g["hist_bins"])
    seeds = _seeds(cfg)
    tasks = [(cfg.cloud, cfg.coupling, s, delta, bins) for s in seeds]
    results = _replay_seed(_spectrum_worker, tasks, cfg.threads)
    S = np.mean([r[0] for r in results], axis=0)
    hist = empty_histogram(bins=(bins, bins))
    for _, h in results:
        hist.counts += h.counts
        hist.fc_counts += h.fc_counts
        hist.overflow += h.overflow
        hist.overflow_fc += h.overflow_fc
        hist.n_spectra += 1
    stats = spectrum_stats(delta, S)
    summary = {"peak_delta": stats.peak_delta, "fwhm": stats.fwhm,
               "ambiguous_peak": stats.ambiguous, "histogram_overflow": hist.overflow}
    if write:
        header = _header(cfg, seeds)
        write_csv(os.path.join(cfg.out, "spectrum.csv"), header, ["delta_gamma", "S"],
                  np.column_stack([delta, S]))
        dc = 0.5 * (hist.delta_edges[1:] + hist.delta_edges[:-1])
        gc = 0.5 * (hist.gamma_edges[1:] + hist.gamma_edges[:-1])
        write_grid_csv(os.path.join(cfg.out, "histogram.csv"), header, dc, gc, hist.density)
        write_grid_csv(os.path.join(cfg.out, "histogram_fc.csv"), header, dc, gc,
                       hist.fc_density)
        write_summary(os.path.join(cfg.out, "summary.json"), cfg, seeds, summary)
    return summary


def _mean_records(records):
    keys = records[0].keys()
    return {k: float(np.mean([r[k] for r in records])) for k in keys}


def _run_angular(cfg, write=True):
    g = cfg.grid
    times = np.linspace(0.0, float(g["t_max_gamma"]), int(g["n_times"]))
    seeds = _seeds(cfg)
    tasks = [(cfg.cloud, cfg.coupling, s, times, g) for s in seeds]
    results = _replay_seed(_angular_worker, tasks, cfg.threads)
    spec = cfg.cloud
    summary = _mean_records([r[0] for r in results])
    summary["divergence"] = divergence(spec.k_e, spec.sigma[0])
    summary["P_analytic_noninteracting"] = analytic_P_noninteracting(
        spec.n_atoms, spec.k_e, spec.sigma[0])
    if write:
        theta = results[0][1]
        lobe = np.mean([r[2] for r in results], axis=0)
        write_csv(os.path.join(cfg.out, "angular_lobe.csv"), _header(cfg, seeds),
                  ["theta_rad", "U"], np.column_stack([theta, lobe]))
        write_summary(os.path.join(cfg.out, "summary.json"), cfg, seeds, summary)
    return summary


def _run_raman(cfg, write=True):
    g = cfg.grid
    spec = cfg.cloud
    t_us = np.linspace(0.0, float(g["t_max_us"]), int(g["n_times"]))
    times = t_us * 1e-6 * spec.gamma
    seeds = _seeds(cfg)
    tasks = [(spec, cfg.coupling, s, times, cfg.pulse, g) for s in seeds]
    results = _replay_seed(_raman_worker, tasks, cfg.threads)
    pops = np.mean([r[0] for r in results], axis=0)
    summary = {"p_S_end": pops[-1, 0], "p_E_end": pops[-1, 1], "p_G_end": pops[-1, 2],
               "t_end_us": float(t_us[-1]),
               "delta_c_mhz": cfg.pulse.delta_c / (2 * math.pi * 1e6)}
    if g.get("far_field"):
        summary.update(_mean_records([r[1] for r in results]))
    if write:
        write_csv(os.path.join(cfg.out, "populations.csv"), _header(cfg, seeds),
                  ["t_us", "p_S", "p_E", "p_G"], np.column_stack([t_us, pops]))
        write_summary(os.path.join(cfg.out, "summary.json"), cfg, seeds, summary)
    return summary


RUNNERS = {"decay": _run_decay, "spectrum": _run_spectrum, "angular": _run_angular,
           "raman": _run_raman}


def _apply_sweep_value(raw, key, value, fixed_volume):
    raw = copy.deepcopy(raw)
    section, _, name = key.partition(".")
    if not name:
        raise ConfigError("expected section.name", key="sweep.key")
    if section == "cloud" and name == "sigma_z_um":
        sz = float(value)
        sigma = list(raw["cloud"]["sigma_um"])
        if fixed_volume:
            sigma = list(fixed_volume_sigma(sz, float(fixed_volume)))
        else:
            sigma[2] = sz
        raw["cloud"]["sigma_um"] = sigma
    elif section in ("cloud", "pulse", "grid"):
        raw.setdefault(section, {})[name] = value
    else:
        raise ConfigError(f"cannot sweep section {section!r}", key="sweep.key")
    return raw


def sweep(cfg):
    """Run the base experiment at each swept value; one summary row per point."""
    sw = cfg.sweep
    key, values = sw["key"], sw["values"]
    base = sw["experiment"]
    fixed_volume = sw.get("fixed_volume_um3")
    rows, records = [], []
    for value in values:
        raw = _apply_sweep_value(cfg.raw, key, value, fixed_volume)
        raw.pop("sweep", None)
        sub = parse_config(raw, experiment=base, threads=cfg.threads, out=cfg.out)
        summary = RUNNERS[base](sub, write=False)
        flat = {k: v for k, v in summary.items() if isinstance(v, (int, float, np.floating))}
        records.append({"value": value, **summary})
        rows.append((float(value), flat))
    metric_names = sorted({k for _, flat in rows for k in flat})
    data = [[v] + [flat.get(k, float("nan")) for k in metric_names] for v, flat in rows]
    seeds = _seeds(cfg)
    extra = [f"swept_key: {key}", f"base_experiment: {base}"]
    write_csv(os.path.join(cfg.out, "sweep.csv"), _header(cfg, seeds, extra),
              [key] + metric_names, data)
    summary = {"key": key, "points": records}
    write_summary(os.path.join(cfg.out, "summary.json"), cfg, seeds, summary)
    return summary


def run(cfg):
    """Execute ``cfg`` and write its files under ``cfg.out``; returns the summary."""
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.experiment == "sweep":
        return sweep(cfg)
    return RUNNERS[cfg.experiment](cfg)


# --------------------------------------------------------------------------
# command line


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dipolecloud",
        description="Collective emission of dense random atom clouds (coupled dipoles).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--realizations", type=int, help="number of random clouds")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_config(args.config)
        cfg = parse_config(raw, args.experiment, args.seed, args.realizations, args.out,
                           args.threads)
        summary = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(_clean(summary), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
