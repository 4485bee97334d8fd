"""Command line harness: configuration, experiment orchestration, output files.

Every run writes its artifacts as CSV plus a JSON manifest holding the full
parameter echo (seed, per-level sample counts, versions), which is sufficient
to reproduce every number bit for bit.  Exit codes: 0 success, 1 configuration
error, 2 numerical failure.
"""

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analysis, mc, mlmc, outputs
from .errors import ConfigError, MlmcFvError, NumericalError
from .flux import buckley_leverett, linear_flux
from .grid import build_aligned_grid, project_initial_datum
from .random_data import SampleKey, coefficient_at, draw_sample, experiment1, experiment2
from .solver import SolverConfig, solve

OUTPUT_ENV = "MLMCFV_OUTPUT_DIR"
MODES = ("mlmc", "mc", "single_sample", "reference", "table")
DEFAULT_REFERENCE_NODES = {"exp1": 200, "exp2": 60}


@dataclass
class RunConfig:
    experiment: str = "exp1"
    mode: str = "mlmc"
    levels: tuple = ()
    dx_exp: int = 9
    dx0_exp: int = 4
    dx_star_exp: int = 11
    samples: int = 64
    replicas: int = 30
    nodes: int = 0  # 0 -> experiment default
    xi: tuple = ()
    master_seed: int = 0
    lam: float = 0.2
    t_end: float = 0.2
    workers: int = 1
    alignment: str = "snap"
    output_dir: str = ""
    cache_dir: str = ""
    flux_kind: str = "buckley_leverett"
    k_min: float = 0.7
    k_max: float = 2.3
    bracket_lo: float = 0.35
    bracket_hi: float = 0.9

    def validate(self):
        if self.experiment not in ("exp1", "exp2"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.alignment not in ("snap", "per_subdomain"):
            raise ConfigError(f"unknown alignment {self.alignment!r}")
        if self.flux_kind not in ("buckley_leverett", "linear"):
            raise ConfigError(f"unknown flux kind {self.flux_kind!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.mode in ("mlmc", "table") and not self.levels:
            raise ConfigError("mode requires --levels")
        if any(l < 0 for l in self.levels):
            raise ConfigError("levels must be nonnegative")
        return self


def parse_levels(text):
    """Accept '3', '1..6', or '1,2,5'."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        if "," in text:
            return tuple(int(v) for v in text.split(","))
        return (int(text),)
    except ValueError:
        raise ConfigError(f"cannot parse levels {text!r}") from None


def parse_xi(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse xi {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="mlmcfv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment mode")
    run.add_argument("--config", help="INI config file; CLI flags override it")
    run.add_argument("--experiment", choices=("exp1", "exp2"))
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--levels", help="finest level(s): '3', '1..6', or '1,2,5'")
    run.add_argument("--dx-exp", dest="dx_exp", type=int, help="dx = 2^-e (single_sample/mc)")
    run.add_argument("--dx0-exp", dest="dx0_exp", type=int, help="coarsest dx0 = 2^-e")
    run.add_argument("--dx-star-exp", dest="dx_star_exp", type=int, help="reference dx* = 2^-e")
    run.add_argument("--samples", type=int, help="Monte Carlo sample count (mc mode)")
    run.add_argument("--replicas", type=int, help="independent runs per table row")
    run.add_argument("--nodes", type=int, help="quadrature nodes per stochastic dimension")
    run.add_argument("--xi", help="stochastic point override, e.g. '-0.3' or '0.3,-0.3'")
    run.add_argument("--seed", dest="master_seed", type=int)
    run.add_argument("--lam", type=float, help="time step over mesh width (default 0.2)")
    run.add_argument("--t-end", dest="t_end", type=float)
    run.add_argument("--workers", type=int)
    run.add_argument("--alignment", choices=("snap", "per_subdomain"))
    run.add_argument("--output", "-o", dest="output_dir")
    run.add_argument("--cache-dir", dest="cache_dir")
    return p


_CONFIG_SECTIONS = {
    "run": (
        "experiment", "mode", "levels", "samples", "replicas", "seed",
        "workers", "output_dir", "cache_dir",
    ),
    "solver": ("lam", "t_end", "dx_exp", "dx0_exp", "alignment"),
    "flux": ("kind", "k_min", "k_max", "bracket_lo", "bracket_hi"),
    "reference": ("nodes", "dx_star_exp"),
}
_KEY_ALIASES = {"seed": "master_seed", "kind": "flux_kind"}


def load_config_file(path):
    parser = configparser.ConfigParser()
    if not Path(path).exists():
        raise ConfigError(f"config file {path} not found")
    parser.read(path)
    overrides = {}
    for section in parser.sections():
        if section not in _CONFIG_SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _CONFIG_SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            overrides[_KEY_ALIASES.get(key, key)] = raw
    return overrides


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, raw):
    if isinstance(raw, str):
        if name == "levels":
            return parse_levels(raw)
        if name == "xi":
            return parse_xi(raw)
        kind = _FIELD_TYPES[name]
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    return raw


def resolve_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            cfg = replace(cfg, **{key: _coerce(key, raw)})
    for key in vars(args):
        if key in ("command", "config"):
            continue
        value = getattr(args, key)
        if value is None:
            continue
        cfg = replace(cfg, **{key: _coerce(key, value)})
    if not cfg.levels:
        cfg = replace(cfg, levels=(1, 2, 3, 4, 5, 6) if cfg.mode == "table" else (7,))
    if not cfg.output_dir:
        cfg = replace(cfg, output_dir=os.environ.get(OUTPUT_ENV, "."))
    return cfg.validate()


def _model(config):
    return experiment1() if config.experiment == "exp1" else experiment2()


def _solver_config(config):
    if config.flux_kind == "buckley_leverett":
        flux = buckley_leverett(
            k_range=(config.k_min, config.k_max),
            bracket=(config.bracket_lo, config.bracket_hi),
        )
    else:
        flux = linear_flux()
    return SolverConfig(flux=flux, lam=config.lam, t_end=config.t_end)


def _echo(config):
    return {f.name: getattr(config, f.name) for f in fields(config)}


def _run_single_sample(config, model, cfg, outdir):
    if config.xi:
        if len(config.xi) != model.dim:
            raise ConfigError(
                f"--xi needs {model.dim} value(s) for {config.experiment}"
            )
        theta = np.asarray(config.xi, dtype=float)
        coeff = coefficient_at(model, theta)
    else:
        _, coeff, _ = draw_sample(model, SampleKey(config.master_seed))
        theta = None
    dx = 2.0 ** -config.dx_exp
    grid, aligned = build_aligned_grid(model.domain, coeff, dx, config.alignment)
    sol = solve(project_initial_datum(model.u0, grid), aligned, cfg)
    tag = "_".join(format(v, "g") for v in (config.xi or coeff.positions))
    csv = outputs.write_grid_function_csv(
        outdir / f"{config.experiment}_single_sample_{tag}.csv", sol.final
    )
    man = outputs.write_manifest(
        outdir / f"{config.experiment}_single_sample_manifest.json",
        outputs.manifest_payload(
            _echo(config),
            coefficient={"positions": coeff.positions.tolist(),
                         "values": coeff.values.tolist()},
            steps=sol.steps,
            cell_updates=sol.cell_updates,
        ),
    )
    return [csv, man]


def _run_mc(config, model, cfg, outdir):
    est = mc.mc_estimate(
        model, 2.0 ** -config.dx_exp, config.samples, cfg,
        master_seed=config.master_seed, workers=config.workers,
        alignment=config.alignment,
    )
    csv = outputs.write_estimator_csv(
        outdir / f"{config.experiment}_mc_mean_std.csv", est
    )
    man = outputs.write_manifest(
        outdir / f"{config.experiment}_mc_manifest.json",
        outputs.manifest_payload(
            _echo(config),
            samples_per_level=list(est.samples_per_level),
            cell_updates=est.cell_updates,
            runtime_s=est.runtime_s,
        ),
    )
    return [csv, man]


def _run_mlmc(config, model, cfg, outdir):
    written = []
    for level in config.levels:
        plan = mlmc.make_level_plan(level, 2.0 ** -config.dx0_exp)
        est = mlmc.mlmc_estimate(
            model, plan, cfg, master_seed=config.master_seed,
            workers=config.workers, alignment=config.alignment,
        )
        base = f"{config.experiment}_mlmc_L{level}"
        written.append(
            outputs.write_estimator_csv(outdir / f"{base}_mean_std.csv", est)
        )
        written.append(
            outputs.write_manifest(
                outdir / f"{base}_manifest.json",
                outputs.manifest_payload(
                    _echo(config),
                    samples_per_level=list(plan.samples),
                    eps=plan.eps,
                    cell_updates=est.cell_updates,
                    runtime_s=est.runtime_s,
                ),
            )
        )
    return written


def _reference(config, model, cfg):
    nodes = config.nodes or DEFAULT_REFERENCE_NODES[config.experiment]
    return nodes, analysis.reference_solution(
        model, nodes, 2.0 ** -config.dx_star_exp, cfg,
        workers=config.workers, cache_dir=config.cache_dir or None,
    )


def _run_reference(config, model, cfg, outdir):
    nodes, ref = _reference(config, model, cfg)
    csv = outputs.write_grid_function_csv(
        outdir / f"{config.experiment}_reference.csv", ref.mean
    )
    man = outputs.write_manifest(
        outdir / f"{config.experiment}_reference_manifest.json",
        outputs.manifest_payload(_echo(config), reference=ref.meta, nodes=nodes),
    )
    return [csv, man]


def _run_table(config, model, cfg, outdir):
    nodes, ref = _reference(config, model, cfg)
    rows, per_row = analysis.convergence_table(
        model, 2.0 ** -config.dx0_exp, config.levels, cfg, ref,
        replicas=config.replicas, master_seed=config.master_seed,
        workers=config.workers, alignment=config.alignment,
    )
    csv = outputs.write_table_csv(outdir / f"{config.experiment}_table.csv", rows)
    fits = {}
    if len(rows) >= 2:
        fits["ooc_dx"] = analysis.ooc_fit(
            [r.dx for r in rows], [r.rms_percent for r in rows]
        )
        fits["ooc_cell_updates"] = analysis.ooc_fit(
            [r.cell_updates for r in rows], [r.rms_percent for r in rows]
        )
    man = outputs.write_manifest(
        outdir / f"{config.experiment}_table_manifest.json",
        outputs.manifest_payload(
            _echo(config),
            reference=ref.meta,
            nodes=nodes,
            rows=[vars(r) if not hasattr(r, "__dataclass_fields__") else
                  {k: getattr(r, k) for k in r.__dataclass_fields__} for r in rows],
            per_replica_rms=per_row,
            fits=fits,
            samples_per_level={
                str(level): mlmc.optimal_sample_numbers(level, 2.0 ** -config.dx0_exp)
                for level in config.levels
            },
        ),
    )
    for key, val in fits.items():
        print(f"{key} = {val:.4f}")
    return [csv, man]


_MODE_RUNNERS = {
    "single_sample": _run_single_sample,
    "mc": _run_mc,
    "mlmc": _run_mlmc,
    "reference": _run_reference,
    "table": _run_table,
}


def run(config):
    model = _model(config)
    cfg = _solver_config(config)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = _MODE_RUNNERS[config.mode](config, model, cfg, outdir)
    for path in written:
        print(f"wrote {path}")
    return written


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        run(resolve_config(args))
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except MlmcFvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
