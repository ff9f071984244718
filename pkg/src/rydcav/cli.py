"""Command-line entry point ``rydcav``.

Every subcommand accepts ``--recipe`` (a built-in parameter set),
``--config`` (a key-value file, applied on top of the recipe) and ``--out``
(output directory).  Exit status: 0 on success, 1 when a computation or
validation check fails, 2 for configuration and usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .dynamics import (
    TimeGrid,
    dominant_period,
    evolve,
    evolve_no_jump,
    noon_protocol,
    sweep_vdd,
    time_averaged_absorption,
    time_averaged_emission,
)
from .hilbert import HilbertSpace, top_fock_population
from .model import (
    build_h_interaction,
    decoherence_estimates,
    derived_couplings,
    dispersive_validity,
    resonance_vdd,
)
from .states import QuantumState, coherent_product, localized_fock, normal_mode_fock
from .tomography import (
    default_axis,
    filter_protocol,
    negativity_metrics,
    photon_distribution,
    project_atoms,
    reduce_to_mode,
    to_rotating_frame,
    wigner,
)
from .validation import FAULTS, run_checks

COMMANDS = ("derive", "evolve", "sweep", "scan-n", "filter", "wigner", "decay", "validate")


# --- helpers -------------------------------------------------------------------

def initial_state(cfg: RunConfig) -> QuantumState:
    space = HilbertSpace(cfg.n_max)
    s = cfg.state
    if s.kind == "localized_fock":
        return localized_fock(space, s.atoms, s.n1, s.n2)
    if s.kind == "normal_fock":
        return normal_mode_fock(space, s.atoms, s.n1, s.n2)
    return coherent_product(space, s.atoms, s.alpha, s.beta, tail_tol=1e-3)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _grid_axis(cfg: RunConfig) -> np.ndarray:
    return default_axis(cfg.run.grid_extent, cfg.run.grid_points)


def _write_density_outputs(out: Path, rho, grid) -> dict:
    rho.to_csv(out / "density.csv")
    p_n = photon_distribution(rho)
    lines = ["n,p"] + [f"{n},{float(v)!r}" for n, v in enumerate(p_n)]
    (out / "photon_distribution.csv").write_text("\n".join(lines) + "\n")
    grid.to_csv(out / "wigner.csv")
    metrics = negativity_metrics(grid)
    return {
        "p_n": [float(v) for v in p_n],
        "wigner_min": metrics.min_value,
        "wigner_negative_volume": metrics.negative_volume,
        "wigner_origin": grid.value_at(0.0, 0.0),
        "wigner_integral": grid.integral(),
    }


# --- subcommands -------------------------------------------------------------

def cmd_derive(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    dc = derived_couplings(p)
    branch = cfg.run.branch
    n_list = cfg.run.n_list or (2,)
    summary = {
        "couplings": dc.as_dict(),
        "branch": branch,
        "resonance_vdd": {str(n): resonance_vdd(p, n, branch) for n in n_list},
        "dispersive_problems": dispersive_validity(p, max(n_list), max(n_list)),
        "rabi_period": _rabi_period(dc.xi_prime(branch)),
    }
    est = decoherence_estimates(p, cfg.run.t_end)
    summary["decoherence"] = {"gamma_e": est.gamma_e, "error": est.error, "t": est.t}
    _write_json(out / "derived.json", summary)
    return summary


def _rabi_period(xi_prime: float) -> float | None:
    """Effective two-photon period ``pi / (sqrt2 |xi'|)``; None without coupling."""
    return math.pi / (math.sqrt(2) * abs(xi_prime)) if xi_prime else None


def _period_or_none(times, signal):
    if np.ptp(signal) < 1e-6:
        return None
    try:
        return float(dominant_period(times, signal))
    except (RuntimeError, ValueError):
        return None


def cmd_evolve(cfg: RunConfig, out: Path) -> dict:
    psi0 = initial_state(cfg)
    grid = TimeGrid(cfg.run.t_end, n_samples=cfg.run.n_samples)
    ts = evolve(build_h_interaction(cfg.params, psi0.space), psi0, grid, store_states=True)
    ts.to_csv(out / "timeseries.csv")
    k = int(np.argmax(ts["P_R"]))
    summary = {
        "peak_P_R": float(ts["P_R"][k]),
        "peak_P_R_time": float(ts.times[k]),
        "period_estimate": _period_or_none(ts.times, ts["P_R"]),
        "max_P_S": float(ts["P_S"].max()),
        "max_P_A": float(ts["P_A"].max()),
        "min_P_G": float(ts["P_G"].min()),
        "min_n_c1": float(ts["n_c1"].min()),
        "range_n_c1": float(np.ptp(ts["n_c1"])),
        "range_n_c2": float(np.ptp(ts["n_c2"])),
        "max_abs_n_a1_minus_n_a2": float(np.max(np.abs(ts["n_a1"] - ts["n_a2"]))),
        "top_fock_population": top_fock_population(psi0.space, ts.states),
    }
    dc = derived_couplings(cfg.params)
    summary["expected_period"] = _rabi_period(dc.xi_prime(cfg.run.branch))
    if cfg.run.noon:
        res = noon_protocol(cfg.params, psi0.space)
        summary["noon"] = {"time": res.time, "fidelity": res.fidelity, "period": res.period}
    return summary


def cmd_sweep(cfg: RunConfig, out: Path) -> dict:
    if not cfg.run.n_list:
        raise ConfigError("run.n_list is empty: sweep needs at least one photon number")
    window = cfgmod.window_value(cfg)
    argmax, peaks, expected = {}, {}, {}
    resolution = None
    for n in cfg.run.n_list:
        res = sweep_vdd(cfg.params, cfg.run.branch, n, (cfg.run.vdd_min, cfg.run.vdd_max),
                        n_points=cfg.run.n_points, window=window, n_samples=cfg.run.n_samples,
                        workers=cfg.run.workers)
        res.to_csv(out / f"absorption_n{n}.csv")
        argmax[str(n)] = res.argmax
        peaks[str(n)] = float(res.absorption.max())
        expected[str(n)] = resonance_vdd(cfg.params, n, cfg.run.branch) / cfg.params.J
        resolution = res.resolution
    return {"argmax": argmax, "peak_absorption": peaks, "expected_resonance": expected,
            "resolution": resolution}


def _strictly_decreasing(values) -> bool:
    return bool(len(values) >= 2 and all(b < a for a, b in zip(values, values[1:])))


def cmd_scan_n(cfg: RunConfig, out: Path) -> dict:
    if not cfg.run.n_list:
        raise ConfigError("run.n_list is empty: scan-n needs at least one photon number")
    window = cfgmod.window_value(cfg)
    rows = ["n_init,value,normalized"]
    values, normalized = {}, {}
    for n in cfg.run.n_list:
        if cfg.run.scan == "absorption":
            v = time_averaged_absorption(cfg.params, cfg.run.branch, n, window, n_samples=cfg.run.n_samples)
        else:
            v = time_averaged_emission(cfg.params, cfg.run.branch, n, window, n_samples=cfg.run.n_samples)
        values[str(n)] = v
        norm = v / n if n >= 1 else None
        if norm is not None:
            normalized[str(n)] = norm
        rows.append(f"{n},{v!r},{'' if norm is None else repr(norm)}")
    (out / "scan.csv").write_text("\n".join(rows) + "\n")
    ns = [n for n in cfg.run.n_list if n >= 1]
    return {
        "quantity": cfg.run.scan,
        "values": values,
        "normalized": normalized,
        "values_strictly_decreasing": _strictly_decreasing([values[str(n)] for n in cfg.run.n_list]),
        "normalized_strictly_decreasing": _strictly_decreasing([normalized[str(n)] for n in ns]),
    }


def cmd_filter(cfg: RunConfig, out: Path) -> dict:
    if cfg.run.measure is None:
        raise ConfigError("run.measure must name an atomic state for the filter")
    s = cfg.state
    axis = _grid_axis(cfg)
    res = filter_protocol(cfg.params, HilbertSpace(cfg.n_max), s.alpha, s.beta, atoms=s.atoms,
                          t=cfg.run.filter_time, measure=cfg.run.measure, mode=cfg.run.mode,
                          grid=(axis, axis))
    summary = _write_density_outputs(out, res.rho, res.wigner)
    summary.update({"probability": res.probability, "time": res.time, "mode": cfg.run.mode,
                    "measure": cfg.run.measure})
    return summary


def cmd_wigner(cfg: RunConfig, out: Path) -> dict:
    psi0 = initial_state(cfg)
    space = psi0.space
    t = cfg.run.t_end
    psi = psi0.data
    if t > 0:
        ts = evolve(build_h_interaction(cfg.params, space), psi0, TimeGrid(t, n_samples=2),
                    store_states=True)
        psi = to_rotating_frame(cfg.params, space, ts.states[-1], t)
    state = QuantumState(psi, space)
    summary = {"time": t, "mode": cfg.run.mode, "measure": cfg.run.measure}
    if cfg.run.measure is not None:
        prob, state = project_atoms(state, cfg.run.measure)
        summary["probability"] = prob
    axis = _grid_axis(cfg)
    rho = reduce_to_mode(state, cfg.run.mode)
    summary.update(_write_density_outputs(out, rho, wigner(rho, axis, axis)))
    return summary


def cmd_decay(cfg: RunConfig, out: Path) -> dict:
    psi0 = initial_state(cfg)
    grid = TimeGrid(cfg.run.t_end, n_samples=cfg.run.n_samples)
    ts = evolve_no_jump(cfg.params, psi0, grid)
    ts.to_csv(out / "norm.csv")
    n_mean = float(ts["n_a1"][0] + ts["n_a2"][0])
    est = decoherence_estimates(cfg.params, cfg.run.t_end)
    predicted = est.survival(n_mean)
    final = float(ts["norm"][-1])
    slope = float((ts["norm"][1] - ts["norm"][0]) / (ts.times[1] - ts.times[0]))
    return {
        "gamma_e": est.gamma_e,
        "error": est.error,
        "t": est.t,
        "n_mean": n_mean,
        "survival_predicted": predicted,
        "survival_simulated": final,
        "survival_relative_deviation": abs(final - predicted) / predicted,
        "initial_slope": slope,
        "initial_slope_predicted": -cfg.params.kappa * n_mean,
    }


HANDLERS = {
    "derive": cmd_derive,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "scan-n": cmd_scan_n,
    "filter": cmd_filter,
    "wigner": cmd_wigner,
    "decay": cmd_decay,
}


def resolve_config(recipe: str | None, config_path: str | None) -> RunConfig:
    cfg = cfgmod.recipe(recipe) if recipe else RunConfig()
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        cfg = cfgmod.loads(text, base=cfg)
    return cfg


def run_command(command: str, cfg: RunConfig, out: Path) -> dict:
    """Run one subcommand, writing its artifacts plus ``summary.json`` into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfgmod.dumps(cfg))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = HANDLERS[command](cfg, out)
    summary["warnings"] = sorted({str(w.message) for w in caught})
    summary["recipe"] = cfg.recipe
    summary["command"] = command
    _write_json(out / "summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydcav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key-value configuration file")
        sp.add_argument("--out", help="output directory (default: output.dir of the config)")
        sp.add_argument("--recipe", help=f"built-in recipe: {', '.join(cfgmod.RECIPES)}")
        if name == "validate":
            sp.add_argument("--inject-fault", choices=FAULTS, help="test hook: corrupt a Hamiltonian")
    sub.add_parser("recipes", help="list built-in recipes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "recipes":
        for name, cmd in cfgmod.RECIPE_COMMANDS.items():
            print(f"{name:8s} {cmd}")
        return 0
    if args.command == "validate":
        results = run_checks(fault=args.inject_fault)
        report = "\n".join(r.line() for r in results) + "\n"
        print(report, end="")
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "validate.txt").write_text(report)
        return 0 if all(r.passed for r in results) else 1
    try:
        cfg = resolve_config(args.recipe, args.config)
        out = Path(args.out or cfg.output_dir)
        summary = run_command(args.command, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
