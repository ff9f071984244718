"""Run configuration: a flat ``section.key = value`` text format and named recipes.

Example::

    recipe = fig2a
    params.J = 10.0
    params.v_dd = 20.0
    space.n_max = 6
    state.kind = localized_fock
    state.atoms = G
    state.n1 = 1
    state.n2 = 1
    run.t_end = 4500.0

Blank lines and ``#`` comments are ignored.  A ``recipe`` line loads that
recipe as the base and the remaining lines override it.  Unknown keys,
duplicate keys and malformed values are rejected with the offending line
number.  :func:`dumps` writes every key, so ``loads(dumps(cfg)) == cfg``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .model import RYDBERG_DECAY_N70, SystemParams, rydberg_decay_in_units_of_g

STATE_KINDS = ("localized_fock", "normal_fock", "coherent")
SCAN_QUANTITIES = ("absorption", "emission")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class StateSpec:
    """Initial-state descriptor.

    ``localized_fock`` uses ``n1, n2`` as photon numbers of the localized
    modes, ``normal_fock`` as photon numbers of the normal modes, and
    ``coherent`` takes the localized-mode amplitudes ``alpha, beta``.
    """

    kind: str = "localized_fock"
    atoms: str = "G"
    n1: int = 1
    n2: int = 1
    alpha: float = 0.0
    beta: float = 0.0


@dataclass(frozen=True)
class RunSettings:
    t_end: float = 4500.0
    n_samples: int = 4501
    branch: str = "c1"
    n_list: tuple[int, ...] = (2,)
    vdd_min: float = 1.9
    vdd_max: float = 2.1
    n_points: int = 41
    window: str = "fig3"
    scan: str = "absorption"
    filter_time: float | None = None
    measure: str | None = "G"
    mode: str = "c1"
    grid_extent: float = 4.0
    grid_points: int = 81
    noon: bool = False
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    n_max: int = 6
    state: StateSpec = field(default_factory=StateSpec)
    run: RunSettings = field(default_factory=RunSettings)
    recipe: str | None = None
    output_dir: str = "rydcav-out"


# --- value codecs ------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    return v


def _parse_int(text: str) -> int:
    return int(text)


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    return tuple(int(x) for x in text.split(","))


def _optional(parser):
    def parse(text):
        return None if text.lower() == "none" else parser(text)
    return parse


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


_PARAM_KEYS = {f.name: _parse_float for f in fields(SystemParams)}
_STATE_KEYS = {
    "kind": _choice(*STATE_KINDS),
    "atoms": _choice("G", "S", "A", "R", "gg", "gr", "rg", "rr"),
    "n1": _parse_int,
    "n2": _parse_int,
    "alpha": _parse_float,
    "beta": _parse_float,
}
_RUN_KEYS = {
    "t_end": _parse_float,
    "n_samples": _parse_int,
    "branch": _choice("c1", "c2"),
    "n_list": _parse_int_list,
    "vdd_min": _parse_float,
    "vdd_max": _parse_float,
    "n_points": _parse_int,
    "window": str,
    "scan": _choice(*SCAN_QUANTITIES),
    "filter_time": _optional(_parse_float),
    "measure": _optional(_choice("G", "S", "A", "R")),
    "mode": _choice("a1", "a2", "c1", "c2"),
    "grid_extent": _parse_float,
    "grid_points": _parse_int,
    "noon": _parse_bool,
    "workers": _parse_int,
}
_TOP_KEYS = {"recipe": _optional(str), "space.n_max": _parse_int, "output.dir": str}


def _lookup(key: str):
    if key in _TOP_KEYS:
        return _TOP_KEYS[key]
    section, _, name = key.partition(".")
    table = {"params": _PARAM_KEYS, "state": _STATE_KEYS, "run": _RUN_KEYS}.get(section)
    if table is None or name not in table:
        return None
    return table[name]


def _apply(cfg: RunConfig, key: str, value) -> RunConfig:
    if key == "recipe":
        return replace(cfg, recipe=value)
    if key == "space.n_max":
        return replace(cfg, n_max=value)
    if key == "output.dir":
        return replace(cfg, output_dir=value)
    section, _, name = key.partition(".")
    if section == "params":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return replace(cfg, params=replace(cfg.params, **{name: value}))
    if section == "state":
        return replace(cfg, state=replace(cfg.state, **{name: value}))
    return replace(cfg, run=replace(cfg.run, **{name: value}))


def _items(cfg: RunConfig) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = [("recipe", cfg.recipe)]
    out += [(f"params.{f.name}", getattr(cfg.params, f.name)) for f in fields(SystemParams)]
    out.append(("space.n_max", cfg.n_max))
    out += [(f"state.{f.name}", getattr(cfg.state, f.name)) for f in fields(StateSpec)]
    out += [(f"run.{f.name}", getattr(cfg.run, f.name)) for f in fields(RunSettings)]
    out.append(("output.dir", cfg.output_dir))
    return out


def dumps(cfg: RunConfig) -> str:
    """Serialize every key; floats use round-trip ``repr``."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in _items(cfg))


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse configuration text; errors carry the 1-based line number."""
    entries = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        parser = _lookup(key)
        if parser is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        entries.append((lineno, key, parsed))

    cfg = base or RunConfig()
    for lineno, key, parsed in entries:
        if key == "recipe":
            cfg = recipe(parsed, lineno=lineno) if parsed is not None else replace(cfg, recipe=None)
    for lineno, key, parsed in entries:
        if key == "recipe":
            continue
        try:
            cfg = _apply(cfg, key, parsed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: invalid {key!r}: {exc}") from None
    check(cfg)
    return cfg


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def check(cfg: RunConfig) -> None:
    """Cross-field consistency checks."""
    r = cfg.run
    if cfg.n_max < 2:
        raise ConfigError(f"space.n_max must be >= 2, got {cfg.n_max}")
    if r.t_end < 0:
        raise ConfigError("run.t_end must be non-negative")
    if r.n_samples < 2:
        raise ConfigError("run.n_samples must be >= 2")
    if r.n_points < 2:
        raise ConfigError("run.n_points must be >= 2")
    if r.vdd_min >= r.vdd_max:
        raise ConfigError("run.vdd_min must be below run.vdd_max")
    if r.grid_points < 2 or r.grid_extent <= 0:
        raise ConfigError("run.grid_points must be >= 2 and run.grid_extent positive")
    if r.workers < 1:
        raise ConfigError("run.workers must be >= 1")
    if any(n < 0 for n in r.n_list):
        raise ConfigError("run.n_list entries must be non-negative")
    if r.window not in ("fig3", "fig4"):
        try:
            if float(r.window) <= 0:
                raise ValueError
        except ValueError:
            raise ConfigError(f"run.window must be fig3, fig4 or a positive duration, got {r.window!r}") from None
    s = cfg.state
    if s.kind != "coherent" and (s.n1 < 0 or s.n2 < 0):
        raise ConfigError("state photon numbers must be non-negative")


def window_value(cfg: RunConfig):
    """``run.window`` as passed to the averaging routines (name or duration)."""
    w = cfg.run.window
    return w if w in ("fig3", "fig4") else float(w)


# --- recipes ----------------------------------------------------------------

# Coupling assumed when expressing the n = 70 Rydberg decay in units of g.
DECAY_RECIPE_G = 2 * math.pi * 50e6


def _fig2(name: str, sign: int) -> RunConfig:
    # Two effective Rabi periods pi / (sqrt2 xi') are about 4460 / g.
    return RunConfig(
        params=SystemParams(J=10.0, v_dd=sign * 20.0),
        n_max=6,
        state=StateSpec("localized_fock", "G", 1, 1),
        run=RunSettings(t_end=4500.0, n_samples=4501, branch="c1" if sign > 0 else "c2"),
        recipe=name,
    )


def _fig3(name: str, sign: int) -> RunConfig:
    lo, hi = (1.9, 2.1) if sign > 0 else (-2.1, -1.9)
    return RunConfig(
        params=SystemParams(J=10.0, v_dd=sign * 20.0),
        n_max=6,
        state=StateSpec("normal_fock", "G", 2, 0),
        run=RunSettings(branch="c1" if sign > 0 else "c2", n_list=(1, 2, 3, 4), vdd_min=lo,
                        vdd_max=hi, n_points=41, window="fig3", n_samples=2001),
        recipe=name,
    )


def _fig4(name: str, scan: str) -> RunConfig:
    n_list = (3, 4, 5, 6) if scan == "absorption" else (0, 1, 2, 3, 4, 5)
    return RunConfig(
        params=SystemParams(J=10.0, v_dd=20.0),
        n_max=6,
        state=StateSpec("normal_fock", "G" if scan == "absorption" else "R", 0, 0),
        run=RunSettings(branch="c1", n_list=n_list, window="fig4", scan=scan, n_samples=2001),
        recipe=name,
    )


def _coherent(name: str, atoms: str, t_end: float, n_samples: int) -> RunConfig:
    a = 1 / math.sqrt(2)
    return RunConfig(
        params=SystemParams(J=0.998, v_dd=2.0),
        n_max=8,
        state=StateSpec("coherent", atoms, 0, 0, a, a),
        run=RunSettings(t_end=t_end, n_samples=n_samples, branch="c1", measure="G"),
        recipe=name,
    )


def _decay() -> RunConfig:
    gamma_r = rydberg_decay_in_units_of_g(DECAY_RECIPE_G, RYDBERG_DECAY_N70)
    # Filter duration pi / (2 sqrt2 xi) for the fig2 couplings (xi = 0.01).
    return RunConfig(
        params=SystemParams(J=10.0, v_dd=20.0, kappa=1e-3, gamma=1e-3, gamma_r=gamma_r),
        n_max=6,
        state=StateSpec("localized_fock", "G", 1, 1),
        run=RunSettings(t_end=math.pi / (2 * math.sqrt(2) * 0.01), n_samples=1001),
        recipe="decay",
    )


def _noon() -> RunConfig:
    cfg = _fig2("noon", +1)
    return replace(cfg, run=replace(cfg.run, noon=True))


RECIPES = {
    "fig2a": lambda: _fig2("fig2a", +1),
    "fig2b": lambda: _fig2("fig2b", +1),
    "fig2c": lambda: _fig2("fig2c", +1),
    "fig2d": lambda: _fig2("fig2d", -1),
    "fig2e": lambda: _fig2("fig2e", -1),
    "fig2f": lambda: _fig2("fig2f", -1),
    "fig3a": lambda: _fig3("fig3a", +1),
    "fig3b": lambda: _fig3("fig3b", -1),
    "fig4a": lambda: _fig4("fig4a", "absorption"),
    "fig4b": lambda: _fig4("fig4b", "emission"),
    # Two |G,2> <-> |R,0> oscillations (period pi / (sqrt2 xi') ~ 233 / g).
    "fig5": lambda: _coherent("fig5", "G", 470.0, 4701),
    "fig6a": lambda: _coherent("fig6a", "G", 0.0, 2),
    "fig6b": lambda: _coherent("fig6b", "R", 0.0, 2),
    "decay": _decay,
    "noon": _noon,
}

# Which subcommand a recipe is meant for (informational; any command accepts any recipe).
RECIPE_COMMANDS = {
    **{f"fig2{c}": "evolve" for c in "abcdef"},
    "fig3a": "sweep", "fig3b": "sweep",
    "fig4a": "scan-n", "fig4b": "scan-n",
    "fig5": "evolve",
    "fig6a": "filter", "fig6b": "filter",
    "decay": "decay",
    "noon": "evolve",
}


def recipe(name: str, lineno: int | None = None) -> RunConfig:
    """Built-in configuration for ``name`` (see :data:`RECIPES`)."""
    if name not in RECIPES:
        where = f"line {lineno}: " if lineno else ""
        raise ConfigError(f"{where}unknown recipe {name!r}; known: {', '.join(sorted(RECIPES))}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RECIPES[name]()
