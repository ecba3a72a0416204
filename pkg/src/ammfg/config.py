"""Run configuration: flat key=value sections, validation, and hashing.

A run is fully determined by (config, seed); the sha256 hash of the
canonicalized key=value listing is embedded in every output artifact so
results can be traced back to the exact configuration that produced them.
Validation is collect-all: every violation is reported in one ConfigError
rather than one at a time.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass

from .errors import ConfigError
from .grids import ControlBounds, Grids, InitialLaw
from .fixed_point import FixedPointConfig
from .nplayer import PRICE_MODES, SimConfig
from .pool import PHI_FLOOR, PoolParams
from .rewards import CostSpec, RewardKind, Variant, check_cost_growth, quadratic_costs


@dataclass
class RunConfig:
    # [pool]
    x0: float = 100.0
    k0: float = 1e6
    phi: float = 0.997
    sigma0: float = 0.0
    sigma: float = 0.5
    # [costs]
    running_cost: float = 0.5
    terminal_cost: float = 0.5
    c1: float = 1.0
    # [grids]
    horizon: float = 1.0
    n_t: int = 100
    x_min: float = -3.0
    x_max: float = 3.0
    n_x: int = 201
    n_a: int = 41
    n_particles: int = 10_000
    n_quad: int = 5
    seed: int = 20240814
    # [controls]
    a_min: float = 0.0
    a_max: float = 0.5
    # [reward]
    kind: str = "f"
    young_eps: float = 1.0
    denom_exp: int = 2
    # [fixed_point]
    damping: float = 0.5
    tol: float = 1e-3
    max_iters: int = 200
    # [law0]
    law_mean: float = 0.0
    law_std: float = 0.0
    # [sim]
    n_traders: int = 50
    n_reps: int = 200
    price_mode: str = "aggregate"
    use_mid_price: bool = True
    p_min: float = 1e-6
    # [run]
    out_dir: str = "out"
    workers: int = 1


_SECTIONS: dict[str, tuple[str, ...]] = {
    "pool": ("x0", "k0", "phi", "sigma0", "sigma"),
    "costs": ("running_cost", "terminal_cost", "c1"),
    "grids": ("horizon", "n_t", "x_min", "x_max", "n_x", "n_a", "n_particles",
              "n_quad", "seed"),
    "controls": ("a_min", "a_max"),
    "reward": ("kind", "young_eps", "denom_exp"),
    "fixed_point": ("damping", "tol", "max_iters"),
    "law0": ("law_mean", "law_std"),
    "sim": ("n_traders", "n_reps", "price_mode", "use_mid_price", "p_min"),
    "run": ("out_dir", "workers"),
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    ftype = _FIELD_TYPES[name]
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def _field_section(name: str) -> str:
    for sec, keys in _SECTIONS.items():
        if name in keys:
            return sec
    raise KeyError(name)


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then the INI file, then key=value overrides (section.key=v)."""
    cfg = RunConfig()
    problems: list[str] = []
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError([f"cannot read config file {path!r}"])
        for sec in parser.sections():
            if sec not in _SECTIONS:
                problems.append(f"unknown section [{sec}]")
                continue
            for key, raw in parser.items(sec):
                if key not in _SECTIONS[sec]:
                    problems.append(f"unknown key {sec}.{key}")
                    continue
                try:
                    setattr(cfg, key, _coerce(key, raw))
                except ValueError as exc:
                    problems.append(f"{sec}.{key}: {exc}")
    for item in overrides or []:
        if "=" not in item:
            problems.append(f"override {item!r} is not key=value")
            continue
        dotted, raw = item.split("=", 1)
        key = dotted.split(".")[-1].strip()
        if key not in _FIELD_TYPES:
            problems.append(f"unknown override key {dotted!r}")
            continue
        try:
            setattr(cfg, key, _coerce(key, raw))
        except ValueError as exc:
            problems.append(f"override {dotted}: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Collect every violation; raise ConfigError listing them all."""
    bad: list[str] = []
    if cfg.x0 <= 0:
        bad.append(f"pool.x0 must be > 0, got {cfg.x0}")
    if cfg.k0 <= 0:
        bad.append(f"pool.k0 must be > 0, got {cfg.k0}")
    if not PHI_FLOOR <= cfg.phi <= 1.0:
        bad.append(f"pool.phi must lie in [{PHI_FLOOR}, 1], got {cfg.phi}")
    if cfg.sigma0 < 0:
        bad.append(f"pool.sigma0 must be >= 0, got {cfg.sigma0}")
    if cfg.sigma < 0:
        bad.append(f"pool.sigma must be >= 0, got {cfg.sigma}")
    if cfg.running_cost < 0 or cfg.terminal_cost < 0:
        bad.append("costs.running_cost and costs.terminal_cost must be >= 0")
    if cfg.c1 <= 0:
        bad.append(f"costs.c1 must be > 0, got {cfg.c1}")
    if cfg.horizon <= 0:
        bad.append(f"grids.horizon must be > 0, got {cfg.horizon}")
    if cfg.n_t < 1:
        bad.append(f"grids.n_t must be >= 1, got {cfg.n_t}")
    if not cfg.x_min < cfg.x_max:
        bad.append(f"grids.x_min must be < x_max, got [{cfg.x_min}, {cfg.x_max}]")
    if cfg.n_x < 2:
        bad.append(f"grids.n_x must be >= 2, got {cfg.n_x}")
    if cfg.n_a < 1:
        bad.append(f"grids.n_a must be >= 1, got {cfg.n_a}")
    if cfg.n_particles < 1:
        bad.append(f"grids.n_particles must be >= 1, got {cfg.n_particles}")
    if cfg.n_quad < 5:
        bad.append(f"grids.n_quad must be >= 5, got {cfg.n_quad}")
    if cfg.a_min > cfg.a_max:
        bad.append(f"controls.a_min must be <= a_max, got [{cfg.a_min}, {cfg.a_max}]")
    elif cfg.a_min > 0 or cfg.a_max < 0:
        bad.append(f"control interval must contain 0, got [{cfg.a_min}, {cfg.a_max}]")
    m = max(abs(cfg.a_min), abs(cfg.a_max))
    if cfg.horizon > 0 and cfg.x0 > 0 and m >= cfg.x0 / cfg.horizon:
        bad.append(f"controls: magnitude {m} must be < x0/horizon = {cfg.x0 / cfg.horizon}"
                   " (the pool could deplete)")
    if cfg.kind not in [v.value for v in Variant]:
        bad.append(f"reward.kind must be one of f, f1, f2, got {cfg.kind!r}")
    if cfg.young_eps <= 0:
        bad.append(f"reward.young_eps must be > 0, got {cfg.young_eps}")
    if cfg.denom_exp not in (1, 2):
        bad.append(f"reward.denom_exp must be 1 or 2, got {cfg.denom_exp}")
    if not 0.0 < cfg.damping <= 1.0:
        bad.append(f"fixed_point.damping must be in (0, 1], got {cfg.damping}")
    if cfg.tol <= 0:
        bad.append(f"fixed_point.tol must be > 0, got {cfg.tol}")
    if cfg.max_iters < 1:
        bad.append(f"fixed_point.max_iters must be >= 1, got {cfg.max_iters}")
    if cfg.law_std < 0:
        bad.append(f"law0.law_std must be >= 0, got {cfg.law_std}")
    if cfg.n_traders < 1:
        bad.append(f"sim.n_traders must be >= 1, got {cfg.n_traders}")
    if cfg.n_reps < 1:
        bad.append(f"sim.n_reps must be >= 1, got {cfg.n_reps}")
    if cfg.price_mode not in PRICE_MODES:
        bad.append(f"sim.price_mode must be one of {PRICE_MODES}, got {cfg.price_mode!r}")
    if cfg.p_min <= 0:
        bad.append(f"sim.p_min must be > 0, got {cfg.p_min}")
    if cfg.workers < 0:
        bad.append(f"run.workers must be >= 0, got {cfg.workers}")
    if not bad:
        # growth sanity of the cost pair on the configured state range
        try:
            check_cost_growth(cost_spec(cfg), grids(cfg))
        except ValueError as exc:
            bad.append(str(exc))
    if bad:
        raise ConfigError(bad)


def canonical_text(cfg: RunConfig) -> str:
    # [run] holds plumbing (workers, out_dir) that must not change results,
    # so it stays out of the hash: same config+seed, same bytes, any workers.
    buf = io.StringIO()
    for sec in sorted(_SECTIONS):
        if sec == "run":
            continue
        for key in sorted(_SECTIONS[sec]):
            buf.write(f"{sec}.{key}={getattr(cfg, key)!r}\n")
    return buf.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()[:16]


# --- object builders --------------------------------------------------------

def pool_params(cfg: RunConfig) -> PoolParams:
    return PoolParams(x0=cfg.x0, k0=cfg.k0, phi=cfg.phi, sigma0=cfg.sigma0,
                      sigma=cfg.sigma)


def cost_spec(cfg: RunConfig) -> CostSpec:
    return quadratic_costs(cfg.running_cost, cfg.terminal_cost, cfg.c1)


def grids(cfg: RunConfig) -> Grids:
    return Grids(horizon=cfg.horizon, n_t=cfg.n_t, x_min=cfg.x_min, x_max=cfg.x_max,
                 n_x=cfg.n_x, n_a=cfg.n_a, n_particles=cfg.n_particles,
                 n_quad=cfg.n_quad, seed=cfg.seed)


def bounds(cfg: RunConfig) -> ControlBounds:
    return ControlBounds(a_min=cfg.a_min, a_max=cfg.a_max)


def law0(cfg: RunConfig) -> InitialLaw:
    return InitialLaw(mean=cfg.law_mean, std=cfg.law_std)


def fixed_point_config(cfg: RunConfig) -> FixedPointConfig:
    return FixedPointConfig(damping=cfg.damping, tol=cfg.tol, max_iters=cfg.max_iters)


def reward_kind(cfg: RunConfig, kind: str | None = None) -> RewardKind:
    return RewardKind.from_tag(kind or cfg.kind, cfg.young_eps, cfg.denom_exp)


def sim_config(cfg: RunConfig) -> SimConfig:
    return SimConfig(n_traders=cfg.n_traders, n_reps=cfg.n_reps,
                     price_mode=cfg.price_mode, use_mid_price=cfg.use_mid_price,
                     p_min=cfg.p_min)
