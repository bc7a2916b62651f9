"""Strict TOML run configuration."""
from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .errors import ConfigError
from .fields import GridSpec
from .thermo import EosSpec

REQUIRED_BLOCKS = ("eos", "background", "grid")


@dataclass(frozen=True)
class BackgroundBlock:
    rho_bar: float = 1.0
    theta_bar: float = 1.0


@dataclass(frozen=True)
class PhysicsBlock:
    g_vec: tuple = (0.0, 0.0, -1.0)
    beta_slip: float = 0.0
    t_bot: float = 1.0
    t_top: float = 0.0
    theta_boundary_expr: str = ""
    u0_amplitude: float = 0.5
    t0_perturbation: float = 0.3


@dataclass(frozen=True)
class NumericsBlock:
    limit_dt: float = 1e-3
    cfl: float = 0.4
    t_final: float = 0.25
    diag_every: float = 0.005
    snapshot_every: float = 0.0


@dataclass(frozen=True)
class SweepBlock:
    eps: tuple = (0.4, 0.2, 0.1)
    workers: int = 1


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"


@dataclass(frozen=True)
class RunConfig:
    eos: EosSpec
    background: BackgroundBlock
    grid: GridSpec
    physics: PhysicsBlock = field(default_factory=PhysicsBlock)
    numerics: NumericsBlock = field(default_factory=NumericsBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @property
    def diag_times(self):
        n = self.numerics
        k = int(round(n.t_final / n.diag_every))
        return [round(i * n.diag_every, 12) for i in range(k + 1)]


BLOCKS = {
    "eos": EosSpec,
    "background": BackgroundBlock,
    "grid": GridSpec,
    "physics": PhysicsBlock,
    "numerics": NumericsBlock,
    "sweep": SweepBlock,
    "output": OutputBlock,
}

_GRID_DEFAULTS = {"nx": 16, "ny": 16, "nz": 16, "r": 1.0, "geometry": "box"}
_INT_KEYS = {("grid", "nx"), ("grid", "ny"), ("grid", "nz"), ("sweep", "workers")}
_STR_KEYS = {("eos", "gas_law"), ("grid", "geometry"), ("physics", "theta_boundary_expr"),
             ("output", "directory")}
_VEC_KEYS = {("eos", "table_z"), ("eos", "table_p"), ("physics", "g_vec"), ("sweep", "eps")}


def _locate(text: str, block: str, key: str | None = None) -> str:
    """Human-readable position of a block header or key in the source text."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == block:
                return f"line {lineno}"
            continue
        if key is not None and current == block and re.match(rf"^{re.escape(key)}\s*=", s):
            return f"line {lineno}"
    return "(not present)"


def _coerce(block: str, key: str, value, where: str):
    tag = f"[{block}] {key} ({where})"
    if (block, key) in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{tag}: expected an integer, got {value!r}")
        return value
    if (block, key) in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{tag}: expected a string, got {value!r}")
        return value
    if (block, key) in _VEC_KEYS:
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{tag}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{tag}: expected a number, got {value!r}")
    return float(value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML text. Unknown blocks or keys are errors."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for block in raw:
        if block not in BLOCKS:
            raise ConfigError(f"unknown block [{block}] at {_locate(text, block)}")
        if not isinstance(raw[block], dict):
            raise ConfigError(f"{block} must be a table ([{block}])")
    for block in REQUIRED_BLOCKS:
        if block not in raw:
            raise ConfigError(f"missing required block [{block}]")
    built = {}
    for block, cls in BLOCKS.items():
        table = raw.get(block, {})
        allowed = {f.name for f in fields(cls)}
        kwargs = dict(_GRID_DEFAULTS) if block == "grid" else {}
        for key, value in table.items():
            where = _locate(text, block, key)
            if key not in allowed:
                raise ConfigError(f"unknown key [{block}] {key} at {where}")
            kwargs[key] = _coerce(block, key, value, where)
        if block == "grid" and kwargs.get("geometry") == "slab" and "ny" not in table:
            kwargs["ny"] = 1
        try:
            built[block] = cls(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid [{block}] block at {_locate(text, block)}: {exc}") from exc
    cfg = RunConfig(**built)
    _validate(cfg, text)
    return cfg


def _validate(cfg: RunConfig, text: str):
    def fail(block, key, msg):
        raise ConfigError(f"[{block}] {key} ({_locate(text, block, key)}): {msg}")

    b = cfg.background
    if not (b.rho_bar > 0 and b.theta_bar > 0):
        fail("background", "rho_bar", "background density and temperature must be positive")
    if len(cfg.physics.g_vec) != 3:
        fail("physics", "g_vec", "must have three components")
    if cfg.physics.beta_slip < 0:
        fail("physics", "beta_slip", "must be >= 0")
    n = cfg.numerics
    if not n.limit_dt > 0:
        fail("numerics", "limit_dt", "must be positive")
    if not 0 < n.cfl < 1:
        fail("numerics", "cfl", "must lie in (0, 1)")
    if n.t_final < 0:
        fail("numerics", "t_final", "must be >= 0")
    if not n.diag_every > 0:
        fail("numerics", "diag_every", "must be positive")
    for key in ("t_final", "diag_every"):
        ratio = getattr(n, key) / n.limit_dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            fail("numerics", key, "must be an integer multiple of limit_dt")
    ratio = n.t_final / n.diag_every
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        fail("numerics", "t_final", "must be an integer multiple of diag_every")
    if n.snapshot_every < 0:
        fail("numerics", "snapshot_every", "must be >= 0")
    if n.snapshot_every > 0:
        ratio = n.snapshot_every / n.diag_every
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            fail("numerics", "snapshot_every", "must be an integer multiple of diag_every")
    eps = cfg.sweep.eps
    if len(eps) == 0:
        fail("sweep", "eps", "must list at least one value")
    if any(not (0 < e <= 1) for e in eps):
        fail("sweep", "eps", "values must lie in (0, 1]")
    if any(a <= b for a, b in zip(eps, eps[1:])):
        fail("sweep", "eps", "must be strictly decreasing")
    if cfg.sweep.workers < 1:
        fail("sweep", "workers", "must be >= 1")


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for block in BLOCKS:
        d = asdict(getattr(cfg, block))
        out[block] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
    return out


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
