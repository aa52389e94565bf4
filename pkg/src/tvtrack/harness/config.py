"""
Flat ``key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment; list values are comma
separated. Every key has a default (see :data:`DEFAULTS`) except ``seed``,
which must be given in the file or on the command line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from typing import Optional


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent configuration."""


PROBLEMS = ("translating", "rotating", "online_nesterov", "least_squares", "logistic")
SOLVERS = ("ogd", "polyak", "nesterov", "alg", "olnm", "olnm_every_step", "orgd", "abstain")
SWEEP_PARAMS = ("kappa", "mu", "L", "sigma")

PAPER_SCALE_REPS = 200


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "translating"
    seed: Optional[int] = None
    L: float = 1.0
    mu: Optional[float] = None
    kappa: Optional[float] = None
    sigma: float = 1.0
    d: Optional[int] = None
    n: int = 20
    a: str = "mid"
    noise_std: float = 1e-3
    flips_per_step: int = 1
    translating_xi: str = "own"
    solvers: tuple = ("ogd",)
    ogd_step: str = "optimal"
    alpha: Optional[float] = None
    beta: float = 0.0
    eta: float = 0.0
    olnm_T: str = "auto"
    orgd_delta: str = "auto"
    x_c: str = "x0"
    horizon: int = 1000
    replications: int = 50
    random_x0: bool = False
    window: str = "auto"
    limsup: str = "window"
    cycle: int = 5
    rel_tol: float = 1e-3
    divergence_cap: float = 1e9
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    fit: str = "sqrt_kappa"
    metric: str = "auto"
    series: str = "first"
    workers: int = 1
    output_path: str = "results.csv"
    export_instance: bool = False

    def __post_init__(self):
        validate(self)

    @property
    def mu_value(self):
        if self.mu is not None:
            return float(self.mu)
        if self.kappa is not None:
            return float(self.L) / float(self.kappa)
        return None

    def digest(self):
        """Short stable hash of the configuration (output path excluded)."""
        text = "\n".join(f"{k}={v!r}" for k, v in sorted(to_mapping(self).items())
                         if k not in ("output_path", "workers"))
        return hashlib.sha1(text.encode()).hexdigest()[:10]

    def with_overrides(self, **kw):
        return replace(self, **kw)


DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig)}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def validate(cfg: ExperimentConfig):
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {cfg.problem!r}; choose from {PROBLEMS}")
    for s in cfg.solvers:
        if s not in SOLVERS:
            raise ConfigError(f"unknown solver {s!r}; choose from {SOLVERS}")
    if not cfg.solvers:
        raise ConfigError("at least one solver is required")
    if cfg.mu is not None and cfg.kappa is not None:
        raise ConfigError("give either mu or kappa, not both")
    if cfg.L <= 0:
        raise ConfigError("L must be positive")
    if cfg.horizon < 1 or cfg.replications < 1:
        raise ConfigError("horizon and replications must be >= 1")
    if cfg.sweep_param is not None and cfg.sweep_param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep_param must be one of {SWEEP_PARAMS}")
    if cfg.limsup not in ("window", "cycle"):
        raise ConfigError("limsup must be 'window' or 'cycle'")
    if cfg.series not in ("all", "first", "none"):
        raise ConfigError("series must be all, first or none")
    if cfg.fit not in ("sqrt_kappa", "kappa", "none"):
        raise ConfigError("fit must be sqrt_kappa, kappa or none")
    if cfg.x_c not in ("x0", "zero"):
        raise ConfigError("x_c must be x0 or zero")
    if cfg.translating_xi not in ("own", "zero"):
        raise ConfigError("translating_xi must be own or zero")
    if "alg" in cfg.solvers and cfg.alpha is None:
        raise ConfigError("solver 'alg' needs alpha")


def _convert(key, raw: str):
    typ = str(_TYPES[key])
    raw = raw.strip()
    try:
        if key in ("solvers",):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if key == "sweep_values":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if "bool" in typ:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if raw.lower() in ("none", "") and "Optional" in typ:
            return None
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_pairs(pairs) -> dict:
    out = {}
    for key, raw in pairs:
        key = key.strip()
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _convert(key, raw)
    return out


def parse_text(text: str) -> dict:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        pairs.append((k, v))
    return parse_pairs(pairs)


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read a config file (optional) and apply ``key=value`` overrides on top."""
    values = {}
    if path is not None:
        try:
            with open(path) as f:
                values.update(parse_text(f.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        values.update(parse_pairs(overrides))
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def to_mapping(cfg: ExperimentConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize to the flat format; ``parse_text(dump_config(c))`` round-trips."""
    lines = []
    for k, v in to_mapping(cfg).items():
        if isinstance(v, tuple):
            v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
