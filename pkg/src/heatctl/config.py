"""Run configuration: flat TOML with dotted keys (``domain.L = 1.0``, ``sweep.eta = 0.5``)."""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import tomli
import tomli_w

from .errors import ConfigurationError

# dotted key -> attribute name
_KEYS = {
    "domain.L": "L",
    "domain.a": "a",
    "domain.b": "b",
    "domain.J": "J",
    "problem.y0": "y0",
    "problem.r": "r",
    "problem.M": "M",
    "problem.M_list": "M_list",
    "problem.M_exit_fraction": "M_exit_fraction",
    "problem.T": "T",
    "problem.T_list": "T_list",
    "sampling.delta": "delta",
    "sampling.k": "k",
    "sweep.deltas": "deltas",
    "sweep.ladder_levels": "ladder_levels",
    "sweep.ladder_base": "ladder_base",
    "sweep.eta": "eta",
    "sweep.k_range": "k_range",
    "sweep.hunt_k_range": "hunt_k_range",
    "sweep.family_members": "family_members",
    "tolerances.time": "time_tol",
    "tolerances.residual": "residual_tol",
    "tolerances.quadrature_nodes": "quadrature_nodes",
    "output.dir": "out_dir",
    "run.seed": "seed",
    "run.threads": "threads",
}


@dataclass
class RunConfig:
    L: float = 1.0
    a: float = 0.25
    b: float = 0.75
    J: int = 64
    y0: list = field(default_factory=lambda: [2.0, 0.5])
    r: float = 1.0
    M: Optional[float] = None
    M_list: Optional[list] = None
    M_exit_fraction: Optional[float] = 0.6
    T: Optional[float] = None
    T_list: Optional[list] = None
    delta: Optional[float] = None
    k: Optional[int] = None
    deltas: Optional[list] = None
    ladder_levels: int = 10
    ladder_base: Optional[float] = None
    eta: float = 0.5
    k_range: list = field(default_factory=lambda: [3, 40])
    hunt_k_range: list = field(default_factory=lambda: [6, 11])
    family_members: int = 5
    time_tol: float = 1e-13
    residual_tol: float = 1e-10
    quadrature_nodes: int = 8
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def state(self):
        """Initial coefficients padded with zeros to J modes."""
        y = np.zeros(self.J)
        y[: len(self.y0)] = self.y0
        return y

    def k_values(self):
        return list(range(self.k_range[0], self.k_range[1] + 1))

    def hunt_values(self):
        return list(range(self.hunt_k_range[0], self.hunt_k_range[1] + 1))


def _positive(name, v, integer=False):
    if integer and (isinstance(v, bool) or int(v) != v):
        raise ConfigurationError(f"must be an integer, got {v!r}", name)
    if not (isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v) and v > 0):
        raise ConfigurationError(f"must be a positive number, got {v!r}", name)


def validate(cfg):
    _positive("domain.L", cfg.L)
    _positive("domain.J", cfg.J, integer=True)
    for name, v in (("domain.a", cfg.a), ("domain.b", cfg.b)):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigurationError(f"must be a number, got {v!r}", name)
    if not (0 <= cfg.a < cfg.b <= cfg.L):
        raise ConfigurationError(f"need 0 <= a < b <= L, got a={cfg.a}, b={cfg.b}, L={cfg.L}", "domain.omega")
    if not isinstance(cfg.y0, list) or not cfg.y0 or not all(isinstance(c, (int, float)) for c in cfg.y0):
        raise ConfigurationError("must be a nonempty list of numbers", "problem.y0")
    if len(cfg.y0) > cfg.J:
        raise ConfigurationError(f"has {len(cfg.y0)} coefficients but only J={cfg.J} modes", "problem.y0")
    _positive("problem.r", cfg.r)
    if float(np.linalg.norm(cfg.y0)) <= cfg.r:
        raise ConfigurationError("initial state already in target", "problem.y0")
    if cfg.M is not None and not (isinstance(cfg.M, (int, float)) and cfg.M >= 0):
        raise ConfigurationError(f"must be nonnegative, got {cfg.M!r}", "problem.M")
    for name, attr in (("problem.M_list", "M_list"), ("problem.T_list", "T_list"), ("sweep.deltas", "deltas")):
        v = getattr(cfg, attr)
        if v is not None and (not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v)):
            raise ConfigurationError("must be a list of numbers", name)
    if cfg.M_exit_fraction is not None and not 0 < cfg.M_exit_fraction < 1:
        raise ConfigurationError(f"must lie in (0, 1), got {cfg.M_exit_fraction}", "problem.M_exit_fraction")
    if cfg.T is not None:
        _positive("problem.T", cfg.T)
    if cfg.delta is not None:
        _positive("sampling.delta", cfg.delta)
    if cfg.k is not None:
        _positive("sampling.k", cfg.k, integer=True)
    if cfg.deltas is not None:
        if not cfg.deltas:
            raise ConfigurationError("delta ladder is empty", "sweep.deltas")
        for x in cfg.deltas:
            _positive("sweep.deltas", x)
    _positive("sweep.ladder_levels", cfg.ladder_levels, integer=True)
    if cfg.ladder_base is not None:
        _positive("sweep.ladder_base", cfg.ladder_base)
    if not 0 < cfg.eta < 1:
        raise ConfigurationError(f"must lie in (0, 1), got {cfg.eta}", "sweep.eta")
    for name, rng in (("sweep.k_range", cfg.k_range), ("sweep.hunt_k_range", cfg.hunt_k_range)):
        if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, int) for x in rng)):
            raise ConfigurationError("must be a pair [k_min, k_max] of integers", name)
        if not 1 <= rng[0] <= rng[1]:
            raise ConfigurationError(f"need 1 <= k_min <= k_max, got {rng}", name)
    _positive("sweep.family_members", cfg.family_members, integer=True)
    _positive("tolerances.time", cfg.time_tol)
    _positive("tolerances.residual", cfg.residual_tol)
    _positive("tolerances.quadrature_nodes", cfg.quadrature_nodes, integer=True)
    _positive("run.threads", cfg.threads, integer=True)
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigurationError(f"must be a nonnegative integer, got {cfg.seed!r}", "run.seed")
    return cfg


def _flatten(tree, prefix=""):
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def from_dict(tree):
    flat = _flatten(tree)
    unknown = sorted(set(flat) - set(_KEYS))
    if unknown:
        raise ConfigurationError("unknown configuration key", unknown[0])
    kwargs = {_KEYS[k]: v for k, v in flat.items()}
    if "M" in kwargs or "M_list" in kwargs:
        kwargs.setdefault("M_exit_fraction", None)
    return validate(RunConfig(**kwargs))


def parse(text):
    try:
        tree = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    return from_dict(tree)


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def to_dict(cfg):
    values = asdict(cfg)
    tree = {}
    for dotted, attr in _KEYS.items():
        v = values[attr]
        if v is None:
            continue
        section, key = dotted.split(".")
        tree.setdefault(section, {})[key] = v
    return tree


def serialize(cfg):
    return tomli_w.dumps(to_dict(cfg))
