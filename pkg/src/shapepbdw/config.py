"""Experiment configuration: line-based ``key = value`` with ``[section]`` headers.

Defaults are desk scale: a 3 x 3 template grid, 10 parameter samples of
25 time steps per template, n = 10, 4 test geometries with 4 targets each.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .stokes import MU_RANGE, U0_RANGE

_HALF = math.sqrt(2.0) / 2.0


@dataclass
class TrainingConfig:
    S_r: list = field(default_factory=lambda: [0.14, 0.16, 0.18])
    S_x: list = field(default_factory=lambda: [2.0, 2.5, 3.0])
    S_l: list = field(default_factory=lambda: [2.0])
    L: float = 5.0
    D: float = 0.4
    n_samples: int = 10
    seed: int = 1234
    u0: tuple = U0_RANGE
    mu: tuple = MU_RANGE
    h: float = 0.04
    dt: float = 0.02
    T_end: float = 0.5
    n: int = 10
    voxel: float = 0.25
    beam: tuple = (_HALF, _HALF)
    band: tuple | None = None
    p: int | None = None
    feature_spacing: float = 0.05
    q: int = 4
    test_S_r: list = field(default_factory=lambda: [0.152, 0.171, 0.147, 0.163])
    test_S_x: list = field(default_factory=lambda: [2.21, 2.78, 2.62, 2.43])
    test_S_l: list = field(default_factory=lambda: [2.0])
    n_target: int = 4
    test_seed: int = 4321
    native_samples: int = 10
    n_max: int | None = None
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name, rng, (lo, hi) in (("u0", self.u0, U0_RANGE), ("mu", self.mu, MU_RANGE)):
            if len(rng) != 2 or not lo <= rng[0] <= rng[1] <= hi:
                raise ConfigError(f"{name} range {rng} must lie within [{lo}, {hi}]")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.n_samples < 1 or self.n_target < 1:
            raise ConfigError("sample counts must be positive")
        if not (self.dt > 0 and self.T_end > 0 and self.h > 0 and self.voxel > 0):
            raise ConfigError("dt, T_end, h and voxel must be positive")
        if self.T_end > 0.5 + 1e-12:
            raise ConfigError("T_end must not exceed 0.5 s")
        if self.p is not None and self.p < 1:
            raise ConfigError("p must be positive")
        if len(self.test_S_r) != len(self.test_S_x):
            raise ConfigError("test_S_r and test_S_x must have equal length")

    def template_grid(self):
        return [(r, l, x) for r in self.S_r for l in self.S_l for x in self.S_x]

    def test_grid(self):
        sl = self.test_S_l
        if len(sl) == 1:
            sl = sl * len(self.test_S_r)
        if len(sl) != len(self.test_S_r):
            raise ConfigError("test_S_l must have one value or one per test geometry")
        return list(zip(self.test_S_r, sl, self.test_S_x))

    def digest(self) -> str:
        d = asdict(self)
        d.pop("jobs")  # parallelism does not change results
        blob = json.dumps(d, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


def _floats(v):
    return [float(s) for s in v.replace(",", " ").split()]


def _pair(v):
    a = _floats(v)
    if len(a) != 2:
        raise ValueError(f"expected two values, got {v!r}")
    return tuple(a)


def _opt_int(v):
    return None if v.strip().lower() in ("", "auto", "none") else int(v)


# section -> key -> parser
_SCHEMA = {
    "templates": {"S_r": _floats, "S_x": _floats, "S_l": _floats, "L": float, "D": float},
    "sampling": {"n_samples": int, "seed": int, "u0": _pair, "mu": _pair},
    "discretization": {"h": float, "dt": float, "T_end": float},
    "rom": {"n": int},
    "observe": {"voxel": float, "beam": _pair, "band": _pair},
    "embedding": {"p": _opt_int, "feature_spacing": float, "q": int},
    "benchmark": {"test_S_r": _floats, "test_S_x": _floats, "test_S_l": _floats,
                  "n_target": int, "seed": int, "native_samples": int, "n_max": _opt_int},
    "run": {"jobs": int},
}
_RENAME = {("benchmark", "seed"): "test_seed"}


def parse_config(text: str) -> TrainingConfig:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kwargs = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                val = _SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
            kwargs[_RENAME.get((sec, key), key)] = val
    return TrainingConfig(**kwargs)


def load_config(path) -> TrainingConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: TrainingConfig) -> str:
    def fl(v):
        return ", ".join(repr(float(x)) for x in v)

    out = ["[templates]", f"S_r = {fl(cfg.S_r)}", f"S_x = {fl(cfg.S_x)}",
           f"S_l = {fl(cfg.S_l)}", f"L = {cfg.L!r}", f"D = {cfg.D!r}", "",
           "[sampling]", f"n_samples = {cfg.n_samples}", f"seed = {cfg.seed}",
           f"u0 = {fl(cfg.u0)}", f"mu = {fl(cfg.mu)}", "",
           "[discretization]", f"h = {cfg.h!r}", f"dt = {cfg.dt!r}", f"T_end = {cfg.T_end!r}", "",
           "[rom]", f"n = {cfg.n}", "",
           "[observe]", f"voxel = {cfg.voxel!r}", f"beam = {fl(cfg.beam)}"]
    if cfg.band is not None:
        out.append(f"band = {fl(cfg.band)}")
    out += ["", "[embedding]", f"p = {'auto' if cfg.p is None else cfg.p}",
            f"feature_spacing = {cfg.feature_spacing!r}", f"q = {cfg.q}", "",
            "[benchmark]", f"test_S_r = {fl(cfg.test_S_r)}", f"test_S_x = {fl(cfg.test_S_x)}",
            f"test_S_l = {fl(cfg.test_S_l)}", f"n_target = {cfg.n_target}",
            f"seed = {cfg.test_seed}", f"native_samples = {cfg.native_samples}",
            f"n_max = {'auto' if cfg.n_max is None else cfg.n_max}", "",
            "[run]", f"jobs = {cfg.jobs}", ""]
    return "\n".join(out)
