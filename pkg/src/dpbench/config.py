"""Benchmark configuration: sectioned key=value files and named presets.

Configs are deliberately flat (INI sections) so runs diff cleanly; seeds are
mandatory and wall-clock seeding is not available.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .core import Domain, Shape
from .datagen import SourceDataset, load_histogram_csv, synth_shape

import numpy as np


class ConfigError(ValueError):
    """A configuration file is malformed or inconsistent."""


@dataclass(frozen=True)
class ShapeSource:
    """A named shape provider usable on any configured domain."""

    name: str
    kind: str  # powerlaw | normal | uniform | file
    param: float | None = None
    path: str | None = None

    @property
    def synthetic(self) -> bool:
        return self.kind != "file"

    def shape_for(self, domain: Domain) -> "Shape | SourceDataset":
        if self.kind == "file":
            return load_histogram_csv(self.path)
        if domain.ndim == 1:
            return self._axis_shape(domain.size)
        rows, cols = domain.axis_sizes
        p_r = self._axis_shape(rows).probs
        p_c = self._axis_shape(cols).probs
        return Shape(domain, np.outer(p_r, p_c).reshape(-1))

    def _axis_shape(self, n: int) -> Shape:
        params = {}
        if self.kind == "powerlaw" and self.param is not None:
            params["exponent"] = self.param
        if self.kind == "normal" and self.param is not None:
            params["sigma"] = self.param
        return synth_shape(self.kind, n, params)


@dataclass(frozen=True)
class BenchConfig:
    seed: int
    shapes: tuple[ShapeSource, ...]
    domains: tuple[tuple[int, ...], ...]
    scales: tuple[int, ...]
    epsilons: tuple[float, ...]
    algorithms: tuple[tuple[str, dict], ...]
    workload: str = "prefix"  # or random:<count>
    vectors: int = 5
    runs: int = 10
    workers: int = 1
    check_trials: int = 200
    check_alpha: float = 0.01
    tune: dict = field(default_factory=dict)


def _parse_params(text: str) -> dict:
    params = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"algorithm parameter {item!r} must be key=value")
        key, value = item.split("=", 1)
        try:
            number = float(value)
            params[key.strip()] = int(number) if number.is_integer() and "." not in value else number
        except ValueError:
            params[key.strip()] = value.strip()
    return params


def _parse_shape(token: str) -> ShapeSource:
    token = token.strip()
    if token.startswith("file:"):
        path = token[5:]
        return ShapeSource(Path(path).stem, "file", path=path)
    if ":" in token:
        kind, raw = token.split(":", 1)
        try:
            return ShapeSource(token, kind, param=float(raw))
        except ValueError as exc:
            raise ConfigError(f"bad shape parameter in {token!r}") from exc
    return ShapeSource(token, token)


def _parse_domain(token: str) -> tuple[int, ...]:
    parts = token.lower().split("x")
    try:
        sizes = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad domain {token!r}") from exc
    if len(sizes) not in (1, 2) or any(s < 1 for s in sizes):
        raise ConfigError(f"bad domain {token!r}")
    return sizes


def _split_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def parse_config(text: str, origin: str = "<config>") -> BenchConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    def require(section: str, key: str) -> str:
        if not parser.has_option(section, key):
            raise ConfigError(f"{origin}: missing [{section}] {key}")
        return parser.get(section, key)

    if not parser.has_section("run"):
        raise ConfigError(f"{origin}: missing [run] section")
    try:
        seed = parser.getint("run", "seed")
    except (configparser.NoOptionError, ValueError) as exc:
        raise ConfigError(f"{origin}: [run] seed is required and integral") from exc

    workload = parser.get("run", "workload", fallback="prefix")
    if workload != "prefix" and not workload.startswith("random:"):
        raise ConfigError(f"{origin}: workload must be 'prefix' or 'random:<count>'")

    shapes = tuple(_parse_shape(tok) for tok in _split_list(require("data", "shapes")))
    domains = tuple(_parse_domain(tok) for tok in _split_list(require("data", "domains")))
    scales = tuple(int(float(tok)) for tok in _split_list(require("data", "scales")))
    epsilons = tuple(float(tok) for tok in _split_list(parser.get("run", "epsilons", fallback="0.1")))
    if not shapes or not domains or not scales or not epsilons:
        raise ConfigError(f"{origin}: data grids must be non-empty")

    if not parser.has_section("algorithms") or not list(parser["algorithms"]):
        raise ConfigError(f"{origin}: [algorithms] must list at least one algorithm")
    algorithms = tuple(
        (name, _parse_params(parser.get("algorithms", name) or ""))
        for name in parser["algorithms"]
    )

    tune = {}
    if parser.has_section("tune"):
        tune = dict(parser["tune"])

    return BenchConfig(
        seed=seed,
        shapes=shapes,
        domains=domains,
        scales=scales,
        epsilons=epsilons,
        algorithms=algorithms,
        workload=workload,
        vectors=parser.getint("run", "vectors", fallback=5),
        runs=parser.getint("run", "runs", fallback=10),
        workers=parser.getint("run", "workers", fallback=1),
        check_trials=parser.getint("run", "check_trials", fallback=200),
        check_alpha=parser.getfloat("run", "check_alpha", fallback=0.01),
        tune=tune,
    )


def load_config(path: "str | Path") -> BenchConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, origin=str(path))


PRESETS: dict[str, str] = {
    # small grids that finish in minutes on one core
    "desk-1d": """
[run]
seed = 20160411
epsilons = 0.1
vectors = 5
runs = 10
[data]
shapes = powerlaw:1.0, normal, uniform
domains = 128, 256
scales = 1e3, 1e4, 1e5
[algorithms]
identity =
hb =
dawa =
""",
    "desk-2d": """
[run]
seed = 20160412
epsilons = 0.1
workload = random:400
vectors = 3
runs = 5
[data]
shapes = powerlaw:1.0, normal
domains = 32x32, 64x64
scales = 1e4, 1e5
[algorithms]
identity =
ugrid =
agrid =
dawa =
""",
    # the full published sweep (hours of compute; kept for completeness)
    "paper-1d": """
[run]
seed = 20160413
epsilons = 0.1
vectors = 5
runs = 10
[data]
shapes = powerlaw:1.0, normal, uniform
domains = 256, 512, 1024, 2048, 4096
scales = 1e3, 1e4, 1e5, 1e6, 1e7, 1e8
[algorithms]
identity =
privelet =
h =
hb =
greedy_h =
uniform =
php =
efpa =
sf =
ahp =
ahp_star =
mwem =
mwem_star =
dawa = approx=1
""",
    "paper-2d": """
[run]
seed = 20160414
epsilons = 0.1
workload = random:2000
vectors = 5
runs = 10
[data]
shapes = powerlaw:1.0, normal, uniform
domains = 32x32, 64x64, 128x128, 256x256
scales = 1e3, 1e4, 1e5, 1e6, 1e7, 1e8
[algorithms]
identity =
privelet =
hb =
greedy_h =
uniform =
ahp =
mwem =
mwem_star =
dawa = approx=1
quadtree =
ugrid =
agrid =
dpcube =
""",
    "tune-mwem": """
[run]
seed = 20160415
[data]
shapes = powerlaw:1.0, normal
domains = 64
scales = 1e4
[algorithms]
mwem_star =
[tune]
algorithm = mwem_star
grid = rounds:2,5,10,20,40,80,160
shapes = powerlaw:1.0, normal
products = 1e1, 1e2, 1e3, 1e4, 1e5, 1e6
domain = 64
trials = 5
""",
    "tune-ahp": """
[run]
seed = 20160416
[data]
shapes = powerlaw:1.0, normal
domains = 64
scales = 1e4
[algorithms]
ahp_star =
[tune]
algorithm = ahp_star
grid = rho:0.3,0.5,0.7; eta:0.5,1.0,2.0
shapes = powerlaw:1.0, normal
products = 1e3, 1e4, 1e5, 1e6
domain = 64
trials = 3
""",
}


def preset_config(name: str) -> BenchConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return parse_config(PRESETS[name], origin=f"<preset:{name}>")
