"""Experiment configuration files.

Configs are YAML documents::

    name: fig4
    arrivals: 1000000          # per run, at least 1000
    replications: 1
    seed: 2024
    warmup: 0.0                # fraction of leading arrivals discarded
    rho_grid: [0.05, 0.10, 0.95]
    extended_rho: [0.97, 0.98, 0.99]   # appended by --extended
    plot: scaled_T             # or delta; the y-axis of --svg output
    models:
      - name: het_mgk
        policy: het_mgk_fcfs
        server_speeds: [0.4, 0.3, 0.2, 0.1]
        assignment: fastest
        distribution: "hyperexp(1/2 @ 2, 1/2 @ 2/3)"

Distribution strings (numbers may be written as fractions ``a/b``)::

    exp(RATE)
    det(VALUE)
    pareto(ALPHA[, XMIN])
    hyperexp(P @ RATE, P @ RATE, ...)
    hyperexp_unit(X)                 unit mean, rem_sup X
    joint(P: l=L ~ DIST; P: v=V ~ DIST; ...)   size drawn from DIST
    msj(k=K; P: v=V ~ DIST; ...)     DIST is time in service, size = v/k * X
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from . import distributions as D
from .errors import ConfigError
from .policies import ModelSpec

MIN_ARRIVALS = 1000

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        for m in _TOKEN.finditer(text):
            num, name, sym = m.groups()
            if num is not None:
                self.tokens.append(("num", num, m.start(1)))
            elif name is not None:
                self.tokens.append(("name", name, m.start(2)))
            elif sym is not None and not sym.isspace():
                self.tokens.append(("sym", sym, m.start(3)))
        self.pos = 0

    def error(self, msg: str):
        at = self.tokens[self.pos][2] if self.pos < len(self.tokens) else len(self.text)
        raise ConfigError(f"{msg} at column {at + 1} in {self.text!r}")

    def peek(self, value=None):
        if self.pos >= len(self.tokens):
            return None
        tok = self.tokens[self.pos]
        if value is not None and tok[1] != value:
            return None
        return tok

    def expect(self, value):
        if self.peek(value) is None:
            self.error(f"expected {value!r}")
        self.pos += 1

    def name(self) -> str:
        tok = self.peek()
        if tok is None or tok[0] != "name":
            self.error("expected a name")
        self.pos += 1
        return tok[1]

    def number(self) -> Fraction:
        tok = self.peek()
        if tok is None or tok[0] != "num":
            self.error("expected a number")
        self.pos += 1
        value = Fraction(tok[1])
        if self.peek("/"):
            self.pos += 1
            den = self.number()
            if den == 0:
                self.error("division by zero")
            value /= den
        return value

    def integer(self) -> int:
        value = self.number()
        if value.denominator != 1:
            self.error(f"expected an integer, got {value}")
        return int(value)

    def dist(self):
        kind = self.name()
        self.expect("(")
        try:
            result = self._dist_body(kind)
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ConfigError):
                raise
            self.error(f"{kind}: {exc}")
        self.expect(")")
        return result

    def _dist_body(self, kind):
        if kind == "exp":
            return D.Exponential(float(self.number()))
        if kind == "det":
            return D.Deterministic(float(self.number()))
        if kind == "pareto":
            alpha = self.number()
            x_min = Fraction(1)
            if self.peek(","):
                self.pos += 1
                x_min = self.number()
            return D.Pareto(float(alpha), float(x_min))
        if kind == "hyperexp":
            branches = [self._branch()]
            while self.peek(","):
                self.pos += 1
                branches.append(self._branch())
            return D.Hyperexponential(tuple((float(p), float(r)) for p, r in branches))
        if kind == "hyperexp_unit":
            return D.unit_mean_hyperexp(float(self.number()))
        if kind == "joint":
            return D.JointDiscrete(tuple(self._atoms(None)))
        if kind == "msj":
            if self.peek("k") is None:
                self.error("msj() starts with k=K")
            self.pos += 1
            self.expect("=")
            k = self.integer()
            self.expect(";")
            return D.JointDiscrete(tuple(self._atoms(k)))
        self.pos -= 2
        self.error(f"unknown distribution {kind!r}")

    def _branch(self):
        p = self.number()
        self.expect("@")
        return p, self.number()

    def _atoms(self, k):
        atoms = [self._atom(k)]
        while self.peek(";"):
            self.pos += 1
            atoms.append(self._atom(k))
        return atoms

    def _atom(self, k):
        p = self.number()
        self.expect(":")
        attrs = {}
        while True:
            key = self.name()
            if key not in ("v", "l"):
                self.pos -= 1
                self.error(f"unknown class attribute {key!r}")
            self.expect("=")
            attrs[key] = self.integer()
            if not self.peek(","):
                break
            self.pos += 1
        self.expect("~")
        dist = self.dist()
        cls = D.JobClass(servers=attrs.get("v"), threshold=attrs.get("l"))
        scale = 1.0
        if k is not None:
            if "v" not in attrs:
                self.error("msj atoms need v=")
            scale = attrs["v"] / k
        return D.Atom(float(p), cls, dist, scale=scale)

    def done(self):
        if self.pos != len(self.tokens):
            self.error("unexpected trailing input")


def parse_distribution(text: str) -> D.SizeClassDistribution:
    parser = _Parser(text)
    dist = parser.dist()
    parser.done()
    return dist


def msj_k(text: str) -> int | None:
    """The ``k`` declared by an ``msj(...)`` string, if any."""
    m = re.match(r"\s*msj\s*\(\s*k\s*=\s*(\d+)", text)
    return int(m.group(1)) if m else None


@dataclass
class ExperimentConfig:
    name: str
    models: list[ModelSpec]
    rho_grid: list[float]
    arrivals: int = 1_000_000
    replications: int = 1
    seed: int = 0
    warmup: float = 0.0
    extended_rho: list[float] = field(default_factory=list)
    plot: str = "scaled_T"
    output: str | None = None

    def __post_init__(self):
        if self.arrivals < MIN_ARRIVALS:
            raise ConfigError(f"arrivals must be at least {MIN_ARRIVALS}, got {self.arrivals}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not 0.0 <= self.warmup < 1.0:
            raise ConfigError(f"warmup must lie in [0, 1), got {self.warmup}")
        for grid in (self.rho_grid, self.extended_rho):
            for rho in grid:
                if not 0.0 < rho < 1.0:
                    raise ConfigError(f"every rho must lie in (0, 1), got {rho}")
            if list(grid) != sorted(grid):
                raise ConfigError("rho grids must be sorted ascending")
        if self.plot not in ("scaled_T", "delta"):
            raise ConfigError(f"plot must be scaled_T or delta, got {self.plot!r}")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError(f"model names must be unique: {names}")

    def extended(self) -> "ExperimentConfig":
        """Grid reaching into heavier load with ten times the arrivals."""
        grid = sorted(set(self.rho_grid) | set(self.extended_rho))
        return ExperimentConfig(self.name, self.models, grid, self.arrivals * 10, self.replications,
                                self.seed, self.warmup, [], self.plot, self.output)


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    mapping = loader.construct_mapping(node, deep=True)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)

_TOP_KEYS = {"name", "models", "rho_grid", "arrivals", "replications", "seed", "warmup",
             "extended_rho", "plot", "output", "description"}
_MODEL_KEYS = {"name", "policy", "distribution", "k", "server_speeds", "mpl", "assignment"}


def _fail(source: str, line, where: str, msg: str):
    loc = f"{source}:{line}" if line else source
    raise ConfigError(f"{loc}: {where}: {msg}")


def _model(source: str, index: int, raw) -> ModelSpec:
    where = f"models[{index}]"
    if not isinstance(raw, dict):
        _fail(source, None, where, "each model must be a mapping")
    line = raw.pop("__line__", None)
    unknown = set(raw) - _MODEL_KEYS
    if unknown:
        _fail(source, line, where, f"unknown field(s) {sorted(unknown)}")
    for key in ("policy", "distribution"):
        if key not in raw:
            _fail(source, line, f"{where}.{key}", "missing")
    text = raw["distribution"]
    try:
        dist = parse_distribution(str(text))
    except ConfigError as exc:
        _fail(source, line, f"{where}.distribution", str(exc))
    k = raw.get("k")
    declared = msj_k(str(text))
    if k is None:
        k = declared or 1
    elif declared is not None and declared != k:
        _fail(source, line, f"{where}.k", f"k={k} but the distribution declares k={declared}")
    try:
        return ModelSpec(policy=raw["policy"], distribution=dist, k=int(k),
                         server_speeds=raw.get("server_speeds"), mpl=raw.get("mpl"),
                         assignment=raw.get("assignment", "fastest"), name=raw.get("name"))
    except (ValueError, KeyError) as exc:
        _fail(source, line, where, str(exc).strip("'\""))


def config_from_dict(raw: dict, source: str = "<config>") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    raw = dict(raw)
    line = raw.pop("__line__", None)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        _fail(source, line, "config", f"unknown field(s) {sorted(unknown)}")
    if not isinstance(raw.get("models"), list) or not raw["models"]:
        _fail(source, line, "models", "a nonempty list of models is required")
    models = [_model(source, i, dict(m) if isinstance(m, dict) else m)
              for i, m in enumerate(raw["models"])]
    try:
        return ExperimentConfig(
            name=str(raw.get("name", Path(source).stem)),
            models=models,
            rho_grid=[float(r) for r in raw.get("rho_grid") or []],
            arrivals=int(raw.get("arrivals", 1_000_000)),
            replications=int(raw.get("replications", 1)),
            seed=int(raw.get("seed", 0)),
            warmup=float(raw.get("warmup", 0.0)),
            extended_rho=[float(r) for r in raw.get("extended_rho") or []],
            plot=str(raw.get("plot", "scaled_T")),
            output=raw.get("output"),
        )
    except ConfigError as exc:
        _fail(source, line, "config", str(exc))
    except (TypeError, ValueError) as exc:
        _fail(source, line, "config", f"bad value: {exc}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.load(path.read_text(encoding="utf-8"), Loader=_LineLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return config_from_dict(raw, str(path))


PRESET_DIR = Path(__file__).parent / "presets"
PRESETS = ("fig1", "fig2", "fig4", "fig5a", "fig5b")


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    return load_config(PRESET_DIR / f"{name}.yaml")


def resolve_config(name_or_path: str) -> ExperimentConfig:
    """A preset name or a path to a YAML file."""
    if name_or_path in PRESETS:
        return load_preset(name_or_path)
    return load_config(name_or_path)
