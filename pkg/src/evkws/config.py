"""Run configuration: INI parsing, overrides, validation, sweep expansion.

A config file is flat INI with sections ``sensor``, ``filtration``,
``graph``, ``model``, ``hw`` and ``io``::

    [sensor]
    channels = 64
    topology = cascade

    [filtration]
    div_factor = 8
    weight = 32
    threshold.kind = exponential
    threshold.start = 64
    threshold.end = 32

    [graph]
    r_c = 10
    skip_step = 1
    r_t_low = 0
    r_t_high = 5000

    [model]
    weights = weights.json

    [hw]
    clock_hz = 200000000
    parallel_multipliers = 2
    fifo_depth = 1024
    nas_latency_us = 23
    head_latency_us = 2.11

    [io]
    input =
    output =
    format = binary

Any key may be overridden from the command line as ``section.key=value``.
For sweep expansion a value may hold a comma-separated list; the Cartesian
product over all listed keys yields one resolved config per combination.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from itertools import product

from .errors import ConfigError, ValidationError
from .events import SensorConfig
from .filtering import FiltrationParams, ThresholdSchedule
from .graph import GraphParams
from .hwmodel import HwParams

SECTIONS = ("sensor", "filtration", "graph", "model", "hw", "io")


@dataclass(frozen=True)
class FiltrationSettings:
    """Filter knobs as configured, before thresholds are materialized."""

    div_factor: int = 8
    weight: int = 32
    kind: str = "exponential"
    start: int = 64
    end: int = 32

    def schedule(self) -> ThresholdSchedule:
        return ThresholdSchedule(self.kind, self.start, self.end)

    def materialize(self, channels: int) -> FiltrationParams:
        return FiltrationParams.from_schedule(self.schedule(),
                                              self.div_factor, self.weight,
                                              channels)


@dataclass(frozen=True)
class RunConfig:
    sensor: SensorConfig = field(default_factory=lambda: SensorConfig(64))
    filtration: FiltrationSettings = field(default_factory=FiltrationSettings)
    graph: GraphParams = field(default_factory=lambda: GraphParams(
        r_c=10, skip_step=1, r_t_low=0, r_t_high=5000))
    hw: HwParams = field(default_factory=HwParams)
    weights_path: str | None = None
    io_input: str | None = None
    io_output: str | None = None
    io_format: str = "binary"

    def filtration_params(self) -> FiltrationParams:
        return self.filtration.materialize(self.sensor.channels)

    def to_dict(self) -> dict:
        return {
            "sensor": {"channels": self.sensor.channels,
                       "topology": self.sensor.topology},
            "filtration": {"div_factor": self.filtration.div_factor,
                           "weight": self.filtration.weight,
                           "threshold.kind": self.filtration.kind,
                           "threshold.start": self.filtration.start,
                           "threshold.end": self.filtration.end},
            "graph": {"r_c": self.graph.r_c,
                      "skip_step": self.graph.skip_step,
                      "r_t_low": self.graph.r_t_low,
                      "r_t_high": self.graph.r_t_high},
            "model": {"weights": self.weights_path},
            "hw": {"clock_hz": self.hw.clock_hz,
                   "cycle_base": self.hw.cycle_base,
                   "cycle_per_vertex": self.hw.cycle_per_vertex,
                   "parallel_multipliers": self.hw.parallel_multipliers,
                   "fifo_depth": self.hw.fifo_depth,
                   "nas_latency_us": self.hw.nas_latency_us,
                   "head_latency_us": self.hw.head_latency_us,
                   "window_us": self.hw.window_us,
                   "flush_timeout_us": self.hw.flush_timeout_us,
                   "window_latency_bound_us":
                       self.hw.window_latency_bound_us},
            "io": {"input": self.io_input, "output": self.io_output,
                   "format": self.io_format},
        }


def default_config() -> RunConfig:
    return RunConfig()


_INT = int
_FLOAT = float
_STR = str

# key -> (caster, attribute path); paths are resolved in _apply below.
_KEY_TABLE: dict[tuple[str, str], tuple] = {
    ("sensor", "channels"): (_INT,),
    ("sensor", "topology"): (_STR,),
    ("filtration", "div_factor"): (_INT,),
    ("filtration", "weight"): (_INT,),
    ("filtration", "threshold.kind"): (_STR,),
    ("filtration", "threshold.start"): (_INT,),
    ("filtration", "threshold.end"): (_INT,),
    ("graph", "r_c"): (_INT,),
    ("graph", "skip_step"): (_INT,),
    ("graph", "r_t_low"): (_INT,),
    ("graph", "r_t_high"): (_INT,),
    ("model", "weights"): (_STR,),
    ("hw", "clock_hz"): (_FLOAT,),
    ("hw", "cycle_base"): (_INT,),
    ("hw", "cycle_per_vertex"): (_INT,),
    ("hw", "parallel_multipliers"): (_INT,),
    ("hw", "fifo_depth"): (_INT,),
    ("hw", "nas_latency_us"): (_FLOAT,),
    ("hw", "head_latency_us"): (_FLOAT,),
    ("hw", "window_us"): (_INT,),
    ("hw", "flush_timeout_us"): (_FLOAT,),
    ("hw", "window_latency_bound_us"): (_FLOAT,),
    ("io", "input"): (_STR,),
    ("io", "output"): (_STR,),
    ("io", "format"): (_STR,),
}


def _cast(section: str, key: str, value: str):
    entry = _KEY_TABLE.get((section, key))
    if entry is None:
        raise ConfigError(f"unknown config key [{section}] {key}")
    caster = entry[0]
    try:
        return caster(value)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {value!r} as "
            f"{caster.__name__}") from None


def _build(values: dict[tuple[str, str], object]) -> RunConfig:
    def get(section: str, key: str, default):
        return values.get((section, key), default)

    try:
        sensor = SensorConfig(
            channels=get("sensor", "channels", 64),
            topology=get("sensor", "topology", "cascade"))
        filtration = FiltrationSettings(
            div_factor=get("filtration", "div_factor", 8),
            weight=get("filtration", "weight", 32),
            kind=get("filtration", "threshold.kind", "exponential"),
            start=get("filtration", "threshold.start", 64),
            end=get("filtration", "threshold.end", 32))
        filtration.schedule()  # fail fast on bad schedule values
        graph = GraphParams(
            r_c=get("graph", "r_c", 10),
            skip_step=get("graph", "skip_step", 1),
            r_t_low=get("graph", "r_t_low", 0),
            r_t_high=get("graph", "r_t_high", 5000))
        hw = HwParams(
            clock_hz=get("hw", "clock_hz", 200e6),
            cycle_base=get("hw", "cycle_base", 58),
            cycle_per_vertex=get("hw", "cycle_per_vertex", 36),
            parallel_multipliers=get("hw", "parallel_multipliers", 2),
            fifo_depth=get("hw", "fifo_depth", 1024),
            nas_latency_us=get("hw", "nas_latency_us", 23.0),
            head_latency_us=get("hw", "head_latency_us", 2.11),
            window_us=get("hw", "window_us", 10000),
            flush_timeout_us=get("hw", "flush_timeout_us", 0.0),
            window_latency_bound_us=get("hw", "window_latency_bound_us",
                                        18.62))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        sensor=sensor, filtration=filtration, graph=graph, hw=hw,
        weights_path=get("model", "weights", None) or None,
        io_input=get("io", "input", None) or None,
        io_output=get("io", "output", None) or None,
        io_format=get("io", "format", "binary"))


def _read_ini(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
    return parser


def load_config(path: str | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then the file if given, then ``section.key=value`` overrides."""
    values: dict[tuple[str, str], object] = {}
    if path is not None:
        parser = _read_ini(path)
        for section in parser.sections():
            for key, raw in parser.items(section):
                if raw.strip() == "":
                    continue
                values[(section, key)] = _cast(section, key, raw.strip())
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        values[(section, key)] = _cast(section, key, raw.strip())
    return _build(values)


def expand_sweep(path: str) -> list[tuple[dict[str, str], RunConfig]]:
    """Expand comma-separated list values into the Cartesian product.

    Returns (varied-assignment, resolved config) pairs in deterministic
    order; the assignment maps ``section.key`` to the chosen raw value for
    keys that actually varied.
    """
    parser = _read_ini(path)
    fixed: dict[tuple[str, str], object] = {}
    axes: list[tuple[str, str, list[str]]] = []
    for section in parser.sections():
        for key, raw in parser.items(section):
            raw = raw.strip()
            if raw == "":
                continue
            choices = [part.strip() for part in raw.split(",") if part.strip()]
            if len(choices) > 1:
                axes.append((section, key, choices))
            else:
                fixed[(section, key)] = _cast(section, key, choices[0])
    axes.sort(key=lambda a: (SECTIONS.index(a[0]), a[1]))
    combos = []
    for picks in product(*(choices for _, _, choices in axes)):
        values = dict(fixed)
        varied: dict[str, str] = {}
        for (section, key, _), raw in zip(axes, picks):
            values[(section, key)] = _cast(section, key, raw)
            varied[f"{section}.{key}"] = raw
        combos.append((varied, _build(values)))
    return combos


def write_config(config: RunConfig, path: str) -> None:
    """Serialize a resolved config back to INI."""
    parser = configparser.ConfigParser()
    for section, entries in config.to_dict().items():
        parser[section] = {}
        for key, value in entries.items():
            if value is None:
                continue
            parser[section][key] = str(value)
    with open(path, "w") as fh:
        parser.write(fh)
