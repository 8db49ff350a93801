"""Experiment configuration: geometry, discretization, flow, stop rules, outputs.

Configurations are read from JSON or from plain ``key = value`` lines, where
dotted keys address nested sections (``flow.scheme = C_star``) and values are
parsed as JSON when possible.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from axiflow.errors import InvalidConfig
from axiflow.schemes.flow import FlowSpec, SpeedLaw
from axiflow.solver import NewtonConfig

GEOMETRIES = ("semicircle_nonuniform", "circle", "cylinder_segment", "disk", "cigar", "disc", "spiral")
CLOSED_GEOMETRIES = ("circle", "spiral")


@dataclass(frozen=True)
class StopConfig:
    """Thresholds that end a run early.  ``min_r`` looks at off-axis nodes."""

    min_r: float | None = None
    min_element: float | None = None
    max_steps: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    snapshot_every: int | None = None
    snapshot_interval: float | None = None
    svg: bool = False
    png: bool = False
    dump_matrices: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: str
    J: int
    T: float
    dt: float | None = None
    dt_factor: float = 0.1
    params: dict = field(default_factory=dict)
    flow: FlowSpec = field(default_factory=FlowSpec)
    stop: StopConfig = field(default_factory=StopConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    eliminate: bool = False
    detect_oscillation: bool = False
    name: str = ""

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise InvalidConfig(f"unknown geometry {self.geometry!r}")
        if int(self.J) != self.J or self.J < 3:
            raise InvalidConfig("J must be an integer >= 3")
        if not self.T > 0:
            raise InvalidConfig("T must be positive")
        if self.dt is not None and not self.dt > 0:
            raise InvalidConfig("dt must be positive")
        if not self.dt_factor > 0:
            raise InvalidConfig("dt_factor must be positive")
        if self.geometry in CLOSED_GEOMETRIES and ("start" in self.params or "end" in self.params):
            raise InvalidConfig(f"{self.geometry} generates a closed curve without endpoints")

    @property
    def closed(self) -> bool:
        return self.geometry in CLOSED_GEOMETRIES

    def with_J(self, J: int) -> "ExperimentConfig":
        return replace(self, J=J)

    def to_dict(self) -> dict:
        flow = self.flow
        speed = flow.speed if isinstance(flow.speed, str) or flow.speed is None else "custom"
        return {
            "name": self.name,
            "geometry": self.geometry,
            "params": dict(self.params),
            "J": self.J,
            "T": self.T,
            "dt": self.dt,
            "dt_factor": self.dt_factor,
            "flow": {
                "scheme": flow.scheme,
                "exact": flow.exact,
                "law": flow.law.kind,
                "beta": flow.law.beta,
                "conserved": flow.conserved,
                "speed": speed,
            },
            "stop": asdict(self.stop),
            "newton": asdict(self.newton),
            "output": asdict(self.output),
            "eliminate": self.eliminate,
            "detect_oscillation": self.detect_oscillation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {"name", "geometry", "params", "J", "T", "dt", "dt_factor", "flow", "stop",
                 "newton", "output", "eliminate", "detect_oscillation"}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        for key in ("geometry", "J", "T"):
            if key not in data:
                raise InvalidConfig(f"missing config key {key!r}")
        try:
            flow = _flow_from_dict(data.pop("flow", {}) or {})
            stop = StopConfig(**(data.pop("stop", {}) or {}))
            newton = NewtonConfig(**(data.pop("newton", {}) or {}))
            output = OutputConfig(**(data.pop("output", {}) or {}))
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from exc
        data["J"] = int(data["J"])
        data["T"] = float(data["T"])
        return cls(flow=flow, stop=stop, newton=newton, output=output, **data)


def _flow_from_dict(d: dict) -> FlowSpec:
    d = dict(d)
    unknown = set(d) - {"scheme", "exact", "law", "beta", "conserved", "speed"}
    if unknown:
        raise InvalidConfig(f"unknown flow keys: {sorted(unknown)}")
    law = SpeedLaw(d.get("law", "identity"), float(d.get("beta", 1.0)))
    return FlowSpec(
        scheme=d.get("scheme", "A"),
        exact=bool(d.get("exact", False)),
        law=law,
        conserved=bool(d.get("conserved", False)),
        speed=d.get("speed"),
    )


def parse_key_values(text: str) -> dict:
    """Nested dict from ``key = value`` lines; '#' starts a comment."""
    out: dict = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise InvalidConfig(f"line {n}: expected 'key = value'")
        raw = raw.strip()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"line {n}: {key.strip()!r} conflicts with a scalar entry")
        node[parts[-1]] = value
    return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
    else:
        data = parse_key_values(text)
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
