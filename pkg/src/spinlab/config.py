"""Experiment files: JSON-compatible documents validated before any computation.

JSON is the canonical format; YAML is also read. Line numbers for schema and
semantic errors come from the YAML composer, which accepts JSON text.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .engine import DEFAULT_PAIRS, DEFAULT_RUNS, RunConfig, SamplingMode
from .errors import ConfigError, DomainError
from .geometry import Direction, SmearingKind, parse_angle, parse_direction
from .models import model_from_name
from .quantum import AnalyzerSpec, SettingPair

_ANGLE = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*(deg|rad|°)?\s*$"},
    ]
}
_EPS = {"type": "number", "minimum": 0, "maximum": 2}
_ETA = {"type": "number", "minimum": 0, "maximum": 1}
_KIND = {"enum": [k.value for k in SmearingKind]}

_ANALYZER = {
    "type": "object",
    "additionalProperties": False,
    "required": ["orientation"],
    "properties": {
        "orientation": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["theta"],
                    "properties": {"theta": _ANGLE, "phi": _ANGLE},
                },
            ]
        },
        "epsilon": _EPS,
        "smearing": _KIND,
        "eta": _ETA,
    },
}

_LOCAL_ANALYZER = {"epsilon": _EPS, "smearing": _KIND, "eta": _ETA}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "pairs_per_run": {"type": "integer", "minimum": 1},
        "runs": {"type": "integer", "minimum": 1},
        "mode": {"enum": [m.value for m in SamplingMode]},
        "workers": {"type": "integer", "minimum": 1},
        "record_pairs": {"type": "boolean"},
        "analyzers": {"type": "object", "additionalProperties": _ANALYZER},
        "settings": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "herbert": {
            "type": "object",
            "additionalProperties": False,
            "required": ["thetas"],
            "properties": {
                "thetas": {"type": "array", "items": _ANGLE, "minItems": 1},
                "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                **_LOCAL_ANALYZER,
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "steps"],
            "properties": {"start": _ANGLE, "stop": _ANGLE, "steps": {"type": "integer"}, **_LOCAL_ANALYZER},
        },
    },
}

Path_ = tuple[Any, ...]


def _line_map(node: yaml.Node, path: Path_ = (), out: dict[Path_, int] | None = None) -> dict[Path_, int]:
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


@dataclass
class ExperimentFile:
    """A parsed experiment document plus where each field came from."""

    data: dict[str, Any]
    source: str = "<config>"
    lines: dict[Path_, int] = field(default_factory=dict)

    @classmethod
    def loads(cls, text: str, source: str = "<config>") -> ExperimentFile:
        data: Any
        if text.lstrip().startswith("{"):
            # strict JSON first: the YAML 1.1 resolver reads 1e-3 as a string
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{source}:{exc.lineno}: {exc.msg}") from None
        else:
            try:
                data = yaml.safe_load(text)
            except yaml.MarkedYAMLError as exc:
                line = exc.problem_mark.line + 1 if exc.problem_mark else 0
                raise ConfigError(f"{source}:{line}: {exc.problem}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{source}:1: experiment file must be a mapping")
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            lines = _line_map(node) if node is not None else {}
        except yaml.YAMLError:
            lines = {}
        doc = cls(data, source, lines)
        doc.validate()
        return doc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentFile:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read: {exc.strerror}") from None
        return cls.loads(text, str(p))

    def error(self, path: Path_, message: str) -> ConfigError:
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                return ConfigError(f"{self.source}:{self.lines[path[:cut]]}: {message}")
        return ConfigError(f"{self.source}: {message}")

    def validate(self) -> None:
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(self.data), key=lambda e: self._error_line(e))
        if errors:
            e = errors[0]
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise self.error(self._error_path(e), f"{where}: {e.message}")
        self._check_semantics()

    def _error_path(self, e: jsonschema.ValidationError) -> Path_:
        path = tuple(e.absolute_path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            allowed = set(e.schema.get("properties", {}))
            extra = sorted(str(k) for k in e.instance if k not in allowed)
            if extra:
                return path + (extra[0],)
        return path

    def _error_line(self, e: jsonschema.ValidationError) -> int:
        path = self._error_path(e)
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                return self.lines[path[:cut]]
        return 0

    def _check_semantics(self) -> None:
        try:
            model_from_name(self.data["model"])
        except ConfigError as exc:
            raise self.error(("model",), str(exc)) from None
        names = set(self.data.get("analyzers", {}))
        for i, pair in enumerate(self.data.get("settings", [])):
            for j, name in enumerate(pair):
                if name not in names:
                    raise self.error(("settings", i, j), f"unknown analyzer {name!r}")
        for name, spec in self.data.get("analyzers", {}).items():
            try:
                self.analyzer(name)
            except DomainError as exc:
                raise self.error(("analyzers", name), str(exc)) from None
        for key in ("herbert", "scan"):
            section = self.data.get(key)
            if not section:
                continue
            for sub in ("start", "stop"):
                if sub in section:
                    self._angle((key, sub), section[sub])
            for i, t in enumerate(section.get("thetas", [])):
                theta = self._angle((key, "thetas", i), t)
                if theta < 0 or 2 * theta > math.pi + 1e-12:
                    raise self.error((key, "thetas", i), f"theta {t!r} needs 0 <= theta and 2*theta <= pi")
            if key == "scan" and section["steps"] < 1:
                raise self.error(("scan", "steps"), "scan grid is empty (steps must be >= 1)")

    def _angle(self, path: Path_, value: Any) -> float:
        try:
            return parse_angle(value)
        except DomainError as exc:
            raise self.error(path, str(exc)) from None

    # -- accessors ---------------------------------------------------------

    def analyzer(self, name: str) -> AnalyzerSpec:
        spec = self.data["analyzers"][name]
        orientation: Direction = parse_direction(spec["orientation"])
        return AnalyzerSpec.make(
            orientation,
            epsilon=spec.get("epsilon", 0.0),
            kind=spec.get("smearing", SmearingKind.DELTA.value),
            efficiency=spec.get("eta", 1.0),
        )

    def setting_pairs(self) -> tuple[SettingPair, ...]:
        return tuple(SettingPair(self.analyzer(a), self.analyzer(b)) for a, b in self.data.get("settings", []))

    def setting_names(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b in self.data.get("settings", [])]

    def with_overrides(self, **overrides: Any) -> ExperimentFile:
        """Copy with top-level fields replaced; ``None`` values are ignored."""
        data = copy.deepcopy(self.data)
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
        doc = ExperimentFile(data, self.source, dict(self.lines))
        doc.validate()
        return doc

    def seed(self) -> int:
        if "seed" not in self.data:
            raise self.error((), "a seed is required (set 'seed' or pass --seed)")
        return int(self.data["seed"])

    def run_config(self) -> RunConfig:
        if not self.data.get("settings"):
            raise self.error((), "at least one entry in 'settings' is required")
        return RunConfig(
            model=self.data["model"],
            settings=self.setting_pairs(),
            seed=self.seed(),
            pairs_per_run=self.data.get("pairs_per_run", DEFAULT_PAIRS),
            runs=self.data.get("runs", DEFAULT_RUNS),
            mode=SamplingMode(self.data.get("mode", SamplingMode.FRESH.value)),
            workers=self.data.get("workers", 1),
            record_pairs=self.data.get("record_pairs", False),
        )

    def local_analyzer(self, key: str) -> dict[str, Any]:
        section = self.data.get(key, {})
        return {
            "epsilon": section.get("epsilon", 0.0),
            "kind": section.get("smearing", SmearingKind.DELTA.value),
            "efficiency": section.get("eta", 1.0),
        }

    def herbert_thetas(self) -> list[float]:
        if "herbert" not in self.data:
            raise self.error((), "missing 'herbert' section with a 'thetas' list")
        return [parse_angle(t) for t in self.data["herbert"]["thetas"]]

    def scan_grid(self) -> list[float]:
        if "scan" not in self.data:
            raise self.error((), "missing 'scan' section with start, stop and steps")
        s = self.data["scan"]
        start, stop, steps = parse_angle(s["start"]), parse_angle(s["stop"]), s["steps"]
        if steps == 1:
            return [start]
        return [start + (stop - start) * i / (steps - 1) for i in range(steps)]
