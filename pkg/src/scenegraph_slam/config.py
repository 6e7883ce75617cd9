"""One JSON run configuration covering every module's thresholds."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .atlas import AssociationConfig
from .evaluation import EvalConfig
from .optim import FactorConfig, SolverConfig
from .recognition import RecognitionConfig
from .structure import StructuralConfig
from .synthetic import CameraConfig, NoiseModel


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


SECTIONS = {
    "recognition": RecognitionConfig,
    "association": AssociationConfig,
    "structural": StructuralConfig,
    "factors": FactorConfig,
    "solver": SolverConfig,
    "noise": NoiseModel,
    "camera": CameraConfig,
    "evaluation": EvalConfig,
}


@dataclass
class RunConfig:
    seed: int | None = None
    recognition: RecognitionConfig = field(default_factory=RecognitionConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    structural: StructuralConfig = field(default_factory=StructuralConfig)
    factors: FactorConfig = field(default_factory=FactorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    camera: CameraConfig = field(default_factory=CameraConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        for name in SECTIONS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "expected a JSON object")
        for key in doc:
            if key != "seed" and key not in SECTIONS:
                raise ConfigError(f"config.{key}", "unknown key")
        seed = doc.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError("config.seed", "expected an integer or null")
        kwargs = {"seed": seed}
        for name, klass in SECTIONS.items():
            kwargs[name] = _section(klass, doc.get(name, {}), f"config.{name}")
        return cls(**kwargs)


def _coerce(value, default, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(path, f"expected a list of {len(default)} numbers")
        return tuple(_coerce(v, d, f"{path}[{i}]") for i, (v, d) in enumerate(zip(value, default)))
    return value


def _section(klass, doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    defaults = klass()
    known = {f.name for f in fields(klass)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown key")
    kwargs = {k: _coerce(v, getattr(defaults, k), f"{path}.{k}") for k, v in doc.items()}
    try:
        return klass(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply ``section.key=value``; the value is parsed as JSON, else kept as a string."""
    if "=" not in assignment:
        raise ConfigError("--set", f"expected KEY=VALUE, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = doc
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"config.{key}", "cannot descend into a non-object")
        node = nxt
    node[parts[-1]] = value
    return doc


def load_config(path=None, overrides=()) -> RunConfig:
    doc: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(str(p), "config file not found")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(str(p), f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(str(p), "expected a JSON object")
    for a in overrides:
        apply_override(doc, a)
    return RunConfig.from_dict(doc)
