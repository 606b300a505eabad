"""JSON scenario files: schema, loading and bundled examples."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .linalg import HermitianOperator
from .quantum import Assembly, Measurement, mub_assembly, pauli_assembly
from .sdp import SolverOptions
from .structures import StructureSpec, parse_structure


class ConfigError(ValueError):
    """Unreadable or schema-invalid scenario."""


_NUMBER = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}]}
_PROB_VECTOR = {"type": "array", "items": _NUMBER, "minItems": 1}
_LITERAL = {
    "type": "object",
    "properties": {
        "re": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "im": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "required": ["re"],
    "additionalProperties": False,
}
_INDEX_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_PIN = {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}}
_STRUCTURE = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "properties": {
                "compatible": {"type": "array", "items": _INDEX_LIST},
                "free": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "patterns": {"type": "array"},
                "group": _INDEX_LIST,
                "pin": _PIN,
            },
            "additionalProperties": False,
        },
    ]
}

SCENARIO_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "incompat scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "assembly": {
            "oneOf": [
                {
                    "type": "object",
                    "properties": {"constructor": {"const": "pauli"}},
                    "required": ["constructor"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "constructor": {"const": "mub"},
                        "d": {"type": "integer", "minimum": 2},
                        "k": {"type": "integer", "minimum": 2},
                    },
                    "required": ["constructor", "d", "k"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "measurements": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "minItems": 1, "items": _LITERAL},
                        }
                    },
                    "required": ["measurements"],
                    "additionalProperties": False,
                },
            ]
        },
        "weights": _PROB_VECTOR,
        "outcome_priors": {"type": "array", "items": _PROB_VECTOR},
        "sharpness": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "structure": _STRUCTURE,
        "solver": {
            "type": "object",
            "properties": {
                "gap_tol": {"type": "number", "exclusiveMinimum": 0},
                "feas_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "shots": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "prep_fidelity": {"type": "number", "minimum": 0, "maximum": 1},
                "hyperplanes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "name": {"type": "string"},
                            "group": _INDEX_LIST,
                            "weights": _PROB_VECTOR,
                            "pin": _PIN,
                            "lab_value": {"type": "number"},
                            "lab_stderr": {"type": "number"},
                        },
                        "required": ["name", "group"],
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
    },
    "required": ["assembly"],
    "additionalProperties": False,
}


def as_float(value: Any) -> float:
    """Numbers or fraction strings such as ``"1/6"``."""
    if isinstance(value, str):
        return float(Fraction(value.replace(" ", "")))
    return float(value)


@dataclass
class Hyperplane:
    name: str
    group: tuple[int, ...]  # 0-based
    weights: tuple[float, ...] | None
    pins: dict[tuple[int, ...], float]
    lab_value: float | None = None
    lab_stderr: float | None = None


@dataclass
class SimulationConfig:
    shots: int = 100_000
    seed: int = 0
    prep_fidelity: float = 1.0
    hyperplanes: list[Hyperplane] = field(default_factory=list)


@dataclass
class Scenario:
    name: str
    assembly: Assembly
    structure: StructureSpec | None
    solver: SolverOptions
    simulation: SimulationConfig | None
    raw: dict


def bundled_scenarios() -> list[str]:
    root = resources.files("incompat") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def read_scenario_text(path: str | Path) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text()
    root = resources.files("incompat") / "scenarios"
    candidate = root / p.name
    if candidate.is_file():
        return candidate.read_text()
    raise ConfigError(f"scenario file not found: {path}")


def _build_assembly(doc: dict) -> Assembly:
    spec = doc["assembly"]
    if "measurements" in spec:
        meas = tuple(
            Measurement(tuple(HermitianOperator.from_literal(e) for e in effects)) for effects in spec["measurements"]
        )
        assembly = Assembly(meas)
    elif spec["constructor"] == "pauli":
        assembly = pauli_assembly()
    else:
        assembly = mub_assembly(spec["d"], spec["k"])
    if "dimension" in doc and doc["dimension"] != assembly.dim:
        raise ConfigError(f"dimension {doc['dimension']} does not match the assembly ({assembly.dim})")
    weights = [as_float(v) for v in doc["weights"]] if "weights" in doc else None
    priors = [[as_float(v) for v in row] for row in doc["outcome_priors"]] if "outcome_priors" in doc else None
    assembly = Assembly(assembly.measurements, weights, priors)
    if "sharpness" in doc:
        assembly = assembly.with_sharpness(doc["sharpness"])
    return assembly


def _pins(raw: dict, m: int) -> dict[tuple[int, ...], float]:
    out = {}
    for key, prob in raw.items():
        try:
            idx = json.loads(key)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad pin key {key!r}") from exc
        if not isinstance(idx, list) or any(not isinstance(i, int) or not 1 <= i <= m for i in idx):
            raise ConfigError(f"pin key {key!r} must list indices in 1..{m}")
        out[tuple(i - 1 for i in idx)] = float(prob)
    return out


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {exc.message}") from exc
    try:
        assembly = _build_assembly(doc)
        m = len(assembly)
        structure = parse_structure(doc["structure"], m) if "structure" in doc else None
        solver = SolverOptions(**doc.get("solver", {}))
        sim = None
        if "simulation" in doc:
            s = doc["simulation"]
            planes = []
            for h in s.get("hyperplanes", []):
                group = tuple(i - 1 for i in h["group"])
                if any(not 0 <= i < m for i in group):
                    raise ConfigError(f"hyperplane {h['name']}: group index out of range 1..{m}")
                weights = tuple(as_float(v) for v in h["weights"]) if "weights" in h else None
                if weights is not None and len(weights) != len(group):
                    raise ConfigError(f"hyperplane {h['name']}: need one weight per group member")
                planes.append(
                    Hyperplane(h["name"], group, weights, _pins(h.get("pin", {}), m), h.get("lab_value"), h.get("lab_stderr"))
                )
            sim = SimulationConfig(s.get("shots", 100_000), s.get("seed", 0), s.get("prep_fidelity", 1.0), planes)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(doc.get("name", name), assembly, structure, solver, sim, doc)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(read_scenario_text(path), Path(path).stem)
