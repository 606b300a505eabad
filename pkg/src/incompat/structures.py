"""Compatibility structures.

A :class:`StructureSpec` lists the branches of a convex decomposition of a
group of measurements. In each branch (a :class:`CompatPattern`) one subset
of the group must admit a joint parent measurement, while the remaining group
members only have to be valid measurements. Indices are 0-based in the
library; the config mini-syntax (``pairs(1,2,3)``) is 1-based.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence


class StructureError(ValueError):
    """Malformed or unsupported compatibility structure."""


def _index_tuple(indices: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(int(i) for i in indices))
    if len(set(out)) != len(out):
        raise StructureError(f"duplicate index in {list(indices)}")
    if any(i < 0 for i in out):
        raise StructureError(f"negative index in {list(out)}")
    return out


@dataclass(frozen=True, order=True)
class CompatPattern:
    """One branch: ``compatible`` subsets share parents, ``free`` are unconstrained."""

    compatible: tuple[tuple[int, ...], ...]
    free: tuple[int, ...] = ()

    def __post_init__(self):
        subsets = tuple(sorted(_index_tuple(s) for s in self.compatible))
        if not subsets or any(len(s) == 0 for s in subsets):
            raise StructureError("a pattern needs at least one nonempty compatible subset")
        if len(set(subsets)) != len(subsets):
            raise StructureError(f"duplicate compatible subset in {subsets}")
        free = _index_tuple(self.free)
        used = {i for s in subsets for i in s}
        if used & set(free):
            raise StructureError("an index cannot be both compatible and free")
        object.__setattr__(self, "compatible", subsets)
        object.__setattr__(self, "free", free)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(sorted({i for s in self.compatible for i in s} | set(self.free)))

    @property
    def subset(self) -> tuple[int, ...]:
        """The single compatible subset (multi-subset patterns are unsupported)."""
        if len(self.compatible) != 1:
            raise StructureError(
                "patterns with several compatible subsets are not supported by the builder"
            )
        return self.compatible[0]

    def label(self, one_based: bool = False) -> str:
        shift = 1 if one_based else 0
        return ";".join(",".join(str(i + shift) for i in s) for s in self.compatible)

    def to_dict(self) -> dict:
        return {"compatible": [list(s) for s in self.compatible], "free": list(self.free)}


@dataclass(frozen=True)
class StructureSpec:
    """Patterns over a measurement group, with optional pinned probabilities."""

    group: tuple[int, ...]
    patterns: tuple[CompatPattern, ...]
    pins: tuple[tuple[CompatPattern, float], ...] = field(default=())

    def __post_init__(self):
        group = _index_tuple(self.group)
        if not group:
            raise StructureError("empty measurement group")
        patterns = tuple(self.patterns)
        if len(set(patterns)) != len(patterns):
            raise StructureError("duplicate pattern")
        for p in patterns:
            if not set(p.indices) <= set(group):
                raise StructureError(f"pattern {p.compatible} references indices outside {group}")
        pins = tuple(sorted(((p, float(v)) for p, v in self.pins), key=lambda t: patterns.index(t[0])
                            if t[0] in patterns else -1))
        seen = set()
        for p, v in pins:
            if p not in patterns:
                raise StructureError(f"pinned pattern {p.compatible} is not part of the structure")
            if p in seen:
                raise StructureError(f"pattern {p.compatible} pinned twice")
            seen.add(p)
            if not 0.0 <= v <= 1.0:
                raise StructureError(f"pinned probability {v} outside [0, 1]")
        if sum(v for _, v in pins) > 1.0 + 1e-12:
            raise StructureError("pinned probabilities sum to more than 1")
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "pins", pins)

    @property
    def pinned(self) -> dict[CompatPattern, float]:
        return dict(self.pins)

    @property
    def active_patterns(self) -> tuple[CompatPattern, ...]:
        """Patterns that can carry weight (everything not pinned to zero)."""
        pinned = self.pinned
        return tuple(p for p in self.patterns if pinned.get(p, None) != 0.0)

    def find(self, subset: Sequence[int]) -> CompatPattern:
        key = _index_tuple(subset)
        for p in self.patterns:
            if key in p.compatible:
                return p
        raise StructureError(f"no pattern with compatible subset {list(key)}")

    def to_dict(self) -> dict:
        return {
            "group": list(self.group),
            "patterns": [p.to_dict() for p in self.patterns],
            "pins": [{"pattern": p.to_dict(), "prob": v} for p, v in self.pins],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def pairwise_patterns(group: Sequence[int]) -> StructureSpec:
    """One pattern per unordered pair of the group, other members free."""
    g = _index_tuple(group)
    if len(g) < 2:
        raise StructureError("pairwise patterns need a group of at least two measurements")
    patterns = tuple(
        CompatPattern(((s, t),), tuple(i for i in g if i not in (s, t))) for s, t in combinations(g, 2)
    )
    return StructureSpec(g, patterns)


def full_pattern(group: Sequence[int]) -> StructureSpec:
    """Single pattern requiring the whole group to be jointly measurable."""
    g = _index_tuple(group)
    return StructureSpec(g, (CompatPattern((g,)),))


def pin(spec: StructureSpec, pattern: CompatPattern | Sequence[int], prob: float) -> StructureSpec:
    """Return ``spec`` with the pattern's probability fixed to ``prob``."""
    if not isinstance(pattern, CompatPattern):
        pattern = spec.find(pattern)
    if pattern not in spec.patterns:
        raise StructureError(f"unknown pattern {pattern.compatible}")
    pins = tuple((p, v) for p, v in spec.pins if p != pattern) + ((pattern, float(prob)),)
    return StructureSpec(spec.group, spec.patterns, pins)


def unpin(spec: StructureSpec, pattern: CompatPattern | Sequence[int]) -> StructureSpec:
    if not isinstance(pattern, CompatPattern):
        pattern = spec.find(pattern)
    return StructureSpec(spec.group, spec.patterns, tuple((p, v) for p, v in spec.pins if p != pattern))


def add_pattern(spec: StructureSpec, pattern: CompatPattern) -> StructureSpec:
    group = tuple(sorted(set(spec.group) | set(pattern.indices)))
    return StructureSpec(group, spec.patterns + (pattern,), spec.pins)


def group_count(m: int, n: int) -> int:
    """Number of n-measurement groups among m measurements."""
    return math.comb(m, n)


def groups(m: int, n: int) -> list[tuple[int, ...]]:
    return list(combinations(range(m), n))


_CALL_RE = re.compile(r"^\s*(pairs|full)\s*\(\s*([0-9,\s]*)\)\s*$")


def _one_based(indices: Iterable, m: int | None) -> tuple[int, ...]:
    out = []
    for i in indices:
        if isinstance(i, bool) or int(i) != i:
            raise StructureError(f"index {i!r} is not an integer")
        i = int(i)
        if i < 1 or (m is not None and i > m):
            raise StructureError(f"index {i} out of range 1..{m}")
        out.append(i - 1)
    return tuple(out)


def parse_structure(config, m: int | None = None) -> StructureSpec:
    """Parse the config mini-syntax (1-based indices).

    Accepted forms: ``"pairs(1,2,3)"``, ``"full(1,2,3)"``, a single pattern
    ``{"compatible": [[1, 2]], "free": [3]}``, or an object
    ``{"patterns": [...], "group": [...], "pin": {"[1,2]": 0.0}}`` whose
    patterns are any of the above (calls are expanded and merged).
    """
    if isinstance(config, str):
        match = _CALL_RE.match(config)
        if not match:
            raise StructureError(f"cannot parse structure {config!r}")
        kind, body = match.groups()
        idx = _one_based([int(t) for t in body.split(",") if t.strip()], m)
        return pairwise_patterns(idx) if kind == "pairs" else full_pattern(idx)
    if not isinstance(config, Mapping):
        raise StructureError(f"structure must be a string or object, got {type(config).__name__}")
    if "compatible" in config:
        compat = tuple(_one_based(s, m) for s in config["compatible"])
        free = _one_based(config.get("free", []), m)
        pattern = CompatPattern(compat, free)
        group = _one_based(config["group"], m) if "group" in config else pattern.indices
        free = tuple(i for i in group if i not in {j for s in compat for j in s})
        pattern = CompatPattern(compat, free)
        spec = StructureSpec(group, (pattern,))
    elif "patterns" in config:
        parts = [parse_structure(p, m) for p in config["patterns"]]
        if not parts:
            raise StructureError("empty pattern list")
        group = (
            _one_based(config["group"], m)
            if "group" in config
            else tuple(sorted({i for s in parts for i in s.group}))
        )
        patterns: list[CompatPattern] = []
        for part in parts:
            for p in part.patterns:
                used = {i for s in p.compatible for i in s}
                p = CompatPattern(p.compatible, tuple(i for i in group if i not in used))
                if p not in patterns:
                    patterns.append(p)
        spec = StructureSpec(_index_tuple(group), tuple(patterns))
    else:
        raise StructureError('structure object needs "compatible" or "patterns"')
    pins = config.get("pin", {})
    if not isinstance(pins, Mapping):
        raise StructureError('"pin" must map "[i,j]" keys to probabilities')
    for key, prob in pins.items():
        try:
            subset = json.loads(key)
        except json.JSONDecodeError as exc:
            raise StructureError(f"bad pin key {key!r}") from exc
        spec = pin(spec, _one_based(subset, m), float(prob))
    return spec
