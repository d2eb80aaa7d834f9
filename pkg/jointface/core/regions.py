"""
JointFace — Face Region Masks

Upper/lower vertex split used by the region error tables and the correlation
analysis. Masks are explicit data (JSON) rather than inferred from geometry:

    {"upper": [0, 1, 2, ...], "lower": [169, 170, ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from jointface.errors import ConfigurationError, FormatError


@dataclass(frozen=True)
class RegionMask:
    upper: frozenset
    lower: frozenset

    def __init__(self, upper: Iterable[int], lower: Iterable[int]):
        up = frozenset(int(i) for i in upper)
        low = frozenset(int(i) for i in lower)
        if not up or not low:
            raise ConfigurationError("Both face regions must contain at least one vertex")
        if up & low:
            raise ConfigurationError(f"Regions overlap on {len(up & low)} vertices")
        if min(min(up), min(low)) < 0:
            raise ConfigurationError("Region vertex indices must be non-negative")
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "lower", low)

    @property
    def max_index(self) -> int:
        return max(max(self.upper), max(self.lower))

    def check_vertex_count(self, vertex_count: int) -> None:
        if self.max_index >= vertex_count:
            raise ConfigurationError(
                f"Region index {self.max_index} out of range for a {vertex_count}-vertex mesh"
            )

    def upper_indices(self) -> np.ndarray:
        return np.array(sorted(self.upper), dtype=np.int64)

    def lower_indices(self) -> np.ndarray:
        return np.array(sorted(self.lower), dtype=np.int64)

    def to_dict(self) -> dict:
        return {"upper": sorted(self.upper), "lower": sorted(self.lower)}


def load_region_mask(source: IO, vertex_count: Optional[int] = None) -> RegionMask:
    try:
        raw = json.load(source)
    except json.JSONDecodeError as e:
        raise FormatError(f"Region mask is not valid JSON: {e.msg}", offset=e.pos) from e
    if not isinstance(raw, dict) or set(raw) != {"upper", "lower"}:
        raise FormatError("Region mask must be an object with exactly 'upper' and 'lower' lists")
    if not all(isinstance(raw[k], list) and all(isinstance(i, int) for i in raw[k]) for k in raw):
        raise FormatError("Region mask lists must contain integer vertex indices")
    mask = RegionMask(raw["upper"], raw["lower"])
    if vertex_count is not None:
        mask.check_vertex_count(vertex_count)
    return mask


def write_region_mask(mask: RegionMask, sink: IO) -> None:
    json.dump(mask.to_dict(), sink)
