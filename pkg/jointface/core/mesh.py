"""
JointFace — Mesh Types

The model predicts per-frame vertex offsets; a face animation is those offsets
added to a neutral template mesh.

    TemplateMesh    V × 3        neutral face, float32
    MeshSequence    T × V × 3    animation (ground truth Y or prediction), float32
    OffsetSequence  T × V × 3    displacement from the template, float64

Mesh coordinates are float32 because that is what the MSQ1 format stores.
Offsets are held in float64 so that subtracting and re-adding a float32
template is exact, which keeps to_offsets / from_offsets true inverses.
Coordinates carry no physical unit ("model units").
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from jointface.config import FRAME_RATE
from jointface.errors import DimensionError, InputError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _require_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise InputError(f"{what} contains non-finite coordinates")


@dataclass(frozen=True)
class TemplateMesh:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float32)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
            raise DimensionError(f"Template must be V×3 with V ≥ 1, got shape {v.shape}")
        _require_finite(v, "Template")
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    def repeated(self, frame_count: int, frame_rate: int = FRAME_RATE) -> "MeshSequence":
        """The template held still for `frame_count` frames."""
        return MeshSequence(np.broadcast_to(self.vertices, (frame_count,) + self.vertices.shape), frame_rate)


@dataclass(frozen=True)
class MeshSequence:
    vertices: np.ndarray
    frame_rate: int = FRAME_RATE

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float32)
        if v.ndim != 3 or v.shape[2] != 3:
            raise DimensionError(f"Mesh sequence must be T×V×3, got shape {v.shape}")
        if v.shape[0] < 1:
            raise InputError("Mesh sequence needs at least one frame")
        if v.shape[1] < 1:
            raise InputError("Mesh sequence needs at least one vertex")
        if not 0 < int(self.frame_rate) < 2 ** 16:
            raise InputError(f"Frame rate {self.frame_rate} out of range")
        _require_finite(v, "Mesh sequence")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "frame_rate", int(self.frame_rate))

    @property
    def frame_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MeshSequence):
            return NotImplemented
        return self.frame_rate == other.frame_rate and np.array_equal(self.vertices, other.vertices)

    __hash__ = None


@dataclass(frozen=True)
class OffsetSequence:
    offsets: np.ndarray
    frame_rate: int = FRAME_RATE

    def __post_init__(self):
        o = np.array(self.offsets, dtype=np.float64)
        if o.ndim != 3 or o.shape[2] != 3 or o.shape[0] < 1 or o.shape[1] < 1:
            raise DimensionError(f"Offsets must be T×V×3 with T, V ≥ 1, got shape {o.shape}")
        _require_finite(o, "Offset sequence")
        object.__setattr__(self, "offsets", _frozen(o))

    @property
    def frame_count(self) -> int:
        return self.offsets.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.offsets.shape[1]

    def magnitudes(self) -> np.ndarray:
        """Per-frame, per-vertex displacement length, T × V."""
        return np.linalg.norm(self.offsets, axis=2)


def _check_vertex_count(count: int, template: TemplateMesh) -> None:
    if count != template.vertex_count:
        raise DimensionError(
            f"Vertex count mismatch: sequence has {count}, template has {template.vertex_count}"
        )


def to_offsets(seq: MeshSequence, template: TemplateMesh) -> OffsetSequence:
    _check_vertex_count(seq.vertex_count, template)
    offsets = seq.vertices.astype(np.float64) - template.vertices.astype(np.float64)[None, :, :]
    return OffsetSequence(offsets, seq.frame_rate)


def from_offsets(offsets: OffsetSequence, template: TemplateMesh) -> MeshSequence:
    _check_vertex_count(offsets.vertex_count, template)
    vertices = offsets.offsets + template.vertices.astype(np.float64)[None, :, :]
    return MeshSequence(vertices.astype(np.float32), offsets.frame_rate)
