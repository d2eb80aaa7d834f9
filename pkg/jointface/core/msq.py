"""
JointFace — MSQ1 Mesh Sequence Format

Layout (all little-endian):

    offset  size  field
    0       4     magic "MSQ1"
    4       2     format version (u16) = 1
    6       2     frame rate (u16)
    8       4     T, frame count (u32)
    12      4     V, vertex count (u32)
    16      T·V·12  float32 payload, frame-major, then vertex-major, then x, y, z

Round trips are bit-exact. Vertex positions only; no topology, no compression.
A template mesh is stored as a one-frame MSQ1 file.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import structlog

from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.errors import FormatError, InputError

logger = structlog.get_logger()

MAGIC = b"MSQ1"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")
HEADER_SIZE = _HEADER.size  # 16

PathLike = Union[str, Path]


def write_mesh_sequence(seq: MeshSequence, destination: BinaryIO) -> None:
    if seq.frame_count < 1:
        raise InputError("Refusing to write an empty mesh sequence")
    destination.write(_HEADER.pack(MAGIC, VERSION, seq.frame_rate, seq.frame_count, seq.vertex_count))
    destination.write(np.ascontiguousarray(seq.vertices, dtype="<f4").tobytes())


def decode_float_payload(data: bytes, start: int, count: int, what: str) -> np.ndarray:
    """Decode `count` float32 LE values at `start`, rejecting truncation and non-finite values."""
    end = start + 4 * count
    if len(data) < end:
        raise FormatError(f"Truncated {what} payload: expected {4 * count} bytes", offset=len(data))
    values = np.frombuffer(data, dtype="<f4", count=count, offset=start)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError(f"Non-finite float in {what} payload", offset=start + 4 * int(bad[0]))
    return values


def read_mesh_sequence(source: BinaryIO) -> MeshSequence:
    data = source.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("Not an MSQ1 stream: bad magic", offset=0)
    if len(data) < HEADER_SIZE:
        raise FormatError("Truncated MSQ1 header", offset=len(data))

    _, version, frame_rate, frames, vertices = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise FormatError(f"Unsupported MSQ1 version {version}", offset=4)
    if frame_rate == 0:
        raise FormatError("Frame rate must be positive", offset=6)
    if frames == 0:
        raise FormatError("Frame count must be positive", offset=8)
    if vertices == 0:
        raise FormatError("Vertex count must be positive", offset=12)

    count = frames * vertices * 3
    payload = decode_float_payload(data, HEADER_SIZE, count, "mesh")
    if len(data) != HEADER_SIZE + 4 * count:
        raise FormatError("Trailing bytes after MSQ1 payload", offset=HEADER_SIZE + 4 * count)

    return MeshSequence(payload.reshape(frames, vertices, 3), frame_rate)


# ── File conveniences ─────────────────────────────

def save_mesh_sequence(seq: MeshSequence, path: PathLike) -> None:
    with open(path, "wb") as f:
        write_mesh_sequence(seq, f)
    logger.debug("mesh_sequence_written", path=str(path), frames=seq.frame_count, vertices=seq.vertex_count)


def load_mesh_sequence(path: PathLike) -> MeshSequence:
    with open(path, "rb") as f:
        return read_mesh_sequence(f)


def save_template(template: TemplateMesh, path: PathLike, frame_rate: int = 25) -> None:
    save_mesh_sequence(template.repeated(1, frame_rate), path)


def load_template(path: PathLike) -> TemplateMesh:
    seq = load_mesh_sequence(path)
    if seq.frame_count != 1:
        raise FormatError(f"Template file must hold exactly one frame, found {seq.frame_count}", offset=8)
    return TemplateMesh(seq.vertices[0])
