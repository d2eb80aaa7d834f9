"""
JointFace — Checkpoints

A checkpoint is a directory:

    manifest.json          format version, architecture, fusion mode, seed,
                           optimizer hyperparameters, one entry per tensor
    <param name>.tns       one TNS1 file per network parameter

TNS1 (little-endian):

    4       magic "TNS1"
    1       rank (u8)
    4·rank  dims (u32 each)
    ...     float32 payload, row-major

The manifest carries a sha256 per tensor file and no timestamps, so two runs
with the same config write byte-identical checkpoints. `manifest_hash` over
the canonical manifest therefore identifies the weights too; reports embed it.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional, Union

import numpy as np
import structlog
import torch

from jointface.core.msq import decode_float_payload
from jointface.errors import CheckpointError, FormatError, JointFaceError
from jointface.model.network import FusionMode, JointFaceNet, ModelDims

logger = structlog.get_logger()

MAGIC = b"TNS1"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


# ── TNS1 codec ────────────────────────────────────

def write_tensor(array: np.ndarray, sink: BinaryIO) -> None:
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim > 255:
        raise FormatError(f"Rank {a.ndim} does not fit in a u8")
    sink.write(MAGIC + struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
    sink.write(a.tobytes())


def read_tensor(source: BinaryIO) -> np.ndarray:
    data = source.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("Not a TNS1 stream: bad magic", offset=0)
    if len(data) < 5:
        raise FormatError("Truncated TNS1 header", offset=len(data))
    rank = data[4]
    header_end = 5 + 4 * rank
    if len(data) < header_end:
        raise FormatError("Truncated TNS1 dims", offset=len(data))
    shape = struct.unpack_from(f"<{rank}I", data, 5)
    count = int(np.prod(shape, dtype=np.int64))
    values = decode_float_payload(data, header_end, count, "tensor")
    if len(data) != header_end + 4 * count:
        raise FormatError("Trailing bytes after TNS1 payload", offset=header_end + 4 * count)
    return values.reshape(shape).copy()


# ── Manifest ──────────────────────────────────────

def _canonical(manifest: Dict[str, Any]) -> str:
    return json.dumps(manifest, sort_keys=True, indent=2) + "\n"


def manifest_hash(manifest: Union[Dict[str, Any], PathLike]) -> str:
    """sha256 of the canonical manifest JSON. Accepts the dict or a checkpoint directory."""
    if not isinstance(manifest, dict):
        manifest = _read_manifest(Path(manifest))
    return hashlib.sha256(_canonical(manifest).encode()).hexdigest()


def _read_manifest(directory: Path) -> Dict[str, Any]:
    path = directory / MANIFEST_NAME
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise CheckpointError(f"No {MANIFEST_NAME} in {directory}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Corrupt checkpoint manifest {path}: {e.msg}") from e


@dataclass
class Checkpoint:
    model: JointFaceNet
    manifest: Dict[str, Any]
    hash: str

    @property
    def seed(self) -> Optional[int]:
        return self.manifest.get("seed")


def save_checkpoint(
    model: JointFaceNet,
    directory: PathLike,
    seed: Optional[int] = None,
    optimizer: Optional[Dict[str, float]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """Write the checkpoint directory and return its manifest hash."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    tensors = []
    for name, p in model.named_parameters():
        filename = f"{name}.tns"
        path = out / filename
        with open(path, "wb") as f:
            write_tensor(p.detach().cpu().numpy(), f)
        tensors.append({
            "name": name,
            "file": filename,
            "shape": list(p.shape),
            "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
        })

    manifest = {
        "format_version": FORMAT_VERSION,
        "architecture": model.dims.to_dict(),
        "speakers": model.dims.speakers,
        "vertices": model.dims.vertices,
        "fusion_mode": model.fusion_mode.value,
        "seed": seed,
        "optimizer": optimizer or {},
        "tensors": tensors,
    }
    if extra:
        manifest["extra"] = extra
    (out / MANIFEST_NAME).write_text(_canonical(manifest))

    digest = manifest_hash(manifest)
    logger.info("checkpoint_saved", path=str(out), tensors=len(tensors), manifest_hash=digest[:16])
    return digest


def load_checkpoint(
    directory: PathLike,
    vertices: Optional[int] = None,
    speakers: Optional[int] = None,
) -> Checkpoint:
    """
    Rebuild the network from a checkpoint directory.

    `vertices` / `speakers`, when given, must match what the checkpoint was
    trained for; a mismatch is a CheckpointError.
    """
    root = Path(directory)
    manifest = _read_manifest(root)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format version {manifest.get('format_version')}")

    try:
        arch = dict(manifest["architecture"])
        arch["dilations"] = tuple(arch["dilations"])
        dims = ModelDims(**arch)
        mode = FusionMode.parse(manifest["fusion_mode"])
    except (KeyError, TypeError, JointFaceError) as e:
        raise CheckpointError(f"Checkpoint manifest is incomplete or invalid: {e}") from e

    if vertices is not None and vertices != dims.vertices:
        raise CheckpointError(f"Checkpoint predicts {dims.vertices} vertices, template has {vertices}")
    if speakers is not None and speakers != dims.speakers:
        raise CheckpointError(f"Checkpoint was trained for {dims.speakers} speakers, got {speakers}")

    model = JointFaceNet(dims, mode, seed=None)
    params = dict(model.named_parameters())
    listed = {t["name"] for t in manifest["tensors"]}
    if listed != set(params):
        missing = sorted(set(params) - listed)
        unknown = sorted(listed - set(params))
        raise CheckpointError(f"Checkpoint tensors do not match the architecture: missing={missing} unknown={unknown}")

    with torch.no_grad():
        for entry in manifest["tensors"]:
            path = root / entry["file"]
            try:
                with open(path, "rb") as f:
                    array = read_tensor(f)
            except FileNotFoundError:
                raise CheckpointError(f"Missing tensor file {path}") from None
            except FormatError as e:
                raise CheckpointError(f"{path}: {e}") from e
            p = params[entry["name"]]
            if tuple(array.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"Tensor {entry['name']} has shape {array.shape}, architecture needs {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(array))

    model.eval()
    digest = manifest_hash(manifest)
    logger.info("checkpoint_loaded", path=str(root), fusion_mode=mode.value, manifest_hash=digest[:16])
    return Checkpoint(model, manifest, digest)
