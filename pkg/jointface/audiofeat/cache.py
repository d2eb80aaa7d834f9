"""
JointFace — Mel Feature Cache Layer

Every extracted mel sequence can be cached on disk so repeated training and
ablation runs do not re-run the STFT on the same audio.

Cache Strategy:
    - Key = SHA-256 over the audio samples, sample rate, frame rate, target
      frame count and every analysis parameter. Changing any of them misses.
    - Entries are MFQ1 files; they are never expired, only overwritten.
    - A disabled or failing cache degrades to recomputation (logged).

MFQ1 layout (little-endian):

    0   4   magic "MFQ1"
    4   2   format version (u16) = 1
    6   2   frame rate (u16)
    8   4   T (u32)
    12  4   channels (u32)
    16  4   sample rate (u32)
    20  4   n_fft (u32)
    24  4   hop length (u32)
    28  4   dB reference (f32)
    32  4   dB floor (f32)
    36  8   window name, ASCII, NUL-padded
    44  T·channels·4  float32 payload, frame-major

Key Schema:
    {cache_dir}/{key[:2]}/{key}.mfq
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import BinaryIO, Optional

import numpy as np
import structlog

from jointface.audiofeat.mel import MelFrames, analysis_parameters, mel_features
from jointface.audiofeat.wav import AudioClip
from jointface.config import FRAME_RATE, settings
from jointface.core.msq import decode_float_payload
from jointface.errors import FormatError

logger = structlog.get_logger()

MAGIC = b"MFQ1"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIIIff8s")
HEADER_SIZE = _HEADER.size  # 44


def write_mel_frames(mel: MelFrames, destination: BinaryIO, frame_rate: int = FRAME_RATE) -> None:
    p = analysis_parameters(frame_rate)
    destination.write(_HEADER.pack(
        MAGIC, VERSION, frame_rate, mel.frame_count, mel.channels,
        p["sample_rate"], p["n_fft"], p["hop_length"],
        p["db_reference"], p["db_floor"], p["window"].encode("ascii"),
    ))
    destination.write(np.ascontiguousarray(mel.values, dtype="<f4").tobytes())


def read_mel_frames(source: BinaryIO) -> tuple[MelFrames, dict]:
    """Returns the frames and the analysis parameters recorded in the header."""
    data = source.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("Not an MFQ1 stream: bad magic", offset=0)
    if len(data) < HEADER_SIZE:
        raise FormatError("Truncated MFQ1 header", offset=len(data))
    (_, version, frame_rate, frames, channels, sample_rate,
     n_fft, hop, db_ref, db_floor, window) = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise FormatError(f"Unsupported MFQ1 version {version}", offset=4)
    payload = decode_float_payload(data, HEADER_SIZE, frames * channels, "mel")
    params = {
        "frame_rate": frame_rate,
        "sample_rate": sample_rate,
        "n_fft": n_fft,
        "hop_length": hop,
        "n_mels": channels,
        "window": window.rstrip(b"\0").decode("ascii"),
        "db_reference": float(db_ref),
        "db_floor": float(db_floor),
    }
    return MelFrames(payload.reshape(frames, channels)), params


def _cache_key(audio: AudioClip, frame_rate: int, target_frames: int) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(audio.samples, dtype="<f8").tobytes())
    h.update(json.dumps({
        "sample_rate": audio.sample_rate,
        "frame_rate": frame_rate,
        "target_frames": target_frames,
        **analysis_parameters(frame_rate),
    }, sort_keys=True).encode("utf-8"))
    return h.hexdigest()


class FeatureCache:
    """
    Disk cache for mel features.

    Usage:
        cache = FeatureCache()          # directory from JOINTFACE_FEATURE_CACHE
        mel = cache.features(audio, frame_rate=25, target_frames=T)
    """

    def __init__(self, cache_dir: Optional[str] = None):
        directory = cache_dir if cache_dir is not None else settings.FEATURE_CACHE_DIR
        self._dir = Path(directory) if directory else None
        self._enabled = self._dir is not None
        self.hits = 0
        self.misses = 0

    @property
    def enabled(self) -> bool:
        return self._enabled

    def _path(self, key: str) -> Path:
        return self._dir / key[:2] / f"{key}.mfq"

    def get(self, audio: AudioClip, frame_rate: int, target_frames: int) -> Optional[MelFrames]:
        """Cached features, or None on a miss or when the cache is unusable."""
        if not self._enabled:
            return None
        path = self._path(_cache_key(audio, frame_rate, target_frames))
        if not path.is_file():
            return None
        try:
            with open(path, "rb") as f:
                mel, _ = read_mel_frames(f)
            if mel.frame_count != target_frames:
                logger.warning("feature_cache_stale", path=str(path))
                return None
            self.hits += 1
            logger.debug("feature_cache_hit", key=path.stem[:16])
            return mel
        except (OSError, FormatError) as e:
            logger.warning("feature_cache_read_failed", path=str(path), error=str(e))
            return None

    def set(self, audio: AudioClip, frame_rate: int, target_frames: int, mel: MelFrames) -> bool:
        if not self._enabled:
            return False
        path = self._path(_cache_key(audio, frame_rate, target_frames))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "wb") as f:
                write_mel_frames(mel, f, frame_rate)
            tmp.replace(path)
            logger.debug("feature_cache_set", key=path.stem[:16], frames=target_frames)
            return True
        except OSError as e:
            logger.warning("feature_cache_write_failed", error=str(e))
            self._enabled = False
            return False

    def features(self, audio: AudioClip, frame_rate: int, target_frames: int) -> MelFrames:
        """Cache-first feature extraction."""
        cached = self.get(audio, frame_rate, target_frames)
        if cached is not None:
            return cached
        self.misses += 1
        mel = mel_features(audio, frame_rate, target_frames)
        if self._enabled:
            # hits come back float32-rounded; misses must match them
            mel = MelFrames(mel.values.astype(np.float32))
        self.set(audio, frame_rate, target_frames, mel)
        return mel

    def stats(self) -> dict:
        return {"enabled": self._enabled, "hits": self.hits, "misses": self.misses}
