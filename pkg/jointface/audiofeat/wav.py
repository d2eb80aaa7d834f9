"""
JointFace — WAV Audio I/O

Input audio is RIFF/WAVE, PCM 16-bit, mono. Samples are scaled to [-1, 1] by
dividing by 32768. Anything else (float, 8/24/32-bit, stereo) is rejected.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
from scipy.io import wavfile

from jointface.errors import FormatError, InputError

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioClip:
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise InputError(f"Sample rate must be positive, got {self.sample_rate}")
        s = np.array(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise InputError(f"Audio samples must be 1-D, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InputError("Audio samples contain non-finite values")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_audio(source: BinaryIO) -> AudioClip:
    try:
        rate, data = wavfile.read(source)
    except (ValueError, EOFError) as e:
        raise FormatError(f"Malformed WAV stream: {e}") from e
    if data.dtype != np.int16:
        raise FormatError(f"Only PCM 16-bit WAV is supported, found sample type {data.dtype}")
    if data.ndim != 1:
        raise FormatError(f"Only mono WAV is supported, found {data.shape[1]} channels")
    return AudioClip(rate, data.astype(np.float64) / PCM16_SCALE)


def write_audio(clip: AudioClip, sink: BinaryIO) -> None:
    """Quantize to PCM-16 (round to nearest, clipped) and write a mono WAV."""
    pcm = np.clip(np.round(clip.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    buffer = io.BytesIO()
    wavfile.write(buffer, clip.sample_rate, pcm)
    sink.write(buffer.getvalue())


def resample_linear(samples: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; identity when the rates already match."""
    if source_rate == target_rate:
        return np.asarray(samples, dtype=np.float64)
    n_out = int(round(samples.size * target_rate / source_rate))
    t_out = np.arange(n_out, dtype=np.float64) / target_rate
    t_in = np.arange(samples.size, dtype=np.float64) / source_rate
    return np.interp(t_out, t_in, samples)
