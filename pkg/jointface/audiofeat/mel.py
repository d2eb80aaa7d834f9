"""
JointFace — Mel Features (X^a)

One 128-channel dB mel vector per video frame:

    audio ──resample 16 kHz──▶ STFT (1024 Hann, centered, reflect) ──▶ |·|²
          ──▶ 128 triangular mel filters (HTK scale, 0 Hz..Nyquist)
          ──▶ 10·log10(power / 1.0), floored at −80 dB
          ──▶ first floor(N / hop) frames, truncated or floor-padded to T

hop = 16000 / frame_rate samples (640 at 25 fps), so analysis frame t is
centered on video frame t. The dB reference is a constant, not the clip
maximum, so louder audio always gives larger values across clips.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import librosa
import numpy as np

from jointface.audiofeat.wav import AudioClip, resample_linear
from jointface.config import FRAME_RATE, MEL_CHANNELS, SAMPLE_RATE
from jointface.errors import DimensionError, InputError

N_FFT = 1024
WINDOW = "hann"
DB_REFERENCE = 1.0
DB_FLOOR = -80.0
_AMIN = 10.0 ** (DB_FLOOR / 10.0)


@dataclass(frozen=True)
class MelFrames:
    values: np.ndarray   # T × 128, dB

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != MEL_CHANNELS:
            raise DimensionError(f"Mel frames must be T×{MEL_CHANNELS}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("Mel frames contain non-finite values")
        if np.any(v < DB_FLOOR):
            raise InputError(f"Mel frames fall below the {DB_FLOOR} dB floor")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def hop_length(frame_rate: int = FRAME_RATE) -> int:
    if frame_rate <= 0 or SAMPLE_RATE % frame_rate:
        raise InputError(f"Frame rate {frame_rate} does not divide {SAMPLE_RATE} Hz into whole hops")
    return SAMPLE_RATE // frame_rate


def _mel_basis() -> np.ndarray:
    with warnings.catch_warnings():
        # Low filters are narrower than one FFT bin at this resolution and stay empty.
        warnings.simplefilter("ignore", UserWarning)
        return librosa.filters.mel(
            sr=SAMPLE_RATE, n_fft=N_FFT, n_mels=MEL_CHANNELS,
            fmin=0.0, fmax=SAMPLE_RATE / 2.0, htk=True, norm=None, dtype=np.float64,
        )


def mel_band_edges() -> np.ndarray:
    """Frequencies (Hz) of the 130 triangle corners; channel m spans edges[m]..edges[m+2]."""
    return librosa.mel_frequencies(n_mels=MEL_CHANNELS + 2, fmin=0.0, fmax=SAMPLE_RATE / 2.0, htk=True)


def mel_features(audio: AudioClip, frame_rate: int = FRAME_RATE, target_frames: int = 1) -> MelFrames:
    if audio.samples.size == 0:
        raise InputError("Cannot extract features from empty audio")
    if target_frames < 1:
        raise InputError(f"target_frames must be ≥ 1, got {target_frames}")

    hop = hop_length(frame_rate)
    y = resample_linear(audio.samples, audio.sample_rate, SAMPLE_RATE)
    raw_frames = y.size // hop

    out = np.full((target_frames, MEL_CHANNELS), DB_FLOOR, dtype=np.float64)
    if raw_frames > 0:
        spectrum = librosa.stft(
            y, n_fft=N_FFT, hop_length=hop, win_length=N_FFT,
            window=WINDOW, center=True, pad_mode="reflect",
        )
        power = np.abs(spectrum[:, :raw_frames]) ** 2
        mel_power = _mel_basis() @ power
        db = librosa.power_to_db(mel_power, ref=DB_REFERENCE, amin=_AMIN, top_db=None)
        db = np.maximum(db, DB_FLOOR).T
        keep = min(raw_frames, target_frames)
        out[:keep] = db[:keep]

    return MelFrames(out)


def analysis_parameters(frame_rate: int = FRAME_RATE) -> dict:
    """Everything that determines the features, recorded in cache headers."""
    return {
        "sample_rate": SAMPLE_RATE,
        "n_fft": N_FFT,
        "hop_length": hop_length(frame_rate),
        "n_mels": MEL_CHANNELS,
        "window": WINDOW,
        "db_reference": DB_REFERENCE,
        "db_floor": DB_FLOOR,
    }
