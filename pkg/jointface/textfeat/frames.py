"""
JointFace — Text Frames (X^l)

Word vectors are spread over video frames so both modalities share T:

    1. expand  — frame f takes the vector of the word whose [start, end)
                 interval contains the frame center (f + 0.5) / fps;
                 frames in pauses are zero vectors.
    2. smooth  — each frame becomes the mean of frames t−8 .. t+7, clipped to
                 the sequence (the mean is over frames that exist).

Adjacent words partition the frames between them with no gaps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from jointface.config import FRAME_RATE
from jointface.errors import InputError
from jointface.textfeat.alignment import WordAlignment
from jointface.textfeat.providers import EmbeddingProvider

SMOOTH_PAST = 8
SMOOTH_FUTURE = 7


@dataclass(frozen=True)
class TextFrames:
    values: np.ndarray   # T × dimension

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise InputError(f"Text frames must be T×D with T ≥ 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("Text frames contain non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]


def frame_centers(frame_count: int, frame_rate: float) -> np.ndarray:
    return (np.arange(frame_count, dtype=np.float64) + 0.5) / frame_rate


def expand_to_frames(
    alignment: WordAlignment,
    provider: EmbeddingProvider,
    T: int,
    frame_rate: float = FRAME_RATE,
    utterance_id: str = "",
) -> TextFrames:
    if T < 1:
        raise InputError(f"T must be ≥ 1, got {T}")
    if frame_rate <= 0:
        raise InputError(f"Frame rate must be positive, got {frame_rate}")

    centers = frame_centers(T, frame_rate)
    out = np.zeros((T, provider.dimension), dtype=np.float64)
    for index, entry in enumerate(alignment):
        covered = (centers >= entry.start) & (centers < entry.end)
        if covered.any():
            out[covered] = provider.lookup(entry.word, utterance_id, index)
    return TextFrames(out)


def smooth_frames(frames: TextFrames, past: int = SMOOTH_PAST, future: int = SMOOTH_FUTURE) -> TextFrames:
    if past < 0 or future < 0:
        raise InputError("Smoothing window extents must be non-negative")
    values = frames.values
    width = past + future + 1
    padded = np.pad(values, ((past, future), (0, 0)))
    sums = sliding_window_view(padded, width, axis=0).sum(axis=-1)
    present = np.pad(np.ones(frames.frame_count), (past, future))
    counts = sliding_window_view(present, width).sum(axis=-1)
    return TextFrames(sums / counts[:, None])


def text_features(
    alignment: WordAlignment,
    provider: EmbeddingProvider,
    T: int,
    frame_rate: float = FRAME_RATE,
    utterance_id: str = "",
) -> TextFrames:
    """expand_to_frames followed by smooth_frames: the model's text input."""
    return smooth_frames(expand_to_frames(alignment, provider, T, frame_rate, utterance_id))
