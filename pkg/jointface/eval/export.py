"""
JointFace — Text Embedding Export

Writes the text encoder's output H^l, one row per frame, for projection
elsewhere (t-SNE, UMAP):

    frame,word,e0,e1,...,e63
    0,,0.0132,...            pauses have an empty word
    1,hello,...

The word column is the word whose interval contains the frame center.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, List, Union

import numpy as np
import pandas as pd
import structlog
import torch

from jointface.config import FRAME_RATE
from jointface.errors import DimensionError, FormatError
from jointface.textfeat.alignment import WordAlignment
from jointface.textfeat.frames import frame_centers

logger = structlog.get_logger()

Destination = Union[str, Path, IO]


@dataclass(frozen=True)
class EmbeddingTable:
    frames: np.ndarray      # T, int
    words: List[str]        # T, "" in pauses
    values: np.ndarray      # T × d_l


def frame_words(alignment: WordAlignment, frame_count: int, frame_rate: int = FRAME_RATE) -> List[str]:
    words = []
    for center in frame_centers(frame_count, frame_rate):
        i = alignment.word_at(float(center))
        words.append(alignment.entries[i].word if i >= 0 else "")
    return words


def export_embeddings(h_l, alignment: WordAlignment, destination: Destination, frame_rate: int = FRAME_RATE) -> pd.DataFrame:
    values = np.asarray(h_l.detach().cpu() if isinstance(h_l, torch.Tensor) else h_l, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError(f"Text embeddings must be T×D, got shape {values.shape}")
    T, D = values.shape
    df = pd.DataFrame(values, columns=[f"e{i}" for i in range(D)])
    df.insert(0, "word", frame_words(alignment, T, frame_rate))
    df.insert(0, "frame", np.arange(T))
    df.to_csv(destination, index=False, float_format="%.9g")
    logger.info("embeddings_exported", frames=T, dimension=D)
    return df


def import_embeddings(source: Destination) -> EmbeddingTable:
    try:
        df = pd.read_csv(source, keep_default_na=False, dtype={"word": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"Embedding CSV is unreadable: {e}") from e
    value_cols = [c for c in df.columns if c.startswith("e") and c[1:].isdigit()]
    if list(df.columns[:2]) != ["frame", "word"] or not value_cols:
        raise FormatError("Embedding CSV must start with frame,word followed by e0..eN columns")
    return EmbeddingTable(
        frames=df["frame"].to_numpy(dtype=np.int64),
        words=df["word"].astype(str).tolist(),
        values=df[value_cols].to_numpy(dtype=np.float64),
    )
