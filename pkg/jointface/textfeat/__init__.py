"""
JointFace — Text Features Package
Re-exports for convenience.
"""
from jointface.textfeat.alignment import WordAlignment, WordEntry, dump_alignment, load_alignment
from jointface.textfeat.frames import TextFrames, expand_to_frames, smooth_frames, text_features
from jointface.textfeat.providers import (
    EmbeddingProvider,
    FileEmbeddingProvider,
    PseudoEmbeddingProvider,
    file_embedding_provider,
    pseudo_embedding_provider,
    read_embedding_file,
    write_embedding_file,
)
