"""
JointFace — Word Embedding Providers

The text encoder consumes one 768-dim contextual vector per word. Language
models run upstream; this module only resolves vectors:

    PseudoEmbeddingProvider   hash-seeded N(0, 1) vector per (seed, word string).
                              Same word, same vector, whatever the sentence.
    FileEmbeddingProvider     precomputed vectors keyed by (utterance id, word
                              index), so one surface word can carry different
                              vectors in different sentences.

WEM1 embedding file (little-endian):

    4   magic "WEM1"
    4   entry count (u32)
    per entry:
        2   utterance id length in bytes (u16)
        n   utterance id, UTF-8
        4   word index (u32)
        dim·4  float32 vector

The vector dimension is the provider dimension (768 for GPT-2 small).
"""
from __future__ import annotations

import hashlib
import struct
from typing import BinaryIO, Dict, Mapping, Protocol, Tuple, runtime_checkable

import numpy as np
import structlog

from jointface.config import TEXT_DIM
from jointface.core.msq import decode_float_payload
from jointface.errors import EmbeddingLookupError, FormatError

logger = structlog.get_logger()

MAGIC = b"WEM1"
EmbeddingKey = Tuple[str, int]


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Resolves a word, seen in a given sentence position, to a fixed-size vector."""

    dimension: int

    def lookup(self, word: str, utterance_id: str, word_index: int) -> np.ndarray:
        ...


class PseudoEmbeddingProvider:
    def __init__(self, seed: int = 0, dimension: int = TEXT_DIM):
        self.seed = int(seed)
        self.dimension = dimension
        self._vectors: Dict[str, np.ndarray] = {}

    def lookup(self, word: str, utterance_id: str = "", word_index: int = 0) -> np.ndarray:
        vec = self._vectors.get(word)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}\x1f{word}".encode("utf-8")).digest()
            rng = np.random.default_rng(np.frombuffer(digest, dtype="<u4"))
            vec = rng.standard_normal(self.dimension)
            vec.flags.writeable = False
            self._vectors[word] = vec
        return vec


class FileEmbeddingProvider:
    def __init__(self, vectors: Mapping[EmbeddingKey, np.ndarray], dimension: int = TEXT_DIM):
        self.dimension = dimension
        self._vectors: Dict[EmbeddingKey, np.ndarray] = {}
        for key, vec in vectors.items():
            v = np.array(vec, dtype=np.float64)
            if v.shape != (dimension,):
                raise FormatError(f"Embedding for {key} has shape {v.shape}, expected ({dimension},)")
            v.flags.writeable = False
            self._vectors[key] = v

    def lookup(self, word: str, utterance_id: str, word_index: int) -> np.ndarray:
        try:
            return self._vectors[(utterance_id, int(word_index))]
        except KeyError:
            raise EmbeddingLookupError(utterance_id, word_index) from None

    def keys(self):
        return self._vectors.keys()

    def __len__(self) -> int:
        return len(self._vectors)


def pseudo_embedding_provider(seed: int = 0) -> PseudoEmbeddingProvider:
    return PseudoEmbeddingProvider(seed)


def read_embedding_file(source: BinaryIO, dimension: int = TEXT_DIM) -> Dict[EmbeddingKey, np.ndarray]:
    data = source.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("Not a WEM1 stream: bad magic", offset=0)
    if len(data) < 8:
        raise FormatError("Truncated WEM1 header", offset=len(data))
    (count,) = struct.unpack_from("<I", data, 4)

    vectors: Dict[EmbeddingKey, np.ndarray] = {}
    pos = 8
    for _ in range(count):
        if len(data) < pos + 2:
            raise FormatError("Truncated WEM1 entry header", offset=len(data))
        (id_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if len(data) < pos + id_len + 4:
            raise FormatError("Truncated WEM1 entry header", offset=len(data))
        try:
            utterance_id = data[pos:pos + id_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("Utterance id is not valid UTF-8", offset=pos) from e
        pos += id_len
        (word_index,) = struct.unpack_from("<I", data, pos)
        pos += 4
        key = (utterance_id, word_index)
        if key in vectors:
            raise FormatError(f"Duplicate embedding for {key}", offset=pos - id_len - 6)
        vectors[key] = decode_float_payload(data, pos, dimension, "embedding").copy()
        pos += 4 * dimension
    if pos != len(data):
        raise FormatError("Trailing bytes after WEM1 entries", offset=pos)
    return vectors


def write_embedding_file(vectors: Mapping[EmbeddingKey, np.ndarray], sink: BinaryIO) -> None:
    """Write entries in mapping order."""
    sink.write(MAGIC + struct.pack("<I", len(vectors)))
    for (utterance_id, word_index), vec in vectors.items():
        raw_id = utterance_id.encode("utf-8")
        sink.write(struct.pack("<H", len(raw_id)) + raw_id + struct.pack("<I", word_index))
        sink.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def file_embedding_provider(source: BinaryIO, dimension: int = TEXT_DIM) -> FileEmbeddingProvider:
    provider = FileEmbeddingProvider(read_embedding_file(source, dimension), dimension)
    logger.info("embedding_file_loaded", entries=len(provider), dimension=dimension)
    return provider
