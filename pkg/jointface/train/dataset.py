"""
JointFace — Corpus Manifest & Data Preparation

A corpus is described by one JSON manifest; paths are relative to it:

    {
      "format_version": 1,
      "speakers": 2, "vertices": 338, "frame_rate": 25,
      "template": "template.msq",
      "regions": "regions.json",
      "utterances": [
        {"id": "s0_u000", "audio": "s0_u000.wav", "alignment": "s0_u000.json",
         "meshes": "s0_u000.msq", "speaker": 0, "split": "train"},
        ...
      ],
      "generator": {...}          free-form provenance (synthetic corpora)
    }

Preparation turns each utterance into model-ready features. T comes from the
ground-truth mesh sequence when there is one; otherwise from the audio length
(one frame per whole hop).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from jointface.audiofeat.cache import FeatureCache
from jointface.audiofeat.mel import MelFrames, hop_length
from jointface.audiofeat.wav import load_audio
from jointface.config import FRAME_RATE, SAMPLE_RATE, TEXT_DIM
from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.core.msq import load_mesh_sequence, load_template
from jointface.core.regions import RegionMask, load_region_mask
from jointface.core.utterance import Utterance
from jointface.errors import ConfigurationError, DimensionError, FormatError, InputError
from jointface.textfeat.alignment import WordAlignment, load_alignment
from jointface.textfeat.frames import TextFrames, text_features
from jointface.textfeat.providers import EmbeddingProvider, PseudoEmbeddingProvider, file_embedding_provider

logger = structlog.get_logger()

Split = Literal["train", "val", "test"]


# ===========================================
# Manifest
# ===========================================

class UtteranceEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    audio: str
    alignment: str
    meshes: Optional[str] = None
    speaker: int = Field(ge=0)
    split: Split = "train"


class CorpusManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = 1
    speakers: int = Field(ge=1)
    vertices: int = Field(ge=1)
    frame_rate: int = Field(default=FRAME_RATE, gt=0)
    template: str
    regions: Optional[str] = None
    utterances: List[UtteranceEntry]
    generator: Dict = Field(default_factory=dict)

    @field_validator("utterances")
    @classmethod
    def unique_ids(cls, v: List[UtteranceEntry]) -> List[UtteranceEntry]:
        seen = set()
        for u in v:
            if u.id in seen:
                raise ValueError(f"duplicate utterance id {u.id!r}")
            seen.add(u.id)
        return v


@dataclass
class Corpus:
    root: Path
    manifest: CorpusManifest
    utterances: List[Utterance]
    template: TemplateMesh
    mask: Optional[RegionMask]

    @property
    def speakers(self) -> int:
        return self.manifest.speakers

    @property
    def vertices(self) -> int:
        return self.manifest.vertices

    @property
    def frame_rate(self) -> int:
        return self.manifest.frame_rate

    def split(self, name: str) -> List[Utterance]:
        return [u for u in self.utterances if u.split == name]


def load_manifest(path: Union[str, Path]) -> Corpus:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"Manifest not found: {path}") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"Manifest is not valid JSON: {e.msg}", offset=e.pos) from e
    try:
        manifest = CorpusManifest.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid corpus manifest {path}: {e}") from e

    root = path.parent
    template = load_template(root / manifest.template)
    if template.vertex_count != manifest.vertices:
        raise DimensionError(
            f"Template has {template.vertex_count} vertices, manifest declares {manifest.vertices}"
        )
    mask = None
    if manifest.regions:
        with open(root / manifest.regions) as f:
            mask = load_region_mask(f, manifest.vertices)

    utterances = []
    for entry in manifest.utterances:
        utt = Utterance(
            id=entry.id,
            audio=root / entry.audio,
            alignment=root / entry.alignment,
            speaker_index=entry.speaker,
            meshes=(root / entry.meshes) if entry.meshes else None,
            split=entry.split,
        )
        utt.validate(manifest.speakers)
        utterances.append(utt)

    logger.info("manifest_loaded", path=str(path), utterances=len(utterances), speakers=manifest.speakers)
    return Corpus(root, manifest, utterances, template, mask)


# ===========================================
# Embedding providers
# ===========================================

def resolve_provider(choice: str, seed: int = 0, dimension: int = TEXT_DIM) -> EmbeddingProvider:
    """'pseudo' or 'file:PATH'."""
    if choice == "pseudo":
        return PseudoEmbeddingProvider(seed, dimension)
    if choice.startswith("file:"):
        path = Path(choice[len("file:"):])
        try:
            with open(path, "rb") as f:
                return file_embedding_provider(f, dimension)
        except FileNotFoundError:
            raise ConfigurationError(f"Embedding file not found: {path}") from None
    raise ConfigurationError(f"Unknown embedding provider {choice!r}; use 'pseudo' or 'file:PATH'")


# ===========================================
# Samples
# ===========================================

@dataclass
class Sample:
    """One utterance, ready for the network."""
    utterance_id: str
    speaker: int
    mel: MelFrames
    text: TextFrames
    alignment: WordAlignment
    truth: Optional[MeshSequence] = None

    @property
    def frame_count(self) -> int:
        return self.mel.frame_count


def frames_for_audio(sample_count: int, sample_rate: int, frame_rate: int = FRAME_RATE) -> int:
    """Whole hops in the audio once resampled to the analysis rate, at least one."""
    resampled = round(sample_count * SAMPLE_RATE / sample_rate)
    return max(1, resampled // hop_length(frame_rate))


def prepare_inputs(
    audio_path: Union[str, Path],
    alignment_path: Union[str, Path],
    provider: EmbeddingProvider,
    cache: Optional[FeatureCache] = None,
    frame_rate: int = FRAME_RATE,
    frame_count: Optional[int] = None,
    utterance_id: str = "",
) -> tuple[MelFrames, TextFrames, WordAlignment]:
    with open(audio_path, "rb") as f:
        audio = load_audio(f)
    with open(alignment_path) as f:
        alignment = load_alignment(f)
    T = frame_count or frames_for_audio(audio.samples.size, audio.sample_rate, frame_rate)

    cache = cache if cache is not None else FeatureCache()
    mel = cache.features(audio, frame_rate, T)
    text = text_features(alignment, provider, T, frame_rate, utterance_id)
    return mel, text, alignment


def prepare_utterance(
    utt: Utterance,
    provider: EmbeddingProvider,
    cache: Optional[FeatureCache] = None,
    frame_rate: int = FRAME_RATE,
) -> Sample:
    truth = load_mesh_sequence(utt.meshes) if utt.meshes is not None else None
    if truth is not None and truth.frame_rate != frame_rate:
        raise InputError(f"Utterance {utt.id!r} meshes are at {truth.frame_rate} fps, corpus is {frame_rate}")
    mel, text, alignment = prepare_inputs(
        utt.audio, utt.alignment, provider, cache, frame_rate,
        frame_count=truth.frame_count if truth is not None else None,
        utterance_id=utt.id,
    )
    return Sample(utt.id, utt.speaker_index, mel, text, alignment, truth)


def prepare_dataset(
    corpus: Corpus,
    provider: EmbeddingProvider,
    cache: Optional[FeatureCache] = None,
    split: Optional[str] = "train",
    require_meshes: bool = True,
) -> List[Sample]:
    utterances = corpus.split(split) if split else list(corpus.utterances)
    if not utterances:
        raise ConfigurationError(f"No utterances in split {split!r}")
    cache = cache if cache is not None else FeatureCache()
    samples = []
    for utt in utterances:
        utt.validate(corpus.speakers, require_meshes=require_meshes)
        samples.append(prepare_utterance(utt, provider, cache, corpus.frame_rate))
    logger.info("dataset_prepared", split=split, utterances=len(samples), cache=cache.stats())
    return samples
