"""
JointFace — Synthetic Corpus

Stand-in for a recorded 4D face corpus, with the modality coupling planted
on purpose:

    audio      per word: carrier tone × Hann envelope × loudness
               carrier  = hashed word frequency + speaker pitch + per-instance jitter
               loudness ~ U(0.3, 0.9) per word instance
    lower face −y displacement = mouth_gain[speaker] × loudness × envelope(t)
               → only the audio knows how far the mouth opens
    upper face +y displacement = coefficient(word) × sin(π·u), u ∈ [0, 1) over the word
               coefficient 1.0 for expressive words, 0.2 otherwise
               → only the word identity says how far the brows lift; the carrier
                 jitter spans most of the frequency band, so the tone alone
                 barely identifies the word

Face proxy: a 26 × 13 vertex grid (V = 338), slightly curved. Rows 0..12 are
the upper face, rows 13..25 the lower face; vertex index = row · cols + col.

Layout written by generate_corpus:

    out/manifest.json                   corpus manifest (see train.dataset)
    out/template.msq                    one-frame MSQ1
    out/regions.json                    {"upper": [...], "lower": [...]}
    out/utterances/<id>.wav|.json|.msq  audio, alignment, ground-truth meshes

Generation-time checks (recorded in the manifest, failure raises):
    lower-face motion vs per-frame audio RMS        |r| > 0.8 per utterance
    upper-face motion vs loudness, given the word   permutation p ≥ 0.001
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from jointface.audiofeat.mel import hop_length
from jointface.audiofeat.wav import AudioClip, write_audio
from jointface.config import FRAME_RATE, SAMPLE_RATE
from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.core.msq import save_mesh_sequence, save_template
from jointface.core.regions import RegionMask, write_region_mask
from jointface.errors import ConfigurationError
from jointface.textfeat.alignment import WordAlignment, WordEntry, dump_alignment

logger = structlog.get_logger()

EXPRESSIVE_WORDS = ["great", "thank", "wonderful", "love", "amazing", "sorry"]
PLAIN_WORDS = ["the", "table", "is", "on", "a", "number", "seven", "blue"]

LOWER_R_MIN = 0.8
PERMUTATION_P_MIN = 0.001
PERMUTATIONS = 500
MIN_CARRIER_HZ = 80.0


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: int = Field(default=26, ge=2)
    cols: int = Field(default=13, ge=1)
    grid_spacing: float = Field(default=0.04, gt=0)
    curvature: float = 0.15

    speakers: int = Field(default=2, ge=1)
    utterances_per_speaker: int = Field(default=8, ge=1)
    val_per_speaker: int = Field(default=1, ge=0)
    test_per_speaker: int = Field(default=2, ge=0)
    duration_range: Tuple[float, float] = (2.0, 4.0)
    word_duration_range: Tuple[float, float] = (0.25, 0.5)
    vocabulary: List[str] = Field(default_factory=lambda: EXPRESSIVE_WORDS + PLAIN_WORDS)
    expressive: List[str] = Field(default_factory=lambda: list(EXPRESSIVE_WORDS))

    expressive_coefficient: float = 1.0
    plain_coefficient: float = 0.2
    upper_scale: float = Field(default=0.04, gt=0)
    lower_scale: float = Field(default=0.06, gt=0)
    loudness_range: Tuple[float, float] = (0.3, 0.9)
    carrier_band: Tuple[float, float] = (180.0, 900.0)
    carrier_jitter: float = Field(default=250.0, ge=0)
    pitch_step: float = Field(default=35.0, ge=0)
    mouth_gain_spread: float = Field(default=0.6, ge=0)

    frame_rate: int = FRAME_RATE
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check(self) -> "SynthSpec":
        if self.rows % 2:
            raise ValueError("rows must be even so the face splits into equal halves")
        if not self.vocabulary:
            raise ValueError("vocabulary must not be empty")
        if not set(self.expressive) <= set(self.vocabulary):
            raise ValueError("expressive words must come from the vocabulary")
        if SAMPLE_RATE % self.frame_rate:
            raise ValueError(f"frame_rate must divide {SAMPLE_RATE}")
        lo, hi = self.duration_range
        if not 0 < lo <= hi:
            raise ValueError("duration_range must be 0 < min ≤ max")
        wlo, whi = self.word_duration_range
        if not 0 < wlo <= whi < lo:
            raise ValueError("word_duration_range must be positive and shorter than an utterance")
        if self.val_per_speaker + self.test_per_speaker >= self.utterances_per_speaker:
            raise ValueError("every speaker needs at least one training utterance")
        return self

    @property
    def vertex_count(self) -> int:
        return self.rows * self.cols

    def mouth_gain(self, speaker: int) -> float:
        if self.speakers == 1:
            return 1.0
        return 1.0 + self.mouth_gain_spread * speaker / (self.speakers - 1)

    def coefficient(self, word: str) -> float:
        return self.expressive_coefficient if word in self.expressive else self.plain_coefficient


# ===========================================
# Geometry
# ===========================================

def grid_template(spec: SynthSpec) -> TemplateMesh:
    r, c = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
    x = (c - (spec.cols - 1) / 2.0) * spec.grid_spacing
    y = ((spec.rows - 1) / 2.0 - r) * spec.grid_spacing
    z = -spec.curvature * x ** 2
    return TemplateMesh(np.stack([x, y, z], axis=-1).reshape(-1, 3))


def grid_regions(spec: SynthSpec) -> RegionMask:
    half = spec.rows // 2 * spec.cols
    return RegionMask(range(half), range(half, spec.vertex_count))


def _profiles(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex weights: upper grows toward the top row, lower toward the chin."""
    half = spec.rows // 2
    row = np.repeat(np.arange(spec.rows), spec.cols).astype(np.float64)
    upper = np.where(row < half, (half - row) / half, 0.0)
    lower = np.where(row >= half, (row - half + 1) / half, 0.0)
    return upper, lower


# ===========================================
# Utterances
# ===========================================

def carrier_frequency(word: str, spec: SynthSpec) -> float:
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "little") / 2 ** 64
    lo, hi = spec.carrier_band
    return lo + u * (hi - lo)


@dataclass
class WordInstance:
    word: str
    start: float
    end: float
    loudness: float
    frequency: float


@dataclass
class SynthUtterance:
    id: str
    speaker: int
    index: int
    words: List[WordInstance]
    audio: np.ndarray              # 16 kHz samples
    lower: np.ndarray              # T, lower displacement amplitude per frame
    upper: np.ndarray              # T, upper displacement amplitude per frame
    frames: int
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def alignment(self) -> WordAlignment:
        return WordAlignment(tuple(WordEntry(w.word, w.start, w.end) for w in self.words))


def _sample_words(rng: np.random.Generator, spec: SynthSpec, duration: float) -> List[Tuple[str, float, float]]:
    words = []
    t = round(float(rng.uniform(0.1, 0.3)), 3)
    while True:
        length = float(rng.uniform(*spec.word_duration_range))
        end = round(t + length, 3)
        if end > duration - 0.1:
            break
        words.append((str(rng.choice(spec.vocabulary)), t, end))
        gap = rng.uniform(0.3, 0.6) if rng.random() < 0.25 else rng.uniform(0.0, 0.12)
        t = round(end + float(gap), 3)
    if not words:
        # an utterance always says something
        words.append((str(rng.choice(spec.vocabulary)), 0.1, round(0.1 + spec.word_duration_range[0], 3)))
    return words


def _synthesize(spec: SynthSpec, index: int, speaker: int, utt_id: str) -> SynthUtterance:
    rng = np.random.default_rng((spec.seed, index))
    fps = spec.frame_rate
    hop = hop_length(fps)
    frames = int(rng.integers(round(spec.duration_range[0] * fps), round(spec.duration_range[1] * fps) + 1))
    duration = frames / fps

    words = []
    for word, start, end in _sample_words(rng, spec, duration):
        loudness = float(rng.uniform(*spec.loudness_range))
        jitter = float(rng.uniform(-spec.carrier_jitter, spec.carrier_jitter))
        frequency = max(MIN_CARRIER_HZ, carrier_frequency(word, spec) + spec.pitch_step * speaker + jitter)
        words.append(WordInstance(word, start, end, loudness, frequency))

    t_audio = np.arange(frames * hop, dtype=np.float64) / SAMPLE_RATE
    t_frame = (np.arange(frames, dtype=np.float64) + 0.5) / fps
    audio = np.zeros_like(t_audio)
    lower = np.zeros(frames)
    upper = np.zeros(frames)
    gain = spec.mouth_gain(speaker)
    for w in words:
        span = w.end - w.start
        inside = (t_audio >= w.start) & (t_audio < w.end)
        u = (t_audio[inside] - w.start) / span
        envelope = np.sin(np.pi * u) ** 2
        audio[inside] += w.loudness * envelope * np.sin(2 * np.pi * w.frequency * (t_audio[inside] - w.start))

        inside_f = (t_frame >= w.start) & (t_frame < w.end)
        u_f = (t_frame[inside_f] - w.start) / span
        lower[inside_f] = gain * w.loudness * np.sin(np.pi * u_f) ** 2
        upper[inside_f] = spec.coefficient(w.word) * np.sin(np.pi * u_f)

    return SynthUtterance(utt_id, speaker, index, words, audio, lower, upper, frames)


def frame_rms(audio: np.ndarray, frames: int, hop: int) -> np.ndarray:
    """RMS over [t·hop, (t+1)·hop) for each frame."""
    return np.sqrt((audio[: frames * hop].reshape(frames, hop) ** 2).mean(axis=1))


def lower_envelope_correlation(utt: SynthUtterance, hop: int) -> float:
    rms = frame_rms(utt.audio, utt.frames, hop)
    if np.ptp(rms) == 0 or np.ptp(utt.lower) == 0:
        return 0.0
    return float(abs(stats.pearsonr(utt.lower, rms)[0]))


def upper_loudness_permutation(utterances: List[SynthUtterance], fps: int, seed: int,
                               permutations: int = PERMUTATIONS) -> float:
    """
    p-value for "upper motion tracks loudness once the word is known".

    Both series are centered within each word before correlating, and
    loudness is shuffled within words for the null distribution.
    """
    words, loud, up = [], [], []
    for utt in utterances:
        t_frame = (np.arange(utt.frames) + 0.5) / fps
        for w in utt.words:
            inside = (t_frame >= w.start) & (t_frame < w.end)
            if inside.any():
                words.append(w.word)
                loud.append(w.loudness)
                up.append(float(utt.upper[inside].mean()))
    words_arr = np.array(words)
    loud_arr, up_arr = np.array(loud), np.array(up)
    groups = [np.flatnonzero(words_arr == w) for w in sorted(set(words))]

    def centered(x: np.ndarray) -> np.ndarray:
        out = x.copy()
        for g in groups:
            out[g] -= x[g].mean()
        return out

    up_c = centered(up_arr)

    def statistic(loudness: np.ndarray) -> float:
        l_c = centered(loudness)
        denom = np.linalg.norm(l_c) * np.linalg.norm(up_c)
        return 0.0 if denom < 1e-12 else abs(float(l_c @ up_c / denom))

    observed = statistic(loud_arr)
    rng = np.random.default_rng((seed, 1_000_003))
    exceed = 0
    for _ in range(permutations):
        shuffled = loud_arr.copy()
        for g in groups:
            shuffled[g] = rng.permutation(shuffled[g])
        if statistic(shuffled) >= observed - 1e-15:
            exceed += 1
    return (exceed + 1) / (permutations + 1)


# ===========================================
# Corpus
# ===========================================

def _split_for(position: int, spec: SynthSpec) -> str:
    n = spec.utterances_per_speaker
    if position >= n - spec.test_per_speaker:
        return "test"
    if position >= n - spec.test_per_speaker - spec.val_per_speaker:
        return "val"
    return "train"


def _write_utterance(utt: SynthUtterance, spec: SynthSpec, template: TemplateMesh, out: Path) -> None:
    upper_w, lower_w = _profiles(spec)
    offsets = np.zeros((utt.frames, spec.vertex_count, 3))
    offsets[:, :, 1] = (
        spec.upper_scale * utt.upper[:, None] * upper_w[None, :]
        - spec.lower_scale * utt.lower[:, None] * lower_w[None, :]
    )
    meshes = MeshSequence(offsets + template.vertices.astype(np.float64)[None], spec.frame_rate)

    with open(out / f"{utt.id}.wav", "wb") as f:
        write_audio(AudioClip(SAMPLE_RATE, utt.audio), f)
    with open(out / f"{utt.id}.json", "w") as f:
        dump_alignment(utt.alignment, f)
    save_mesh_sequence(meshes, out / f"{utt.id}.msq")


@dataclass
class GeneratedCorpus:
    manifest_path: Path
    template: TemplateMesh
    mask: RegionMask
    utterance_ids: List[str]
    checks: Dict[str, float]


def generate_corpus(spec: SynthSpec, out_dir: Union[str, Path], workers: Optional[int] = None) -> GeneratedCorpus:
    out = Path(out_dir)
    utt_dir = out / "utterances"
    utt_dir.mkdir(parents=True, exist_ok=True)
    template = grid_template(spec)
    mask = grid_regions(spec)
    hop = hop_length(spec.frame_rate)

    jobs = []
    for speaker in range(spec.speakers):
        for position in range(spec.utterances_per_speaker):
            index = speaker * spec.utterances_per_speaker + position
            jobs.append((index, speaker, f"s{speaker}_u{position:03d}", _split_for(position, spec)))

    def build(job):
        index, speaker, utt_id, _ = job
        utt = _synthesize(spec, index, speaker, utt_id)
        utt.checks["lower_r"] = lower_envelope_correlation(utt, hop)
        _write_utterance(utt, spec, template, utt_dir)
        return utt

    n_workers = workers or spec.workers
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            utterances = list(pool.map(build, jobs))
    else:
        utterances = [build(job) for job in jobs]

    weakest = min(utterances, key=lambda u: u.checks["lower_r"])
    if weakest.checks["lower_r"] <= LOWER_R_MIN:
        raise ConfigurationError(
            f"Generation check failed: utterance {weakest.id} lower-face |r| = "
            f"{weakest.checks['lower_r']:.3f} ≤ {LOWER_R_MIN}"
        )
    p_value = upper_loudness_permutation(utterances, spec.frame_rate, spec.seed)
    if p_value < PERMUTATION_P_MIN:
        raise ConfigurationError(f"Generation check failed: upper motion tracks loudness (p = {p_value:.4f})")
    checks = {"lower_r_min": round(weakest.checks["lower_r"], 6), "upper_loudness_p": round(p_value, 6)}

    save_template(template, out / "template.msq", spec.frame_rate)
    with open(out / "regions.json", "w") as f:
        write_region_mask(mask, f)

    manifest = {
        "format_version": 1,
        "speakers": spec.speakers,
        "vertices": spec.vertex_count,
        "frame_rate": spec.frame_rate,
        "template": "template.msq",
        "regions": "regions.json",
        "utterances": [
            {
                "id": u.id,
                "audio": f"utterances/{u.id}.wav",
                "alignment": f"utterances/{u.id}.json",
                "meshes": f"utterances/{u.id}.msq",
                "speaker": u.speaker,
                "split": job[3],
            }
            for u, job in zip(utterances, jobs)
        ],
        "generator": {
            "spec": spec.model_dump(mode="json", exclude={"workers"}),
            "mouth_gains": [spec.mouth_gain(k) for k in range(spec.speakers)],
            "checks": checks,
        },
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    logger.info("corpus_generated", path=str(out), utterances=len(utterances),
                speakers=spec.speakers, vertices=spec.vertex_count, **checks)
    return GeneratedCorpus(manifest_path, template, mask, [u.id for u in utterances], checks)

