"""
JointFace — synthetic corpus tests
Run: pytest test_synth.py
"""
import json

import numpy as np
import pytest
from pydantic import ValidationError

from jointface.audiofeat.wav import load_audio
from jointface.core.msq import load_mesh_sequence, load_template
from jointface.core.regions import load_region_mask
from jointface.synth.generator import (
    EXPRESSIVE_WORDS,
    LOWER_R_MIN,
    SynthSpec,
    _synthesize,
    carrier_frequency,
    generate_corpus,
    grid_regions,
    grid_template,
    lower_envelope_correlation,
)
from jointface.textfeat.alignment import load_alignment


def _manifest(corpus):
    return json.loads(corpus.manifest_path.read_text())


# ── 1. Corpus settings and geometry ──────────────────────────────────

def test_default_face_grid():
    spec = SynthSpec()
    template = grid_template(spec)
    mask = grid_regions(spec)
    assert spec.vertex_count == 338 and template.vertex_count == 338
    assert len(mask.upper) == len(mask.lower) == 169
    upper_y = template.vertices[mask.upper_indices(), 1]
    lower_y = template.vertices[mask.lower_indices(), 1]
    assert upper_y.min() > lower_y.max()


def test_spec_validation():
    for bad in ({"rows": 5}, {"expressive": ["zebra"]}, {"vocabulary": []},
                {"utterances_per_speaker": 3, "val_per_speaker": 1, "test_per_speaker": 2},
                {"frame_rate": 7}, {"unknown": 1}):
        with pytest.raises(ValidationError):
            SynthSpec(**bad)


def test_expressive_words_lift_the_brows_five_times_higher():
    spec = SynthSpec()
    assert spec.coefficient("great") / spec.coefficient("table") == pytest.approx(5.0)

    expressive, plain = [], []
    for index in range(12):
        utt = _synthesize(spec, index, index % 2, f"u{index}")
        t_frame = (np.arange(utt.frames) + 0.5) / spec.frame_rate
        for w in utt.words:
            inside = (t_frame >= w.start) & (t_frame < w.end)
            if inside.any():
                (expressive if w.word in EXPRESSIVE_WORDS else plain).append(utt.upper[inside].mean())
    assert expressive and plain
    assert np.mean(expressive) / np.mean(plain) >= 3.0


def test_lower_face_follows_the_audio_envelope():
    spec = SynthSpec()
    for index in range(6):
        utt = _synthesize(spec, index, 0, f"u{index}")
        assert lower_envelope_correlation(utt, 640) > LOWER_R_MIN


def test_carrier_frequency_is_hashed_into_the_band():
    spec = SynthSpec()
    f = carrier_frequency("wonderful", spec)
    assert f == carrier_frequency("wonderful", spec)
    assert spec.carrier_band[0] <= f < spec.carrier_band[1]
    assert f != carrier_frequency("blue", spec)


def test_mouth_gain_differs_per_speaker():
    spec = SynthSpec(speakers=3)
    gains = [spec.mouth_gain(k) for k in range(3)]
    assert gains[0] == 1.0 and gains[0] < gains[1] < gains[2]
    assert SynthSpec(speakers=1, utterances_per_speaker=4).mouth_gain(0) == 1.0


# ── 2. Generated corpus ───────────────────────────────────

def test_corpus_layout_and_manifest(small_corpus):
    root = small_corpus.manifest_path.parent
    manifest = _manifest(small_corpus)
    assert manifest["speakers"] == 2 and manifest["vertices"] == 12
    assert [u["id"] for u in manifest["utterances"]] == [
        "s0_u000", "s0_u001", "s0_u002", "s0_u003", "s1_u000", "s1_u001", "s1_u002", "s1_u003",
    ]
    assert [u["split"] for u in manifest["utterances"][:4]] == ["train", "train", "val", "test"]
    assert manifest["generator"]["checks"]["lower_r_min"] > LOWER_R_MIN
    assert manifest["generator"]["spec"]["expressive_coefficient"] == 1.0
    assert "workers" not in manifest["generator"]["spec"]

    assert load_template(root / "template.msq").vertex_count == 12
    with open(root / "regions.json") as f:
        assert load_region_mask(f, 12) == small_corpus.mask


def test_utterance_files_agree(small_corpus):
    root = small_corpus.manifest_path.parent
    for entry in _manifest(small_corpus)["utterances"]:
        meshes = load_mesh_sequence(root / entry["meshes"])
        with open(root / entry["audio"], "rb") as f:
            audio = load_audio(f)
        with open(root / entry["alignment"]) as f:
            alignment = load_alignment(f)
        assert audio.sample_rate == 16000
        assert audio.samples.size == meshes.frame_count * 640
        assert len(alignment) > 0
        assert alignment.entries[-1].end <= meshes.frame_count / 25


def test_only_the_vertical_axis_moves(small_corpus):
    root = small_corpus.manifest_path.parent
    template = load_template(root / "template.msq")
    mask = small_corpus.mask
    entry = _manifest(small_corpus)["utterances"][0]
    offsets = load_mesh_sequence(root / entry["meshes"]).vertices - template.vertices[None]
    assert np.all(offsets[:, :, 0] == 0) and np.all(offsets[:, :, 2] == 0)
    assert np.all(offsets[:, mask.upper_indices(), 1] >= 0)
    assert np.all(offsets[:, mask.lower_indices(), 1] <= 0)
    assert offsets[:, mask.lower_indices(), 1].min() < 0


def test_generation_is_identical_for_any_worker_count(tmp_path, small_spec):
    generate_corpus(small_spec, tmp_path / "one", workers=1)
    generate_corpus(small_spec, tmp_path / "two", workers=2)
    files = sorted(p.relative_to(tmp_path / "one") for p in (tmp_path / "one").rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (tmp_path / "one" / rel).read_bytes() == (tmp_path / "two" / rel).read_bytes(), rel


def test_seed_changes_the_corpus(tmp_path, small_spec):
    a = generate_corpus(small_spec, tmp_path / "a")
    b = generate_corpus(small_spec.model_copy(update={"seed": 8}), tmp_path / "b")
    wav = "utterances/s0_u000.wav"
    assert (a.manifest_path.parent / wav).read_bytes() != (b.manifest_path.parent / wav).read_bytes()
