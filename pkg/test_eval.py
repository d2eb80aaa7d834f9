"""
JointFace — evaluation tests (region errors, correlation maps, embedding export, ablation)
Run: pytest test_eval.py            (add -m slow for the trained-model checks)
"""
import io

import numpy as np
import pandas as pd
import pytest
import torch

from jointface.audiofeat.cache import FeatureCache
from jointface.core.mesh import MeshSequence, OffsetSequence
from jointface.core.regions import RegionMask
from jointface.errors import ConfigurationError, DimensionError, FormatError, InputError
from jointface.eval.ablation import VARIANTS, run_ablation
from jointface.eval.correlation import CorrelationMap, correlate_model, pearson_map
from jointface.eval.export import export_embeddings, frame_words, import_embeddings
from jointface.eval.metrics import evaluate_model, merge_reports, region_mae, report_for
from jointface.eval.reports import MAGNITUDE_NOTE, PROXY_NOTE, read_report, write_report
from jointface.model.checkpoint import load_checkpoint
from jointface.model.inference import infer
from jointface.model.network import FusionMode, JointFaceNet
from jointface.synth.generator import SynthSpec, generate_corpus
from jointface.textfeat.alignment import WordAlignment, WordEntry
from jointface.train.dataset import load_manifest, prepare_dataset, resolve_provider
from jointface.train.loop import TrainConfig

SMALL_WIDTHS = dict(audio_dim=4, text_hidden=5, text_dim=3, dec_hidden=4, blstm_hidden=3)
MASK = RegionMask([0, 1], [2, 3])


def _shifted(frames, upper_shift, lower_shift):
    truth = MeshSequence(np.zeros((frames, 4, 3)))
    pred = np.zeros((frames, 4, 3))
    pred[:, :2, 0] = upper_shift
    pred[:, 2:, 2] = lower_shift
    return MeshSequence(pred), truth


@pytest.fixture(scope="module")
def prepared(small_corpus):
    corpus = load_manifest(small_corpus.manifest_path)
    provider = resolve_provider("pseudo")
    cache = FeatureCache(cache_dir="")
    return (
        corpus,
        prepare_dataset(corpus, provider, cache, split="train"),
        prepare_dataset(corpus, provider, cache, split="test"),
    )


# ── 1. Region errors ──────────────────────────────────────

def test_region_mae():
    pred, truth = _shifted(5, 3.0, 4.0)
    errors = region_mae(pred, truth, MASK)
    assert errors.upper == pytest.approx(3.0)
    assert errors.lower == pytest.approx(4.0)


def test_region_mae_checks_shapes_and_range():
    pred, truth = _shifted(5, 1.0, 1.0)
    with pytest.raises(DimensionError):
        region_mae(MeshSequence(np.zeros((4, 4, 3))), truth, MASK)
    with pytest.raises(ConfigurationError):
        region_mae(pred, truth, RegionMask([0], [7]))


def test_report_pools_over_frames():
    short = _shifted(1, 1.0, 0.0)
    long = _shifted(3, 5.0, 2.0)
    report = report_for([("b", *long), ("a", *short)], MASK)
    assert [r.utterance_id for r in report.rows] == ["a", "b"]
    assert report.upper_mae == pytest.approx((1 * 1.0 + 3 * 5.0) / 4)
    assert report.lower_mae == pytest.approx(1.5)

    df = report.to_frame()
    assert df["utterance_id"].tolist() == ["a", "b", "ALL"]
    assert df.iloc[-1]["frames"] == 4


def test_merge_reports():
    r1 = report_for([("z", *_shifted(2, 1.0, 1.0))], MASK)
    r2 = report_for([("m", *_shifted(2, 2.0, 2.0))], MASK)
    merged = merge_reports([r1, r2])
    assert [r.utterance_id for r in merged.rows] == ["m", "z"]
    assert merged.upper_mae == pytest.approx(1.5)
    assert merge_reports([r2, r1]).rows == merged.rows
    with pytest.raises(InputError):
        merge_reports([r1, r1])


def test_evaluate_model_scores_each_test_utterance(prepared):
    corpus, _, test = prepared
    model = JointFaceNet(TrainConfig(**SMALL_WIDTHS).model_dims(2, corpus.vertices, 128, 768), seed=0)
    report = evaluate_model(model, test, corpus.template, corpus.mask)
    assert [r.utterance_id for r in report.rows] == sorted(s.utterance_id for s in test)
    assert report.upper_mae > 0 and report.lower_mae > 0


# ── 2. Correlation maps ───────────────────────────────────

def test_pearson_map_tracks_the_moving_vertex():
    t = np.linspace(0, 1, 40)
    mags = np.zeros((40, 3))
    mags[:, 0] = np.sin(2 * np.pi * t) ** 2
    mags[:, 1] = 1.0 - mags[:, 0]
    mags[:, 2] = 0.25
    features = mags[:, :1].copy()
    cmap = pearson_map(features, mags)
    np.testing.assert_allclose(cmap.scores, [1.0, 1.0, 0.0], atol=1e-12)


def test_pearson_map_reductions_and_offsets():
    g = np.random.default_rng(0)
    offsets = g.standard_normal((30, 5, 3))
    features = np.column_stack([np.linalg.norm(offsets[:, 2], axis=1), g.standard_normal(30)])
    mean = pearson_map(features, OffsetSequence(offsets), reduction="mean")
    best = pearson_map(features, offsets, reduction="max")
    assert best.scores[2] == pytest.approx(1.0)
    assert mean.scores[2] < 1.0
    assert np.all((0 <= mean.scores) & (mean.scores <= best.scores + 1e-12) & (best.scores <= 1))


def test_pearson_map_input_checks():
    with pytest.raises(InputError):
        pearson_map(np.ones((2, 1)), np.ones((2, 3)))
    with pytest.raises(DimensionError):
        pearson_map(np.ones((5, 1)), np.ones((6, 3)))
    with pytest.raises(InputError):
        pearson_map(np.ones((5, 1)), np.ones((5, 3)), reduction="median")


def test_correlation_region_means():
    cmap = CorrelationMap(np.array([0.9, 0.7, 0.1, 0.3]), "text")
    assert cmap.region_means(MASK) == pytest.approx({"upper": 0.8, "lower": 0.2})


def test_correlate_model_covers_every_vertex(prepared):
    corpus, _, test = prepared
    model = JointFaceNet(TrainConfig(**SMALL_WIDTHS).model_dims(2, corpus.vertices, 128, 768), seed=1)
    for modality in ("audio", "text"):
        cmap = correlate_model(model, test, corpus.template, modality)
        assert cmap.scores.shape == (corpus.vertices,)
        assert np.all((cmap.scores >= 0) & (cmap.scores <= 1))
        assert cmap.modality == modality


# ── 3. Embedding export ───────────────────────────────────

def test_export_embeddings_round_trip():
    alignment = WordAlignment((WordEntry("hello", 0.0, 0.2), WordEntry("there", 0.3, 0.5)))
    h_l = torch.tensor(np.random.default_rng(0).standard_normal((15, 3)))
    buf = io.StringIO()
    df = export_embeddings(h_l, alignment, buf)
    assert list(df.columns) == ["frame", "word", "e0", "e1", "e2"]

    table = import_embeddings(io.StringIO(buf.getvalue()))
    assert table.frames.tolist() == list(range(15))
    assert table.words[:5] == ["hello"] * 5
    assert table.words[5:7] == ["", ""]
    assert table.words[7:12] == ["there"] * 5
    assert table.words[12:] == ["", "", ""]
    np.testing.assert_allclose(table.values, h_l.numpy(), rtol=1e-8)


def test_frame_words_uses_frame_centers():
    alignment = WordAlignment((WordEntry("a", 0.0, 0.04),))
    assert frame_words(alignment, 2, 25) == ["a", ""]


def test_import_embeddings_rejects_other_csv():
    with pytest.raises(FormatError):
        import_embeddings(io.StringIO("a,b\n1,2\n"))


# ── 4. Reports ────────────────────────────────────────────

def test_write_report_embeds_notes_config_and_hash(tmp_path):
    df = pd.DataFrame({"label": ["x", "y"], "upper_mae": [0.1, 0.25]})
    csv_path, txt_path = write_report(df, tmp_path, "table", {"command": "eval", "seed": 3}, "ab" * 32)
    for path in (csv_path, txt_path):
        text = path.read_text()
        assert f"# {PROXY_NOTE}" in text and f"# {MAGNITUDE_NOTE}" in text
        assert "checkpoint manifest sha256: " + "ab" * 32 in text
        assert '"seed": 3' in text
    back = read_report(csv_path)
    assert back["label"].tolist() == ["x", "y"]
    np.testing.assert_allclose(back["upper_mae"], [0.1, 0.25])
    assert "0.250000" in txt_path.read_text()


# ── 5. Ablation ───────────────────────────────────────────

def test_ablation_runs_four_variants_per_seed(prepared, tmp_path):
    corpus, train_set, test_set = prepared
    config = TrainConfig(epochs=1, **SMALL_WIDTHS)
    result = run_ablation(config, train_set, test_set, corpus.template, corpus.speakers,
                          corpus.mask, seeds=[1, 2], out_dir=tmp_path)
    assert len(result.rows) == 8
    assert result.summary["label"].tolist() == [label for label, _ in VARIANTS]
    assert result.summary["seeds"].tolist() == [2, 2, 2, 2]
    assert (result.summary[["upper_std", "lower_std"]] >= 0).all().all()
    assert (tmp_path / "seed2" / "tensor" / "checkpoint" / "manifest.json").is_file()

    tf = result.rows[result.rows["label"] == "Audio+Text (TF)"]["upper_mae"]
    assert result.mean("Audio+Text (TF)", "upper") == pytest.approx(tf.mean())

    for row in result.rows.itertuples():
        ckpt = load_checkpoint(tmp_path / f"seed{row.seed}" / row.fusion_mode / "checkpoint")
        assert row.checkpoint_hash == ckpt.hash and len(ckpt.hash) == 64
    assert result.rows["checkpoint_hash"].nunique() == 8
    assert len(result.checkpoint_hash) == 64


def test_ablation_without_out_dir_has_no_hashes(prepared):
    corpus, train_set, test_set = prepared
    result = run_ablation(TrainConfig(epochs=1, **SMALL_WIDTHS), train_set, test_set, corpus.template,
                          corpus.speakers, corpus.mask, seeds=[0])
    assert result.rows["checkpoint_hash"].isna().all()
    assert result.checkpoint_hash is None


# ── 6. Trained-model behaviour on the planted corpus ──────

@pytest.fixture(scope="module")
def planted_ablation(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    corpus = load_manifest(generate_corpus(SynthSpec(seed=0), root / "corpus").manifest_path)
    provider = resolve_provider("pseudo")
    cache = FeatureCache(cache_dir="")
    train_set = prepare_dataset(corpus, provider, cache, split="train")
    test_set = prepare_dataset(corpus, provider, cache, split="test")
    result = run_ablation(TrainConfig(epochs=30), train_set, test_set, corpus.template,
                          corpus.speakers, corpus.mask, seeds=[1, 2, 3], out_dir=root / "runs")
    return corpus, test_set, result, root / "runs"


@pytest.mark.slow
def test_text_helps_the_upper_face_and_audio_the_lower(planted_ablation):
    _, _, result, _ = planted_ablation
    assert len(result.rows) == 12
    mean = result.mean
    assert mean("Audio Only", "lower") < mean("Text Only", "lower")
    assert mean("Text Only", "upper") < mean("Audio Only", "upper")
    assert mean("Audio+Text (TF)", "upper") <= mean("Audio Only", "upper")
    assert mean("Audio+Text (TF)", "lower") <= mean("Text Only", "lower")


@pytest.mark.slow
def test_modality_correlation_pattern(planted_ablation):
    corpus, test_set, _, runs = planted_ablation
    model = load_checkpoint(runs / "seed1" / FusionMode.TENSOR.value / "checkpoint").model
    text = correlate_model(model, test_set, corpus.template, "text").region_means(corpus.mask)
    audio = correlate_model(model, test_set, corpus.template, "audio").region_means(corpus.mask)
    assert text["upper"] > text["lower"]
    assert audio["lower"] > audio["upper"]


@pytest.mark.slow
def test_speaker_one_hot_changes_the_animation(planted_ablation):
    corpus, test_set, _, runs = planted_ablation
    model = load_checkpoint(runs / "seed1" / FusionMode.TENSOR.value / "checkpoint").model
    s = test_set[0]
    a = infer(model, s.mel, s.text, 0, corpus.template).vertices
    b = infer(model, s.mel, s.text, 1, corpus.template).vertices
    assert np.linalg.norm(a - b, axis=2).mean() > 1e-6
