"""
JointFace — training tests (loss, Adam, corpus manifests, the epoch loop)
Run: pytest test_train.py            (add -m slow for the overfit run)
"""
import json

import numpy as np
import pandas as pd
import pytest
import torch
from pydantic import ValidationError

from jointface.audiofeat.cache import FeatureCache
from jointface.audiofeat.mel import MelFrames
from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.errors import ConfigurationError, DimensionError, InputError, TrainingAborted
from jointface.model.checkpoint import load_checkpoint
from jointface.model.grads import gradients
from jointface.model.network import JointFaceNet
from jointface.synth.generator import SynthSpec, generate_corpus
from jointface.textfeat.alignment import WordAlignment, WordEntry
from jointface.textfeat.frames import TextFrames
from jointface.train.dataset import (
    Sample,
    frames_for_audio,
    load_manifest,
    prepare_dataset,
    resolve_provider,
)
from jointface.train.loop import TrainConfig, train, validation_loss
from jointface.train.loss import mse_loss
from jointface.train.optim import AdamState, adam_step

SMALL_WIDTHS = dict(audio_dim=4, text_hidden=5, text_dim=3, dec_hidden=4, blstm_hidden=3)


def _samples(n=3, frames=8, vertices=6, text_dim=8, seed=0):
    g = np.random.default_rng(seed)
    template = TemplateMesh(g.standard_normal((vertices, 3)))
    alignment = WordAlignment((WordEntry("hi", 0.0, 0.2),))
    samples = []
    for i in range(n):
        truth = template.vertices[None] + 0.05 * g.standard_normal((frames, vertices, 3))
        samples.append(Sample(
            utterance_id=f"u{i}",
            speaker=i % 2,
            mel=MelFrames(g.uniform(-80.0, 0.0, size=(frames, 128))),
            text=TextFrames(g.standard_normal((frames, text_dim))),
            alignment=alignment,
            truth=MeshSequence(truth),
        ))
    return samples, template


def _config(tmp_path=None, **overrides):
    values = dict(epochs=3, seed=0, **SMALL_WIDTHS)
    if tmp_path is not None:
        values["out_dir"] = str(tmp_path)
    values.update(overrides)
    return TrainConfig(**values)


# ── 1. Loss ───────────────────────────────────────────────

def test_mse_loss_is_a_sum_over_frames_and_vertices():
    pred = np.zeros((2, 3, 3))
    truth = np.zeros((2, 3, 3))
    truth[1, 2] = [1.0, 2.0, 2.0]
    assert float(mse_loss(pred, truth)) == 9.0
    assert float(mse_loss(pred, truth, normalize=True)) == pytest.approx(9.0 / 6)


def test_mse_loss_accepts_mesh_sequences_and_checks_shapes():
    a = MeshSequence(np.ones((2, 3, 3)))
    b = MeshSequence(np.zeros((2, 3, 3)))
    assert float(mse_loss(a, b)) == 18.0
    with pytest.raises(DimensionError):
        mse_loss(np.zeros((2, 3, 3)), np.zeros((2, 4, 3)))


def test_mse_loss_is_differentiable():
    pred = torch.zeros(1, 2, 3, requires_grad=True)
    loss = mse_loss(pred, np.ones((1, 2, 3)))
    loss.backward()
    assert torch.equal(pred.grad, torch.full((1, 2, 3), -2.0))


# ── 2. Adam ───────────────────────────────────────────────

def test_first_adam_step_moves_every_weight_by_lr(tiny_dims):
    model = JointFaceNet(tiny_dims).double()
    before = {n: p.detach().clone() for n, p in model.named_parameters()}
    grads = {n: torch.full_like(p, 0.5) for n, p in model.named_parameters()}
    state = AdamState()
    adam_step(model, grads, state, lr=1e-3)
    assert state.step == 1
    for name, p in model.named_parameters():
        torch.testing.assert_close(before[name] - p.detach(), torch.full_like(p, 1e-3), rtol=1e-6, atol=0)
    m, v = state.moments(model)["dec_fc2.bias"]
    torch.testing.assert_close(m, torch.full_like(m, 0.05))
    torch.testing.assert_close(v, torch.full_like(v, 0.00025))


def test_adam_rejects_bad_input(tiny_dims):
    model = JointFaceNet(tiny_dims)
    grads = {n: torch.zeros_like(p) for n, p in model.named_parameters()}
    with pytest.raises(InputError):
        adam_step(model, grads, AdamState(), lr=0.0)

    missing = dict(grads)
    missing.pop("dec_fc2.weight")
    with pytest.raises(InputError):
        adam_step(model, missing, AdamState(), lr=1e-4)

    bad = dict(grads)
    bad["text_fc1.bias"] = torch.full_like(grads["text_fc1.bias"], float("nan"))
    with pytest.raises(TrainingAborted) as e:
        adam_step(model, bad, AdamState(), lr=1e-4)
    assert e.value.parameter == "text_fc1.bias"


def test_adam_hyperparameters():
    assert AdamState().hyperparameters() == {"beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8}


# ── 3. Train config ───────────────────────────────────────

def test_train_config_validation():
    assert TrainConfig().lr == 1e-4 and TrainConfig().epochs == 100
    assert TrainConfig(fusion_mode="audio").fusion_mode == "audio_only"
    for bad in ({"batch_size": 2}, {"lr": 0}, {"epochs": 0}, {"fusion_mode": "bogus"}, {"colour": "red"}):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)


# ── 4. Training loop ──────────────────────────────────────

def test_train_writes_loss_csv_and_checkpoint(tmp_path):
    samples, template = _samples()
    steps = []
    result = train(_config(tmp_path), samples, template, speakers=2,
                   step_callback=lambda step, utt, loss: steps.append((step, utt, loss)))
    assert result.steps == 9 and len(steps) == 9
    assert sorted(u for _, u, _ in steps[:3]) == ["u0", "u1", "u2"]

    df = pd.read_csv(tmp_path / "loss.csv")
    assert list(df.columns) == ["epoch", "mean_loss"]
    assert df["epoch"].tolist() == [1, 2, 3]
    np.testing.assert_allclose(df["mean_loss"], result.epoch_losses, rtol=1e-8)

    ckpt = load_checkpoint(result.checkpoint_dir, vertices=6, speakers=2)
    assert ckpt.hash == result.checkpoint_hash
    assert ckpt.manifest["extra"] == {"normalize_loss": True}
    assert ckpt.manifest["optimizer"]["lr"] == 1e-4


def test_train_is_deterministic(tmp_path):
    samples, template = _samples()
    a = train(_config(tmp_path / "a"), samples, template, 2)
    b = train(_config(tmp_path / "b"), samples, template, 2)
    c = train(_config(tmp_path / "c", seed=1), samples, template, 2)
    assert a.epoch_losses == b.epoch_losses
    assert a.checkpoint_hash == b.checkpoint_hash
    assert a.checkpoint_hash != c.checkpoint_hash


def test_train_with_validation_and_periodic_checkpoints(tmp_path):
    samples, template = _samples(4)
    result = train(_config(tmp_path, epochs=4, checkpoint_every=2), samples[:3], template, 2, val_set=samples[3:])
    assert len(result.val_losses) == 4
    df = pd.read_csv(tmp_path / "loss.csv")
    assert list(df.columns) == ["epoch", "mean_loss", "val_loss"]
    assert (tmp_path / "checkpoint-epoch0002" / "manifest.json").is_file()
    assert not (tmp_path / "checkpoint-epoch0004").exists()
    assert validation_loss(result.model, samples[3:], template) == pytest.approx(result.val_losses[-1])


def test_train_unimodal_variants(tmp_path):
    samples, template = _samples(2)
    for mode in ("audio_only", "text_only", "concat"):
        result = train(_config(epochs=1, fusion_mode=mode), samples, template, 2)
        assert result.model.fusion_mode.value == mode
        assert result.checkpoint_dir is None


def test_train_aborts_on_non_finite_loss():
    samples, template = _samples(2)
    huge = MeshSequence(np.full((8, 6, 3), 1e30, dtype=np.float32))
    samples[1] = Sample("blowup", 1, samples[1].mel, samples[1].text, samples[1].alignment, huge)
    with pytest.raises(TrainingAborted) as e:
        train(_config(epochs=1), samples, template, 2)
    assert e.value.utterance_id == "blowup"


def test_train_rejects_unusable_datasets():
    samples, template = _samples(2)
    with pytest.raises(ConfigurationError):
        train(_config(), [], template, 2)
    no_truth = Sample("x", 0, samples[0].mel, samples[0].text, samples[0].alignment, None)
    with pytest.raises(ConfigurationError):
        train(_config(), [no_truth], template, 2)
    with pytest.raises(ConfigurationError):
        train(_config(), samples, template, 1)


def test_gradients_flow_through_training_samples():
    samples, template = _samples(1)
    model = JointFaceNet(_config().model_dims(2, 6, 128, 8))
    loss = mse_loss(model.predict_vertices(samples[0].mel, samples[0].text, 0, template), samples[0].truth)
    grads = gradients(loss, model)
    assert all(torch.isfinite(g).all() for g in grads.values())
    assert torch.count_nonzero(grads["audio_conv.0.weight"]) > 0


# ── 5. Corpus manifests ───────────────────────────────────

def test_load_manifest(small_corpus):
    corpus = load_manifest(small_corpus.manifest_path)
    assert corpus.speakers == 2 and corpus.vertices == 12 and corpus.frame_rate == 25
    assert corpus.mask is not None
    assert len(corpus.split("train")) == 4
    assert len(corpus.split("val")) == 2 and len(corpus.split("test")) == 2


def _variant(small_corpus, name, edit):
    raw = json.loads(small_corpus.manifest_path.read_text())
    edit(raw)
    path = small_corpus.manifest_path.parent / name
    path.write_text(json.dumps(raw))
    return path


def test_manifest_errors(small_corpus, tmp_path):
    with pytest.raises(ConfigurationError):
        load_manifest(tmp_path / "missing.json")
    with pytest.raises(ConfigurationError):
        load_manifest(_variant(small_corpus, "extra.json", lambda m: m.update(colour="red")))
    with pytest.raises(ConfigurationError):
        load_manifest(_variant(small_corpus, "dup.json",
                               lambda m: m["utterances"].append(dict(m["utterances"][0]))))
    with pytest.raises(DimensionError):
        load_manifest(_variant(small_corpus, "verts.json", lambda m: m.update(vertices=13)))
    with pytest.raises(InputError):
        load_manifest(_variant(small_corpus, "nofile.json",
                               lambda m: m["utterances"][0].update(audio="utterances/none.wav")))
    with pytest.raises(ConfigurationError):
        load_manifest(_variant(small_corpus, "speaker.json",
                               lambda m: m["utterances"][0].update(speaker=2)))


def test_prepare_dataset_takes_t_from_the_meshes(small_corpus):
    corpus = load_manifest(small_corpus.manifest_path)
    samples = prepare_dataset(corpus, resolve_provider("pseudo"), FeatureCache(cache_dir=""), split="train")
    assert [s.utterance_id for s in samples] == [u.id for u in corpus.split("train")]
    for s in samples:
        assert s.mel.frame_count == s.text.frame_count == s.truth.frame_count
        assert s.text.dimension == 768
        assert s.speaker in (0, 1)
    with pytest.raises(ConfigurationError):
        prepare_dataset(corpus, resolve_provider("pseudo"), split="holdout")


def test_resolve_provider(tmp_path):
    assert resolve_provider("pseudo", seed=2, dimension=16).dimension == 16
    with pytest.raises(ConfigurationError):
        resolve_provider(f"file:{tmp_path / 'missing.wem'}")
    with pytest.raises(ConfigurationError):
        resolve_provider("gpt2")


def test_frames_for_audio():
    assert frames_for_audio(16000, 16000) == 25
    assert frames_for_audio(8000, 8000) == 25
    assert frames_for_audio(100, 16000) == 1


# ── 6. Overfit sanity ─────────────────────────────────────

@pytest.mark.slow
def test_single_utterance_overfits_in_500_steps(tmp_path):
    spec = SynthSpec(speakers=1, utterances_per_speaker=2, val_per_speaker=0, test_per_speaker=1,
                     duration_range=(3.5, 4.0), seed=21)
    corpus = load_manifest(generate_corpus(spec, tmp_path / "corpus").manifest_path)
    (sample,) = prepare_dataset(corpus, resolve_provider("pseudo"), FeatureCache(cache_dir=""))

    runs = []
    for name in ("a", "b"):
        losses = []
        config = TrainConfig(epochs=500, seed=0, out_dir=str(tmp_path / name))
        result = train(config, [sample], corpus.template, corpus.speakers,
                       step_callback=lambda step, utt, loss: losses.append(loss))
        runs.append((losses, result))

    (losses, first), (_, second) = runs
    assert len(losses) == 500
    assert losses[-1] <= 0.01 * losses[0]
    smoothed = np.convolve(losses, np.ones(50) / 50, mode="valid")
    assert smoothed[-1] < smoothed[0]
    windows = np.asarray(losses).reshape(10, 50).mean(axis=1)
    for i in range(1, len(windows)):
        assert windows[i] <= windows[i - 1] * 1.1, (i, windows.tolist())
    assert first.checkpoint_hash == second.checkpoint_hash
    for path in sorted((tmp_path / "a" / "checkpoint").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / "checkpoint" / path.name).read_bytes()
