"""
JointFace — command line tests
Run: pytest test_cli.py
"""
import json

import pytest

from jointface.cli.main import main
from jointface.cli.run_config import RESOLVED_NAME, SynthRunConfig, load_config_file, resolve
from jointface.core.msq import load_mesh_sequence
from jointface.eval.export import import_embeddings
from jointface.eval.reports import read_report

TINY = {"audio_dim": 4, "text_hidden": 5, "text_dim": 3, "dec_hidden": 4, "blstm_hidden": 3}


def _synth_args(out, *extra):
    return ["synth", "--out", str(out), "--speakers", "2", "--utterances-per-speaker", "4",
            "--vertices-rows", "4", "--vertices-cols", "3", *extra]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(_synth_args(root / "corpus", "--seed", "5")) == 0
    config = root / "tiny.json"
    config.write_text(json.dumps({**TINY, "epochs": 2}))
    assert main(["train", "--config", str(config), "--manifest", str(root / "corpus" / "manifest.json"),
                 "--out", str(root / "run"), "--seed", "1"]) == 0
    return root


def _utterance(root, utt_id="s0_u003"):
    base = root / "corpus" / "utterances" / utt_id
    return {"audio": f"{base}.wav", "alignment": f"{base}.json", "meshes": f"{base}.msq"}


# ── 1. Synth and config resolution ────────────────────────

def test_synth_writes_corpus_and_snapshot(tmp_path, capsys):
    assert main(_synth_args(tmp_path)) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == str(tmp_path / "manifest.json")
    snapshot = json.loads((tmp_path / RESOLVED_NAME).read_text())
    assert snapshot["command"] == "synth"
    assert snapshot["rows"] == 4 and snapshot["utterances_per_speaker"] == 4


def test_flags_override_the_config_file(tmp_path):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps({"out": str(tmp_path / "x"), "seed": 9, "rows": 4, "cols": 3}))
    cfg = resolve(SynthRunConfig, str(config), {"seed": 2, "cols": None})
    assert cfg.seed == 2 and cfg.cols == 3 and cfg.out == str(tmp_path / "x")


def test_resolved_config_feeds_back_in(tmp_path):
    assert main(_synth_args(tmp_path / "a", "--seed", "4")) == 0
    snapshot = tmp_path / "a" / RESOLVED_NAME
    values = load_config_file(str(snapshot))
    assert "command" not in values and values["seed"] == 4

    assert main(["synth", "--config", str(snapshot), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "utterances" / "s1_u002.wav").read_bytes() == \
        (tmp_path / "b" / "utterances" / "s1_u002.wav").read_bytes()


# ── 2. Exit codes ─────────────────────────────────────────

def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["train", "--fusion", "bogus"]) == 2
    assert main(["synth"]) == 2
    assert main(["frobnicate"]) == 2

    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"out": str(tmp_path), "colour": "blue"}))
    assert main(["synth", "--config", str(config)]) == 2
    assert "colour" in capsys.readouterr().err

    assert main(["synth", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert main(_synth_args(tmp_path, "--vertices-rows", "5")) == 2


def test_runtime_failures_exit_1(trained, tmp_path):
    utt = _utterance(trained)
    base = ["infer", "--audio", utt["audio"], "--alignment", utt["alignment"],
            "--template", str(trained / "corpus" / "template.msq")]
    assert main(base + ["--checkpoint", str(trained / "run" / "checkpoint"),
                        "--speaker", "2", "--out", str(tmp_path / "p.msq")]) == 1
    assert main(base + ["--checkpoint", str(tmp_path / "nowhere"), "--out", str(tmp_path / "p.msq")]) == 1
    assert main(["train", "--manifest", str(tmp_path / "none.json"), "--out", str(tmp_path / "r")]) == 1


# ── 3. Train → infer → eval → correlate → export ──────────

def test_train_writes_checkpoint_and_snapshot(trained):
    run = trained / "run"
    assert (run / "checkpoint" / "manifest.json").is_file()
    assert (run / "loss.csv").is_file()
    snapshot = json.loads((run / RESOLVED_NAME).read_text())
    assert snapshot["audio_dim"] == 4 and snapshot["seed"] == 1 and snapshot["fusion"] == "tensor"
    assert len(snapshot["provenance"]["checkpoint_manifest_sha256"]) == 64


def test_infer_then_eval(trained, tmp_path):
    utt = _utterance(trained)
    pred = tmp_path / "pred" / "s0_u003.msq"
    assert main(["infer", "--checkpoint", str(trained / "run" / "checkpoint"),
                 "--audio", utt["audio"], "--alignment", utt["alignment"],
                 "--template", str(trained / "corpus" / "template.msq"),
                 "--speaker", "1", "--out", str(pred)]) == 0
    truth = load_mesh_sequence(utt["meshes"])
    assert load_mesh_sequence(pred).vertices.shape == truth.vertices.shape
    assert (pred.parent / RESOLVED_NAME).is_file()

    out = tmp_path / "eval"
    assert main(["eval", "--pred", str(pred), "--truth", utt["meshes"],
                 "--mask", str(trained / "corpus" / "regions.json"), "--out", str(out)]) == 0
    report = read_report(out / "region_errors.csv")
    assert report["utterance_id"].tolist() == ["s0_u003", "ALL"]
    assert (report[["upper_mae", "lower_mae"]] > 0).all().all()


def test_infer_all_speakers_names_one_file_each(trained, tmp_path):
    utt = _utterance(trained)
    assert main(["infer", "--checkpoint", str(trained / "run" / "checkpoint"),
                 "--audio", utt["audio"], "--alignment", utt["alignment"],
                 "--template", str(trained / "corpus" / "template.msq"),
                 "--speaker", "all", "--out", str(tmp_path / "pred.msq")]) == 0
    a = load_mesh_sequence(tmp_path / "pred_s0.msq")
    b = load_mesh_sequence(tmp_path / "pred_s1.msq")
    assert a.vertices.shape == b.vertices.shape
    assert not (tmp_path / "pred.msq").exists()


def test_correlate_writes_a_score_per_vertex(trained, tmp_path):
    assert main(["correlate", "--checkpoint", str(trained / "run" / "checkpoint"),
                 "--manifest", str(trained / "corpus" / "manifest.json"),
                 "--modality", "audio", "--out", str(tmp_path)]) == 0
    df = read_report(tmp_path / "correlation_audio.csv")
    assert df["vertex"].tolist() == list(range(12))
    assert set(df["region"]) == {"upper", "lower"}
    assert df["score"].between(0, 1).all()
    snapshot = json.loads((tmp_path / RESOLVED_NAME).read_text())
    assert set(snapshot["provenance"]["region_means"]) == {"upper", "lower"}


def test_export_embeddings_writes_text_encoder_frames(trained, tmp_path):
    utt = _utterance(trained)
    out = tmp_path / "emb.csv"
    assert main(["export-embeddings", "--checkpoint", str(trained / "run" / "checkpoint"),
                 "--audio", utt["audio"], "--alignment", utt["alignment"], "--out", str(out)]) == 0
    with open(out) as f:
        table = import_embeddings(f)
    assert table.values.shape == (load_mesh_sequence(utt["meshes"]).frame_count, TINY["text_dim"])
    assert any(table.words)


def test_export_embeddings_needs_a_text_encoder(trained, tmp_path):
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps({**TINY, "epochs": 1}))
    assert main(["train", "--config", str(config), "--fusion", "audio",
                 "--manifest", str(trained / "corpus" / "manifest.json"), "--out", str(tmp_path / "run")]) == 0
    utt = _utterance(trained)
    assert main(["export-embeddings", "--checkpoint", str(tmp_path / "run" / "checkpoint"),
                 "--audio", utt["audio"], "--alignment", utt["alignment"],
                 "--out", str(tmp_path / "emb.csv")]) == 1


def test_ablate_writes_rows_and_summary(trained, tmp_path):
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps(TINY))
    assert main(["ablate", "--config", str(config), "--manifest", str(trained / "corpus" / "manifest.json"),
                 "--seeds", "4", "--epochs", "1", "--out", str(tmp_path / "ablation")]) == 0
    rows = read_report(tmp_path / "ablation" / "ablation.csv")
    summary = read_report(tmp_path / "ablation" / "ablation_summary.csv")
    assert len(rows) == 4 and set(rows["seed"]) == {4}
    assert summary["label"].tolist() == ["Audio Only", "Text Only", "Audio+Text (C)", "Audio+Text (TF)"]
    assert rows["checkpoint_hash"].str.len().eq(64).all()
    header = [line for line in (tmp_path / "ablation" / "ablation.csv").read_text().splitlines()
              if line.startswith("# checkpoint manifest sha256: ")]
    assert len(header) == 1 and len(header[0].rsplit(" ", 1)[1]) == 64
    snapshot = json.loads((tmp_path / "ablation" / RESOLVED_NAME).read_text())
    assert snapshot["seeds"] == [4]
    assert snapshot["provenance"]["checkpoint_manifest_sha256"] == header[0].rsplit(" ", 1)[1]
