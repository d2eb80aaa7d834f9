"""
JointFace — Command Line

    python -m jointface synth              generate the synthetic corpus
    python -m jointface train              train a checkpoint from a corpus manifest
    python -m jointface infer              predict a mesh sequence for one utterance
    python -m jointface eval               region errors of a prediction vs ground truth
    python -m jointface ablate             the four-variant modality ablation
    python -m jointface correlate          per-vertex modality correlation map
    python -m jointface export-embeddings  text encoder output per frame, as CSV

Every command takes --config PATH (JSON, flags win) and writes
resolved-config.json next to its outputs.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import structlog
import torch
from pydantic import ValidationError

from jointface import __version__
from jointface.audiofeat.cache import FeatureCache
from jointface.cli.run_config import (
    FUSION_MODES,
    AblateRunConfig,
    CorrelateRunConfig,
    EvalRunConfig,
    ExportEmbeddingsRunConfig,
    InferRunConfig,
    SynthRunConfig,
    TrainRunConfig,
    UsageError,
    resolve,
    write_resolved,
)
from jointface.config import settings
from jointface.core.msq import load_mesh_sequence, load_template, save_mesh_sequence
from jointface.core.regions import load_region_mask
from jointface.errors import ConfigurationError, JointFaceError
from jointface.eval.ablation import run_ablation
from jointface.eval.correlation import correlate_model
from jointface.eval.export import export_embeddings
from jointface.eval.metrics import report_for
from jointface.eval.reports import write_report
from jointface.log import configure_logging
from jointface.model.checkpoint import load_checkpoint
from jointface.model.inference import infer, infer_all_speakers, parse_speaker
from jointface.synth.generator import SynthSpec, generate_corpus
from jointface.train.dataset import load_manifest, prepare_dataset, prepare_inputs, resolve_provider
from jointface.train.loop import TrainConfig, train

logger = structlog.get_logger()


def _seed_list(value: str) -> List[int]:
    try:
        return [int(s) for s in value.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


# ===========================================
# Commands
# ===========================================

def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve(SynthRunConfig, args.config, {
        "out": args.out, "seed": args.seed, "speakers": args.speakers,
        "utterances_per_speaker": args.utterances_per_speaker,
        "rows": args.vertices_rows, "cols": args.vertices_cols, "workers": args.workers,
    })
    try:
        spec = SynthSpec(
            seed=cfg.seed, speakers=cfg.speakers, utterances_per_speaker=cfg.utterances_per_speaker,
            rows=cfg.rows, cols=cfg.cols, workers=cfg.workers,
        )
    except ValidationError as e:
        raise UsageError(f"Invalid corpus settings: {e}") from e
    corpus = generate_corpus(spec, cfg.out)
    write_resolved(cfg, Path(cfg.out))
    print(corpus.manifest_path)
    return 0


def _train_config(cfg, **overrides) -> TrainConfig:
    return TrainConfig(
        lr=cfg.lr, epochs=cfg.epochs, normalize_loss=cfg.normalize_loss, **cfg.widths(), **overrides,
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve(TrainRunConfig, args.config, {
        "manifest": args.manifest, "out": args.out, "epochs": args.epochs, "lr": args.lr,
        "seed": args.seed, "fusion": args.fusion, "embeddings": args.embeddings,
        "checkpoint_every": args.checkpoint_every, "split": args.split,
    })
    corpus = load_manifest(cfg.manifest)
    provider = resolve_provider(cfg.embeddings, cfg.embedding_seed)
    cache = FeatureCache()
    dataset = prepare_dataset(corpus, provider, cache, split=cfg.split)
    val_set = prepare_dataset(corpus, provider, cache, split="val") if corpus.split("val") else None

    out = Path(cfg.out)
    config = _train_config(
        cfg, seed=cfg.seed, fusion_mode=FUSION_MODES[cfg.fusion],
        checkpoint_every=cfg.checkpoint_every, out_dir=str(out),
    )
    result = train(config, dataset, corpus.template, corpus.speakers, val_set=val_set)
    write_resolved(cfg, out, {"checkpoint_manifest_sha256": result.checkpoint_hash})
    print(result.checkpoint_dir)
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = resolve(InferRunConfig, args.config, {
        "checkpoint": args.checkpoint, "audio": args.audio, "alignment": args.alignment,
        "template": args.template, "out": args.out, "speaker": args.speaker, "embeddings": args.embeddings,
    })
    template = load_template(cfg.template)
    ckpt = load_checkpoint(cfg.checkpoint, vertices=template.vertex_count)
    model = ckpt.model
    provider = resolve_provider(cfg.embeddings, cfg.embedding_seed, model.dims.text_in)
    mel, text, _ = prepare_inputs(cfg.audio, cfg.alignment, provider, FeatureCache(), utterance_id=Path(cfg.audio).stem)

    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    speaker = parse_speaker(cfg.speaker)
    written = []
    if speaker == "all":
        for k, seq in infer_all_speakers(model, mel, text, template).items():
            path = out.with_name(f"{out.stem}_s{k}{out.suffix or '.msq'}")
            save_mesh_sequence(seq, path)
            written.append(path)
    else:
        save_mesh_sequence(infer(model, mel, text, speaker, template), out)
        written.append(out)
    write_resolved(cfg, out.parent, {"checkpoint_manifest_sha256": ckpt.hash})
    for path in written:
        print(path)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve(EvalRunConfig, args.config, {
        "pred": args.pred, "truth": args.truth, "mask": args.mask, "out": args.out,
    })
    pred = load_mesh_sequence(cfg.pred)
    truth = load_mesh_sequence(cfg.truth)
    with open(cfg.mask) as f:
        mask = load_region_mask(f, truth.vertex_count)
    report = report_for([(Path(cfg.pred).stem, pred, truth)], mask)
    out = Path(cfg.out)
    csv_path, _ = write_report(report.to_frame(), out, "region_errors", cfg.snapshot())
    write_resolved(cfg, out)
    print(csv_path)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve(AblateRunConfig, args.config, {
        "manifest": args.manifest, "out": args.out, "seeds": args.seeds,
        "epochs": args.epochs, "embeddings": args.embeddings,
    })
    corpus = load_manifest(cfg.manifest)
    if corpus.mask is None:
        raise ConfigurationError("The ablation needs a corpus manifest with a region mask")
    provider = resolve_provider(cfg.embeddings, cfg.embedding_seed)
    cache = FeatureCache()
    dataset = prepare_dataset(corpus, provider, cache, split="train")
    test_set = prepare_dataset(corpus, provider, cache, split="test")

    out = Path(cfg.out)
    result = run_ablation(
        _train_config(cfg), dataset, test_set, corpus.template, corpus.speakers,
        corpus.mask, cfg.seeds, out_dir=out / "runs",
    )
    snapshot = cfg.snapshot()
    csv_path, _ = write_report(result.rows, out, "ablation", snapshot, result.checkpoint_hash)
    write_report(result.summary, out, "ablation_summary", snapshot, result.checkpoint_hash)
    write_resolved(cfg, out, {"checkpoint_manifest_sha256": result.checkpoint_hash})
    print(csv_path)
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    cfg = resolve(CorrelateRunConfig, args.config, {
        "checkpoint": args.checkpoint, "manifest": args.manifest, "out": args.out,
        "modality": args.modality, "reduction": args.reduction, "split": args.split,
    })
    corpus = load_manifest(cfg.manifest)
    ckpt = load_checkpoint(cfg.checkpoint, vertices=corpus.vertices, speakers=corpus.speakers)
    provider = resolve_provider(cfg.embeddings, cfg.embedding_seed, ckpt.model.dims.text_in)
    samples = prepare_dataset(corpus, provider, FeatureCache(), split=cfg.split, require_meshes=False)
    cmap = correlate_model(ckpt.model, samples, corpus.template, cfg.modality, cfg.reduction)

    region = np.full(corpus.vertices, "", dtype=object)
    if corpus.mask is not None:
        region[corpus.mask.upper_indices()] = "upper"
        region[corpus.mask.lower_indices()] = "lower"
    df = pd.DataFrame({"vertex": np.arange(corpus.vertices), "region": region, "score": cmap.scores})

    out = Path(cfg.out)
    csv_path, _ = write_report(df, out, f"correlation_{cfg.modality}", cfg.snapshot(), ckpt.hash)
    provenance = {"checkpoint_manifest_sha256": ckpt.hash}
    if corpus.mask is not None:
        provenance["region_means"] = cmap.region_means(corpus.mask)
    write_resolved(cfg, out, provenance)
    print(csv_path)
    return 0


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    cfg = resolve(ExportEmbeddingsRunConfig, args.config, {
        "checkpoint": args.checkpoint, "audio": args.audio, "alignment": args.alignment,
        "out": args.out, "embeddings": args.embeddings,
    })
    ckpt = load_checkpoint(cfg.checkpoint)
    model = ckpt.model
    if not model.fusion_mode.uses_text:
        raise ConfigurationError(f"Checkpoint ({model.fusion_mode.value}) has no text encoder")
    provider = resolve_provider(cfg.embeddings, cfg.embedding_seed, model.dims.text_in)
    _, text, alignment = prepare_inputs(
        cfg.audio, cfg.alignment, provider, FeatureCache(), utterance_id=Path(cfg.audio).stem,
    )
    with torch.no_grad():
        h_l = model.text_encode(text)

    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_embeddings(h_l, alignment, out)
    write_resolved(cfg, out.parent, {"checkpoint_manifest_sha256": ckpt.hash})
    print(out)
    return 0


# ===========================================
# Parser
# ===========================================

COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "correlate": cmd_correlate,
    "export-embeddings": cmd_export_embeddings,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointface", description="Joint audio-text 3D facial animation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run config; flags override its values")
        return p

    p = command("synth", "generate the synthetic corpus")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--speakers", type=int)
    p.add_argument("--utterances-per-speaker", type=int)
    p.add_argument("--vertices-rows", type=int)
    p.add_argument("--vertices-cols", type=int)
    p.add_argument("--workers", type=int)

    p = command("train", "train a checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--fusion", choices=sorted(FUSION_MODES))
    p.add_argument("--embeddings", help="pseudo or file:PATH")
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--split")

    p = command("infer", "predict a mesh sequence")
    p.add_argument("--checkpoint")
    p.add_argument("--audio")
    p.add_argument("--alignment")
    p.add_argument("--template")
    p.add_argument("--speaker", help="speaker index or 'all'")
    p.add_argument("--out")
    p.add_argument("--embeddings")

    p = command("eval", "region errors of a prediction")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--mask")
    p.add_argument("--out")

    p = command("ablate", "modality ablation")
    p.add_argument("--manifest")
    p.add_argument("--seeds", type=_seed_list)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.add_argument("--embeddings")

    p = command("correlate", "modality/vertex correlation map")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--modality", choices=["audio", "text"])
    p.add_argument("--reduction", choices=["mean", "max"])
    p.add_argument("--split")
    p.add_argument("--out")

    p = command("export-embeddings", "text encoder output as CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--audio")
    p.add_argument("--alignment")
    p.add_argument("--out")
    p.add_argument("--embeddings")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(settings.LOG_LEVEL, settings.LOG_JSON)
    if settings.TORCH_THREADS > 0:
        torch.set_num_threads(settings.TORCH_THREADS)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError) as e:
        parser.print_usage(sys.stderr)
        print(f"jointface {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (JointFaceError, OSError) as e:
        logger.error("command_failed", command=args.command, error_type=type(e).__name__, error=str(e))
        print(f"jointface {args.command}: {e}", file=sys.stderr)
        return 1
