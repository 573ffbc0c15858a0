"""Command-line entry points: gen-synth, train, eval, detect, fp-report, export-embeddings.

Every command is deterministic given its config and seed, exits zero on
success, and prints a one-line diagnostic on failure. Output files are
written atomically so an interrupted command never leaves partial files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from .config import Config, load_config
from .corpus import (
    SynthSpec,
    desk_synth_spec,
    generate_synth,
    load_corpus,
    read_wav,
    resample_waveform,
    save_corpus,
    split_corpus,
)
from .decode import save_detections
from .evalmetrics import save_score_report_json, score_report_text
from .features import stft_features
from .mining import fp_report
from .net import predict
from .targets import keypoint_frame
from .trainer import check_compatible, detect_clip, evaluate, load_checkpoint, train
from .util import atomic_write_text, fmt6

_KNOWN_ERRORS = (ValueError, OSError, RuntimeError)

SPLITS = ("train", "val", "test")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_split(corpus_dir: Path, split: str, config: Config):
    return load_corpus(
        corpus_dir / f"{split}.csv",
        corpus_dir / "audio",
        filler_lexicon=tuple(config.filler_lexicon),
        target_sample_rate=config.frontend.sample_rate,
    )


def _synth_spec(config: Config, seed: int | None) -> SynthSpec:
    synth = config.synth
    return desk_synth_spec(
        seed=synth.seed if seed is None else seed,
        clips=synth.clips,
        noise_snr_db=synth.noise_snr_db,
        words_per_clip=synth.words_per_clip,
    )


def cmd_gen_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else Config()
    out_dir = Path(args.out)
    spec = _synth_spec(config, args.seed)
    clips = generate_synth(spec)
    splits = split_corpus(clips, config.synth.split_fractions, config.synth.split_seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    for split, split_clips in zip(SPLITS, splits):
        save_corpus(split_clips, out_dir / f"{split}.csv", out_dir / "audio")
    manifest = {
        "preset": config.synth.preset,
        "seed": spec.seed,
        "clips": spec.clips,
        "split_counts": {split: len(split_clips) for split, split_clips in zip(SPLITS, splits)},
        "sample_rate": spec.sample_rate,
        "clip_duration_s": spec.clip_duration_s,
        "noise_snr_db": spec.noise_snr_db,
        "filler_words": list(spec.filler_words),
        "confusable_words": list(spec.confusable_words),
        "vocabulary": [t.name for t in spec.vocabulary],
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(
        f"wrote {spec.clips} clips to {out_dir} "
        f"({', '.join(f'{s}={len(c)}' for s, c in zip(SPLITS, splits))})"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        config = dataclasses.replace(
            config, train=dataclasses.replace(config.train, seed=args.seed)
        )
    corpus_dir = Path(args.corpus_dir)
    train_clips = _load_split(corpus_dir, "train", config)
    val_clips = _load_split(corpus_dir, "val", config)
    result = train(
        train_clips, val_clips, config, Path(args.out), resume_from=args.checkpoint
    )
    print(
        f"trained {config.train.total_epochs} epochs; "
        f"best val F1 {fmt6(result.best_val_f1)}; "
        f"promoted {list(result.registry.assigned_words)}; "
        f"checkpoint {result.checkpoint_path}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if args.config:
        check_compatible(load_config(args.config), checkpoint)
    clips = _load_split(Path(args.corpus_dir), args.split, checkpoint.config)
    result = evaluate(checkpoint, clips, score_threshold=args.threshold)
    sys.stdout.write(score_report_text(result.per_category))
    if args.out:
        save_score_report_json(result.per_category, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    frontend = checkpoint.frontend
    decode_cfg = checkpoint.decode_config
    if args.threshold is not None:
        decode_cfg = dataclasses.replace(decode_cfg, score_threshold=args.threshold)
    rows = []
    failures = 0
    for audio_path in args.audio:
        path = Path(audio_path)
        try:
            samples, sr = read_wav(path)
            if sr != frontend.sample_rate:
                samples = resample_waveform(samples, sr, frontend.sample_rate)
            spectrogram = stft_features(samples, frontend)
            detections = detect_clip(checkpoint.model, spectrogram, frontend.hop_s, decode_cfg)
        except _KNOWN_ERRORS as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        rows.extend((path.stem, d) for d in detections if d.category_id == 0)
    save_detections(rows, args.out)
    print(f"wrote {len(rows)} detections for {len(args.audio) - failures} files to {args.out}")
    return 1 if failures else 0


def cmd_fp_report(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    clips = _load_split(Path(args.corpus_dir), args.split, checkpoint.config)
    frontend = checkpoint.frontend
    per_clip = []
    for clip in clips:
        spectrogram = stft_features(clip.samples, frontend)
        detections = detect_clip(
            checkpoint.model, spectrogram, frontend.hop_s, checkpoint.decode_config
        )
        per_clip.append((detections, clip))
    report = fp_report(
        per_clip,
        checkpoint.config.train.eval_collar_s,
        checkpoint.registry,
        epoch=checkpoint.epoch,
    )
    print(f"filler false positives on split {args.split!r} (epoch {report.epoch}):")
    print(f"{'word':<16}  {'fp_count':>8}")
    for word, count in report.top(args.top):
        flag = " (promoted)" if word in checkpoint.registry.assigned_words else ""
        print(f"{word:<16}  {count:>8}{flag}")
    print(f"{'<silence>':<16}  {report.silence_fp:>8}")
    print(f"{'total':<16}  {report.total_fp:>8}")
    if args.out:
        atomic_write_text(args.out, json.dumps(report.as_dict(), indent=2) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    clips = _load_split(Path(args.corpus_dir), args.split, checkpoint.config)
    frontend = checkpoint.frontend
    registry = checkpoint.registry
    out_hop_s = frontend.hop_s * checkpoint.config.model.downsample_factor
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    dim = checkpoint.model.embedding_dim
    writer.writerow(["clip_id", "word", "category_id"] + [f"e{i}" for i in range(dim)])
    rows = 0
    for clip in clips:
        spectrogram = stft_features(clip.samples, frontend)
        prediction = predict(checkpoint.model, spectrogram, include_embeddings=True)
        for event in clip.events:
            frame, _ = keypoint_frame(event, out_hop_s)
            if not (0 <= frame < prediction.num_frames):
                print(
                    f"warning: {clip.clip_id}: {event.text!r} at {event.onset:.3f}s "
                    f"falls outside the prediction range; row skipped",
                    file=sys.stderr,
                )
                continue
            embedding = prediction.embeddings[frame]
            writer.writerow(
                [clip.clip_id, event.text, registry.category_of(event.text)]
                + [fmt6(v) for v in embedding]
            )
            rows += 1
    atomic_write_text(args.out, buffer.getvalue())
    print(f"wrote {rows} embedding rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fillerspot",
        description="Filler-word event detection: synthesis, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", type=str, default=None, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        return p

    p = add("gen-synth", cmd_gen_synth, "generate the synthetic corpus")
    p.add_argument("--out", type=str, required=True, help="output corpus directory")

    p = add("train", cmd_train, "train a model on a corpus directory")
    p.add_argument("corpus_dir", type=str, help="corpus directory from gen-synth")
    p.add_argument("--out", type=str, required=True, help="run output directory")
    p.add_argument("--checkpoint", type=str, default=None, help="resume from this checkpoint")

    p = add("eval", cmd_eval, "score a checkpoint on a corpus split")
    p.add_argument("corpus_dir", type=str)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--threshold", type=float, default=None, help="score threshold override")
    p.add_argument("--out", type=str, default=None, help="write the JSON report here")

    p = add("detect", cmd_detect, "detect filler events in WAV files")
    p.add_argument("audio", nargs="+", type=str, help="WAV files to process")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--threshold", type=float, default=None, help="score threshold override")
    p.add_argument("--out", type=str, required=True, help="detections CSV path")

    p = add("fp-report", cmd_fp_report, "attribute filler false positives to words")
    p.add_argument("corpus_dir", type=str)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--split", choices=SPLITS, default="val")
    p.add_argument("--top", type=int, default=10, help="rows in the printed table")
    p.add_argument("--out", type=str, default=None, help="write the JSON report here")

    p = add("export-embeddings", cmd_export_embeddings, "export keypoint embeddings")
    p.add_argument("corpus_dir", type=str)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--split", choices=SPLITS, default="val")
    p.add_argument("--out", type=str, required=True, help="embeddings CSV path")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
