"""Training orchestration: schedule, mining hook, checkpoints, run logging.

Determinism is the organizing principle here. All stochastic choices for
epoch e come from a generator seeded with (seed, e), so a run resumed from
any checkpoint replays exactly the epochs an uninterrupted run would have
produced. Checkpoints and run logs carry no timestamps, which makes two
same-seed runs byte-identical.
"""

from __future__ import annotations

import json
import pickle
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import (
    Config,
    DecodeConfig,
    FrontendConfig,
    ModelConfig,
    TrainConfig,
    dataclass_from_dict,
    dataclass_to_dict,
)
from .corpus import FILLER, AnnotatedClip, WordEvent
from .decode import DetectionEvent, decode
from .evalmetrics import EventScore, corpus_event_prf
from .features import Spectrogram, augment, num_frames_for, stft_features
from .mining import FpReport, fp_report, is_mining_epoch, mining_step
from .net import FillerNet, build_model, output_frames, predict
from .objective import LossBreakdown, total_loss
from .targets import CategoryRegistry, encode_targets, keypoint_frame
from .util import apply_worker_cap, atomic_write_bytes, atomic_write_text

CHECKPOINT_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """Raised when training cannot proceed (bad data, diverged loss)."""


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoint files."""


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 1-indexed epoch: one tenth per passed drop epoch."""
    if not (1 <= epoch <= config.total_epochs):
        raise ValueError(f"epoch {epoch} outside [1, {config.total_epochs}]")
    drops = sum(1 for d in config.lr_drop_epochs if d <= epoch)
    return config.lr_initial * 0.1**drops


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _intern_strings(obj):
    """Deduplicate equal strings so pickle output depends only on content.

    Without this, pickle's memo encodes whether two equal strings happen to
    be the same object, which differs between a fresh run and one resumed
    from a checkpoint and would break byte-level reproducibility.
    """
    if isinstance(obj, str):
        return sys.intern(obj)
    if isinstance(obj, dict):
        return {_intern_strings(k): _intern_strings(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_intern_strings(v) for v in obj]
    if isinstance(obj, tuple):
        return tuple(_intern_strings(v) for v in obj)
    return obj


def save_checkpoint(
    path: Path | str,
    *,
    epoch: int,
    model: FillerNet,
    optimizer: torch.optim.SGD | None,
    registry: CategoryRegistry,
    config: Config,
    best_val_f1: float,
) -> None:
    """Write a versioned, timestamp-free checkpoint (numpy arrays, pickled)."""
    model_state = {
        name: tensor.detach().cpu().numpy().copy()
        for name, tensor in model.state_dict().items()
    }
    momentum = {}
    if optimizer is not None:
        by_param = {id(p): name for name, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for param in group["params"]:
                state = optimizer.state.get(param, {})
                buf = state.get("momentum_buffer")
                if buf is not None:
                    momentum[by_param[id(param)]] = buf.detach().cpu().numpy().copy()
    payload = _intern_strings(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "epoch": epoch,
            "config": dataclass_to_dict(config),
            "registry": registry.to_dict(),
            "model_state": model_state,
            "optimizer_momentum": momentum,
            "best_val_f1": best_val_f1,
        }
    )
    atomic_write_bytes(path, pickle.dumps(payload, protocol=4))


@dataclass
class Checkpoint:
    """A loaded checkpoint: rebuilt model plus its stored training context."""

    epoch: int
    config: Config
    registry: CategoryRegistry
    model: FillerNet
    optimizer_momentum: dict[str, np.ndarray]
    best_val_f1: float

    @property
    def frontend(self) -> FrontendConfig:
        return self.config.frontend

    @property
    def decode_config(self) -> DecodeConfig:
        return self.config.decode


def load_checkpoint(path: Path | str) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = pickle.loads(path.read_bytes())
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    config = dataclass_from_dict(Config, payload["config"], f"{path}:config")
    registry = CategoryRegistry.from_dict(payload["registry"])
    if registry.num_auxiliary != config.model.num_auxiliary:
        raise CheckpointError(
            f"{path}: registry has {registry.num_auxiliary} auxiliary slots, "
            f"model config has {config.model.num_auxiliary}"
        )
    model = build_model(config.model)
    state = {k: torch.as_tensor(v) for k, v in payload["model_state"].items()}
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: model state does not fit its config: {exc}") from exc
    model.eval()
    return Checkpoint(
        epoch=int(payload["epoch"]),
        config=config,
        registry=registry,
        model=model,
        optimizer_momentum=payload["optimizer_momentum"],
        best_val_f1=float(payload["best_val_f1"]),
    )


def check_compatible(config: Config, checkpoint: Checkpoint) -> None:
    """Reject config/checkpoint pairs whose channel layouts disagree."""
    if config.model.num_auxiliary != checkpoint.config.model.num_auxiliary:
        raise CheckpointError(
            f"config expects {config.model.num_auxiliary} auxiliary channels, "
            f"checkpoint was trained with {checkpoint.config.model.num_auxiliary}"
        )
    if tuple(config.filler_lexicon) != tuple(checkpoint.config.filler_lexicon):
        raise CheckpointError(
            f"config filler lexicon {config.filler_lexicon} differs from "
            f"checkpoint lexicon {checkpoint.config.filler_lexicon}"
        )


# ---------------------------------------------------------------------------
# Shared inference helpers
# ---------------------------------------------------------------------------

def detect_clip(
    model: FillerNet,
    spectrogram: Spectrogram,
    hop_s: float,
    decode_config: DecodeConfig,
) -> list[DetectionEvent]:
    return decode(predict(model, spectrogram), hop_s, decode_config)


@dataclass
class EvalResult:
    score: EventScore
    per_category: list[tuple[str, EventScore]]
    detections: list[tuple[str, DetectionEvent]]


def evaluate(
    checkpoint: Checkpoint,
    clips: list[AnnotatedClip],
    *,
    collar_s: float | None = None,
    score_threshold: float | None = None,
) -> EvalResult:
    """Score a checkpoint on clips; the filler channel is the headline row.

    Decoding and the frontend come from the checkpoint itself so results do
    not depend on the caller's config. References are routed through the
    checkpoint's registry for the per-category breakdown.
    """
    config = checkpoint.config
    collar = collar_s if collar_s is not None else config.train.eval_collar_s
    decode_cfg = config.decode
    if score_threshold is not None:
        decode_cfg = DecodeConfig(
            score_threshold=score_threshold,
            nms_radius_frames=decode_cfg.nms_radius_frames,
            top_k=decode_cfg.top_k,
        )
    registry = checkpoint.registry
    per_clip: list[tuple[list[DetectionEvent], list[WordEvent]]] = []
    all_rows: list[tuple[str, DetectionEvent]] = []
    for clip in clips:
        spectrogram = stft_features(clip.samples, config.frontend)
        detections = detect_clip(checkpoint.model, spectrogram, config.frontend.hop_s, decode_cfg)
        refs = [
            WordEvent(
                text=e.text,
                onset=e.onset,
                duration=e.duration,
                category_id=registry.category_of(e.text),
            )
            for e in clip.events
        ]
        per_clip.append((detections, refs))
        all_rows.extend((clip.clip_id, d) for d in detections)
    score = corpus_event_prf(per_clip, collar, FILLER)
    per_category = []
    for channel, name in enumerate(registry.channel_names()):
        if channel >= 2 and registry.slots[channel - 2] is None:
            continue
        per_category.append((name, corpus_event_prf(per_clip, collar, channel)))
    return EvalResult(score=score, per_category=per_category, detections=all_rows)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoint_path: Path
    run_log_path: Path
    registry: CategoryRegistry
    best_val_f1: float
    final_val: EventScore | None


def _crop_frames(
    frames: np.ndarray, start: int, window: int, fill_value: float
) -> np.ndarray:
    t = frames.shape[0]
    out = np.full((window, frames.shape[1]), fill_value, dtype=np.float32)
    stop = min(start + window, t)
    out[: stop - start] = frames[start:stop]
    return out


def _window_events(
    events: tuple[WordEvent, ...],
    start_frame: int,
    window_frames: int,
    hop_s: float,
    out_hop_s: float,
    out_frames: int,
) -> list[WordEvent]:
    shifted = []
    for event in events:
        onset = event.onset - start_frame * hop_s
        if onset < 0:
            continue
        candidate = WordEvent(
            text=event.text,
            onset=onset,
            duration=event.duration,
            category_id=event.category_id,
        )
        frame, _ = keypoint_frame(candidate, out_hop_s)
        if 0 <= frame < out_frames:
            shifted.append(candidate)
    return shifted


def _round6(value: float) -> float:
    return round(float(value), 6)


def train(
    train_clips: list[AnnotatedClip],
    val_clips: list[AnnotatedClip],
    config: Config,
    out_dir: Path | str,
    resume_from: Path | str | None = None,
) -> TrainResult:
    """Run the full training schedule and leave checkpoints plus a run log.

    The run log is JSON lines, one object per epoch, with loss breakdown,
    learning rate, and (on validation epochs) the filler EventScore and the
    false-positive report that drove mining. Checkpoints land in *out_dir*
    at every mining epoch and at the end; `checkpoint_final.pkl` is the one
    to evaluate.
    """
    if not train_clips:
        raise TrainingError("no training clips")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    apply_worker_cap(default=1)

    tc = config.train
    frontend = config.frontend
    torch.manual_seed(tc.seed)
    model = build_model(config.model)
    registry = CategoryRegistry(
        filler_words=tuple(config.filler_lexicon),
        num_auxiliary=config.model.num_auxiliary,
    )
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=tc.lr_initial,
        momentum=tc.momentum,
        weight_decay=tc.weight_decay,
    )
    best_val_f1 = 0.0
    start_epoch = 1
    if resume_from is not None:
        checkpoint = load_checkpoint(resume_from)
        check_compatible(config, checkpoint)
        model.load_state_dict(checkpoint.model.state_dict())
        registry = checkpoint.registry.copy()
        best_val_f1 = checkpoint.best_val_f1
        start_epoch = checkpoint.epoch + 1
        by_name = dict(model.named_parameters())
        for name, buf in checkpoint.optimizer_momentum.items():
            optimizer.state[by_name[name]] = {
                "momentum_buffer": torch.as_tensor(buf).clone()
            }

    window_frames = num_frames_for(int(round(tc.window_s * frontend.sample_rate)), frontend)
    out_frames = output_frames(window_frames, config.model)
    out_hop_s = frontend.hop_s * config.model.downsample_factor
    fill_value = float(np.log(frontend.log_floor))

    base_train = []
    for clip in train_clips:
        try:
            base_train.append(stft_features(clip.samples, frontend).frames)
        except ValueError as exc:
            raise TrainingError(f"clip {clip.clip_id}: {exc}") from exc
    base_val = []
    for clip in val_clips:
        try:
            base_val.append(stft_features(clip.samples, frontend))
        except ValueError as exc:
            raise TrainingError(f"clip {clip.clip_id}: {exc}") from exc

    log_lines: list[str] = []
    run_log_path = out_dir / "run_log.jsonl"
    final_val: EventScore | None = None

    def validation_pass(epoch: int) -> tuple[FpReport, EventScore]:
        per_clip_fp = []
        per_clip_score = []
        for clip, spectrogram in zip(val_clips, base_val):
            detections = detect_clip(model, spectrogram, frontend.hop_s, config.decode)
            per_clip_fp.append((detections, clip))
            per_clip_score.append((detections, list(clip.events)))
        report = fp_report(per_clip_fp, tc.eval_collar_s, registry, epoch=epoch)
        score = corpus_event_prf(per_clip_score, tc.eval_collar_s, FILLER)
        return report, score

    for epoch in range(start_epoch, tc.total_epochs + 1):
        rng = np.random.default_rng([tc.seed, epoch])
        lr = lr_at(epoch, tc)
        for group in optimizer.param_groups:
            group["lr"] = lr

        val_score: EventScore | None = None
        report: FpReport | None = None
        if val_clips:
            pending: dict[str, object] = {}

            def run_validation() -> FpReport:
                fp, score = validation_pass(epoch)
                pending["score"] = score
                return fp

            report = mining_step(epoch, tc.schedule, registry, run_validation)
            if report is not None:
                val_score = pending["score"]
            elif epoch == tc.total_epochs:
                _, val_score = validation_pass(epoch)
            if val_score is not None:
                best_val_f1 = max(best_val_f1, val_score.f1)
                final_val = val_score

        model.train()
        order = rng.permutation(len(train_clips))
        sums = {"main": 0.0, "fn": 0.0, "nf": 0.0, "length": 0.0, "offset": 0.0, "total": 0.0}
        clip_count = 0
        for batch_start in range(0, len(order), tc.batch_size):
            batch_idx = order[batch_start : batch_start + tc.batch_size]
            windows = []
            targets = []
            for i in batch_idx:
                frames = base_train[i]
                slack = frames.shape[0] - window_frames
                start = int(rng.integers(0, slack + 1)) if slack > 0 else 0
                window = _crop_frames(frames, start, window_frames, fill_value)
                spectrogram = Spectrogram(
                    frames=window, hop_s=frontend.hop_s, sample_rate=frontend.sample_rate
                )
                spectrogram = augment(spectrogram, config.augment, rng)
                events = _window_events(
                    train_clips[i].events,
                    start,
                    window_frames,
                    frontend.hop_s,
                    out_hop_s,
                    out_frames,
                )
                windows.append(spectrogram.frames)
                targets.append(
                    encode_targets(events, out_frames, registry, out_hop_s, tc.target_sigma_frac)
                )
            batch = torch.as_tensor(np.stack(windows), dtype=torch.float32)
            heatmap, length, offset, _ = model(batch)
            losses: list[LossBreakdown] = []
            for j, target in enumerate(targets):
                losses.append(
                    total_loss(heatmap[j], length[j], offset[j], target, tc.loss)
                )
            batch_total = torch.stack([b.total for b in losses]).mean()
            if not torch.isfinite(batch_total):
                clip_ids = [train_clips[i].clip_id for i in batch_idx]
                dump = {
                    "epoch": epoch,
                    "lr": lr,
                    "clip_ids": clip_ids,
                    "losses": [b.as_floats() for b in losses],
                }
                dump_path = out_dir / "divergence_dump.json"
                dump_path.write_text(json.dumps(dump, indent=2) + "\n", encoding="utf-8")
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} on clips {clip_ids}; "
                    f"diagnostics written to {dump_path}"
                )
            optimizer.zero_grad()
            batch_total.backward()
            optimizer.step()
            for breakdown in losses:
                for key, value in breakdown.as_floats().items():
                    sums[key] += value
            clip_count += len(batch_idx)

        line = {
            "epoch": epoch,
            "lr": lr,
            "loss": {k: _round6(v / clip_count) for k, v in sums.items()},
            "registry": registry.channel_names(),
            "val": val_score.as_dict() if val_score is not None else None,
            "fp_report": report.as_dict() if report is not None else None,
        }
        log_lines.append(json.dumps(line, sort_keys=True))

        if is_mining_epoch(epoch, tc.schedule):
            save_checkpoint(
                out_dir / f"checkpoint_epoch_{epoch:04d}.pkl",
                epoch=epoch,
                model=model,
                optimizer=optimizer,
                registry=registry,
                config=config,
                best_val_f1=best_val_f1,
            )

    final_path = out_dir / "checkpoint_final.pkl"
    save_checkpoint(
        final_path,
        epoch=tc.total_epochs,
        model=model,
        optimizer=optimizer,
        registry=registry,
        config=config,
        best_val_f1=best_val_f1,
    )
    atomic_write_text(run_log_path, "\n".join(log_lines) + "\n")
    return TrainResult(
        checkpoint_path=final_path,
        run_log_path=run_log_path,
        registry=registry,
        best_val_f1=best_val_f1,
        final_val=final_val,
    )


def overfit_probe(
    clips: list[AnnotatedClip], config: Config, epochs: int = 5, lr: float = 1e-3
) -> list[float]:
    """Optimizer sanity probe: loss on one fixed batch, logged per epoch.

    No augmentation, no mining, frozen learning rate. The returned sequence
    should be non-increasing when the optimizer and losses wire up cleanly.
    """
    frontend = config.frontend
    torch.manual_seed(config.train.seed)
    model = build_model(config.model)
    registry = CategoryRegistry(
        filler_words=tuple(config.filler_lexicon),
        num_auxiliary=config.model.num_auxiliary,
    )
    out_hop_s = frontend.hop_s * config.model.downsample_factor
    windows = []
    targets = []
    for clip in clips:
        spectrogram = stft_features(clip.samples, frontend)
        out_frames = output_frames(spectrogram.num_frames, config.model)
        windows.append(spectrogram.frames)
        targets.append(
            encode_targets(
                list(clip.events), out_frames, registry, out_hop_s, config.train.target_sigma_frac
            )
        )
    batch = torch.as_tensor(np.stack(windows), dtype=torch.float32)
    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=config.train.momentum)

    def batch_loss() -> torch.Tensor:
        heatmap, length, offset, _ = model(batch)
        parts = [
            total_loss(heatmap[j], length[j], offset[j], target, config.train.loss).total
            for j, target in enumerate(targets)
        ]
        return torch.stack(parts).mean()

    model.train()
    history = []
    for _ in range(epochs):
        loss = batch_loss()
        history.append(float(loss.detach()))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return history
