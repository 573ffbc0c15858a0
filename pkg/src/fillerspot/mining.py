"""Hard-category mining: attribute filler false positives, promote confusables.

After a validation pass, every filler detection that matches no filler
reference is attributed to the ground-truth word it overlaps most. Words
that rack up enough false positives get promoted, one per scheduled epoch,
into the lowest empty auxiliary slot of the category registry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .config import MiningSchedule
from .corpus import FILLER, AnnotatedClip
from .decode import DetectionEvent
from .evalmetrics import match_events
from .targets import CategoryRegistry


@dataclass
class FpReport:
    """Filler false positives attributed to ground-truth words for one epoch."""

    counts: dict[str, int]
    silence_fp: int
    total_fp: int
    epoch: int
    promoted_words: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.total_fp != self.silence_fp + sum(self.counts.values()):
            raise ValueError(
                f"total_fp {self.total_fp} must equal silence_fp {self.silence_fp} "
                f"plus attributed counts {sum(self.counts.values())}"
            )

    def top(self, n: int = 10) -> list[tuple[str, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "counts": dict(sorted(self.counts.items())),
            "silence_fp": self.silence_fp,
            "total_fp": self.total_fp,
            "promoted_words": list(self.promoted_words),
        }


def _overlap(det: DetectionEvent, onset: float, duration: float) -> float:
    return min(det.end, onset + duration) - max(det.onset, onset)


def fp_report(
    per_clip: list[tuple[list[DetectionEvent], AnnotatedClip]],
    collar_s: float,
    registry: CategoryRegistry,
    epoch: int = 0,
) -> FpReport:
    """Attribute unmatched filler detections to the words they overlap.

    *per_clip* pairs each clip's filler-channel detections with the clip.
    An unmatched detection goes to the word whose span overlaps it longest
    (ties toward the earlier word onset); no overlap at all counts as a
    silence false positive. Filler-lexicon words never appear as keys; a
    filler detection overlapping only filler ground truth (outside the
    collar) counts toward silence as well.
    """
    counts: dict[str, int] = {}
    silence_fp = 0
    for detections, clip in per_clip:
        filler_dets = [d for d in detections if d.category_id == FILLER]
        filler_refs = [e for e in clip.events if e.category_id == FILLER]
        matched = {id(det) for det, _ in match_events(filler_dets, filler_refs, collar_s)}
        for det in filler_dets:
            if id(det) in matched:
                continue
            best_word = None
            best = (0.0, 0.0)
            for event in clip.events:
                overlap = _overlap(det, event.onset, event.duration)
                if overlap <= 0 or event.text in registry.filler_words:
                    continue
                key = (overlap, -event.onset)
                if key > best:
                    best = key
                    best_word = event.text
            if best_word is None:
                silence_fp += 1
            else:
                counts[best_word] = counts.get(best_word, 0) + 1
    return FpReport(
        counts=counts,
        silence_fp=silence_fp,
        total_fp=silence_fp + sum(counts.values()),
        epoch=epoch,
        promoted_words=registry.assigned_words,
    )


def select_hard_category(
    report: FpReport, registry: CategoryRegistry, min_fp_count: int
) -> str | None:
    """The most confusing unpromoted word, or None if nothing qualifies."""
    if not registry.has_empty_slot():
        return None
    candidates = [
        (count, word)
        for word, count in report.counts.items()
        if count >= min_fp_count
        and word not in registry.filler_words
        and word not in registry.assigned_words
    ]
    if not candidates:
        return None
    candidates.sort(key=lambda cw: (-cw[0], cw[1]))
    return candidates[0][1]


def is_mining_epoch(epoch: int, schedule: MiningSchedule) -> bool:
    return (
        epoch >= schedule.start_epoch
        and (epoch - schedule.start_epoch) % schedule.period_epochs == 0
    )


def mining_step(
    epoch: int,
    schedule: MiningSchedule,
    registry: CategoryRegistry,
    validation_pass_fn: Callable[[], FpReport],
) -> FpReport | None:
    """Run one epoch's mining decision; mutates the registry on promotion.

    Off-schedule epochs and full registries are no-ops returning None.
    Otherwise the validation pass supplies an FpReport and at most one word
    is promoted into the lowest empty slot.
    """
    if not is_mining_epoch(epoch, schedule) or not registry.has_empty_slot():
        return None
    report = validation_pass_fn()
    word = select_hard_category(report, registry, schedule.min_fp_count)
    if word is not None:
        registry.promote(word)
        report.promoted_words = registry.assigned_words
    return report
