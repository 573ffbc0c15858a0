"""Event-based precision/recall/F1 under an onset-tolerance collar.

Matching admits a (detection, reference) pair when their onsets differ by at
most the collar. Pairs are first taken greedily in ascending onset distance,
then the matching is completed to maximum cardinality with augmenting paths,
so the reported true-positive count never undercounts an awkward overlap
pattern. A brute-force oracle over small instances backs this up in tests.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

from .corpus import FILLER
from .util import atomic_write_text


class MetricsError(ValueError):
    """Raised for invalid metric inputs (currently only oracle size limits)."""


@dataclass(frozen=True)
class EventScore:
    """Precision/recall/F1 with the underlying match counts."""

    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "EventScore":
        # Degenerate denominators: empty versus empty scores perfect,
        # empty versus non-empty scores zero.
        if tp + fp > 0:
            precision = tp / (tp + fp)
        else:
            precision = 1.0 if fn == 0 else 0.0
        if tp + fn > 0:
            recall = tp / (tp + fn)
        else:
            recall = 1.0 if fp == 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def match_events(detections: list, references: list, collar_s: float) -> list[tuple]:
    """One-to-one onset matching between detections and references.

    Any event objects with an ``onset`` attribute work. Admissible pairs
    have onsets within *collar_s*. Greedy selection runs in ascending onset
    distance (ties toward the earlier reference onset, then the earlier
    detection onset), after which augmenting paths extend the matching to
    maximum cardinality. Returns (detection, reference) pairs ordered by
    detection onset.
    """
    if collar_s <= 0:
        raise MetricsError(f"collar_s must be positive: {collar_s}")
    candidates = []
    for di, det in enumerate(detections):
        for ri, ref in enumerate(references):
            distance = abs(det.onset - ref.onset)
            if distance <= collar_s:
                candidates.append((distance, ref.onset, det.onset, ri, di))
    candidates.sort()

    det_match: dict[int, int] = {}
    ref_match: dict[int, int] = {}
    adjacency: dict[int, list[int]] = {}
    for _, _, _, ri, di in candidates:
        adjacency.setdefault(di, []).append(ri)
        if di not in det_match and ri not in ref_match:
            det_match[di] = ri
            ref_match[ri] = di

    def augment(di: int, visited: set[int]) -> bool:
        for ri in adjacency.get(di, ()):
            if ri in visited:
                continue
            visited.add(ri)
            if ri not in ref_match or augment(ref_match[ri], visited):
                det_match[di] = ri
                ref_match[ri] = di
                return True
        return False

    for di in range(len(detections)):
        if di not in det_match and di in adjacency:
            augment(di, set())

    pairs = [(detections[di], references[ri]) for di, ri in det_match.items()]
    pairs.sort(key=lambda pair: (pair[0].onset, pair[1].onset))
    return pairs


def event_prf(
    detections: list,
    references: list,
    collar_s: float,
    category_filter: int | None = FILLER,
) -> EventScore:
    """Score detections against references for one category.

    Both sides are filtered by ``category_id`` unless the filter is None.
    """
    if category_filter is not None:
        detections = [d for d in detections if d.category_id == category_filter]
        references = [r for r in references if r.category_id == category_filter]
    tp = len(match_events(detections, references, collar_s))
    return EventScore.from_counts(tp=tp, fp=len(detections) - tp, fn=len(references) - tp)


def corpus_event_prf(
    per_clip: list[tuple[list, list]],
    collar_s: float,
    category_filter: int | None = FILLER,
) -> EventScore:
    """Aggregate counts over (detections, references) pairs, one per clip."""
    tp = fp = fn = 0
    for detections, references in per_clip:
        score = event_prf(detections, references, collar_s, category_filter)
        tp += score.tp
        fp += score.fp
        fn += score.fn
    return EventScore.from_counts(tp=tp, fp=fp, fn=fn)


ORACLE_LIMIT = 12


def oracle_match(detections: list, references: list, collar_s: float) -> int:
    """Exact maximum matching size by exhaustive subset dynamic programming.

    A test oracle only: refuses instances with more than 12 events per side.
    """
    if len(detections) > ORACLE_LIMIT or len(references) > ORACLE_LIMIT:
        raise MetricsError(
            f"oracle_match handles at most {ORACLE_LIMIT} events per side, "
            f"got {len(detections)} detections and {len(references)} references"
        )
    masks = []
    for det in detections:
        mask = 0
        for ri, ref in enumerate(references):
            if abs(det.onset - ref.onset) <= collar_s:
                mask |= 1 << ri
        masks.append(mask)

    size = 1 << len(references)
    best = [-1] * size
    best[0] = 0
    for det_mask in masks:
        step = list(best)
        for used in range(size):
            if best[used] < 0:
                continue
            free = det_mask & ~used
            while free:
                bit = free & -free
                free ^= bit
                if best[used] + 1 > step[used | bit]:
                    step[used | bit] = best[used] + 1
        best = step
    return max(best)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def score_report_text(rows: list[tuple[str, EventScore]]) -> str:
    """Fixed-width per-category report, percentages at one decimal."""
    out = io.StringIO()
    name_width = max([len(name) for name, _ in rows] + [8])
    out.write(
        f"{'category':<{name_width}}  {'P%':>6}  {'R%':>6}  {'F1%':>6}  "
        f"{'tp':>6}  {'fp':>6}  {'fn':>6}\n"
    )
    for name, score in rows:
        out.write(
            f"{name:<{name_width}}  {100 * score.precision:>6.1f}  {100 * score.recall:>6.1f}  "
            f"{100 * score.f1:>6.1f}  {score.tp:>6}  {score.fp:>6}  {score.fn:>6}\n"
        )
    return out.getvalue()


def save_score_report_json(rows: list[tuple[str, EventScore]], path) -> None:
    payload = {name: score.as_dict() for name, score in rows}
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
