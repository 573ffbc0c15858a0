"""Turn per-frame predictions into timestamped detection events."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DecodeConfig
from .net import Prediction
from .util import atomic_write_text, fmt6

MIN_DURATION_S = 1e-6


@dataclass(frozen=True)
class DetectionEvent:
    """One decoded event: channel, onset and duration in seconds, peak score."""

    category_id: int
    onset: float
    duration: float
    score: float
    peak_frame: int

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"detection duration must be > 0: {self.duration}")
        if not (0.0 < self.score <= 1.0):
            raise ValueError(f"detection score must be in (0, 1]: {self.score}")

    @property
    def end(self) -> float:
        return self.onset + self.duration


def _local_maxima(scores: np.ndarray, radius: int) -> np.ndarray:
    """Frames that win a max-pool of width 2*radius+1 over *scores*.

    A frame survives when no neighbor within the radius is strictly greater
    and no equal-valued neighbor sits at a smaller index, so plateau ties
    resolve toward the earlier frame.
    """
    t = len(scores)
    keep = np.ones(t, dtype=bool)
    for shift in range(1, radius + 1):
        left = np.empty(t)
        left[:shift] = -np.inf
        left[shift:] = scores[: t - shift]
        right = np.empty(t)
        right[t - shift :] = -np.inf
        right[: t - shift] = scores[shift:]
        keep &= scores > left
        keep &= scores >= right
    return np.flatnonzero(keep)


def decode(
    prediction: Prediction,
    hop_s: float,
    config: DecodeConfig | None = None,
) -> list[DetectionEvent]:
    """Extract per-channel heatmap peaks as events.

    *hop_s* is the input frame hop; output frames are spaced hop_s times the
    prediction's downsample factor. A peak at output frame t with sub-frame
    offset o marks a word centered at (t + o) * hop_s * ds whose duration
    comes straight from the length head. Events are returned best first,
    truncated to the configured top_k.
    """
    config = config or DecodeConfig()
    out_hop_s = hop_s * prediction.downsample_factor
    events = []
    for channel in range(prediction.num_channels):
        scores = prediction.heatmap[:, channel]
        for frame in _local_maxima(scores, config.nms_radius_frames):
            score = float(scores[frame])
            if score < config.score_threshold:
                continue
            center = (frame + float(prediction.offset[frame])) * out_hop_s
            duration = max(float(prediction.length[frame]), MIN_DURATION_S)
            events.append(
                DetectionEvent(
                    category_id=channel,
                    onset=center - duration / 2.0,
                    duration=duration,
                    score=score,
                    peak_frame=int(frame),
                )
            )
    events.sort(key=lambda e: (-e.score, e.peak_frame, e.category_id))
    return events[: config.top_k]


DETECTIONS_HEADER = ("clip_id", "category", "onset_s", "duration_s", "score")


def detections_to_csv(rows: list[tuple[str, DetectionEvent]]) -> str:
    """Render (clip_id, event) pairs as the detections CSV document."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(DETECTIONS_HEADER)
    for clip_id, event in rows:
        writer.writerow(
            [clip_id, event.category_id, fmt6(event.onset), fmt6(event.duration), fmt6(event.score)]
        )
    return out.getvalue()


def save_detections(rows: list[tuple[str, DetectionEvent]], path: Path | str) -> None:
    atomic_write_text(path, detections_to_csv(rows))
