"""Category registry and the encoding of word events into training targets.

The registry is the single source of truth for category ids: channel 0 is
filler, channel 1 is non-filler, and channels 2 and up are auxiliary slots
that start empty and get bound to mined confusable words during training.
Target encoding always routes a word through the current registry, so a
promotion changes the word's channel on the next encoding pass without any
relabeling of stored events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import FILLER, NON_FILLER, WordEvent


class RegistryError(ValueError):
    """Raised for invalid registry operations (bad promotions, bad state)."""


class EncodingError(ValueError):
    """Raised when events cannot be encoded into the requested frame range."""


@dataclass
class CategoryRegistry:
    """Ordered category set: filler, non-filler, then auxiliary slots.

    ``slots[i]`` is the word bound to channel ``2 + i``, or None while the
    slot is still an unused placeholder. Assignments are append-only: a
    promoted word keeps its channel for the rest of the run.
    """

    filler_words: tuple[str, ...] = ("um", "uh")
    num_auxiliary: int = 8
    slots: list[str | None] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.filler_words:
            raise RegistryError("filler_words must not be empty")
        if self.num_auxiliary < 0:
            raise RegistryError(f"num_auxiliary must be >= 0: {self.num_auxiliary}")
        if not self.slots:
            self.slots = [None] * self.num_auxiliary
        if len(self.slots) != self.num_auxiliary:
            raise RegistryError(
                f"expected {self.num_auxiliary} slots, got {len(self.slots)}"
            )
        assigned = [w for w in self.slots if w is not None]
        if len(set(assigned)) != len(assigned):
            raise RegistryError(f"duplicate assigned words: {assigned}")
        bad = set(assigned) & set(self.filler_words)
        if bad:
            raise RegistryError(f"filler words cannot occupy auxiliary slots: {sorted(bad)}")

    @property
    def num_channels(self) -> int:
        return 2 + self.num_auxiliary

    @property
    def assigned_words(self) -> tuple[str, ...]:
        return tuple(w for w in self.slots if w is not None)

    def has_empty_slot(self) -> bool:
        return any(w is None for w in self.slots)

    def category_of(self, word: str) -> int:
        """Map a normalized word to its current channel."""
        if word in self.filler_words:
            return FILLER
        for i, assigned in enumerate(self.slots):
            if assigned == word:
                return 2 + i
        return NON_FILLER

    def promote(self, word: str) -> int:
        """Bind *word* to the lowest empty slot; returns its new channel."""
        if word in self.filler_words:
            raise RegistryError(f"cannot promote filler word {word!r}")
        if word in self.slots:
            raise RegistryError(f"word {word!r} is already promoted")
        for i, assigned in enumerate(self.slots):
            if assigned is None:
                self.slots[i] = word
                return 2 + i
        raise RegistryError(f"no empty auxiliary slot for {word!r}")

    def channel_names(self) -> list[str]:
        return ["filler", "non-filler"] + [
            w if w is not None else f"aux{i}" for i, w in enumerate(self.slots)
        ]

    def copy(self) -> "CategoryRegistry":
        return CategoryRegistry(
            filler_words=self.filler_words,
            num_auxiliary=self.num_auxiliary,
            slots=list(self.slots),
        )

    def to_dict(self) -> dict:
        return {
            "filler_words": list(self.filler_words),
            "num_auxiliary": self.num_auxiliary,
            "slots": list(self.slots),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CategoryRegistry":
        return cls(
            filler_words=tuple(data["filler_words"]),
            num_auxiliary=int(data["num_auxiliary"]),
            slots=list(data["slots"]),
        )


@dataclass(frozen=True)
class TargetTensor:
    """Per-frame training targets for one clip.

    ``heatmap`` is T x C in [0, 1] with exact ones at keypoint frames;
    ``length`` (seconds) and ``offset`` (fraction of a frame) are nonzero
    only at keypoint frames; ``keypoint_mask`` marks them per channel.
    """

    heatmap: np.ndarray
    length: np.ndarray
    offset: np.ndarray
    keypoint_mask: np.ndarray
    num_keypoints: int

    def __post_init__(self) -> None:
        t, c = self.heatmap.shape
        if self.keypoint_mask.shape != (t, c):
            raise EncodingError("keypoint_mask shape must match heatmap")
        if self.length.shape != (t,) or self.offset.shape != (t,):
            raise EncodingError("length and offset must be per-frame vectors")
        if int(self.keypoint_mask.sum()) != self.num_keypoints:
            raise EncodingError("num_keypoints must count keypoint_mask entries")

    @property
    def num_frames(self) -> int:
        return self.heatmap.shape[0]

    @property
    def num_channels(self) -> int:
        return self.heatmap.shape[1]


def keypoint_frame(event: WordEvent, hop_s: float) -> tuple[int, float]:
    """The event's center frame and its sub-frame offset residual."""
    center = (event.onset + event.duration / 2.0) / hop_s
    frame = int(np.floor(center))
    return frame, center - frame


def encode_targets(
    events: list[WordEvent] | tuple[WordEvent, ...],
    num_frames: int,
    registry: CategoryRegistry,
    hop_s: float,
    sigma_frac: float = 1.0 / 6.0,
) -> TargetTensor:
    """Render events into heatmap, length, and offset targets.

    Each event contributes a Gaussian bump peaking at exactly 1 on its
    center frame in its registry channel, with sigma = max(1, sigma_frac *
    duration_frames) frames. Overlapping bumps in the same channel combine
    by elementwise max, which preserves every exact-1 keypoint.
    """
    if num_frames < 1:
        raise EncodingError(f"num_frames must be >= 1: {num_frames}")
    if hop_s <= 0:
        raise EncodingError(f"hop_s must be positive: {hop_s}")
    if sigma_frac <= 0:
        raise EncodingError(f"sigma_frac must be positive: {sigma_frac}")
    c = registry.num_channels
    heatmap = np.zeros((num_frames, c), dtype=np.float64)
    length = np.zeros(num_frames, dtype=np.float64)
    offset = np.zeros(num_frames, dtype=np.float64)
    mask = np.zeros((num_frames, c), dtype=bool)

    frames = np.arange(num_frames, dtype=np.float64)
    for event in events:
        frame, residual = keypoint_frame(event, hop_s)
        if not (0 <= frame < num_frames):
            raise EncodingError(
                f"event {event.text!r} at {event.onset:.3f}s has center frame {frame}, "
                f"outside [0, {num_frames})"
            )
        channel = registry.category_of(event.text)
        duration_frames = event.duration / hop_s
        sigma = max(1.0, sigma_frac * duration_frames)
        bump = np.exp(-((frames - frame) ** 2) / (2.0 * sigma**2))
        np.maximum(heatmap[:, channel], bump, out=heatmap[:, channel])
        heatmap[frame, channel] = 1.0
        mask[frame, channel] = True
        length[frame] = event.duration
        offset[frame] = residual

    return TargetTensor(
        heatmap=heatmap,
        length=length,
        offset=offset,
        keypoint_mask=mask,
        num_keypoints=int(mask.sum()),
    )
