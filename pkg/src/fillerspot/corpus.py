"""Annotated speech clips: data model, CSV/WAV ingestion, synthetic corpus generation.

The synthetic generator renders each vocabulary word as a deterministic
harmonic tone burst. "Confusable" words copy the acoustic prefix of a filler
word sample-for-sample, which is what makes them show up as filler false
positives and lets hard-category mining find them on a desk-scale corpus.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .util import atomic_write_bytes, atomic_write_text, fmt6

FILLER = 0
NON_FILLER = 1

#: onset+duration may exceed the clip end by this much (annotation jitter)
CLIP_END_TOLERANCE_S = 1e-3


class CorpusError(ValueError):
    """Raised for ingestion, validation, or generation problems."""


@dataclass(frozen=True)
class WordEvent:
    """One word occurrence: normalized token, onset and duration in seconds.

    ``category_id`` is the base category at load time (0 = filler,
    1 = non-filler). Target encoding re-derives the live category from the
    registry, so auxiliary promotions never require touching stored events.
    """

    text: str
    onset: float
    duration: float
    category_id: int = NON_FILLER

    def __post_init__(self) -> None:
        if not self.text or any(ch.isspace() for ch in self.text):
            raise CorpusError(f"event text must be non-empty without whitespace: {self.text!r}")
        if self.onset < 0:
            raise CorpusError(f"event onset must be >= 0: {self.onset}")
        if self.duration <= 0:
            raise CorpusError(f"event duration must be > 0: {self.duration}")

    @property
    def end(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class AnnotatedClip:
    """A waveform plus its word annotations, sorted by onset."""

    clip_id: str
    samples: np.ndarray
    sample_rate: int
    events: tuple[WordEvent, ...]

    def __post_init__(self) -> None:
        onsets = [e.onset for e in self.events]
        if onsets != sorted(onsets):
            raise CorpusError(f"clip {self.clip_id}: events must be sorted by onset")
        dur = len(self.samples) / self.sample_rate
        for e in self.events:
            if e.end > dur + CLIP_END_TOLERANCE_S:
                raise CorpusError(
                    f"clip {self.clip_id}: event {e.text!r} ends at {e.end:.3f}s, "
                    f"beyond clip length {dur:.3f}s"
                )
        _reject_overlapping_duplicates(self.clip_id, self.events)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _reject_overlapping_duplicates(clip_id: str, events: tuple[WordEvent, ...]) -> None:
    for a, b in zip(events, events[1:]):
        if a.text == b.text and b.onset < a.end:
            raise CorpusError(
                f"clip {clip_id}: overlapping identical events {a.text!r} "
                f"at {a.onset:.3f}s and {b.onset:.3f}s"
            )


def base_category(text: str, filler_lexicon: tuple[str, ...] | frozenset[str]) -> int:
    return FILLER if text in set(filler_lexicon) else NON_FILLER


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WordTemplate:
    """Parametric harmonic tone burst.

    ``segments`` is a sequence of (fundamental_hz, duration_s) pieces played
    back to back with continuous phase, under a shared attack/release
    envelope. Two templates with identical leading segments render
    bit-identical leading samples, which is the confusability mechanism.
    """

    name: str
    segments: tuple[tuple[float, float], ...]
    amplitude: float = 0.3
    attack_s: float = 0.012
    release_s: float = 0.012
    partials: int = 4

    def __post_init__(self) -> None:
        if not self.segments:
            raise CorpusError(f"template {self.name!r}: needs at least one segment")
        for f0, dur in self.segments:
            if f0 <= 0 or dur <= 0:
                raise CorpusError(f"template {self.name!r}: segment values must be positive")

    @property
    def duration(self) -> float:
        return sum(dur for _, dur in self.segments)


@dataclass(frozen=True)
class SynthSpec:
    """Everything the synthetic generator needs; generation is a pure function of this."""

    vocabulary: tuple[WordTemplate, ...]
    filler_words: tuple[str, ...]
    confusable_words: tuple[str, ...]
    clips: int
    words_per_clip: tuple[int, int]
    noise_snr_db: float
    seed: int
    sample_rate: int = 16000
    clip_duration_s: float = 8.0
    gap_range_s: tuple[float, float] = (0.15, 0.4)
    lead_in_range_s: tuple[float, float] = (0.2, 0.5)
    pitch_jitter_frac: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.pitch_jitter_frac < 0.5):
            raise CorpusError(
                f"pitch_jitter_frac must be in [0, 0.5): {self.pitch_jitter_frac}"
            )
        if not self.vocabulary:
            raise CorpusError("synth vocabulary is empty")
        names = [t.name for t in self.vocabulary]
        if len(set(names)) != len(names):
            raise CorpusError("synth vocabulary has duplicate word names")
        by_name = {t.name: t for t in self.vocabulary}
        for group, words in (("filler", self.filler_words), ("confusable", self.confusable_words)):
            for w in words:
                if w not in by_name:
                    raise CorpusError(f"{group} word {w!r} is not in the vocabulary")
        overlap = set(self.filler_words) & set(self.confusable_words)
        if overlap:
            raise CorpusError(f"words cannot be both filler and confusable: {sorted(overlap)}")
        for w in self.confusable_words:
            if not any(
                _shared_prefix_duration(by_name[w], by_name[f]) >= 0.5 * by_name[w].duration
                for f in self.filler_words
            ):
                raise CorpusError(
                    f"confusable {w!r} must share >= 50% of its duration with a filler template"
                )
        lo, hi = self.words_per_clip
        if not (1 <= lo <= hi):
            raise CorpusError(f"invalid words_per_clip range: {self.words_per_clip}")
        # Worst-case packing must fit so every clip gets its drawn word count.
        longest = max(t.duration for t in self.vocabulary)
        worst = self.lead_in_range_s[1] + hi * (longest + self.gap_range_s[1])
        if worst > self.clip_duration_s:
            raise CorpusError(
                f"words_per_clip up to {hi} cannot be guaranteed to fit in "
                f"{self.clip_duration_s}s clips (worst case {worst:.2f}s)"
            )

    def template(self, name: str) -> WordTemplate:
        for t in self.vocabulary:
            if t.name == name:
                return t
        raise KeyError(name)


def _shared_prefix_duration(a: WordTemplate, b: WordTemplate) -> float:
    """Duration of the identical acoustic prefix of two templates."""
    if (a.amplitude, a.attack_s, a.partials) != (b.amplitude, b.attack_s, b.partials):
        return 0.0
    shared = 0.0
    for sa, sb in zip(a.segments, b.segments):
        if sa != sb:
            break
        shared += sa[1]
    # The release taper must not reach into the shared prefix of either word.
    shared = min(shared, a.duration - a.release_s, b.duration - b.release_s)
    return max(shared, 0.0)


def render_word(template: WordTemplate, sample_rate: int) -> np.ndarray:
    """Render a template to float32 samples. Pure function of its arguments."""
    seg_samples = [int(round(dur * sample_rate)) for _, dur in template.segments]
    n = sum(seg_samples)
    f0 = np.empty(n, dtype=np.float64)
    pos = 0
    for (hz, _), count in zip(template.segments, seg_samples):
        f0[pos : pos + count] = hz
        pos += count
    phase = 2.0 * math.pi * np.cumsum(f0) / sample_rate
    wave = np.zeros(n, dtype=np.float64)
    norm = sum(0.6**p for p in range(template.partials))
    for p in range(template.partials):
        wave += (0.6**p) * np.sin((p + 1) * phase)
    wave *= template.amplitude / norm

    env = np.ones(n, dtype=np.float64)
    attack = min(int(round(template.attack_s * sample_rate)), n)
    if attack > 0:
        env[:attack] *= np.linspace(0.0, 1.0, attack, endpoint=False)
    release = min(int(round(template.release_s * sample_rate)), n)
    if release > 0:
        env[n - release :] *= np.linspace(0.0, 1.0, release, endpoint=False)[::-1]
    return (wave * env).astype(np.float32)


def generate_synth(spec: SynthSpec) -> list[AnnotatedClip]:
    """Generate the corpus described by *spec*.

    Deterministic: the same spec yields bit-identical waveforms and
    annotations, clip by clip.
    """
    rendered = {t.name: render_word(t, spec.sample_rate) for t in spec.vocabulary}
    templates = {t.name: t for t in spec.vocabulary}
    filler_set = set(spec.filler_words)
    clips = []
    for idx in range(spec.clips):
        rng = np.random.default_rng([spec.seed, idx])
        n_words = int(rng.integers(spec.words_per_clip[0], spec.words_per_clip[1] + 1))
        names = [spec.vocabulary[i].name for i in rng.integers(0, len(spec.vocabulary), n_words)]

        n_samples = int(round(spec.clip_duration_s * spec.sample_rate))
        samples = np.zeros(n_samples, dtype=np.float64)
        events = []
        t = float(rng.uniform(*spec.lead_in_range_s))
        for name in names:
            if spec.pitch_jitter_frac > 0.0:
                # Per-token pitch variation, so no word is ever the same
                # waveform twice; durations stay fixed to keep packing and
                # annotations independent of the jitter draw.
                factor = float(rng.uniform(1.0 - spec.pitch_jitter_frac,
                                           1.0 + spec.pitch_jitter_frac))
                template = templates[name]
                word = render_word(
                    replace(
                        template,
                        segments=tuple((f0 * factor, dur) for f0, dur in template.segments),
                    ),
                    spec.sample_rate,
                )
            else:
                word = rendered[name]
            start = int(round(t * spec.sample_rate))
            if start + len(word) > n_samples:
                raise CorpusError(
                    f"clip synth_{idx:04d}: word {name!r} overruns the clip; "
                    f"spec packing check should have prevented this"
                )
            samples[start : start + len(word)] += word
            events.append(
                WordEvent(
                    text=name,
                    onset=start / spec.sample_rate,
                    duration=len(word) / spec.sample_rate,
                    category_id=base_category(name, filler_set),
                )
            )
            t = start / spec.sample_rate + len(word) / spec.sample_rate
            t += float(rng.uniform(*spec.gap_range_s))

        rms = float(np.sqrt(np.mean(np.square(samples))))
        if rms > 0:
            sigma = rms * 10.0 ** (-spec.noise_snr_db / 20.0)
            samples = samples + rng.normal(0.0, sigma, n_samples)
        clips.append(
            AnnotatedClip(
                clip_id=f"synth_{idx:04d}",
                samples=np.clip(samples, -1.0, 1.0).astype(np.float32),
                sample_rate=spec.sample_rate,
                events=tuple(events),
            )
        )
    return clips


def desk_synth_spec(
    seed: int,
    clips: int = 56,
    noise_snr_db: float = 14.0,
    words_per_clip: tuple[int, int] = (6, 9),
) -> SynthSpec:
    """Desk-scale corpus preset: two fillers, three injected confusables.

    Each confusable carries a filler's exact nominal pitch and differs only
    in duration ("and" and "a" are stretched fillers, "the" a truncated
    one), so a detector keyed on pitch alone fires on all of them and
    telling them apart requires judging temporal extent. Every token is
    rendered with a fresh 8% pitch jitter, which keeps any single waveform
    from being memorized. Plain words sit far away in pitch.
    """
    def tone(name, f0, dur):
        return WordTemplate(name=name, segments=((f0, dur),))

    # The fillers are written as two constant-pitch segments so the shared
    # prefix is visible segment-by-segment; phase-continuous rendering makes
    # them acoustically identical to a single longer segment.
    um = WordTemplate(name="um", segments=((130.0, 0.18), (130.0, 0.12)))
    uh = WordTemplate(name="uh", segments=((105.0, 0.16), (105.0, 0.10)))
    vocabulary = (
        um,
        uh,
        # confusables: a filler's pitch, with only the duration diverging
        WordTemplate(name="and", segments=((130.0, 0.18), (130.0, 0.12), (130.0, 0.08))),
        WordTemplate(name="a", segments=((105.0, 0.16), (105.0, 0.10), (105.0, 0.06))),
        WordTemplate(name="the", segments=((130.0, 0.18), (130.0, 0.06))),
        # plain words: distinct pitch range and duration
        tone("river", 330.0, 0.22),
        tone("stone", 420.0, 0.34),
        tone("cloud", 520.0, 0.18),
        tone("grass", 640.0, 0.28),
        tone("[breath]", 780.0, 0.16),
    )
    return SynthSpec(
        vocabulary=vocabulary,
        filler_words=("um", "uh"),
        confusable_words=("and", "a", "the"),
        clips=clips,
        words_per_clip=words_per_clip,
        noise_snr_db=noise_snr_db,
        seed=seed,
        pitch_jitter_frac=0.08,
    )


# ---------------------------------------------------------------------------
# Load / save
# ---------------------------------------------------------------------------

ANNOTATION_HEADER = ("clip_id", "word", "onset_s", "duration_s")


def load_corpus(
    annotation_path: Path | str,
    audio_dir: Path | str,
    *,
    filler_lexicon: tuple[str, ...] = ("um", "uh"),
    target_sample_rate: int = 16000,
) -> list[AnnotatedClip]:
    """Load clips from an annotation CSV plus a directory of WAV files.

    The CSV has a header row and one ``clip_id, word, onset_s, duration_s``
    row per word. Audio is converted to mono float32 at
    *target_sample_rate*. Events come back sorted by onset with lowercased
    text.
    """
    annotation_path = Path(annotation_path)
    audio_dir = Path(audio_dir)
    if not annotation_path.exists():
        raise CorpusError(f"annotation file not found: {annotation_path}")

    rows_by_clip: dict[str, list[WordEvent]] = {}
    filler_set = set(filler_lexicon)
    with open(annotation_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ANNOTATION_HEADER:
            raise CorpusError(
                f"{annotation_path}: expected header {','.join(ANNOTATION_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CorpusError(f"{annotation_path}:{lineno}: expected 4 columns, got {len(row)}")
            clip_id, word, onset_s, duration_s = row
            word = word.strip().lower()
            try:
                event = WordEvent(
                    text=word,
                    onset=float(onset_s),
                    duration=float(duration_s),
                    category_id=base_category(word, filler_set),
                )
            except (CorpusError, ValueError) as exc:
                raise CorpusError(f"{annotation_path}:{lineno}: {exc}") from exc
            rows_by_clip.setdefault(clip_id, []).append(event)

    clips = []
    for clip_id in sorted(rows_by_clip):
        wav_path = audio_dir / f"{clip_id}.wav"
        if not wav_path.exists():
            raise CorpusError(f"clip {clip_id}: audio file not found: {wav_path}")
        samples, sr = read_wav(wav_path)
        if sr != target_sample_rate:
            samples = resample_waveform(samples, sr, target_sample_rate)
            sr = target_sample_rate
        events = tuple(sorted(rows_by_clip[clip_id], key=lambda e: (e.onset, e.text)))
        clips.append(AnnotatedClip(clip_id=clip_id, samples=samples, sample_rate=sr, events=events))
    return clips


def read_wav(path: Path | str) -> tuple[np.ndarray, int]:
    """Read a PCM WAV file to mono float32 in [-1, 1]."""
    try:
        sr, data = wavfile.read(path)
    except Exception as exc:
        raise CorpusError(f"cannot read audio file {path}: {exc}") from exc
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    else:
        samples = data.astype(np.float32)
    return samples, int(sr)


def write_wav(path: Path | str, samples: np.ndarray, sample_rate: int) -> None:
    """Write float samples as 16-bit PCM, atomically."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm16 = (pcm * 32767.0).round().astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, sample_rate, pcm16)
    atomic_write_bytes(path, buf.getvalue())


def resample_waveform(samples: np.ndarray, sr_in: int, sr_out: int) -> np.ndarray:
    if sr_in == sr_out:
        return samples
    g = math.gcd(sr_in, sr_out)
    return resample_poly(samples, sr_out // g, sr_in // g).astype(np.float32)


def annotations_to_csv(clips: list[AnnotatedClip]) -> str:
    """Render the annotation CSV for *clips* (6-decimal fixed precision)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for clip in clips:
        for e in clip.events:
            writer.writerow([clip.clip_id, e.text, fmt6(e.onset), fmt6(e.duration)])
    return out.getvalue()


def save_corpus(clips: list[AnnotatedClip], annotation_path: Path | str, audio_dir: Path | str) -> None:
    """Write WAVs and the annotation CSV for *clips*."""
    audio_dir = Path(audio_dir)
    audio_dir.mkdir(parents=True, exist_ok=True)
    for clip in clips:
        write_wav(audio_dir / f"{clip.clip_id}.wav", clip.samples, clip.sample_rate)
    atomic_write_text(annotation_path, annotations_to_csv(clips))


def split_corpus(
    clips: list[AnnotatedClip],
    fractions: tuple[float, float, float],
    seed: int,
) -> tuple[list[AnnotatedClip], list[AnnotatedClip], list[AnnotatedClip]]:
    """Disjoint, exhaustive train/val/test split, deterministic per seed.

    Each part gets floor(fraction * n) clips; the remainder goes to train.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"split fractions must sum to 1: {fractions}")
    if any(f < 0 for f in fractions):
        raise CorpusError(f"split fractions must be non-negative: {fractions}")
    n = len(clips)
    n_parts = sum(1 for f in fractions if f > 0)
    if n < n_parts:
        raise CorpusError(f"cannot split {n} clips into {n_parts} non-empty parts")
    counts = [int(math.floor(f * n)) for f in fractions]
    counts[0] += n - sum(counts)
    order = np.random.default_rng(seed).permutation(n)
    train = [clips[i] for i in order[: counts[0]]]
    val = [clips[i] for i in order[counts[0] : counts[0] + counts[1]]]
    test = [clips[i] for i in order[counts[0] + counts[1] :]]
    return train, val, test
