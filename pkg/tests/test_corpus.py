import numpy as np
import pytest

import fillerspot as fs
from fillerspot.corpus import (
    CorpusError,
    annotations_to_csv,
    base_category,
    read_wav,
    render_word,
    write_wav,
)

from conftest import make_event


# ---------------------------------------------------------------------------
# Data model validation
# ---------------------------------------------------------------------------

def test_word_event_fields():
    e = fs.WordEvent(text="um", onset=1.20, duration=0.30, category_id=0)
    assert e.end == pytest.approx(1.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"text": "", "onset": 0.0, "duration": 0.1},
        {"text": "two words", "onset": 0.0, "duration": 0.1},
        {"text": "um", "onset": -0.1, "duration": 0.1},
        {"text": "um", "onset": 0.0, "duration": 0.0},
    ],
)
def test_word_event_rejects_invalid(kwargs):
    with pytest.raises(CorpusError):
        fs.WordEvent(**kwargs)


def test_bracketed_tokens_allowed():
    fs.WordEvent(text="[breath]", onset=0.0, duration=0.1)


def test_clip_requires_sorted_events():
    samples = np.zeros(16000, dtype=np.float32)
    events = (make_event(onset=1.0), make_event(onset=0.5))
    with pytest.raises(CorpusError, match="sorted"):
        fs.AnnotatedClip(clip_id="c", samples=samples, sample_rate=16000, events=events)


def test_clip_rejects_event_past_end():
    samples = np.zeros(16000, dtype=np.float32)
    events = (make_event(onset=0.9, duration=0.2),)
    with pytest.raises(CorpusError, match="beyond clip length"):
        fs.AnnotatedClip(clip_id="c", samples=samples, sample_rate=16000, events=events)


def test_clip_end_tolerance():
    samples = np.zeros(16000, dtype=np.float32)
    events = (make_event(onset=0.8, duration=0.2005),)
    clip = fs.AnnotatedClip(clip_id="c", samples=samples, sample_rate=16000, events=events)
    assert clip.duration == pytest.approx(1.0)


def test_clip_rejects_overlapping_identical_events():
    samples = np.zeros(32000, dtype=np.float32)
    events = (make_event(onset=0.5, duration=0.4), make_event(onset=0.7, duration=0.4))
    with pytest.raises(CorpusError, match="overlapping identical"):
        fs.AnnotatedClip(clip_id="c", samples=samples, sample_rate=16000, events=events)


def test_base_category():
    lexicon = ("um", "uh")
    assert base_category("um", lexicon) == fs.FILLER
    assert base_category("stone", lexicon) == fs.NON_FILLER


# ---------------------------------------------------------------------------
# Templates and rendering
# ---------------------------------------------------------------------------

def test_template_duration_sums_segments():
    t = fs.WordTemplate(name="w", segments=((100.0, 0.1), (120.0, 0.2)))
    assert t.duration == pytest.approx(0.3)


def test_template_rejects_bad_segments():
    with pytest.raises(CorpusError):
        fs.WordTemplate(name="w", segments=())
    with pytest.raises(CorpusError):
        fs.WordTemplate(name="w", segments=((0.0, 0.1),))


def test_render_word_deterministic_and_finite():
    t = fs.WordTemplate(name="w", segments=((130.0, 0.25),))
    a = render_word(t, 16000)
    b = render_word(t, 16000)
    assert a.dtype == np.float32
    assert len(a) == 4000
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))
    assert np.max(np.abs(a)) <= t.amplitude + 1e-6


def test_split_segments_render_identically_to_merged():
    merged = fs.WordTemplate(name="a", segments=((130.0, 0.30),))
    split = fs.WordTemplate(name="b", segments=((130.0, 0.18), (130.0, 0.12)))
    assert np.array_equal(render_word(merged, 16000), render_word(split, 16000))


def test_confusable_shares_prefix_bitwise():
    spec = fs.desk_synth_spec(seed=0)
    um = render_word(spec.template("um"), spec.sample_rate)
    and_ = render_word(spec.template("and"), spec.sample_rate)
    half = len(and_) // 2
    assert np.array_equal(um[:half], and_[:half])
    assert not np.array_equal(um[: len(and_)], and_)


def test_synth_spec_rejects_filler_confusable_overlap():
    spec = fs.desk_synth_spec(seed=0)
    with pytest.raises(CorpusError, match="both filler and confusable"):
        fs.SynthSpec(
            vocabulary=spec.vocabulary,
            filler_words=("um", "uh"),
            confusable_words=("um",),
            clips=2,
            words_per_clip=(2, 3),
            noise_snr_db=20.0,
            seed=0,
        )


def test_synth_spec_rejects_insufficient_prefix():
    vocab = (
        fs.WordTemplate(name="um", segments=((130.0, 0.3),)),
        fs.WordTemplate(name="far", segments=((500.0, 0.3),)),
    )
    with pytest.raises(CorpusError, match="50%"):
        fs.SynthSpec(
            vocabulary=vocab,
            filler_words=("um",),
            confusable_words=("far",),
            clips=2,
            words_per_clip=(2, 3),
            noise_snr_db=20.0,
            seed=0,
        )


def test_synth_spec_rejects_overfull_packing():
    with pytest.raises(CorpusError, match="cannot be guaranteed to fit"):
        fs.desk_synth_spec(seed=0, words_per_clip=(6, 40))


def test_empty_vocabulary_rejected():
    with pytest.raises(CorpusError, match="vocabulary"):
        fs.SynthSpec(
            vocabulary=(),
            filler_words=(),
            confusable_words=(),
            clips=1,
            words_per_clip=(1, 1),
            noise_snr_db=20.0,
            seed=0,
        )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def test_generation_deterministic():
    spec = fs.desk_synth_spec(seed=42, clips=3)
    a = fs.generate_synth(spec)
    b = fs.generate_synth(spec)
    assert len(a) == len(b) == 3
    for ca, cb in zip(a, b):
        assert ca.clip_id == cb.clip_id
        assert np.array_equal(ca.samples, cb.samples)
        assert ca.events == cb.events


def test_generation_counts_and_ranges():
    spec = fs.desk_synth_spec(seed=1, clips=10)
    clips = fs.generate_synth(spec)
    assert len(clips) == 10
    for clip in clips:
        assert spec.words_per_clip[0] <= len(clip.events) <= spec.words_per_clip[1]
        assert clip.duration == pytest.approx(spec.clip_duration_s)


def test_generation_annotations_match_rendering():
    """Word positions in annotations line up with actual acoustic energy."""
    spec = fs.desk_synth_spec(seed=5, clips=2)
    quiet = fs.SynthSpec(
        vocabulary=spec.vocabulary,
        filler_words=spec.filler_words,
        confusable_words=spec.confusable_words,
        clips=2,
        words_per_clip=spec.words_per_clip,
        noise_snr_db=300.0,
        seed=5,
    )
    for clip in fs.generate_synth(quiet):
        for event in clip.events:
            a = int(event.onset * clip.sample_rate)
            b = int(event.end * clip.sample_rate)
            inside = np.abs(clip.samples[a:b]).max()
            assert inside > 0.01
        first = clip.events[0]
        lead = clip.samples[: int(first.onset * clip.sample_rate) - 1]
        assert np.abs(lead).max() < 1e-4


def test_clip_seeds_are_independent_of_count():
    """Clip i is the same whether 3 or 5 clips were requested."""
    a = fs.generate_synth(fs.desk_synth_spec(seed=9, clips=3))
    b = fs.generate_synth(fs.desk_synth_spec(seed=9, clips=5))
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.samples, cb.samples)


# ---------------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------------

def test_split_rounding():
    clips = fs.generate_synth(fs.desk_synth_spec(seed=0, clips=10))
    train, val, test = fs.split_corpus(clips, (0.8, 0.1, 0.1), seed=0)
    assert (len(train), len(val), len(test)) == (8, 1, 1)
    ids = {c.clip_id for c in train} | {c.clip_id for c in val} | {c.clip_id for c in test}
    assert len(ids) == 10


def test_split_degenerate_all_train():
    clips = fs.generate_synth(fs.desk_synth_spec(seed=0, clips=4))
    train, val, test = fs.split_corpus(clips, (1.0, 0.0, 0.0), seed=1)
    assert len(train) == 4 and not val and not test


def test_split_deterministic():
    clips = fs.generate_synth(fs.desk_synth_spec(seed=0, clips=8))
    a = fs.split_corpus(clips, (0.5, 0.25, 0.25), seed=3)
    b = fs.split_corpus(clips, (0.5, 0.25, 0.25), seed=3)
    assert [c.clip_id for c in a[0]] == [c.clip_id for c in b[0]]


def test_split_errors():
    clips = fs.generate_synth(fs.desk_synth_spec(seed=0, clips=2))
    with pytest.raises(CorpusError, match="sum to 1"):
        fs.split_corpus(clips, (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(CorpusError, match="cannot split"):
        fs.split_corpus(clips, (0.4, 0.3, 0.3), seed=0)


# ---------------------------------------------------------------------------
# Save / load
# ---------------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, desk_clips):
    fs.save_corpus(desk_clips, tmp_path / "ann.csv", tmp_path / "audio")
    loaded = fs.load_corpus(tmp_path / "ann.csv", tmp_path / "audio")
    assert [c.clip_id for c in loaded] == [c.clip_id for c in desk_clips]
    for orig, back in zip(desk_clips, loaded):
        assert len(orig.events) == len(back.events)
        for a, b in zip(orig.events, back.events):
            assert a.text == b.text
            assert abs(a.onset - b.onset) <= 1e-6
            assert abs(a.duration - b.duration) <= 1e-6
            assert a.category_id == b.category_id
        assert np.max(np.abs(orig.samples - back.samples)) < 2.0 / 32768.0


def test_annotation_csv_format(desk_clips):
    text = annotations_to_csv(desk_clips[:1])
    lines = text.strip().split("\n")
    assert lines[0] == "clip_id,word,onset_s,duration_s"
    first = lines[1].split(",")
    assert first[0] == desk_clips[0].clip_id
    assert len(first) == 4
    float(first[2]), float(first[3])


def test_load_missing_annotation(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        fs.load_corpus(tmp_path / "none.csv", tmp_path)


def test_load_missing_audio_names_clip(tmp_path):
    (tmp_path / "ann.csv").write_text(
        "clip_id,word,onset_s,duration_s\nclip9,um,1.0,0.3\n"
    )
    with pytest.raises(CorpusError, match="clip9"):
        fs.load_corpus(tmp_path / "ann.csv", tmp_path)


def test_load_bad_header(tmp_path):
    (tmp_path / "ann.csv").write_text("clip,token,start,len\n")
    with pytest.raises(CorpusError, match="header"):
        fs.load_corpus(tmp_path / "ann.csv", tmp_path)


def test_load_zero_duration_row(tmp_path):
    write_wav(tmp_path / "c1.wav", np.zeros(16000), 16000)
    (tmp_path / "ann.csv").write_text(
        "clip_id,word,onset_s,duration_s\nc1,um,0.5,0.0\n"
    )
    with pytest.raises(CorpusError, match="duration"):
        fs.load_corpus(tmp_path / "ann.csv", tmp_path)


def test_load_sorts_and_lowercases(tmp_path):
    write_wav(tmp_path / "c1.wav", np.zeros(32000), 16000)
    (tmp_path / "ann.csv").write_text(
        "clip_id,word,onset_s,duration_s\n"
        "c1,UM,1.0,0.3\n"
        "c1,stone,0.2,0.3\n"
    )
    clips = fs.load_corpus(tmp_path / "ann.csv", tmp_path)
    assert [e.text for e in clips[0].events] == ["stone", "um"]
    assert clips[0].events[1].category_id == fs.FILLER


def test_load_resamples(tmp_path):
    rate = 8000
    samples = np.sin(2 * np.pi * 440 * np.arange(rate) / rate).astype(np.float32) * 0.5
    write_wav(tmp_path / "c1.wav", samples, rate)
    (tmp_path / "ann.csv").write_text("clip_id,word,onset_s,duration_s\nc1,um,0.1,0.2\n")
    clips = fs.load_corpus(tmp_path / "ann.csv", tmp_path, target_sample_rate=16000)
    assert clips[0].sample_rate == 16000
    assert len(clips[0].samples) == 16000


def test_read_wav_stereo_to_mono(tmp_path):
    from scipy.io import wavfile

    stereo = np.stack([np.ones(100), -np.ones(100)], axis=1)
    wavfile.write(tmp_path / "s.wav", 16000, (stereo * 16384).astype(np.int16))
    samples, sr = read_wav(tmp_path / "s.wav")
    assert samples.ndim == 1
    assert abs(float(samples.mean())) < 1e-3
