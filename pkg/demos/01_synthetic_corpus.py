"""Walk through the synthetic corpus generator and the annotation format.

Builds the desk-scale corpus preset, pokes at the confusable word
construction, and round-trips everything through the on-disk layout.
Run from the repository root:

    python3 demos/01_synthetic_corpus.py
"""

import tempfile
from pathlib import Path

import fillerspot as fs
from fillerspot.corpus import load_corpus, render_word, save_corpus

# A SynthSpec pins everything: vocabulary, clip count, noise level, seed.
spec = fs.desk_synth_spec(seed=0, clips=8)
print("vocabulary:", [t.name for t in spec.vocabulary])
print("fillers:", spec.filler_words)
print("injected confusables:", spec.confusable_words)

# The confusables reuse a filler's pitch and differ only in duration, so a
# detector keyed on pitch alone fires on all of them.
by_name = {t.name: t for t in spec.vocabulary}
for name in ("um", "the", "and"):
    template = by_name[name]
    total = sum(dur for _, dur in template.segments)
    print(f"  {name}: pitch {template.segments[0][0]:.0f} Hz, {total:.2f}s")

# Rendering is deterministic per template; the generator adds fresh pitch
# jitter per token so no word is ever the same waveform twice.
wave = render_word(by_name["um"], spec.sample_rate)
print("rendered 'um':", wave.shape[0], "samples at", spec.sample_rate, "Hz")

clips = fs.generate_synth(spec)
print("\ngenerated", len(clips), "clips of", spec.clip_duration_s, "seconds")
first = clips[0]
print("clip", first.clip_id, "events:")
for event in first.events:
    tag = "filler" if event.category_id == 0 else "word"
    print(f"  {event.onset:6.2f}s +{event.duration:.2f}s  {event.text:8s} ({tag})")

# Same spec, same corpus; different seed, different corpus.
again = fs.generate_synth(spec)
print("\nsame seed reproduces onsets:",
      [e.onset for e in again[0].events] == [e.onset for e in first.events])

# The on-disk layout is one annotations CSV plus audio/<clip_id>.wav.
with tempfile.TemporaryDirectory() as tmp:
    csv_path = Path(tmp) / "annotations.csv"
    save_corpus(clips, csv_path, Path(tmp) / "audio")
    print("\nannotation rows look like:")
    print("\n".join(csv_path.read_text().splitlines()[:4]))
    reloaded = load_corpus(csv_path, Path(tmp) / "audio")
    print("round trip kept", sum(len(c.events) for c in reloaded), "events")

# split_corpus carves deterministic train/val/test partitions.
train, val, test = fs.split_corpus(clips, (0.7, 0.15, 0.15), seed=0)
print("split sizes:", len(train), len(val), len(test))
