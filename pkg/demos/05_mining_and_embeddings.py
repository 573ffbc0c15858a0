"""Hard-category mining and the embedding head, on a half-trained model.

Trains the desk model just long enough that it confuses the injected
look-alike words with fillers, attributes the resulting false positives on
held-out clips word by word, lets the mining step promote the worst
offender into its own auxiliary channel, and finally exports per-event
embeddings. Run from the repository root:

    python3 demos/05_mining_and_embeddings.py
"""

import dataclasses
import tempfile
from pathlib import Path

import numpy as np

import fillerspot as fs
from fillerspot.mining import fp_report, mining_step
from fillerspot.net import predict
from fillerspot.targets import keypoint_frame
from fillerspot.trainer import load_checkpoint

corpus = fs.generate_synth(fs.desk_synth_spec(seed=1, clips=16))
train_clips, val_clips, test_clips = fs.split_corpus(corpus, (0.7, 0.15, 0.15), 0)
held_out = val_clips + test_clips

# Push automatic mining past the end of this short run so the registry
# still has empty slots; the mining step is driven by hand below.
config = fs.desk_config(seed=0, num_auxiliary=2)
config = dataclasses.replace(
    config,
    train=dataclasses.replace(
        config.train,
        total_epochs=14,
        lr_drop_epochs=(),
        schedule=dataclasses.replace(config.train.schedule, start_epoch=100),
    ),
)
# One held-out false positive is enough to qualify on this tiny corpus.
hand_schedule = dataclasses.replace(
    fs.desk_config().train.schedule, min_fp_count=1
)

with tempfile.TemporaryDirectory() as tmp:
    result = fs.train(train_clips, val_clips, config, Path(tmp) / "run")
    checkpoint = load_checkpoint(result.checkpoint_path)
    registry = checkpoint.registry

    # Decode the held-out clips and attribute unmatched filler detections
    # to whatever word they overlap; silence catches the rest.
    per_clip = []
    for clip in held_out:
        spectrogram = fs.stft_features(clip.samples, checkpoint.frontend)
        prediction = predict(checkpoint.model, spectrogram)
        detections = fs.decode(
            prediction, spectrogram.hop_s, checkpoint.decode_config
        )
        per_clip.append((detections, clip))
    report = fp_report(per_clip, collar_s=0.2, registry=registry, epoch=10)

    print("filler false positives by ground-truth word:")
    for word, count in report.top():
        print(f"  {word:10s} {count}")
    print(f"  {'<silence>':10s} {report.silence_fp}")
    print("total:", report.total_fp)

    # The mining step promotes the worst qualifying word into the lowest
    # empty auxiliary slot. Epoch 12 is on the desk schedule.
    print("\nchannels before:", registry.channel_names())
    mining_step(12, hand_schedule, registry, lambda: report)
    print("channels after: ", registry.channel_names())

    # The embedding head summarizes each event at its center frame; the
    # confusables sit closer to the fillers than the plain words do.
    clip = train_clips[0]
    spectrogram = fs.stft_features(clip.samples, checkpoint.frontend)
    prediction = predict(checkpoint.model, spectrogram, include_embeddings=True)
    hop = spectrogram.hop_s * prediction.downsample_factor
    vectors = {}
    for event in clip.events:
        frame, _ = keypoint_frame(event, hop)
        vectors.setdefault(event.text, prediction.embeddings[frame])
    print("\nembedding dimension:", checkpoint.model.embedding_dim)

    anchor = "um" if "um" in vectors else sorted(vectors)[0]
    print(f"embedding distances from {anchor!r}:")
    for word in sorted(vectors):
        if word != anchor:
            gap = float(np.linalg.norm(vectors[anchor] - vectors[word]))
            print(f"  {anchor} <-> {word:10s} {gap:.3f}")
