"""A complete miniature training run: train, read the log, evaluate, decode.

Trains the tiny desk model for a few epochs on a small synthetic corpus,
then reloads the checkpoint, scores the validation split, and decodes one
clip end to end. Takes well under a minute on a laptop CPU. Run from the
repository root:

    python3 demos/04_training_run.py
"""

import dataclasses
import json
import tempfile
from pathlib import Path

import fillerspot as fs
from fillerspot.trainer import load_checkpoint, lr_at

corpus = fs.generate_synth(fs.desk_synth_spec(seed=1, clips=12))
train_clips, val_clips, test_clips = fs.split_corpus(corpus, (0.7, 0.15, 0.15), 0)
print("clips: train", len(train_clips), "val", len(val_clips), "test", len(test_clips))

# Shrink the desk schedule so the demo stays fast; everything else is the
# shipped preset (model, losses, decoding, mining).
config = fs.desk_config(seed=0, num_auxiliary=2)
config = dataclasses.replace(
    config,
    train=dataclasses.replace(
        config.train,
        total_epochs=20,
        lr_drop_epochs=(16,),
        schedule=dataclasses.replace(
            config.train.schedule, start_epoch=4, period_epochs=2, min_fp_count=1
        ),
    ),
)
print("learning rates by epoch:",
      [lr_at(epoch, config.train) for epoch in (1, 15, 16, 20)])

with tempfile.TemporaryDirectory() as tmp:
    result = fs.train(train_clips, val_clips, config, Path(tmp) / "run")
    print("\nbest validation filler F1:", round(result.best_val_f1, 3))
    print("auxiliary promotions:", list(result.registry.assigned_words))

    # The run log is JSON lines, one object per epoch.
    lines = result.run_log_path.read_text().splitlines()
    first, last = json.loads(lines[0]), json.loads(lines[-1])
    print("\nrun log:", len(lines), "epochs")
    print("  epoch", first["epoch"], "loss", round(first["loss"]["total"], 3),
          "lr", first["lr"])
    print("  epoch", last["epoch"], "loss", round(last["loss"]["total"], 3),
          "lr", last["lr"])

    # Checkpoints reload into a self-contained bundle: model, registry,
    # frontend, and decode settings travel together.
    checkpoint = load_checkpoint(result.checkpoint_path)
    print("\ncheckpoint: epoch", checkpoint.epoch, "with",
          sum(p.numel() for p in checkpoint.model.parameters()), "parameters")

    evaluation = fs.evaluate(checkpoint, test_clips)
    score = evaluation.score
    print("test filler score: P", round(score.precision, 3),
          "R", round(score.recall, 3), "F1", round(score.f1, 3),
          f"(tp {score.tp} fp {score.fp} fn {score.fn})")

    # Detections carry category, onset, duration, and the peak score.
    clip = test_clips[0]
    rows = [event for clip_id, event in evaluation.detections if clip_id == clip.clip_id]
    truth = [e for e in clip.events if e.category_id == 0]
    print("\nclip", clip.clip_id, "has", len(truth), "true fillers; decoded:")
    for event in rows:
        if event.category_id == 0:
            print(f"  filler at {event.onset:5.2f}s +{event.duration:.2f}s "
                  f"score {event.score:.2f}")
