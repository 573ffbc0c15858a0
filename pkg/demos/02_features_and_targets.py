"""From waveform to training targets: STFT features and target encoding.

Shows the spectrogram frontend, the training-time augmentation, the
category registry, and how word events become heatmap/length/offset
targets. Run from the repository root:

    python3 demos/02_features_and_targets.py
"""

import numpy as np

import fillerspot as fs
from fillerspot.targets import CategoryRegistry, keypoint_frame

config = fs.desk_config()
clip = fs.generate_synth(fs.desk_synth_spec(seed=0, clips=2))[0]
frontend = config.frontend
print("frontend: win", frontend.win_ms, "ms, hop", frontend.hop_ms, "ms,",
      frontend.n_fft, "point FFT")

# stft_features turns samples into log-magnitude frames, time x frequency.
spec = fs.stft_features(clip.samples, frontend)
print("spectrogram:", spec.frames.shape, "frames x bins, hop", spec.hop_s, "s")

# The loudest bin tracks the word pitches; silence frames stay near the floor.
frame_energy = spec.frames.max(axis=1)
active = frame_energy > frame_energy.min() + 0.5 * np.ptp(frame_energy)
print("frames with word energy:", int(active.sum()), "of", len(active))

# Training applies seeded shift/noise/masking; same generator, same result.
one = fs.augment(spec, config.augment, np.random.default_rng(1))
two = fs.augment(spec, config.augment, np.random.default_rng(1))
print("augmentation deterministic per seed:",
      bool(np.array_equal(one.frames, two.frames)))

# The registry owns category ids: 0 filler, 1 everything else, then any
# promoted auxiliary words on channels 2+.
registry = CategoryRegistry(num_auxiliary=2)
print("\nchannels before promotion:", registry.channel_names())
registry.promote("the")
print("channels after promoting 'the':", registry.channel_names())
print("'um' ->", registry.category_of("um"),
      " 'river' ->", registry.category_of("river"),
      " 'the' ->", registry.category_of("the"))

# Targets live on the downsampled frame grid: a Gaussian bump per event
# peaking at exactly 1 on its center frame, plus per-keypoint duration and
# sub-frame offset regression targets.
model_hop = spec.hop_s * 4  # the network downsamples time by 4
num_frames = spec.frames.shape[0] // 4
target = fs.encode_targets(clip.events, num_frames, registry, model_hop)
print("\ntarget tensors: heatmap", target.heatmap.shape,
      "length", target.length.shape, "offset", target.offset.shape)
print("keypoints:", target.num_keypoints, "for", len(clip.events), "events")

event = clip.events[0]
frame, residual = keypoint_frame(event, model_hop)
channel = registry.category_of(event.text)
print(f"\nfirst event {event.text!r}: center frame {frame}, residual {residual:.3f}")
print("  heatmap peak:", target.heatmap[frame, channel])
print("  neighbors:", np.round(target.heatmap[frame - 2 : frame + 3, channel], 3))
print("  length target:", round(float(target.length[frame]), 3), "s")
