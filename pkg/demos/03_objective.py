"""The training objective piece by piece, on numbers small enough to check.

Evaluates the penalty-reduced focal loss and the confusion-directed
inter-category terms against hand-computed values, then shows the full
composition and the ablation switch. Run from the repository root:

    python3 demos/03_objective.py
"""

import math

import numpy as np
import torch

import fillerspot as fs
from fillerspot.corpus import WordEvent
from fillerspot.objective import focal_main, inter_category_focal, total_loss
from fillerspot.targets import CategoryRegistry

# One frame, one channel, a keypoint scored 0.5: the classic focal positive.
pred = torch.tensor([[0.5]], dtype=torch.float64)
loss = focal_main(pred, torch.tensor([[1.0]]).double(), torch.tensor([[True]]))
print("single keypoint at p=0.5:", float(loss))
print("  hand computation -(1-0.5)^2 * log(0.5) =", -0.25 * math.log(0.5))

# A Gaussian shoulder (Y=0.5) as a negative: the (1-Y)^4 factor softens it.
loss = focal_main(pred, torch.tensor([[0.5]]).double(), torch.tensor([[False]]))
print("shoulder negative at p=0.5:", float(loss))
print("  hand computation -(0.5)^4 * (0.5)^2 * log(0.5) =",
      -(0.5**4) * 0.25 * math.log(0.5))

# The inter-category term: a filler keypoint the model also scores as
# non-filler. The non-filler confidence (0.6) gates the penalty.
loss = inter_category_focal(
    torch.tensor([[0.3, 0.6]], dtype=torch.float64),
    torch.tensor([[1.0, 0.0]]).double(),
    torch.tensor([[True, False]]),
    0, 1, mu=2.0, omega=2.0,
)
print("filler keypoint leaking to non-filler:", float(loss))
print("  hand computation -0.6 * 2 * (0.7)^2 * log(0.3) =",
      -0.6 * 2.0 * 0.49 * math.log(0.3))

# The full objective composes main + fn + nf + weighted regression terms.
rng = np.random.default_rng(5)
registry = CategoryRegistry(num_auxiliary=0)
events = [
    WordEvent(text="um", onset=0.50, duration=0.30),
    WordEvent(text="river", onset=1.42, duration=0.22),
]
target = fs.encode_targets(events, 50, registry, 0.04)
heat = torch.tensor(rng.uniform(0.05, 0.95, size=target.heatmap.shape))
length = torch.tensor(rng.uniform(0.0, 0.5, size=50))
offset = torch.tensor(rng.uniform(0.0, 1.0, size=50))

factors = fs.LossFactors()
breakdown = total_loss(heat, length, offset, target, factors)
print("\nfull objective on a random prediction:")
for name, value in breakdown.as_floats().items():
    print(f"  {name:6s} {value:.4f}")
print("  main + fn + nf + 0.1*length + 1.0*offset =",
      round(breakdown.as_floats()["main"]
            + breakdown.as_floats()["fn"]
            + breakdown.as_floats()["nf"]
            + factors.lambda_len * breakdown.as_floats()["length"]
            + factors.lambda_off * breakdown.as_floats()["offset"], 4))

# Zeroing the four inter-category factors is the ablation switch: the fn
# and nf terms vanish and the plain objective remains.
ablated = total_loss(heat, length, offset, target, factors.without_inter_category())
print("\nwithout inter-category terms: fn =", float(ablated.fn),
      "nf =", float(ablated.nf))
print("remaining total:", round(float(ablated.total), 4))
