"""Detection objective: focal heatmap loss, inter-category focal terms, regression.

All functions are pure torch on (T, C) heatmap tensors and (T,) regression
vectors for a single clip. Probabilities are clamped away from 0 and 1
before any log, so the losses stay finite for saturated predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .config import LossFactors
from .corpus import FILLER, NON_FILLER
from .targets import TargetTensor

PROB_EPS = 1e-7


class ObjectiveError(ValueError):
    """Raised for invalid loss inputs (bad channels, non-finite values)."""


@dataclass(frozen=True)
class LossBreakdown:
    """The additive pieces of the training objective, as torch scalars."""

    main: torch.Tensor
    fn: torch.Tensor
    nf: torch.Tensor
    length: torch.Tensor
    offset: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {
            "main": float(self.main.detach()),
            "fn": float(self.fn.detach()),
            "nf": float(self.nf.detach()),
            "length": float(self.length.detach()),
            "offset": float(self.offset.detach()),
            "total": float(self.total.detach()),
        }


def clamp_probs(probs: torch.Tensor) -> torch.Tensor:
    return probs.clamp(PROB_EPS, 1.0 - PROB_EPS)


def _check_finite(name: str, tensor: torch.Tensor) -> None:
    if not torch.isfinite(tensor).all():
        raise ObjectiveError(f"{name} contains non-finite values")


def focal_main(
    pred_heatmap: torch.Tensor,
    target_heatmap: torch.Tensor,
    keypoint_mask: torch.Tensor,
    num_keypoints: int | None = None,
    alpha: float = 2.0,
    beta: float = 4.0,
) -> torch.Tensor:
    """Penalty-reduced focal loss over all heatmap channels.

    Keypoint frames contribute (1 - p)^alpha log p; every other frame
    contributes (1 - y)^beta p^alpha log(1 - p), so Gaussian shoulders near
    a keypoint are penalized gently. Normalized by the keypoint count,
    floored at one.
    """
    if pred_heatmap.shape != target_heatmap.shape or pred_heatmap.shape != keypoint_mask.shape:
        raise ObjectiveError(
            f"shape mismatch: pred {tuple(pred_heatmap.shape)}, "
            f"target {tuple(target_heatmap.shape)}, mask {tuple(keypoint_mask.shape)}"
        )
    _check_finite("pred_heatmap", pred_heatmap)
    _check_finite("target_heatmap", target_heatmap)
    probs = clamp_probs(pred_heatmap)
    pos_term = (1.0 - probs) ** alpha * torch.log(probs)
    neg_term = (1.0 - target_heatmap) ** beta * probs**alpha * torch.log(1.0 - probs)
    summed = torch.where(keypoint_mask, pos_term, neg_term).sum()
    n = int(keypoint_mask.sum()) if num_keypoints is None else num_keypoints
    return -summed / max(n, 1)


def inter_category_focal(
    pred_heatmap: torch.Tensor,
    target_heatmap: torch.Tensor,
    keypoint_mask: torch.Tensor,
    channel_a: int,
    channel_b: int,
    *,
    gamma: float = 1.0,
    alpha: float = 2.0,
    mu: float = 2.0,
    omega: float = 2.0,
    num_keypoints: int | None = None,
) -> torch.Tensor:
    """Confusion-directed focal term penalizing channel-A mistakes toward B.

    Every frame of channel A is weighted by the confidence the model puts on
    channel B there, raised to gamma. Keypoint frames of A get the positive
    focal term scaled by mu; all other frames of A get the negative term
    scaled by omega. Only the keypoint mask selects positives; the target
    heatmap's Gaussian shoulders count as negatives without any extra
    penalty reduction. Normalized by the channel-A keypoint count, floored
    at one.
    """
    if channel_a == channel_b:
        raise ObjectiveError(f"channel_a and channel_b must differ, got {channel_a}")
    t, c = pred_heatmap.shape
    for name, channel in (("channel_a", channel_a), ("channel_b", channel_b)):
        if not (0 <= channel < c):
            raise ObjectiveError(f"{name} {channel} out of range for {c} channels")
    if target_heatmap.shape != (t, c) or keypoint_mask.shape != (t, c):
        raise ObjectiveError("target and mask shapes must match the prediction")
    _check_finite("pred_heatmap", pred_heatmap)
    probs_a = clamp_probs(pred_heatmap[:, channel_a])
    probs_b = clamp_probs(pred_heatmap[:, channel_b])
    pos = keypoint_mask[:, channel_a]
    pos_term = mu * (1.0 - probs_a) ** alpha * torch.log(probs_a)
    neg_term = omega * probs_a**alpha * torch.log(1.0 - probs_a)
    summed = (probs_b**gamma * torch.where(pos, pos_term, neg_term)).sum()
    n = int(pos.sum()) if num_keypoints is None else num_keypoints
    return -summed / max(n, 1)


def regression_losses(
    pred_length: torch.Tensor,
    pred_offset: torch.Tensor,
    target_length: torch.Tensor,
    target_offset: torch.Tensor,
    keypoint_mask: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean absolute error of length and offset over keypoint frames.

    Frames with a keypoint in any channel count once; with no keypoints both
    losses are zero.
    """
    frames = keypoint_mask.any(dim=1)
    if not bool(frames.any()):
        zero = pred_length.sum() * 0.0
        return zero, pred_offset.sum() * 0.0
    len_loss = (pred_length[frames] - target_length[frames]).abs().mean()
    off_loss = (pred_offset[frames] - target_offset[frames]).abs().mean()
    return len_loss, off_loss


def _as_tensor(array: np.ndarray, like: torch.Tensor) -> torch.Tensor:
    return torch.as_tensor(array, dtype=like.dtype, device=like.device)


def total_loss(
    pred_heatmap: torch.Tensor,
    pred_length: torch.Tensor,
    pred_offset: torch.Tensor,
    target: TargetTensor,
    factors: LossFactors,
) -> LossBreakdown:
    """Compose the full objective for one clip.

    total = main + fn + nf + lambda_len * length + lambda_off * offset,
    where fn penalizes filler keypoints scored as non-filler and nf the
    reverse. Zeroing all four inter-category factors leaves exactly the
    plain objective.
    """
    if target.num_channels != pred_heatmap.shape[1]:
        raise ObjectiveError(
            f"target has {target.num_channels} channels, prediction has {pred_heatmap.shape[1]}"
        )
    if target.num_frames != pred_heatmap.shape[0]:
        raise ObjectiveError(
            f"target has {target.num_frames} frames, prediction has {pred_heatmap.shape[0]}"
        )
    target_heatmap = _as_tensor(target.heatmap, pred_heatmap)
    mask = torch.as_tensor(target.keypoint_mask, device=pred_heatmap.device)
    target_len = _as_tensor(target.length, pred_length)
    target_off = _as_tensor(target.offset, pred_offset)

    main = focal_main(
        pred_heatmap,
        target_heatmap,
        mask,
        num_keypoints=target.num_keypoints,
        alpha=factors.alpha,
        beta=factors.beta,
    )
    fn = inter_category_focal(
        pred_heatmap,
        target_heatmap,
        mask,
        channel_a=FILLER,
        channel_b=NON_FILLER,
        gamma=factors.gamma,
        alpha=factors.alpha,
        mu=factors.mu_fn,
        omega=factors.omega_fn,
    )
    nf = inter_category_focal(
        pred_heatmap,
        target_heatmap,
        mask,
        channel_a=NON_FILLER,
        channel_b=FILLER,
        gamma=factors.gamma,
        alpha=factors.alpha,
        mu=factors.mu_nf,
        omega=factors.omega_nf,
    )
    len_loss, off_loss = regression_losses(
        pred_length, pred_offset, target_len, target_off, mask
    )
    total = main + fn + nf + factors.lambda_len * len_loss + factors.lambda_off * off_loss
    return LossBreakdown(main=main, fn=fn, nf=nf, length=len_loss, offset=off_loss, total=total)
