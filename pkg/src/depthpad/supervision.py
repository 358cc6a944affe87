"""Depth-supervision losses, the topography kernels, and the binary head.

The absolute loss is the summed squared difference between predicted and
label depth grids. The contrastive loss compares, for each of 8 kernels
holding +1 at one neighbor position and -1 at the center, the same-padded
(zero pad) correlation responses of prediction and label, constraining each
cell's contrast to its neighborhood. Reductions are sums over cells and
frames, not means.

Losses accept leading batch dimensions: (H, W) inputs return a float,
(B, H, W) inputs return a length-B vector. Gradients are analytic and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

LOG_CLAMP = 1e-12  # floor inside the cross-entropy log

# Neighbor offsets (row, col) of the +1 entry, row-major around the center.
CONTRAST_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                    (0, 1), (1, -1), (1, 0), (1, 1))


def contrastive_kernels() -> np.ndarray:
    """The 8 center-minus-neighbor kernels as an (8, 3, 3) array."""
    kernels = np.zeros((8, 3, 3))
    for i, (di, dj) in enumerate(CONTRAST_OFFSETS):
        kernels[i, 1, 1] = -1.0
        kernels[i, 1 + di, 1 + dj] = 1.0
    return kernels


def _as_grids(name: str, grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim < 2:
        raise ValueError(f"{name} must be at least 2-D, got shape {g.shape}")
    return g


def _check_pair(pred, label) -> tuple[np.ndarray, np.ndarray]:
    pred = _as_grids("pred", pred)
    label = _as_grids("label", label)
    if pred.shape[-2:] != label.shape[-2:]:
        raise ValueError(f"grid shapes differ: {pred.shape[-2:]} vs {label.shape[-2:]}")
    return pred, label


def _maybe_scalar(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def _shift_response(grid: np.ndarray, di: int, dj: int) -> np.ndarray:
    """grid[p + (di, dj)] - grid[p] with zeros outside, the kernel correlation."""
    h, w = grid.shape[-2:]
    pad = [(0, 0)] * (grid.ndim - 2) + [(1, 1), (1, 1)]
    p = np.pad(grid, pad)
    shifted = p[..., 1 + di:1 + di + h, 1 + dj:1 + dj + w]
    return shifted - grid


def euclidean_depth_loss(pred, label):
    """Summed squared difference over all cells."""
    pred, label = _check_pair(pred, label)
    diff = pred - label
    return _maybe_scalar(np.einsum("...ij,...ij->...", diff, diff))


def contrastive_depth_loss(pred, label):
    """Summed squared difference of the 8 kernel responses.

    The responses are linear, so they are evaluated on pred - label directly
    with one shared padding pass.
    """
    pred, label = _check_pair(pred, label)
    h, w = pred.shape[-2:]
    diff = pred - label
    pad = [(0, 0)] * (diff.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(diff, pad)
    total = np.zeros(diff.shape[:-2])
    for di, dj in CONTRAST_OFFSETS:
        r = padded[..., 1 + di:1 + di + h, 1 + dj:1 + dj + w] - diff
        total = total + np.einsum("...ij,...ij->...", r, r)
    return _maybe_scalar(total)


def euclidean_loss_gradient(pred, label) -> np.ndarray:
    """d/dpred of the absolute term: 2 (pred - label)."""
    pred, label = _check_pair(pred, label)
    return 2.0 * (pred - label)


def contrastive_loss_gradient(pred, label) -> np.ndarray:
    """d/dpred of the contrastive term via the adjoint (flipped) kernels."""
    pred, label = _check_pair(pred, label)
    grad = np.zeros(np.broadcast_shapes(pred.shape, label.shape))
    for di, dj in CONTRAST_OFFSETS:
        response = _shift_response(pred, di, dj) - _shift_response(label, di, dj)
        grad = grad + 2.0 * _shift_response(response, -di, -dj)
    return grad


def depth_loss_gradient(pred, label) -> np.ndarray:
    """Gradient of euclidean + contrastive loss with respect to pred."""
    return euclidean_loss_gradient(pred, label) + contrastive_loss_gradient(pred, label)


@dataclass(frozen=True)
class LossReport:
    """Named loss terms; binary and multi_total stay None for single-frame use."""

    absolute: float
    contrastive: float
    depth_total: float
    binary: Optional[float] = None
    multi_total: Optional[float] = None

    def as_dict(self) -> dict:
        return {"absolute": self.absolute, "contrastive": self.contrastive,
                "depth_total": self.depth_total, "binary": self.binary,
                "multi_total": self.multi_total}

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "LossReport":
        with open(path) as fh:
            return cls(**json.load(fh))


def single_frame_loss(pred, label) -> LossReport:
    """Absolute plus contrastive loss of one depth map."""
    absolute = float(euclidean_depth_loss(pred, label))
    contrast = float(contrastive_depth_loss(pred, label))
    return LossReport(absolute=absolute, contrastive=contrast,
                      depth_total=absolute + contrast)


def multi_frame_depth_loss(preds: Sequence, labels: Sequence) -> float:
    """Per-frame absolute plus contrastive losses summed over the sequence."""
    if len(preds) != len(labels):
        raise ValueError(f"{len(preds)} predictions vs {len(labels)} labels")
    if not preds:
        raise ValueError("need at least one frame")
    return float(sum(single_frame_loss(p, l).depth_total
                     for p, l in zip(preds, labels)))


@dataclass(frozen=True)
class BinaryHead:
    """Two fully connected layers (ReLU between) feeding a 2-way softmax."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        w1 = np.asarray(self.w1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        b2 = np.asarray(self.b2, dtype=float)
        if w1.ndim != 2 or b1.shape != (w1.shape[1],):
            raise ValueError(f"layer 1 shapes inconsistent: {w1.shape}, {b1.shape}")
        if w2.shape != (w1.shape[1], 2) or b2.shape != (2,):
            raise ValueError(f"layer 2 shapes inconsistent: {w2.shape}, {b2.shape}")
        for arr in (w1, b1, w2, b2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("head weights contain non-finite values")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def seeded(cls, input_dim: int, hidden: int = 128, seed: int = 0) -> "BinaryHead":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((input_dim, hidden)) / math.sqrt(input_dim),
                   np.zeros(hidden),
                   rng.standard_normal((hidden, 2)) / math.sqrt(hidden),
                   np.zeros(2))

    @classmethod
    def zeroed(cls, input_dim: int, hidden: int = 128) -> "BinaryHead":
        return cls(np.zeros((input_dim, hidden)), np.zeros(hidden),
                   np.zeros((hidden, 2)), np.zeros(2))


def binary_loss(head: BinaryHead, fused: Sequence, label: int
                ) -> tuple[float, float]:
    """Cross entropy of the true class over the concatenated depth maps.

    label is 0 for spoof, 1 for living. Returns (loss, living probability).
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    flat = np.concatenate([np.asarray(g, dtype=float).ravel() for g in fused])
    if flat.size != head.input_dim:
        raise ValueError(f"head expects {head.input_dim} inputs, "
                         f"got {flat.size} concatenated cells")
    hidden = np.maximum(flat @ head.w1 + head.b1, 0.0)
    logits = hidden @ head.w2 + head.b2
    shifted = logits - logits.max()
    probs = np.exp(shifted) / np.exp(shifted).sum()
    loss = -math.log(max(probs[label], LOG_CLAMP))
    return loss, float(probs[1])


def multi_frame_loss(depth: float, binary: float, beta: float) -> float:
    """Weighted total beta * binary + (1 - beta) * depth."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta * binary + (1.0 - beta) * depth


def multi_frame_report(preds: Sequence, labels: Sequence, head: BinaryHead,
                       binary_label: int, beta: float
                       ) -> tuple[LossReport, float]:
    """Full multi-frame loss breakdown plus the living probability."""
    if len(preds) != len(labels) or not preds:
        raise ValueError(f"{len(preds)} predictions vs {len(labels)} labels")
    absolute = float(sum(euclidean_depth_loss(p, l) for p, l in zip(preds, labels)))
    contrast = float(sum(contrastive_depth_loss(p, l) for p, l in zip(preds, labels)))
    depth_total = absolute + contrast
    bin_loss, b_hat = binary_loss(head, preds, binary_label)
    report = LossReport(absolute=absolute, contrastive=contrast,
                        depth_total=depth_total, binary=bin_loss,
                        multi_total=multi_frame_loss(depth_total, bin_loss, beta))
    return report, b_hat
