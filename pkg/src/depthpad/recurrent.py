"""Convolutional GRU forward recurrence and depth fusion.

The cell's reset/update gates and candidate state are same-padded (zero pad)
convolutions over the channel concatenation of hidden state and input:

    r = sigmoid(k_r * [h, x])
    u = sigmoid(k_u * [h, x])
    c = tanh(k_h * [r h, x])
    h' = (1 - u) h + u c

No bias terms. Because h' is a convex combination of h and a tanh output,
a hidden state started inside [-1, 1] stays there for every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import conv2d, load_tensor, save_tensor


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class ConvGruCell:
    """Gate and candidate kernels, each (3, 3, hidden + input, hidden)."""

    k_r: np.ndarray
    k_u: np.ndarray
    k_h: np.ndarray

    def __post_init__(self) -> None:
        kernels = {}
        for name in ("k_r", "k_u", "k_h"):
            k = np.asarray(getattr(self, name), dtype=float)
            if k.ndim != 4 or k.shape[:2] != (3, 3):
                raise ValueError(f"{name} must be (3, 3, Cin, Ch), got {k.shape}")
            kernels[name] = k
        shapes = {k.shape for k in kernels.values()}
        if len(shapes) != 1:
            raise ValueError(f"gate kernels disagree on shape: {sorted(shapes)}")
        cin, ch = kernels["k_r"].shape[2:]
        if cin <= ch:
            raise ValueError(
                f"kernels consume {cin} channels, too few for hidden width {ch} "
                f"plus at least one input channel")
        for name, k in kernels.items():
            object.__setattr__(self, name, k)

    @property
    def hidden_channels(self) -> int:
        return self.k_r.shape[3]

    @property
    def input_channels(self) -> int:
        return self.k_r.shape[2] - self.hidden_channels

    @classmethod
    def seeded(cls, input_channels: int, hidden_channels: int = 1,
               scale: float = 0.1, seed: int = 0) -> "ConvGruCell":
        rng = np.random.default_rng(seed)
        shape = (3, 3, hidden_channels + input_channels, hidden_channels)
        return cls(*(scale * rng.standard_normal(shape) for _ in range(3)))

    def save(self, r_path, u_path, h_path) -> None:
        save_tensor(r_path, self.k_r, kind="convgru_k_r")
        save_tensor(u_path, self.k_u, kind="convgru_k_u")
        save_tensor(h_path, self.k_h, kind="convgru_k_h")

    @classmethod
    def load(cls, r_path, u_path, h_path) -> "ConvGruCell":
        return cls(load_tensor(r_path, "convgru_k_r")[0],
                   load_tensor(u_path, "convgru_k_u")[0],
                   load_tensor(h_path, "convgru_k_h")[0])


def convgru_step(cell: ConvGruCell, h_prev: np.ndarray, x: np.ndarray
                 ) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """One recurrence step; returns the new state and the (reset, update) gates."""
    h_prev = np.asarray(h_prev, dtype=float)
    x = np.asarray(x, dtype=float)
    if h_prev.ndim != 3 or x.ndim != 3:
        raise ValueError("hidden state and input must be (H, W, C)")
    if h_prev.shape[:2] != x.shape[:2]:
        raise ValueError(f"spatial dims differ: {h_prev.shape[:2]} vs {x.shape[:2]}")
    if h_prev.shape[2] != cell.hidden_channels:
        raise ValueError(f"hidden state has {h_prev.shape[2]} channels, "
                         f"cell expects {cell.hidden_channels}")
    if x.shape[2] != cell.input_channels:
        raise ValueError(f"input has {x.shape[2]} channels, "
                         f"cell expects {cell.input_channels}")
    hx = np.concatenate([h_prev, x], axis=2)
    r = _sigmoid(conv2d(hx, cell.k_r, padding="zero"))
    u = _sigmoid(conv2d(hx, cell.k_u, padding="zero"))
    rhx = np.concatenate([r * h_prev, x], axis=2)
    candidate = np.tanh(conv2d(rhx, cell.k_h, padding="zero"))
    h_new = (1.0 - u) * h_prev + u * candidate
    return h_new, (r, u)


def convgru_run(cell: ConvGruCell, h0: np.ndarray,
                xs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Fold convgru_step over the input sequence; returns every state."""
    if len(xs) < 1:
        raise ValueError("convgru_run needs at least one input")
    states = []
    h = np.asarray(h0, dtype=float)
    for x in xs:
        h, _ = convgru_step(cell, h, x)
        states.append(h)
    return states


def fuse_depth(d_single: np.ndarray, d_multi: np.ndarray, alpha: float) -> np.ndarray:
    """Convex combination alpha * single-frame depth + (1 - alpha) * recurrent depth."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    d_single = np.asarray(d_single, dtype=float)
    d_multi = np.asarray(d_multi, dtype=float)
    if d_single.shape != d_multi.shape:
        raise ValueError(f"depth shapes differ: {d_single.shape} vs {d_multi.shape}")
    return alpha * d_single + (1.0 - alpha) * d_multi
