"""Flow-guided feature computations on H x W x C grids.

Forward passes only: plain same-padded convolution, Sobel spatial gradients,
frame-difference temporal gradients, the flow-orthogonality residual, and the
five-branch motion block that concatenates a reduced feature map, both frames'
spatial gradients, the temporal gradient, and the previous-level output.

The Sobel stencils carry their conventional gain: a unit ramp reads 8, not 1,
so velocity vectors fed to off_vector_residual must absorb that factor.
Tensors are plain numpy arrays shaped (height, width, channels).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SOBEL_GAIN = 8.0  # response of the 3x3 stencil on a unit ramp

_PAD_MODES = {"replicate": "edge", "zero": "constant"}


def _require_hwc(name: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"{name} must be (H, W, C), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _pad_spatial(x: np.ndarray, kh: int, kw: int, padding: str) -> np.ndarray:
    if padding not in _PAD_MODES:
        raise ValueError(f"padding must be one of {sorted(_PAD_MODES)}, got {padding!r}")
    return np.pad(x, ((kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)),
                  mode=_PAD_MODES[padding])


def conv2d(x: np.ndarray, kernel: np.ndarray, padding: str = "replicate") -> np.ndarray:
    """Same-padded stride-1 cross-correlation mixing channels.

    x is (H, W, Cin), kernel is (kH, kW, Cin, Cout) with odd kH and kW.
    """
    x = _require_hwc("input", x)
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 4:
        raise ValueError(f"kernel must be (kH, kW, Cin, Cout), got shape {kernel.shape}")
    kh, kw, cin, _ = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel dims must be odd for same padding, got {kh}x{kw}")
    if cin != x.shape[2]:
        raise ValueError(f"kernel expects {cin} input channels, tensor has {x.shape[2]}")
    padded = _pad_spatial(x, kh, kw, padding)
    windows = sliding_window_view(padded, (kh, kw), axis=(0, 1))
    # windows: (H, W, Cin, kH, kW); kernel: (kH, kW, Cin, Cout)
    return np.einsum("hwcab,abcd->hwd", windows, kernel, optimize=True)


def spatial_gradient(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel Sobel responses (gx, gy) with replicate padding.

    Computed as neighbor differences followed by the 1-2-1 smoothing sum, so a
    constant input yields exactly zero.
    """
    x = _require_hwc("input", x)
    h, w, _ = x.shape
    if h < 3 or w < 3:
        raise ValueError(f"spatial gradient needs at least 3x3 input, got {h}x{w}")
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = p[:, 2:, :] - p[:, :-2, :]          # east minus west, (H+2, W, C)
    gx = dx[:-2] + 2.0 * dx[1:-1] + dx[2:]
    dy = p[2:, :, :] - p[:-2, :, :]          # south minus north, (H, W+2, C)
    gy = dy[:, :-2] + 2.0 * dy[:, 1:-1] + dy[:, 2:]
    return gx, gy


def temporal_gradient(x_t: np.ndarray, x_t1: np.ndarray) -> np.ndarray:
    """Elementwise frame difference x(t+dt) - x(t)."""
    x_t = _require_hwc("x_t", x_t)
    x_t1 = _require_hwc("x_t1", x_t1)
    if x_t.shape != x_t1.shape:
        raise ValueError(f"frame shapes differ: {x_t.shape} vs {x_t1.shape}")
    return x_t1 - x_t


def off_vector_residual(x_t: np.ndarray, x_t1: np.ndarray,
                        v: tuple[float, float]) -> np.ndarray:
    """Per-cell deviation from brightness constancy, gx*vx + gy*vy + gt.

    Vanishes in the interior when x_t1 is x_t translated by the flow and v is
    expressed in Sobel-gain units (true displacement divided by SOBEL_GAIN).
    """
    gx, gy = spatial_gradient(x_t)
    gt = temporal_gradient(x_t, x_t1)
    vx, vy = v
    return gx * vx + gy * vy + gt


@dataclass(frozen=True)
class OffBlockWeights:
    """Weights of one motion block.

    reduce_1x1 maps the incoming features to the working width; fuse_3x3
    consumes the channel concatenation of the five branches
    [reduced(t), gx(t), gy(t), gx(t+dt), gy(t+dt), temporal, previous]
    (the previous branch only when a previous-level output is supplied).
    """

    reduce_1x1: np.ndarray
    fuse_3x3: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.reduce_1x1, dtype=float)
        f = np.asarray(self.fuse_3x3, dtype=float)
        if r.ndim != 4 or r.shape[:2] != (1, 1):
            raise ValueError(f"reduce kernel must be (1, 1, Cin, Cr), got {r.shape}")
        if f.ndim != 4 or f.shape[:2] != (3, 3):
            raise ValueError(f"fuse kernel must be (3, 3, Ccat, Cout), got {f.shape}")
        if f.shape[2] < 6 * r.shape[3]:
            raise ValueError(
                f"fuse kernel consumes {f.shape[2]} channels but the gradient "
                f"branches alone produce {6 * r.shape[3]}")
        object.__setattr__(self, "reduce_1x1", r)
        object.__setattr__(self, "fuse_3x3", f)

    @property
    def reduce_channels(self) -> int:
        return self.reduce_1x1.shape[3]

    @property
    def prev_channels(self) -> int:
        return self.fuse_3x3.shape[2] - 6 * self.reduce_channels

    @property
    def out_channels(self) -> int:
        return self.fuse_3x3.shape[3]

    @classmethod
    def seeded(cls, in_channels: int, reduce_channels: int = 16,
               out_channels: int = 32, prev_channels: int = 0,
               seed: int = 0) -> "OffBlockWeights":
        """Random weights scaled by fan-in, reproducible from the seed."""
        rng = np.random.default_rng(seed)
        reduce = rng.standard_normal((1, 1, in_channels, reduce_channels))
        reduce /= np.sqrt(in_channels)
        cat = 6 * reduce_channels + prev_channels
        fuse = rng.standard_normal((3, 3, cat, out_channels)) / np.sqrt(9 * cat)
        return cls(reduce, fuse)


def off_block(f_t: np.ndarray, f_t1: np.ndarray, prev: np.ndarray | None,
              weights: OffBlockWeights, padding: str = "replicate") -> np.ndarray:
    """Assemble one motion block from two consecutive frames' features.

    prev is the previous-level block output, or None at the first level.
    No nonlinearity follows the fuse convolution.
    """
    f_t = _require_hwc("f_t", f_t)
    f_t1 = _require_hwc("f_t1", f_t1)
    if f_t.shape != f_t1.shape:
        raise ValueError(f"frame feature shapes differ: {f_t.shape} vs {f_t1.shape}")
    r_t = conv2d(f_t, weights.reduce_1x1, padding)
    r_t1 = conv2d(f_t1, weights.reduce_1x1, padding)
    gx_t, gy_t = spatial_gradient(r_t)
    gx_t1, gy_t1 = spatial_gradient(r_t1)
    branches = [r_t, gx_t, gy_t, gx_t1, gy_t1, temporal_gradient(r_t, r_t1)]
    if prev is not None:
        prev = _require_hwc("prev", prev)
        if prev.shape[:2] != f_t.shape[:2]:
            raise ValueError(
                f"previous-level output spatial dims {prev.shape[:2]} do not "
                f"match frame dims {f_t.shape[:2]}")
        branches.append(prev)
    cat = np.concatenate(branches, axis=2)
    if cat.shape[2] != weights.fuse_3x3.shape[2]:
        raise ValueError(
            f"branch concatenation has {cat.shape[2]} channels but the fuse "
            f"kernel expects {weights.fuse_3x3.shape[2]}")
    return conv2d(cat, weights.fuse_3x3, padding)


# Tensor file format: one JSON object holding a kind tag, the shape header,
# and the flat row-major values. repr keeps every float bit-exact.

def save_tensor(path, array: np.ndarray, kind: str = "tensor") -> None:
    array = np.asarray(array, dtype=float)
    with open(path, "w") as fh:
        json.dump({"kind": kind,
                   "shape": list(array.shape),
                   "values": [float(v) for v in array.ravel()]}, fh)


def load_tensor(path, expect_kind: str | None = None) -> tuple[np.ndarray, str]:
    with open(path) as fh:
        data = json.load(fh)
    kind = data["kind"]
    if expect_kind is not None and kind != expect_kind:
        raise ValueError(f"tensor file holds kind {kind!r}, expected {expect_kind!r}")
    shape = tuple(data["shape"])
    values = np.array(data["values"], dtype=float)
    if values.size != int(np.prod(shape)):
        raise ValueError(f"tensor file has {values.size} values for shape {shape}")
    return values.reshape(shape), kind


def save_off_block_weights(weights: OffBlockWeights, reduce_path, fuse_path) -> None:
    save_tensor(reduce_path, weights.reduce_1x1, kind="off_reduce_1x1")
    save_tensor(fuse_path, weights.fuse_3x3, kind="off_fuse_3x3")


def load_off_block_weights(reduce_path, fuse_path) -> OffBlockWeights:
    reduce, _ = load_tensor(reduce_path, expect_kind="off_reduce_1x1")
    fuse, _ = load_tensor(fuse_path, expect_kind="off_fuse_3x3")
    return OffBlockWeights(reduce, fuse)
