"""Separable anti-aliased image downscaling (Lanczos, bilinear, bicubic).

Scales are restricted to (0, 1]. When downscaling, the kernel support is
stretched by the per-axis input/output ratio so the filter acts as a proper
low-pass and the result does not alias. Arithmetic runs in float64 on the
stored 8-bit samples; the final rounding is half-away-from-zero, clamped to
[0, 255]. Everything here is a pure function over immutable inputs and is
safe to call from many threads at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

KernelName = Literal["lanczos", "bilinear", "bicubic"]

KERNEL_NAMES: tuple[KernelName, ...] = ("lanczos", "bilinear", "bicubic")


@dataclass(frozen=True)
class Image:
    """Decoded 8-bit raster with row-major samples and 1 or 3 channels."""

    image_id: str
    width: int
    height: int
    channels: int
    samples: bytes

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"image {self.image_id!r}: dimensions must be >= 1, "
                f"got {self.width}x{self.height}"
            )
        if self.channels not in (1, 3):
            raise ValueError(
                f"image {self.image_id!r}: channels must be 1 or 3, got {self.channels}"
            )
        expected = self.width * self.height * self.channels
        if len(self.samples) != expected:
            raise ValueError(
                f"image {self.image_id!r}: {len(self.samples)} samples, expected {expected}"
            )

    @classmethod
    def from_array(cls, image_id: str, array: np.ndarray) -> "Image":
        arr = np.ascontiguousarray(array, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected a HxW or HxWxC array, got shape {array.shape}")
        height, width, channels = arr.shape
        return cls(image_id, width, height, channels, arr.tobytes())

    def to_array(self) -> np.ndarray:
        """Samples as a (height, width, channels) uint8 array."""
        return np.frombuffer(self.samples, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )


@dataclass(frozen=True)
class ResampleSpec:
    """Kernel selection for downscaling; the clamp edge policy is the only one."""

    kernel: KernelName = "lanczos"
    lanczos_window: int = 3
    edge_policy: Literal["clamp"] = "clamp"

    def __post_init__(self) -> None:
        if self.kernel not in KERNEL_NAMES:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.lanczos_window < 2:
            raise ValueError(f"lanczos window must be >= 2, got {self.lanczos_window}")
        if self.edge_policy != "clamp":
            raise ValueError(f"unsupported edge policy {self.edge_policy!r}")

    def tag(self) -> str:
        """Compact identifier used in manifests and cache keys."""
        if self.kernel == "lanczos":
            return f"lanczos-{self.lanczos_window}"
        return self.kernel


def kernel_value(x: float, a: int = 3) -> float:
    """Lanczos tap weight: sinc(x) * sinc(x / a) inside the window, 0 outside.

    Total over all real x; exactly 1 at x = 0 and exactly 0 for |x| >= a.
    """
    if a < 2:
        raise ValueError(f"lanczos window must be >= 2, got {a}")
    if x == 0.0:
        return 1.0
    if abs(x) >= a:
        return 0.0
    pix = math.pi * x
    return a * math.sin(pix) * math.sin(pix / a) / (pix * pix)


def _bilinear_weight(x: float) -> float:
    ax = abs(x)
    return 1.0 - ax if ax < 1.0 else 0.0


def _bicubic_weight(x: float) -> float:
    # Catmull-Rom spline (the common "bicubic" convolution kernel).
    ax = abs(x)
    if ax < 1.0:
        return (1.5 * ax - 2.5) * ax * ax + 1.0
    if ax < 2.0:
        return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    return 0.0


def _kernel_for(spec: ResampleSpec) -> tuple[Callable[[float], float], float]:
    if spec.kernel == "lanczos":
        a = spec.lanczos_window
        return (lambda x: kernel_value(x, a)), float(a)
    if spec.kernel == "bilinear":
        return _bilinear_weight, 1.0
    return _bicubic_weight, 2.0


def output_dims(width: int, height: int, scale: float) -> tuple[int, int]:
    """Output (width, height): round-half-up per axis, never below 1."""
    return (
        max(1, int(math.floor(width * scale + 0.5))),
        max(1, int(math.floor(height * scale + 0.5))),
    )


def _tap_table(
    n_in: int, n_out: int, kernel: Callable[[float], float], support: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-output-coordinate source indices (clamped to the edge) and
    normalized weights for one axis."""
    ratio = n_in / n_out
    stretch = max(1.0, ratio)
    radius = support * stretch
    n_taps = int(math.ceil(2.0 * radius)) + 2
    idx = np.zeros((n_out, n_taps), dtype=np.intp)
    wts = np.zeros((n_out, n_taps), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) * ratio
        first = int(math.floor(center - radius - 0.5))
        for t in range(n_taps):
            k = first + t
            w = kernel(((k + 0.5) - center) / stretch)
            if w != 0.0:
                idx[i, t] = min(max(k, 0), n_in - 1)
                wts[i, t] = w
        total = wts[i].sum()
        if total == 0.0:
            raise ValueError("degenerate kernel: zero weight sum")
        wts[i] /= total
    return idx, wts


def _resample_axis(
    arr: np.ndarray, n_out: int, kernel: Callable[[float], float], support: float
) -> np.ndarray:
    """Resample a float array along axis 0."""
    idx, wts = _tap_table(arr.shape[0], n_out, kernel, support)
    out = np.zeros((n_out,) + arr.shape[1:], dtype=np.float64)
    broadcast = (n_out,) + (1,) * (arr.ndim - 1)
    for t in range(idx.shape[1]):
        w = wts[:, t]
        if not w.any():
            continue
        out += w.reshape(broadcast) * arr[idx[:, t]]
    return out


def downscale(image: Image, scale: float, spec: ResampleSpec | None = None) -> Image:
    """Downscale an image to `scale` with the given kernel.

    Output dimensions follow `output_dims`. A scale of exactly 1 returns a
    sample-identical copy. Identical inputs always produce byte-identical
    outputs.
    """
    if spec is None:
        spec = ResampleSpec()
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must be in (0, 1], got {scale}")
    if scale == 1.0:
        return Image(
            image.image_id, image.width, image.height, image.channels, image.samples
        )
    kernel, support = _kernel_for(spec)
    out_w, out_h = output_dims(image.width, image.height, scale)
    arr = image.to_array().astype(np.float64)
    arr = _resample_axis(arr, out_h, kernel, support)
    arr = _resample_axis(arr.transpose(1, 0, 2), out_w, kernel, support)
    arr = arr.transpose(1, 0, 2)
    rounded = np.copysign(np.floor(np.abs(arr) + 0.5), arr)
    return Image.from_array(image.image_id, np.clip(rounded, 0.0, 255.0))
