"""Intrinsic-scale arithmetic and weak-label generation.

The intrinsic scale (IIS) of an image is the largest scale at which it shows
its highest perceived quality, measured above a lower bound of 0.05. Given a
ground-truth IIS, the IIS of any downscaled version follows from a two-branch
rule, which is what makes cheap weak labels (WIISA) possible: downscale the
image to a randomly sampled scale and divide the ground truth by that scale.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .resample import Image, ResampleSpec, downscale

SCALE_LOWER_BOUND = 0.05


def check_scale(value: float, name: str = "scale") -> None:
    """Reject values outside [0.05, 1]."""
    if not SCALE_LOWER_BOUND <= value <= 1.0:
        raise ValueError(f"{name} must be in [{SCALE_LOWER_BOUND}, 1], got {value}")


def derive_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit seed derived from a base seed and string parts.

    Used to give every image its own RNG stream so that parallel or
    out-of-order processing cannot change sampled values.
    """
    digest = hashlib.sha256(":".join([str(seed), *parts]).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def extrapolate_iis(iis: float, scale: float) -> float:
    """IIS of the version of an image downscaled to `scale`, given the
    original image's IIS.

    Returns 1 when scale <= iis (the version is already at or below its best
    scale, so no further downscaling can help) and iis / scale otherwise.
    Continuous at scale == iis and non-increasing in scale.
    """
    check_scale(iis, "iis")
    check_scale(scale, "scale")
    if scale <= iis:
        return 1.0
    return iis / scale


@dataclass(frozen=True)
class WeakLabelConfig:
    n_wl: int = 2
    delta: float = 0.65
    rng_seed: int = 0
    interpolation: ResampleSpec = field(default_factory=ResampleSpec)

    def __post_init__(self) -> None:
        if self.n_wl < 1:
            raise ValueError(f"n_wl must be >= 1, got {self.n_wl}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class WeakLabel:
    source_image_id: str
    sampled_scale: float
    weak_iis: float
    output_image_ref: str


def _quantize_scale(value: float, lower: float) -> float:
    # 4 decimal digits, matching the slider discretization's order of
    # magnitude, without ever leaving [lower, 1].
    q = round(value, 4)
    if q < lower:
        q = math.ceil(value * 10_000) / 10_000
    return min(q, 1.0)


def sample_weak_scales(
    iis: float, cfg: WeakLabelConfig, rng: np.random.Generator | None = None
) -> list[float]:
    """Draw n_wl scales independently and uniformly from [max(iis, delta), 1].

    Reproducible: without an explicit generator, a fresh one is seeded from
    cfg.rng_seed on every call.
    """
    check_scale(iis, "iis")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    lower = max(iis, cfg.delta)
    return [_quantize_scale(v, lower) for v in rng.uniform(lower, 1.0, size=cfg.n_wl)]


def output_ref(image_id: str, index: int, scale: float) -> str:
    return f"{image_id}__wl{index}_s{scale:.4f}.png"


def weak_label_rows(image_id: str, iis: float, cfg: WeakLabelConfig) -> list[WeakLabel]:
    """Sample scales and compute weak IIS values for one ground-truth pair,
    without touching pixels. The RNG stream is derived from
    (cfg.rng_seed, image_id)."""
    rng = np.random.default_rng(derive_seed(cfg.rng_seed, image_id))
    rows = []
    for i, s in enumerate(sample_weak_scales(iis, cfg, rng=rng)):
        weak = extrapolate_iis(iis, s)
        # s >= max(iis, delta) puts every label in [iis, 1]; no clamp needed.
        assert iis - 1e-12 <= weak <= 1.0
        rows.append(WeakLabel(image_id, s, weak, output_ref(image_id, i, s)))
    return rows


def generate_weak_labels(
    image: Image, iis: float, cfg: WeakLabelConfig
) -> list[tuple[WeakLabel, Image]]:
    """Weak labels plus the actual downscaled rasters for one image."""
    rows = weak_label_rows(image.image_id, iis, cfg)
    return [(row, downscale(image, row.sampled_scale, cfg.interpolation)) for row in rows]


def write_weak_label_manifest(
    rows: Iterable[WeakLabel], path: str | Path, cfg: WeakLabelConfig
) -> None:
    """Line-delimited manifest; every row records the interpolation and seed
    so a run can be reproduced from the manifest alone."""
    tag = cfg.interpolation.tag()
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(
                json.dumps(
                    {
                        "source_image_id": row.source_image_id,
                        "sampled_scale": row.sampled_scale,
                        "weak_iis": row.weak_iis,
                        "output_image_ref": row.output_image_ref,
                        "interpolation": tag,
                        "seed": cfg.rng_seed,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_weak_label_manifest(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def batch_weak_label_rows(
    pairs: Sequence[tuple[str, float]], cfg: WeakLabelConfig
) -> list[WeakLabel]:
    """Rows for a whole list of (image_id, iis) pairs: n_wl per pair."""
    rows: list[WeakLabel] = []
    for image_id, iis in pairs:
        rows.extend(weak_label_rows(image_id, iis, cfg))
    return rows
