"""Corpus manifest ingestion and lossless raster IO.

The manifest is line-delimited JSON, one entry per image. Stimuli are stored
on disk and decoded on demand; all exports use PNG so rendered bytes stay
lossless and deterministic.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image as PILImage

from .resample import Image

DEFAULT_MIN_WIDTH = 2048

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class CorpusEntry:
    image_id: str
    file_path: str
    width: int
    height: int
    source_tag: str = ""
    content_tags: tuple[str, ...] = ()


def write_manifest(entries: Iterable[CorpusEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            record = asdict(entry)
            record["content_tags"] = list(entry.content_tags)
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_manifest(
    path: str | Path,
    min_width: int = DEFAULT_MIN_WIDTH,
    check_files: bool = True,
) -> list[CorpusEntry]:
    entries: list[CorpusEntry] = []
    seen: set[str] = set()
    base = Path(path).parent
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            entry = CorpusEntry(
                image_id=record["image_id"],
                file_path=record["file_path"],
                width=int(record["width"]),
                height=int(record["height"]),
                source_tag=record.get("source_tag", ""),
                content_tags=tuple(record.get("content_tags", [])),
            )
            if entry.image_id in seen:
                raise ValueError(f"duplicate image_id {entry.image_id!r} in manifest")
            seen.add(entry.image_id)
            if entry.width < min_width:
                raise ValueError(
                    f"image {entry.image_id!r} is {entry.width} px wide; "
                    f"corpus minimum is {min_width}"
                )
            if check_files and not os.access(resolve_path(entry, base), os.R_OK):
                raise ValueError(
                    f"image file for {entry.image_id!r} is not readable: "
                    f"{entry.file_path}"
                )
            entries.append(entry)
    return entries


def resolve_path(entry: CorpusEntry, base: Path | None = None) -> Path:
    path = Path(entry.file_path)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


def build_manifest(
    images_dir: str | Path,
    min_width: int = DEFAULT_MIN_WIDTH,
    source_tag: str = "",
) -> list[CorpusEntry]:
    """Scan a directory for rasters and build manifest entries, rejecting
    anything under the minimum width."""
    images_dir = Path(images_dir)
    entries = []
    for file in sorted(images_dir.iterdir()):
        if file.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        with PILImage.open(file) as img:
            width, height = img.size
        if width < min_width:
            raise ValueError(
                f"{file.name} is {width} px wide; below the minimum of {min_width} "
                f"(pass a smaller --min-width to allow it)"
            )
        entries.append(
            CorpusEntry(
                image_id=file.stem,
                file_path=str(file),
                width=width,
                height=height,
                source_tag=source_tag,
            )
        )
    if not entries:
        raise ValueError(f"no images found in {images_dir}")
    return entries


def load_image(entry: CorpusEntry, base: Path | None = None) -> Image:
    path = resolve_path(entry, base)
    with PILImage.open(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint8)
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Image.from_array(entry.image_id, arr)


def read_png(path: str | Path, image_id: str | None = None) -> Image:
    path = Path(path)
    with PILImage.open(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint8)
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Image.from_array(image_id or path.stem, arr)


def read_png_bytes(data: bytes, image_id: str = "decoded") -> Image:
    with PILImage.open(io.BytesIO(data)) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint8)
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Image.from_array(image_id, arr)


def encode_png(image: Image) -> bytes:
    arr = image.to_array()
    if image.channels == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    buffer = io.BytesIO()
    pil.save(buffer, format="PNG")
    return buffer.getvalue()


def save_png(image: Image, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(encode_png(image))


def center_crop(image: Image, size: int) -> Image:
    """Square center crop; the crop shrinks to the shorter side when the
    image is smaller than the requested size."""
    side = min(size, image.width, image.height)
    arr = image.to_array()
    top = (image.height - side) // 2
    left = (image.width - side) // 2
    return Image.from_array(image.image_id, arr[top : top + side, left : left + side])


def entries_by_id(entries: Sequence[CorpusEntry]) -> dict[str, CorpusEntry]:
    return {entry.image_id: entry for entry in entries}
