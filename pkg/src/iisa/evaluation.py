"""Predictor-facing harness: dataset splits, cross-validated metric
reporting, weak-label export, and the zero-shot multi-scale estimator over a
pluggable quality oracle.

Predictors stay external: they are consulted through score files or a
per-image command, never loaded in-process.
"""

from __future__ import annotations

import csv
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import corpus, stats
from .iis import SCALE_LOWER_BOUND, WeakLabel, WeakLabelConfig, weak_label_rows
from .iis import write_weak_label_manifest
from .resample import ResampleSpec, downscale
from .stats import MetricReport, MoisRecord


class MissingPredictionError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    val_fraction: float = 0.10
    test_fraction: float = 0.20
    n_repeats: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        if min(self.train_fraction, self.val_fraction, self.test_fraction) <= 0:
            raise ValueError("all split fractions must be positive")
        if self.n_repeats < 1:
            raise ValueError(f"n_repeats must be >= 1, got {self.n_repeats}")


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class EvaluationReport:
    per_split: tuple[MetricReport, ...]
    median: MetricReport


def make_splits(image_ids: Sequence[str], spec: SplitSpec | None = None) -> list[Split]:
    """Seeded random partitions, one per repeat: floor(train_fraction * N)
    train ids, floor(val_fraction * N) val ids, remainder test. Each repeat
    is reproducible from (seed, repeat index) alone."""
    spec = spec or SplitSpec()
    ids = list(image_ids)
    if len(ids) < 10:
        raise ValueError(f"need at least 10 images to split, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("image ids must be unique")
    n = len(ids)
    n_train = int(math.floor(spec.train_fraction * n))
    n_val = int(math.floor(spec.val_fraction * n))
    splits = []
    for repeat in range(spec.n_repeats):
        rng = np.random.default_rng([spec.seed, repeat])
        perm = rng.permutation(n)
        train = tuple(sorted(ids[i] for i in perm[:n_train]))
        val = tuple(sorted(ids[i] for i in perm[n_train : n_train + n_val]))
        test = tuple(sorted(ids[i] for i in perm[n_train + n_val :]))
        splits.append(Split(train, val, test))
    return splits


def metric_report(
    predictions: Mapping[str, float],
    ground_truth: Mapping[str, float],
    ids: Sequence[str],
) -> MetricReport:
    missing = sorted(i for i in ids if i not in predictions)
    if missing:
        raise MissingPredictionError(f"missing predictions for: {missing}")
    missing_gt = sorted(i for i in ids if i not in ground_truth)
    if missing_gt:
        raise MissingPredictionError(f"missing ground truth for: {missing_gt}")
    x = [predictions[i] for i in ids]
    y = [ground_truth[i] for i in ids]
    s = stats.srcc(x, y)
    p = stats.plcc(x, y)
    if s is None or p is None:
        raise UndefinedMetricError(
            "correlation undefined on a constant vector; refusing to report 0"
        )
    return MetricReport(srcc=s, plcc=p, rmse=stats.rmse(x, y), mae=stats.mae(x, y))


def evaluate(
    predictions: Mapping[str, float],
    ground_truth: Mapping[str, float],
    splits: Sequence[Split],
) -> EvaluationReport:
    """Test-set metrics per split plus the element-wise median across splits."""
    if not splits:
        raise ValueError("no splits given")
    reports = tuple(
        metric_report(predictions, ground_truth, split.test) for split in splits
    )
    median = MetricReport(
        srcc=float(np.median([r.srcc for r in reports])),
        plcc=float(np.median([r.plcc for r in reports])),
        rmse=float(np.median([r.rmse for r in reports])),
        mae=float(np.median([r.mae for r in reports])),
    )
    return EvaluationReport(per_split=reports, median=median)


def mois_as_mapping(records: Iterable[MoisRecord]) -> dict[str, float]:
    return {rec.image_id: rec.mois for rec in records}


# ---------------------------------------------------------------------------
# Weak-label export


def export_wiisa_manifest(
    ground_truth: Sequence[tuple[str, float]],
    cfg: WeakLabelConfig,
    out_dir: str | Path,
    corpus_entries: Mapping[str, corpus.CorpusEntry] | None = None,
    crop: int | None = 1536,
    write_images: bool = True,
    manifest_name: str = "weak_labels.jsonl",
) -> tuple[Path, list[WeakLabel]]:
    """Emit n_wl weak labels per ground-truth (image_id, iis) pair.

    With ``write_images`` (requires corpus entries), each source image is
    center-cropped and downscaled to every sampled scale, and saved as PNG
    next to the manifest. Rerunning with the same seed reproduces the
    manifest and the image bytes exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[WeakLabel] = []
    for image_id, iis_value in ground_truth:
        image_rows = weak_label_rows(image_id, iis_value, cfg)
        rows.extend(image_rows)
        if not write_images:
            continue
        if corpus_entries is None or image_id not in corpus_entries:
            raise ValueError(f"no corpus entry for image {image_id!r}")
        image = corpus.load_image(corpus_entries[image_id])
        if crop is not None:
            image = corpus.center_crop(image, crop)
        for row in image_rows:
            rendered = downscale(image, row.sampled_scale, cfg.interpolation)
            corpus.save_png(rendered, out_dir / row.output_image_ref)
    manifest_path = out_dir / manifest_name
    write_weak_label_manifest(rows, manifest_path, cfg)
    return manifest_path, rows


# ---------------------------------------------------------------------------
# Zero-shot multi-scale estimation

QualityOracle = Callable[[str, float], float]


@dataclass(frozen=True)
class QualityCurve:
    image_id: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        scales = [s for s, _ in self.points]
        if len(scales) < 1:
            raise ValueError("empty quality curve")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("curve scales must be strictly increasing")
        if scales[0] < SCALE_LOWER_BOUND - 1e-12 or scales[-1] > 1.0 + 1e-12:
            raise ValueError("curve scales must lie within [0.05, 1]")


def scale_grid(n_s: int = 100) -> list[float]:
    """n_s scales uniform in [0.05, 1], both endpoints included."""
    if n_s < 2:
        raise ValueError(f"need at least 2 scales, got {n_s}")
    return [float(s) for s in np.linspace(SCALE_LOWER_BOUND, 1.0, n_s)]


def largest_peak_scale(points: Sequence[tuple[float, float]]) -> float:
    """Largest scale attaining the maximum quality: the max of the argmax
    set, so ties break toward the larger scale."""
    best = max(q for _, q in points)
    for s, q in reversed(list(points)):
        if q == best:
            return s
    raise AssertionError("unreachable: maximum not found")


def predict_multiscale(image_id: str, oracle: QualityOracle, n_s: int = 100) -> float:
    """Estimate the IIS of an image by scoring it at n_s uniform scales and
    taking the largest scale of highest quality. Any oracle failure aborts
    the image with a named error."""
    points = []
    for s in scale_grid(n_s):
        try:
            q = float(oracle(image_id, s))
        except OracleError:
            raise
        except Exception as exc:
            raise OracleError(
                f"oracle failed for image {image_id!r} at scale {s:.6f}: {exc}"
            ) from exc
        if not 0.0 <= q <= 1.0 or not math.isfinite(q):
            raise OracleError(
                f"oracle returned quality {q!r} outside [0, 1] for image "
                f"{image_id!r} at scale {s:.6f}"
            )
        points.append((s, q))
    return largest_peak_scale(QualityCurve(image_id, tuple(points)).points)


def oracle_from_scores_file(path: str | Path) -> QualityOracle:
    """Pure-lookup oracle over a (image_id, scale, quality) table; scales are
    matched at 1e-6 granularity."""
    table: dict[tuple[str, float], float] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            key = (row["image_id"], round(float(row["scale"]), 6))
            table[key] = float(row["quality"])

    def oracle(image_id: str, scale: float) -> float:
        key = (image_id, round(scale, 6))
        if key not in table:
            raise OracleError(
                f"scores file has no entry for ({image_id}, {scale:.6f})"
            )
        return table[key]

    return oracle


def oracle_from_command(
    template: str,
    corpus_entries: Mapping[str, corpus.CorpusEntry],
    spec: ResampleSpec | None = None,
    workdir: str | Path | None = None,
    timeout_s: float = 120.0,
) -> QualityOracle:
    """Oracle that renders the image at the requested scale and asks an
    external command for a quality score.

    The template is split into arguments first, then each argument has
    {image_path}, {image_id} and {scale} substituted, so paths with spaces
    survive. The command must print a single decimal number on stdout.
    """
    spec = spec or ResampleSpec()
    base_args = shlex.split(template)
    if not any("{image_path}" in a for a in base_args):
        raise ValueError("command template must contain an {image_path} placeholder")
    workdir = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="iisa-oracle-"))
    workdir.mkdir(parents=True, exist_ok=True)
    cache: dict[str, object] = {}

    def oracle(image_id: str, scale: float) -> float:
        if image_id not in corpus_entries:
            raise OracleError(f"unknown image {image_id!r}")
        if image_id not in cache:
            cache.clear()  # hold at most one decoded source at a time
            cache[image_id] = corpus.load_image(corpus_entries[image_id])
        source = cache[image_id]
        rendered = downscale(source, scale, spec)  # type: ignore[arg-type]
        image_path = workdir / f"{image_id}_s{scale:.6f}.png"
        corpus.save_png(rendered, image_path)
        args = [
            a.format(image_path=image_path, image_id=image_id, scale=f"{scale:.6f}")
            for a in base_args
        ]
        proc = subprocess.run(
            args, capture_output=True, text=True, timeout=timeout_s
        )
        if proc.returncode != 0:
            raise OracleError(
                f"command exited {proc.returncode} for ({image_id}, {scale:.6f}): "
                f"{proc.stderr.strip()[:200]}"
            )
        out = proc.stdout.strip()
        try:
            return float(out.splitlines()[-1])
        except (ValueError, IndexError) as exc:
            raise OracleError(
                f"unparsable quality {out[:80]!r} for ({image_id}, {scale:.6f})"
            ) from exc

    return oracle


# ---------------------------------------------------------------------------
# Tabular IO


def write_predictions_csv(predictions: Mapping[str, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", "predicted_iis"])
        for image_id in sorted(predictions):
            writer.writerow([image_id, repr(predictions[image_id])])


def read_predictions_csv(path: str | Path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            if row["image_id"] in out:
                raise ValueError(f"duplicate prediction for {row['image_id']!r}")
            out[row["image_id"]] = float(row["predicted_iis"])
    return out


def write_scores_csv(
    scores: Iterable[tuple[str, float, float]], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", "scale", "quality"])
        for image_id, scale, quality in scores:
            writer.writerow([image_id, repr(scale), repr(quality)])


def write_metric_report_csv(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["split", "srcc", "plcc", "rmse", "mae"])
        for i, rep in enumerate(report.per_split):
            writer.writerow([i, repr(rep.srcc), repr(rep.plcc), repr(rep.rmse), repr(rep.mae)])
        med = report.median
        writer.writerow(["median", repr(med.srcc), repr(med.plcc), repr(med.rmse), repr(med.mae)])


def write_splits_json(splits: Sequence[Split], spec: SplitSpec, path: str | Path) -> None:
    import json

    payload = {
        "seed": spec.seed,
        "n_repeats": spec.n_repeats,
        "fractions": [spec.train_fraction, spec.val_fraction, spec.test_fraction],
        "splits": [
            {"train": list(s.train), "val": list(s.val), "test": list(s.test)}
            for s in splits
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)


def read_splits_json(path: str | Path) -> list[Split]:
    import json

    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return [
        Split(tuple(s["train"]), tuple(s["val"]), tuple(s["test"]))
        for s in payload["splits"]
    ]
