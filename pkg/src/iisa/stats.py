"""Aggregation and reliability statistics for opinion data.

Covers the MOIS geometric mean, percentile-bootstrap confidence intervals,
inter-group agreement, the evaluation metrics (SRCC/PLCC/RMSE/MAE), scale
sensitivity (leverage), and the concavity-assumption checker. All randomized
procedures are deterministic under a fixed seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .iis import SCALE_LOWER_BOUND, derive_seed


@dataclass(frozen=True)
class Opinion:
    """One participant's single IIS judgment for one image in one batch
    repetition. `generation` counts re-annotation rounds of the same batch."""

    study_id: str
    participant_id: str
    image_id: str
    batch_id: str
    repetition: int
    scale_value: float
    slider_position: int
    submitted_at: int
    duration_ms: int | None = None
    generation: int = 1

    def __post_init__(self) -> None:
        if self.repetition not in (1, 2):
            raise ValueError(f"repetition must be 1 or 2, got {self.repetition}")
        if not SCALE_LOWER_BOUND - 1e-12 <= self.scale_value <= 1.0:
            raise ValueError(
                f"scale_value {self.scale_value} outside [{SCALE_LOWER_BOUND}, 1]"
            )


@dataclass(frozen=True)
class MoisRecord:
    image_id: str
    mois: float
    ci95: float
    n_opinions: int


@dataclass(frozen=True)
class MetricReport:
    srcc: float
    plcc: float
    rmse: float
    mae: float


@dataclass(frozen=True)
class LeverageReport:
    delta_s: float
    delta_q: float
    gamma: float


@dataclass(frozen=True)
class AgreementReport:
    group_size: int
    n_pairs: int
    srcc_mean: float
    srcc_sd: float
    rmsd_mean: float
    rmsd_sd: float


def geometric_mean(values: Sequence[float]) -> float:
    """exp(mean(log v)) - the aggregation matching a ratio-scaled slider."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("geometric mean of an empty list")
    if np.any(arr <= 0.0):
        raise ValueError("geometric mean requires positive values")
    return float(np.exp(np.mean(np.log(arr))))


def bootstrap_ci(
    values: Sequence[float],
    n_resamples: int = 100,
    resample_size: int = 20,
    seed: int = 0,
) -> float:
    """Half-width of the 95% percentile-bootstrap interval of the geometric mean.

    Resampling contract, pinned so independent implementations can agree:
    all indices are drawn in a single call as
    ``default_rng(seed).integers(0, n, size=(n_resamples, resample_size))``
    and resample i uses row i. The 2.5th/97.5th percentiles use linear
    interpolation between closest ranks.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("bootstrap over an empty opinion list")
    if n_resamples < 1 or resample_size < 1:
        raise ValueError("n_resamples and resample_size must be >= 1")
    if np.any(arr <= 0.0):
        raise ValueError("bootstrap requires positive values")
    rng = np.random.default_rng(seed)
    index = rng.integers(0, arr.size, size=(n_resamples, resample_size))
    means = np.exp(np.mean(np.log(arr[index]), axis=1))
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float((hi - lo) / 2.0)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties receiving the average of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _paired(
    x: Sequence[float], y: Sequence[float], min_len: int
) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ValueError(f"need at least {min_len} points, got {a.size}")
    return a, b


def plcc(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation; None when either input is constant (undefined)."""
    a, b = _paired(x, y, min_len=2)
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.sqrt((a @ a) * (b @ b)))
    if denom == 0.0:
        return None
    return float((a @ b) / denom)


def srcc(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman rank correlation with average ranks for ties; None when a
    vector is constant (undefined, by decision - never silently 0)."""
    a, b = _paired(x, y, min_len=2)
    return plcc(average_ranks(a), average_ranks(b))


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _paired(x, y, min_len=1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _paired(x, y, min_len=1)
    return float(np.mean(np.abs(a - b)))


def leverage(delta_s: float, delta_q: float) -> LeverageReport:
    """Sensitivity magnification: gamma = |delta_s| / |delta_q|.

    Computed strictly as written; callers using ratio-based scale bookkeeping
    (e.g. counting a halving as 0.25 rather than 0.5) must convert first.
    """
    if delta_q == 0.0:
        raise ValueError("zero quality change: leverage undefined")
    ds, dq = abs(delta_s), abs(delta_q)
    return LeverageReport(ds, dq, ds / dq)


Concavity = Literal["consistent", "violated"]


def check_concavity(points: Sequence[tuple[float, float]]) -> Concavity:
    """Classify a quality-versus-scale sequence against the concave-down-or-
    monotonic assumption: 'violated' iff some interior point is a strict
    local minimum."""
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    scales = [s for s, _ in points]
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing")
    quality = [q for _, q in points]
    for i in range(1, len(quality) - 1):
        if quality[i] < quality[i - 1] and quality[i] < quality[i + 1]:
            return "violated"
    return "consistent"


def concavity_violation_probability(
    ratings_by_scale: Sequence[tuple[float, Sequence[float]]],
    n_resamples: int = 100,
    seed: int = 0,
) -> float:
    """Probability that the assumption is violated, via resampling each
    scale's rating pool with replacement and re-checking the mean curve.

    Per resample, pools are resampled in input order, each with one
    ``rng.integers(0, len(pool), size=len(pool))`` draw.
    """
    if not ratings_by_scale:
        raise ValueError("no rating pools given")
    pools = [(s, np.asarray(r, dtype=np.float64)) for s, r in ratings_by_scale]
    for s, pool in pools:
        if pool.size == 0:
            raise ValueError(f"empty rating pool at scale {s}")
    rng = np.random.default_rng(seed)
    violated = 0
    for _ in range(n_resamples):
        curve = []
        for s, pool in pools:
            idx = rng.integers(0, pool.size, size=pool.size)
            curve.append((s, float(pool[idx].mean())))
        if check_concavity(curve) == "violated":
            violated += 1
    return violated / n_resamples


def sensitivity_table(
    pairs: Sequence[tuple[float, float, float]], mos_cutoff: float = 0.85
) -> list[LeverageReport]:
    """Leverage per scale-change bucket.

    Each pair is (mos at the higher resolution, mos at the lower resolution,
    scale change). Pairs whose higher-resolution MOS is at or above the
    cutoff are dropped; the remaining quality changes are averaged per scale
    change. Buckets whose mean quality change is exactly zero are omitted.
    """
    buckets: dict[float, list[float]] = {}
    for mos_hi, mos_lo, delta_s in pairs:
        if mos_hi >= mos_cutoff:
            continue
        buckets.setdefault(delta_s, []).append(mos_lo - mos_hi)
    reports = []
    for delta_s in sorted(buckets):
        mean_dq = float(np.mean(buckets[delta_s]))
        if mean_dq == 0.0:
            continue
        reports.append(leverage(delta_s, mean_dq))
    return reports


OpinionTriple = tuple[str, str, float]


def _as_triples(opinions: Iterable) -> list[OpinionTriple]:
    triples = []
    for op in opinions:
        if isinstance(op, Opinion):
            triples.append((op.participant_id, op.image_id, op.scale_value))
        else:
            pid, image_id, value = op
            triples.append((str(pid), str(image_id), float(value)))
    return triples


def intergroup_agreement(
    opinions: Iterable,
    group_size: int,
    n_pairs: int = 200,
    seed: int = 0,
    pooled: bool = False,
) -> AgreementReport:
    """Mean and sd of SRCC and RMSD between the aggregated labels of sampled
    pairs of disjoint participant groups.

    Within a pair, the two groups are drawn without replacement; duplicate
    pairs may occur across the n_pairs draws. With ``pooled=True`` participant
    identity is ignored and each group instead receives 2 * group_size
    opinions drawn per image (for single-opinion datasets); the two groups'
    opinions stay disjoint.
    """
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    triples = _as_triples(opinions)
    if not triples:
        raise ValueError("no opinions given")
    rng = np.random.default_rng(seed)
    srccs: list[float] = []
    rmsds: list[float] = []

    if pooled:
        by_image: dict[str, list[float]] = {}
        for _, image_id, value in triples:
            by_image.setdefault(image_id, []).append(value)
        per_group = 2 * group_size
        short = [i for i, vals in by_image.items() if len(vals) < 2 * per_group]
        if short:
            raise ValueError(
                f"need {2 * per_group} opinions per image for pooled groups; "
                f"short on: {sorted(short)[:5]}"
            )
        images = sorted(by_image)
        for _ in range(n_pairs):
            vec_a, vec_b = [], []
            for image_id in images:
                pool = by_image[image_id]
                perm = rng.permutation(len(pool))
                vec_a.append(geometric_mean([pool[i] for i in perm[:per_group]]))
                vec_b.append(
                    geometric_mean([pool[i] for i in perm[per_group : 2 * per_group]])
                )
            _collect_pair(vec_a, vec_b, srccs, rmsds)
    else:
        by_participant: dict[str, dict[str, list[float]]] = {}
        for pid, image_id, value in triples:
            by_participant.setdefault(pid, {}).setdefault(image_id, []).append(value)
        participants = sorted(by_participant)
        if len(participants) < 2 * group_size:
            raise ValueError(
                f"need at least {2 * group_size} participants, got {len(participants)}"
            )
        for _ in range(n_pairs):
            perm = rng.permutation(len(participants))
            group_a = [participants[i] for i in perm[:group_size]]
            group_b = [participants[i] for i in perm[group_size : 2 * group_size]]
            images = sorted(
                set.intersection(
                    *(set(by_participant[p]) for p in group_a + group_b)
                )
            )
            if len(images) < 2:
                continue
            vec_a = [_group_mois(by_participant, group_a, i) for i in images]
            vec_b = [_group_mois(by_participant, group_b, i) for i in images]
            _collect_pair(vec_a, vec_b, srccs, rmsds)

    if not srccs:
        raise ValueError("no group pair produced a defined SRCC")
    return AgreementReport(
        group_size=group_size,
        n_pairs=len(srccs),
        srcc_mean=float(np.mean(srccs)),
        srcc_sd=float(np.std(srccs, ddof=1)) if len(srccs) > 1 else 0.0,
        rmsd_mean=float(np.mean(rmsds)),
        rmsd_sd=float(np.std(rmsds, ddof=1)) if len(rmsds) > 1 else 0.0,
    )


def _group_mois(
    by_participant: Mapping[str, Mapping[str, list[float]]],
    group: Sequence[str],
    image_id: str,
) -> float:
    values: list[float] = []
    for pid in group:
        values.extend(by_participant[pid][image_id])
    return geometric_mean(values)


def _collect_pair(
    vec_a: Sequence[float],
    vec_b: Sequence[float],
    srccs: list[float],
    rmsds: list[float],
) -> None:
    s = srcc(vec_a, vec_b)
    if s is None:
        return
    srccs.append(s)
    rmsds.append(rmse(vec_a, vec_b))


def aggregate_bootstrap_seed(seed: int, image_id: str) -> int:
    """Per-image bootstrap seed so aggregation order cannot change CIs."""
    return derive_seed(seed, "bootstrap", image_id)


# ---------------------------------------------------------------------------
# Table import/export


def write_opinions(opinions: Iterable[Opinion], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for op in opinions:
            handle.write(json.dumps(asdict(op), separators=(",", ":")) + "\n")


def read_opinions(path: str | Path) -> list[Opinion]:
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                out.append(Opinion(**json.loads(line)))
    return out


def write_mois_csv(records: Iterable[MoisRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", "mois", "ci95", "n_opinions"])
        for rec in records:
            writer.writerow([rec.image_id, repr(rec.mois), repr(rec.ci95), rec.n_opinions])


def read_mois_csv(path: str | Path) -> list[MoisRecord]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            out.append(
                MoisRecord(
                    image_id=row["image_id"],
                    mois=float(row["mois"]),
                    ci95=float(row["ci95"]),
                    n_opinions=int(row["n_opinions"]),
                )
            )
    return out


def write_agreement_csv(
    reports: Iterable[AgreementReport], path: str | Path, seed: int
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["group_size", "n_pairs", "seed", "srcc_mean", "srcc_sd", "rmsd_mean", "rmsd_sd"]
        )
        for rep in reports:
            writer.writerow(
                [
                    rep.group_size,
                    rep.n_pairs,
                    seed,
                    repr(rep.srcc_mean),
                    repr(rep.srcc_sd),
                    repr(rep.rmsd_mean),
                    repr(rep.rmsd_sd),
                ]
            )


def write_sensitivity_csv(reports: Iterable[LeverageReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["delta_s", "delta_q", "gamma"])
        for rep in reports:
            writer.writerow([repr(rep.delta_s), repr(rep.delta_q), repr(rep.gamma)])
