"""Command-line client: thin adapters over the library operations.

Every randomized subcommand takes --seed and records it in its output so
runs can be reproduced. Operational failures exit 1 with a single
machine-parsable ``error: ...`` line on stderr.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click

from . import corpus, evaluation, iis, stats, study
from .resample import ResampleSpec


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, KeyError, OSError, RuntimeError, study.StudyError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main() -> None:
    """Intrinsic-scale study platform."""


@main.command()
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-width", default=corpus.DEFAULT_MIN_WIDTH, show_default=True)
@click.option("--source-tag", default="")
@_fail_cleanly
def ingest(images_dir: str, out_path: str, min_width: int, source_tag: str) -> None:
    """Scan an image directory into a corpus manifest."""
    entries = corpus.build_manifest(images_dir, min_width=min_width, source_tag=source_tag)
    corpus.write_manifest(entries, out_path)
    click.echo(f"ingest: wrote {len(entries)} entries to {out_path}")


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--min-width", "corpus_min_width", default=None, type=int)
@click.option("--static-dir", type=click.Path(), default=None)
@_fail_cleanly
def serve(
    config_file: str | None,
    corpus_path: str | None,
    store_path: str | None,
    host: str | None,
    port: int | None,
    corpus_min_width: int | None,
    static_dir: str | None,
) -> None:
    """Run the annotation service.

    Precedence: --config file, then IISA_CORPUS / IISA_STORE / IISA_PORT
    environment overrides, then explicit flags.
    """
    import uvicorn

    from .service import ServiceSettings, create_app
    from .store import StoreCorruptError

    settings = ServiceSettings.load(
        config_file,
        corpus_path=corpus_path,
        store_path=store_path,
        host=host,
        port=port,
        corpus_min_width=corpus_min_width,
        static_dir=static_dir,
    )
    try:
        app = create_app(settings)
    except StoreCorruptError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    uvicorn.run(app, host=settings.host, port=settings.port)


@main.command()
@click.option(
    "--study", "--store", "store_path", required=True, type=click.Path(exists=True),
    help="Path to the study's event-log store.",
)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--unlabeled-out", type=click.Path(), default=None)
@_fail_cleanly
def aggregate(store_path: str, out_path: str, seed: int, unlabeled_out: str | None) -> None:
    """Aggregate a study store into a MOIS table."""
    engine = study.StudyEngine.open(store_path)
    result = engine.aggregate(seed)
    stats.write_mois_csv(result.records, out_path)
    if unlabeled_out:
        Path(unlabeled_out).write_text("\n".join(result.unlabeled) + "\n")
    if result.unlabeled and not unlabeled_out:
        click.echo(
            f"warning: {len(result.unlabeled)} images have no gate-passing "
            f"opinions: {list(result.unlabeled)[:5]}...",
            err=True,
        )
    click.echo(
        f"aggregate: study={engine.study_id} images={len(result.records)} "
        f"unlabeled={len(result.unlabeled)} seed={seed} -> {out_path}"
    )


@main.command()
@click.option(
    "--study", "--store", "store_path", required=True, type=click.Path(exists=True),
    help="Path to the study's event-log store.",
)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_fail_cleanly
def reliability(store_path: str, out_path: str | None) -> None:
    """Export the reliability-gate audit of a study store."""
    engine = study.StudyEngine.open(store_path)
    gates = engine.gates
    rows = [
        [g.participant_id, g.batch_id, g.generation,
         "" if g.srcc is None else repr(g.srcc), g.passed, g.evaluated_at]
        for g in gates
    ]
    header = ["participant_id", "batch_id", "generation", "srcc", "passed", "evaluated_at"]
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        click.echo(f"reliability: {len(rows)} gate records -> {out_path}")
    else:
        click.echo(",".join(header))
        for row in rows:
            click.echo(",".join(str(v) for v in row))


@main.command()
@click.option("--opinions", "opinions_path", required=True, type=click.Path(exists=True))
@click.option("--group-sizes", default="1,2,3,4,5", show_default=True)
@click.option("--n-pairs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--pooled", is_flag=True, help="Ignore participant identity.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def agreement(
    opinions_path: str,
    group_sizes: str,
    n_pairs: int,
    seed: int,
    pooled: bool,
    out_path: str,
) -> None:
    """Inter-group agreement (SRCC/RMSD) over sampled participant group pairs."""
    opinions = stats.read_opinions(opinions_path)
    reports = [
        stats.intergroup_agreement(
            opinions, int(g), n_pairs=n_pairs, seed=seed, pooled=pooled
        )
        for g in group_sizes.split(",")
    ]
    stats.write_agreement_csv(reports, out_path, seed)
    click.echo(f"agreement: {len(reports)} group sizes, seed={seed} -> {out_path}")


@main.command()
@click.option("--manifest", "gt_path", required=True, type=click.Path(exists=True),
              help="Ground-truth JSONL with {image_id, iis} rows.")
@click.option("--out-manifest", default="weak_labels.jsonl", show_default=True,
              type=click.Path())
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--images-out", type=click.Path(), default=None)
@click.option("--n-wl", default=2, show_default=True)
@click.option("--delta", default=0.65, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--kernel", default="lanczos", show_default=True)
@click.option("--window", default=3, show_default=True)
@click.option("--crop", default=1536, show_default=True)
@click.option("--min-width", default=corpus.DEFAULT_MIN_WIDTH, show_default=True)
@_fail_cleanly
def weaklabel(
    gt_path: str,
    out_manifest: str,
    corpus_path: str | None,
    images_out: str | None,
    n_wl: int,
    delta: float,
    seed: int,
    kernel: str,
    window: int,
    crop: int,
    min_width: int,
) -> None:
    """Generate weak labels from ground-truth pairs (images too, with a corpus)."""
    cfg = iis.WeakLabelConfig(
        n_wl=n_wl,
        delta=delta,
        rng_seed=seed,
        interpolation=ResampleSpec(kernel=kernel, lanczos_window=window),  # type: ignore[arg-type]
    )
    pairs = []
    with open(gt_path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                pairs.append((record["image_id"], float(record["iis"])))
    if images_out:
        if not corpus_path:
            raise ValueError("--images-out requires --corpus")
        entries = corpus.entries_by_id(
            corpus.load_manifest(corpus_path, min_width=min_width)
        )
        manifest_path, rows = evaluation.export_wiisa_manifest(
            pairs, cfg, images_out, corpus_entries=entries, crop=crop
        )
        Path(out_manifest).parent.mkdir(parents=True, exist_ok=True)
        if Path(out_manifest) != manifest_path:
            Path(out_manifest).write_bytes(manifest_path.read_bytes())
    else:
        rows = iis.batch_weak_label_rows(pairs, cfg)
        iis.write_weak_label_manifest(rows, out_manifest, cfg)
    click.echo(
        f"weaklabel: {len(rows)} rows from {len(pairs)} pairs "
        f"(n_wl={n_wl} delta={delta} seed={seed}) -> {out_manifest}"
    )


@main.command()
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="MOIS CSV; its image ids are split.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--repeats", default=10, show_default=True)
@_fail_cleanly
def splits(gt_path: str, out_path: str, seed: int, repeats: int) -> None:
    """Write train/val/test splits (70/10/20, repeated) for a MOIS table."""
    records = stats.read_mois_csv(gt_path)
    spec = evaluation.SplitSpec(seed=seed, n_repeats=repeats)
    split_list = evaluation.make_splits([r.image_id for r in records], spec)
    evaluation.write_splits_json(split_list, spec, out_path)
    click.echo(f"splits: {repeats} repeats over {len(records)} ids, seed={seed} -> {out_path}")


@main.command(name="eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--splits", "splits_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_fail_cleanly
def eval_cmd(
    pred_path: str, gt_path: str, splits_path: str | None, out_path: str | None
) -> None:
    """Score predictions against ground truth (per split + median, or overall)."""
    predictions = evaluation.read_predictions_csv(pred_path)
    records = stats.read_mois_csv(gt_path)
    ground_truth = evaluation.mois_as_mapping(records)
    if splits_path:
        split_list = evaluation.read_splits_json(splits_path)
        report = evaluation.evaluate(predictions, ground_truth, split_list)
    else:
        ids = sorted(ground_truth)
        single = evaluation.metric_report(predictions, ground_truth, ids)
        report = evaluation.EvaluationReport(per_split=(single,), median=single)
    if out_path:
        evaluation.write_metric_report_csv(report, out_path)
    med = report.median
    click.echo(
        f"eval: srcc={med.srcc:.4f} plcc={med.plcc:.4f} "
        f"rmse={med.rmse:.4f} mae={med.mae:.4f}"
        + (f" -> {out_path}" if out_path else "")
    )


@main.command(name="predict-multiscale")
@click.option("--scores", "scores_path", type=click.Path(exists=True), default=None)
@click.option("--command", "command_template", default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--ids", "ids_path", type=click.Path(exists=True), default=None,
              help="Image ids, one per line; defaults to all ids in the source.")
@click.option("--n-s", default=100, show_default=True)
@click.option("--kernel", default="lanczos", show_default=True)
@click.option("--min-width", default=corpus.DEFAULT_MIN_WIDTH, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def predict_multiscale_cmd(
    scores_path: str | None,
    command_template: str | None,
    corpus_path: str | None,
    ids_path: str | None,
    n_s: int,
    kernel: str,
    min_width: int,
    out_path: str,
) -> None:
    """Zero-shot IIS estimation from per-scale quality scores."""
    if bool(scores_path) == bool(command_template):
        raise ValueError("exactly one of --scores or --command is required")
    if scores_path:
        oracle = evaluation.oracle_from_scores_file(scores_path)
        if ids_path is None:
            with open(scores_path, newline="", encoding="utf-8") as handle:
                image_ids = sorted({row["image_id"] for row in csv.DictReader(handle)})
        else:
            image_ids = _read_ids(ids_path)
    else:
        if not corpus_path:
            raise ValueError("--command requires --corpus")
        entries = corpus.entries_by_id(
            corpus.load_manifest(corpus_path, min_width=min_width)
        )
        oracle = evaluation.oracle_from_command(
            command_template, entries, ResampleSpec(kernel=kernel)  # type: ignore[arg-type]
        )
        image_ids = _read_ids(ids_path) if ids_path else sorted(entries)
    predictions = {
        image_id: evaluation.predict_multiscale(image_id, oracle, n_s=n_s)
        for image_id in image_ids
    }
    evaluation.write_predictions_csv(predictions, out_path)
    click.echo(f"predict-multiscale: {len(predictions)} images, n_s={n_s} -> {out_path}")


def _read_ids(path: str) -> list[str]:
    return [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="CSV with mos_hi, mos_lo, delta_s columns.")
@click.option("--cutoff", default=0.85, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def sensitivity(pairs_path: str, cutoff: float, out_path: str) -> None:
    """Leverage (scale change / quality change) per scale-change bucket."""
    pairs = []
    with open(pairs_path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            pairs.append(
                (float(row["mos_hi"]), float(row["mos_lo"]), float(row["delta_s"]))
            )
    reports = stats.sensitivity_table(pairs, mos_cutoff=cutoff)
    stats.write_sensitivity_csv(reports, out_path)
    click.echo(f"sensitivity: {len(reports)} buckets from {len(pairs)} pairs -> {out_path}")


@main.command()
@click.option("--ratings", "ratings_path", required=True, type=click.Path(exists=True),
              help="CSV with image_id (optional), scale, rating columns.")
@click.option("--n-resamples", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def concavity(ratings_path: str, n_resamples: int, seed: int, out_path: str) -> None:
    """Check quality-versus-scale curves against the concavity assumption."""
    pools: dict[str, dict[float, list[float]]] = {}
    with open(ratings_path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            image_id = row.get("image_id") or "curve"
            pools.setdefault(image_id, {}).setdefault(float(row["scale"]), []).append(
                float(row["rating"])
            )
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", "classification", "violation_probability", "seed"])
        for image_id in sorted(pools):
            by_scale = sorted(pools[image_id].items())
            curve = [(s, float(sum(r) / len(r))) for s, r in by_scale]
            classification = stats.check_concavity(curve)
            probability = stats.concavity_violation_probability(
                by_scale, n_resamples=n_resamples, seed=seed
            )
            writer.writerow([image_id, classification, repr(probability), seed])
    click.echo(f"concavity: {len(pools)} curves, seed={seed} -> {out_path}")


if __name__ == "__main__":
    main()
