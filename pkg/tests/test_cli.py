"""CLI subcommand tests via click's runner."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from iisa import corpus, stats
from iisa.cli import main
from iisa.resample import Image
from iisa.store import EventLog
from iisa.study import StudyConfig, StudyEngine, scale_to_position


@pytest.fixture()
def runner():
    return CliRunner()


def write_images(tmp_path, n=3, size=(40, 30)):
    rng = np.random.default_rng(9)
    directory = tmp_path / "images"
    directory.mkdir()
    for i in range(n):
        arr = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        corpus.save_png(Image.from_array(f"img{i:02d}", arr), directory / f"img{i:02d}.png")
    return directory


def build_store(tmp_path, n_images=4, participants=("p1", "p2")):
    """A small completed study on disk."""
    path = tmp_path / "store.jsonl"
    engine = StudyEngine(EventLog(path))
    engine.create_study(
        [f"img{i:02d}" for i in range(n_images)],
        config=StudyConfig(batch_size=n_images, min_repetition_gap_hours=0.0),
        seed=3,
    )
    values = {f"img{i:02d}": 0.1 + 0.15 * i for i in range(n_images)}
    for p in participants:
        token = engine.register_participant(p)
        for _rep in (1, 2):
            task = engine.next_task(token)
            for image_id in task["remaining_image_ids"]:
                engine.submit_opinion(
                    token,
                    task["batch_id"],
                    task["repetition"],
                    image_id,
                    scale_to_position(values[image_id]),
                )
    engine.close()
    return path


class TestIngest:
    def test_builds_manifest(self, runner, tmp_path):
        images = write_images(tmp_path)
        out = tmp_path / "manifest.jsonl"
        result = runner.invoke(
            main, ["ingest", "--images", str(images), "--out", str(out), "--min-width", "1"]
        )
        assert result.exit_code == 0, result.output
        entries = corpus.load_manifest(out, min_width=1)
        assert len(entries) == 3
        assert entries[0].width == 40

    def test_below_min_width_fails(self, runner, tmp_path):
        images = write_images(tmp_path)
        result = runner.invoke(
            main,
            ["ingest", "--images", str(images), "--out", str(tmp_path / "m.jsonl")],
        )
        assert result.exit_code == 1
        assert "error:" in result.output


class TestAggregateAndReliability:
    def test_aggregate_writes_mois_csv(self, runner, tmp_path):
        store = build_store(tmp_path)
        out = tmp_path / "mois.csv"
        result = runner.invoke(
            main, ["aggregate", "--store", str(store), "--out", str(out), "--seed", "0"]
        )
        assert result.exit_code == 0, result.output
        records = stats.read_mois_csv(out)
        assert len(records) == 4
        # Identical repetitions from every participant: zero-width intervals.
        assert all(rec.ci95 == 0.0 for rec in records)
        assert all(rec.n_opinions == 4 for rec in records)

    def test_reliability_audit(self, runner, tmp_path):
        store = build_store(tmp_path)
        out = tmp_path / "gates.csv"
        result = runner.invoke(
            main, ["reliability", "--store", str(store), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 2
        assert all(row["passed"] == "True" for row in rows)


class TestWeaklabel:
    def test_reruns_are_byte_identical(self, runner, tmp_path):
        gt = tmp_path / "gt.jsonl"
        with open(gt, "w") as handle:
            for i in range(6):
                handle.write(json.dumps({"image_id": f"img{i}", "iis": 0.2 + 0.1 * i}) + "\n")
        first, second = tmp_path / "wl1.jsonl", tmp_path / "wl2.jsonl"
        for out in (first, second):
            result = runner.invoke(
                main,
                [
                    "weaklabel", "--manifest", str(gt), "--out-manifest", str(out),
                    "--n-wl", "2", "--delta", "0.65", "--seed", "7",
                ],
            )
            assert result.exit_code == 0, result.output
        assert first.read_bytes() == second.read_bytes()
        assert len(first.read_text().splitlines()) == 12

    def test_writes_images_with_corpus(self, runner, tmp_path):
        images = write_images(tmp_path)
        manifest = tmp_path / "manifest.jsonl"
        runner.invoke(
            main,
            ["ingest", "--images", str(images), "--out", str(manifest), "--min-width", "1"],
        )
        gt = tmp_path / "gt.jsonl"
        with open(gt, "w") as handle:
            handle.write(json.dumps({"image_id": "img00", "iis": 0.4}) + "\n")
        out_dir = tmp_path / "wl"
        result = runner.invoke(
            main,
            [
                "weaklabel", "--manifest", str(gt),
                "--out-manifest", str(out_dir / "weak_labels.jsonl"),
                "--corpus", str(manifest), "--images-out", str(out_dir),
                "--seed", "1", "--crop", "16", "--min-width", "1",
            ],
        )
        assert result.exit_code == 0, result.output
        rows = [json.loads(line) for line in (out_dir / "weak_labels.jsonl").read_text().splitlines()]
        assert len(rows) == 2
        for row in rows:
            assert (out_dir / row["output_image_ref"]).exists()


class TestSplitsAndEval:
    def _write_mois(self, tmp_path, n=20):
        rng = np.random.default_rng(5)
        records = [
            stats.MoisRecord(f"img{i:03d}", float(rng.uniform(0.1, 0.9)), 0.01, 20)
            for i in range(n)
        ]
        path = tmp_path / "mois.csv"
        stats.write_mois_csv(records, path)
        return path, records

    def test_splits_then_eval_perfect(self, runner, tmp_path):
        mois_path, records = self._write_mois(tmp_path)
        splits_path = tmp_path / "splits.json"
        result = runner.invoke(
            main,
            ["splits", "--gt", str(mois_path), "--out", str(splits_path),
             "--seed", "2", "--repeats", "4"],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(splits_path.read_text())
        assert payload["seed"] == 2 and len(payload["splits"]) == 4

        pred_path = tmp_path / "pred.csv"
        with open(pred_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["image_id", "predicted_iis"])
            for rec in records:
                writer.writerow([rec.image_id, repr(rec.mois)])
        report_path = tmp_path / "report.csv"
        result = runner.invoke(
            main,
            ["eval", "--pred", str(pred_path), "--gt", str(mois_path),
             "--splits", str(splits_path), "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        assert "srcc=1.0000" in result.output and "rmse=0.0000" in result.output
        with open(report_path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert rows[-1]["split"] == "median"
        assert float(rows[-1]["srcc"]) == 1.0

    def test_eval_without_splits(self, runner, tmp_path):
        mois_path, records = self._write_mois(tmp_path, n=12)
        pred_path = tmp_path / "pred.csv"
        with open(pred_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["image_id", "predicted_iis"])
            for rec in records:
                writer.writerow([rec.image_id, repr(1.0 - rec.mois)])
        result = runner.invoke(main, ["eval", "--pred", str(pred_path), "--gt", str(mois_path)])
        assert result.exit_code == 0, result.output
        assert "srcc=-1.0000" in result.output


class TestAgreementCommand:
    def test_agreement_report(self, runner, tmp_path):
        rng = np.random.default_rng(12)
        opinions = []
        for p in range(6):
            for i in range(12):
                true = 0.1 + 0.06 * i
                for rep in (1, 2):
                    opinions.append(
                        stats.Opinion(
                            "s1", f"p{p}", f"img{i:02d}", "b001", rep,
                            float(np.clip(true * np.exp(rng.normal(0, 0.2)), 0.05, 1.0)),
                            50, 0,
                        )
                    )
        opinions_path = tmp_path / "opinions.jsonl"
        stats.write_opinions(opinions, opinions_path)
        out = tmp_path / "agreement.csv"
        result = runner.invoke(
            main,
            ["agreement", "--opinions", str(opinions_path), "--group-sizes", "1,2,3",
             "--n-pairs", "50", "--seed", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [row["group_size"] for row in rows] == ["1", "2", "3"]
        assert all(row["seed"] == "4" for row in rows)


class TestPredictMultiscale:
    def test_scores_file_mode(self, runner, tmp_path):
        from iisa.evaluation import scale_grid, write_scores_csv

        rows = []
        for image_id, peak in (("imgA", 0.3), ("imgB", 0.7)):
            for s in scale_grid(100):
                rows.append((image_id, s, max(0.0, 1.0 - (s - peak) ** 2)))
        scores_path = tmp_path / "scores.csv"
        write_scores_csv(rows, scores_path)
        out = tmp_path / "pred.csv"
        result = runner.invoke(
            main,
            ["predict-multiscale", "--scores", str(scores_path), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as handle:
            got = {row["image_id"]: float(row["predicted_iis"]) for row in csv.DictReader(handle)}
        assert got["imgA"] == pytest.approx(0.3, abs=0.01)
        assert got["imgB"] == pytest.approx(0.7, abs=0.01)


class TestSensitivityAndConcavity:
    def test_sensitivity_buckets(self, runner, tmp_path):
        pairs_path = tmp_path / "pairs.csv"
        with open(pairs_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["mos_hi", "mos_lo", "delta_s"])
            writer.writerows([[0.5, 0.53, 0.5], [0.6, 0.65, 0.5], [0.9, 0.95, 0.5]])
        out = tmp_path / "sens.csv"
        result = runner.invoke(
            main, ["sensitivity", "--pairs", str(pairs_path), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 1
        assert float(rows[0]["gamma"]) == pytest.approx(12.5, abs=1e-9)

    def test_concavity_report(self, runner, tmp_path):
        ratings_path = tmp_path / "ratings.csv"
        with open(ratings_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["image_id", "scale", "rating"])
            for s, r in ((0.25, 0.6), (0.5, 0.7), (1.0, 0.5)):
                for _ in range(3):
                    writer.writerow(["good", s, r])
            for s, r in ((0.25, 0.7), (0.5, 0.5), (1.0, 0.6)):
                for _ in range(3):
                    writer.writerow(["bad", s, r])
        out = tmp_path / "concavity.csv"
        result = runner.invoke(
            main, ["concavity", "--ratings", str(ratings_path), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as handle:
            rows = {row["image_id"]: row for row in csv.DictReader(handle)}
        assert rows["good"]["classification"] == "consistent"
        assert float(rows["good"]["violation_probability"]) == 0.0
        assert rows["bad"]["classification"] == "violated"
        assert float(rows["bad"]["violation_probability"]) == 1.0


class TestErrorContract:
    def test_unknown_subcommand_exits_2(self, runner):
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code == 2

    def test_operation_error_exits_1_with_parsable_line(self, runner, tmp_path):
        gt = tmp_path / "gt.jsonl"
        gt.write_text(json.dumps({"image_id": "ghost", "iis": 0.4}) + "\n")
        empty_corpus = tmp_path / "corpus.jsonl"
        empty_corpus.write_text("")
        result = runner.invoke(
            main,
            ["weaklabel", "--manifest", str(gt),
             "--out-manifest", str(tmp_path / "out.jsonl"),
             "--corpus", str(empty_corpus), "--images-out", str(tmp_path / "imgs")],
        )
        assert result.exit_code == 1
        assert "error:" in result.output
        assert "ghost" in result.output
