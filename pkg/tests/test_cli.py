import csv
import json
import shutil

import pytest

from qpatterns.cli import main as cli_main

PIPELINE = ("synth", "gold", "fit", "score", "evaluate")

OUTPUT_FILES = (
    "transcripts.jsonl",
    "judgments.csv",
    "truth.jsonl",
    "exchanges.jsonl",
    "summary.json",
    "gold_unfiltered.csv",
    "gold_filtered.csv",
    "phrase.csv",
    "tfidf.csv",
    "range.csv",
    "manifest.json",
    "scores.csv",
    "report.csv",
    "report.txt",
)


def make_config(base, n_exchanges=30, per_transcript=10, min_term_freq=2, seed=3, **synth):
    """Write a config whose synth output feeds the later commands in place."""
    out = base / "out"
    config = {
        "paths": {
            "transcripts": str(out / "transcripts.jsonl"),
            "judgments": str(out / "judgments.csv"),
            "predictions": [str(out / "truth.jsonl")],
            "out_dir": str(out),
        },
        "range": {"min_term_freq": min_term_freq},
        "synth": {
            "n_exchanges": n_exchanges,
            "exchanges_per_transcript": per_transcript,
            **synth,
        },
        "seed": seed,
    }
    path = base / "run.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path, out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full run on a 200-exchange synthetic corpus, shared read-only."""
    base = tmp_path_factory.mktemp("pipeline")
    config_path, out = make_config(
        base, n_exchanges=200, per_transcript=20, min_term_freq=5, n_teachers=4
    )
    for command in PIPELINE:
        assert cli_main([command, "--config", str(config_path)]) == 0
    return config_path, out


def read_report(out):
    with (out / "report.csv").open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestPipeline:
    def test_all_outputs_written(self, pipeline):
        _, out = pipeline
        for name in OUTPUT_FILES:
            assert (out / name).exists(), name

    def test_summary_counts(self, pipeline):
        _, out = pipeline
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert summary["n_exchanges"] == 200
        assert summary["n_judgments"] == 600
        unfiltered = summary["variants"]["unfiltered"]
        assert unfiltered["n_gold"] == 200
        assert isinstance(unfiltered["fleiss_kappa"], float)
        assert -1.0 <= unfiltered["irr"]["mean"] <= 1.0
        assert 0 < summary["variants"]["filtered"]["n_gold"] <= 200

    def test_scores_cover_every_exchange(self, pipeline):
        _, out = pipeline
        with (out / "scores.csv").open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 200
        eids = {
            json.loads(line)["exchange_id"]
            for line in (out / "exchanges.jsonl").read_text(encoding="utf-8").splitlines()
        }
        assert {row["exchange_id"] for row in rows} == eids
        for row in rows:
            assert row["covered"] in ("true", "false")
            float(row["forwards_range"])
            assert int(row["length"]) > 0

    def test_report_row_set(self, pipeline):
        _, out = pipeline
        rows = read_report(out)
        measures = {row["measure"] for row in rows}
        assert {"forwards_range", "length", "why", "truth"} <= measures
        targets = {row["target"] for row in rows if row["measure"] == "forwards_range"}
        assert targets == {"gold_unfiltered", "mqi5", "participation", "explanations", "value_added"}

    def test_truth_tracks_gold(self, pipeline):
        # Labels are noisy copies of the truth, so the two must correlate.
        _, out = pipeline
        (row,) = [
            r for r in read_report(out)
            if r["measure"] == "truth" and r["target"] == "gold_unfiltered"
        ]
        assert row["stat"] == "spearman"
        assert float(row["value"]) > 0.5
        assert int(row["n"]) == 200

    def test_report_command_prints_stored_table(self, pipeline, run_cli):
        config_path, out = pipeline
        code, stdout, _ = run_cli("report", "--config", str(config_path))
        assert code == 0
        assert stdout == (out / "report.txt").read_text(encoding="utf-8")

    def test_rerun_is_byte_identical(self, pipeline):
        config_path, out = pipeline
        before = {name: (out / name).read_bytes() for name in OUTPUT_FILES}
        for command in PIPELINE:
            assert cli_main([command, "--config", str(config_path)]) == 0
        for name in OUTPUT_FILES:
            assert (out / name).read_bytes() == before[name], name

    def test_variant_and_out_overrides(self, pipeline, run_cli, tmp_path):
        config_path, out = pipeline
        copy = tmp_path / "copy"
        shutil.copytree(out, copy)
        code, _, _ = run_cli(
            "evaluate", "--config", str(config_path),
            "--out", str(copy), "--variant", "filtered",
        )
        assert code == 0
        assert "gold_filtered" in (copy / "report.txt").read_text(encoding="utf-8")
        assert "gold_unfiltered" in (out / "report.txt").read_text(encoding="utf-8")

    def test_seed_override_changes_synth(self, pipeline, run_cli, tmp_path):
        config_path, out = pipeline
        code, _, _ = run_cli(
            "synth", "--config", str(config_path), "--seed", "99", "--out", str(tmp_path)
        )
        assert code == 0
        assert (tmp_path / "transcripts.jsonl").read_bytes() != (
            out / "transcripts.jsonl"
        ).read_bytes()


class TestEmptyJudgments:
    def test_gold_handles_no_usable_labels(self, tmp_path, run_cli):
        config_path, out = make_config(tmp_path)
        assert cli_main(["synth", "--config", str(config_path)]) == 0
        (out / "judgments.csv").write_text("rater_id,exchange_id,label\n", encoding="utf-8")
        code, stdout, _ = run_cli("gold", "--config", str(config_path))
        assert code == 0
        assert "unfiltered: 0 gold labels" in stdout
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert summary["variants"]["unfiltered"]["n_gold"] == 0
        assert summary["variants"]["unfiltered"]["fleiss_kappa"] is None
        assert summary["variants"]["unfiltered"]["irr"] is None


class TestInputErrors:
    def test_unknown_subcommand(self, run_cli):
        code, _, stderr = run_cli("frobnicate")
        assert code == 1
        assert stderr.startswith("error:")

    def test_no_subcommand(self, run_cli):
        code, _, stderr = run_cli()
        assert code == 1
        assert "error:" in stderr

    def test_missing_config_file(self, run_cli, tmp_path):
        code, _, stderr = run_cli("gold", "--config", str(tmp_path / "nope.json"))
        assert code == 1
        assert "config file not found" in stderr

    def test_unknown_config_key(self, run_cli, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"bogus": 1}', encoding="utf-8")
        code, _, stderr = run_cli("gold", "--config", str(path))
        assert code == 1
        assert "unknown config keys: bogus" in stderr

    def test_invalid_config_json(self, run_cli, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{", encoding="utf-8")
        code, _, stderr = run_cli("gold", "--config", str(path))
        assert code == 1
        assert "invalid JSON" in stderr

    def test_gold_requires_paths(self, run_cli):
        code, _, stderr = run_cli("gold")
        assert code == 1
        assert "paths.transcripts is required" in stderr

    def test_missing_transcripts_file(self, run_cli, tmp_path):
        config_path, _ = make_config(tmp_path)
        code, _, stderr = run_cli("gold", "--config", str(config_path))
        assert code == 1
        assert "does not exist" in stderr

    def test_score_before_fit(self, run_cli, tmp_path):
        config_path, _ = make_config(tmp_path)
        assert cli_main(["synth", "--config", str(config_path)]) == 0
        code, _, stderr = run_cli("score", "--config", str(config_path))
        assert code == 1
        assert "run fit first" in stderr

    def test_evaluate_before_gold(self, run_cli, tmp_path):
        config_path, _ = make_config(tmp_path)
        assert cli_main(["synth", "--config", str(config_path)]) == 0
        code, _, stderr = run_cli("evaluate", "--config", str(config_path))
        assert code == 1
        assert "run gold first" in stderr

    def test_score_refuses_changed_transcripts(self, run_cli, tmp_path):
        config_path, out = make_config(tmp_path)
        for command in ("synth", "gold", "fit"):
            assert cli_main([command, "--config", str(config_path)]) == 0
        transcripts = out / "transcripts.jsonl"
        transcripts.write_text(
            transcripts.read_text(encoding="utf-8")
            + '{"transcript_id": "t9999", "turn_index": 0, "speaker_role": "student", "text": "hi"}\n',
            encoding="utf-8",
        )
        code, _, stderr = run_cli("score", "--config", str(config_path))
        assert code == 1
        assert "digest mismatch" in stderr
        assert "refit" in stderr

    def test_score_refuses_moved_transcripts(self, run_cli, tmp_path):
        config_path, out = make_config(tmp_path)
        for command in ("synth", "gold", "fit"):
            assert cli_main([command, "--config", str(config_path)]) == 0
        moved = out / "moved.jsonl"
        shutil.copy(out / "transcripts.jsonl", moved)
        config = json.loads(config_path.read_text(encoding="utf-8"))
        config["paths"]["transcripts"] = str(moved)
        config_path.write_text(json.dumps(config), encoding="utf-8")
        code, _, stderr = run_cli("score", "--config", str(config_path))
        assert code == 1
        assert "models were fitted from" in stderr

    def test_bad_variant_flag(self, run_cli):
        code, _, stderr = run_cli("evaluate", "--variant", "bogus")
        assert code == 1
        assert "error:" in stderr

    def test_bad_synth_key(self, run_cli, tmp_path):
        config_path, _ = make_config(tmp_path, n_exchanges=10, per_transcript=5, walrus=1)
        code, _, stderr = run_cli("synth", "--config", str(config_path))
        assert code == 1
        assert "synth config" in stderr


class TestInternalErrors:
    def test_unexpected_exception_exits_2(self, run_cli, tmp_path, monkeypatch):
        config_path, _ = make_config(tmp_path)
        assert cli_main(["synth", "--config", str(config_path)]) == 0

        def boom(path):
            raise RuntimeError("boom")

        monkeypatch.setattr("qpatterns.cli.corpus_mod.load_transcripts", boom)
        code, _, stderr = run_cli("gold", "--config", str(config_path))
        assert code == 2
        assert stderr.startswith("internal error: RuntimeError: boom")
