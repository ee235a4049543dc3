import json

import pytest

from qpatterns.cli import main


@pytest.fixture
def run_cli(capsys):
    """Invoke the CLI in-process and capture (exit code, stdout, stderr)."""

    def run(*argv):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


@pytest.fixture
def write_config(tmp_path):
    """Dump a config dict to JSON and return its path."""

    def write(config, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config), encoding="utf-8")
        return path

    return write


@pytest.fixture
def write_transcripts(tmp_path):
    """Write transcript JSONL from per-transcript (role, text) turn lists.

    metas is a list of raw metadata dicts appended verbatim.
    """

    def write(turns_by_tid, metas=(), name="transcripts.jsonl"):
        lines = []
        for tid, turns in turns_by_tid.items():
            for i, (role, text) in enumerate(turns):
                lines.append(
                    json.dumps(
                        {
                            "transcript_id": tid,
                            "turn_index": i,
                            "speaker_role": role,
                            "text": text,
                        }
                    )
                )
        for meta in metas:
            lines.append(json.dumps(meta))
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def write_judgments(tmp_path):
    """Write a judgments CSV from (rater_id, exchange_id, label) rows."""

    def write(rows, name="judgments.csv"):
        lines = ["rater_id,exchange_id,label"]
        lines += [f"{r},{e},{l}" for r, e, l in rows]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
