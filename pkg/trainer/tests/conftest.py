import json

import pytest


@pytest.fixture
def write_exchange_file(tmp_path):
    def write(exchanges, name="exchanges.jsonl"):
        path = tmp_path / name
        lines = []
        for ex in exchanges:
            lines.append(
                json.dumps(
                    {
                        "exchange_id": ex.exchange_id,
                        "transcript_id": ex.transcript_id,
                        "student_text": ex.student_text,
                        "teacher_text": ex.teacher_text,
                        "context_texts": list(ex.context_texts),
                        "lesson_topic": ex.lesson_topic,
                    }
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def write_gold_file(tmp_path):
    def write(scores, variant="unfiltered", name="gold.csv"):
        path = tmp_path / name
        lines = ["exchange_id,variant,score,n_raters"]
        for eid in sorted(scores):
            lines.append(f"{eid},{variant},{scores[eid]!r},3")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def run_cli(capsys):
    from qptrainer.cli import main

    def run(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run
