"""Readers for the two bridge files and the input text templates.

The exchange file is JSON Lines, one object per exchange with the exchange
id, the two turn texts, and up to two preceding context texts. The gold file
is a CSV of exchange_id,variant,score,n_raters rows. Both come from the
analytics pipeline; this module re-reads them independently so the trainer
has no code dependency on it.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError

VARIANTS = ("unfiltered", "filtered")

_EXCHANGE_FIELDS = {"exchange_id", "student_text", "teacher_text", "context_texts"}


class InputTemplate(enum.Enum):
    """What text the model sees for one exchange."""

    TEACHER_ONLY = "teacher_only"
    STUDENT_SEP_TEACHER = "student_sep_teacher"
    CONTEXT_STUDENT_SEP_TEACHER = "context_student_sep_teacher"


@dataclass(frozen=True)
class Exchange:
    exchange_id: str
    student_text: str
    teacher_text: str
    context_texts: tuple[str, ...] = ()
    transcript_id: str = ""
    lesson_topic: str | None = None


def load_exchanges(path: str | Path) -> list[Exchange]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"{path}: exchange file not found") from exc
    exchanges: list[Exchange] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict) or not _EXCHANGE_FIELDS <= set(record):
            raise InputError(
                f"{path}:{lineno}: expected an exchange object with "
                f"{', '.join(sorted(_EXCHANGE_FIELDS))}"
            )
        eid = str(record["exchange_id"])
        if eid in seen:
            raise InputError(f"{path}:{lineno}: duplicate exchange_id {eid}")
        seen.add(eid)
        context = record["context_texts"]
        if not isinstance(context, list):
            raise InputError(f"{path}:{lineno}: context_texts must be a list")
        exchanges.append(
            Exchange(
                exchange_id=eid,
                student_text=str(record["student_text"]),
                teacher_text=str(record["teacher_text"]),
                context_texts=tuple(str(c) for c in context),
                transcript_id=str(record.get("transcript_id", "")),
                lesson_topic=record.get("lesson_topic"),
            )
        )
    if not exchanges:
        raise InputError(f"{path}: no exchanges")
    return exchanges


def load_gold(path: str | Path) -> tuple[str, dict[str, float]]:
    """Read a gold CSV; returns (variant, exchange_id -> score).

    The file must be single-variant; mixed rows are an input error.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: gold file not found")
    scores: dict[str, float] = {}
    variants: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["exchange_id", "variant", "score", "n_raters"]:
            raise InputError(
                f"{path}: expected header exchange_id,variant,score,n_raters"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 fields")
            eid, variant, raw_score, _ = row
            if variant not in VARIANTS:
                raise InputError(f"{path}:{lineno}: unknown variant {variant!r}")
            variants.add(variant)
            try:
                score = float(raw_score)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric score") from exc
            if eid in scores:
                raise InputError(f"{path}:{lineno}: duplicate exchange_id {eid}")
            scores[eid] = score
    if not scores:
        raise InputError(f"{path}: no gold rows")
    if len(variants) > 1:
        raise InputError(f"{path}: mixed variants {sorted(variants)}")
    return variants.pop(), scores


def render(exchange: Exchange, template: InputTemplate) -> list[str]:
    """Text segments the model consumes, in order, separator between them."""
    if template is InputTemplate.TEACHER_ONLY:
        return [exchange.teacher_text]
    if template is InputTemplate.STUDENT_SEP_TEACHER:
        return [exchange.student_text, exchange.teacher_text]
    return [
        *exchange.context_texts,
        exchange.student_text,
        exchange.teacher_text,
    ]


def tokenize(text: str) -> list[str]:
    return re.findall(r"[\w']+", text.lower())


@dataclass(frozen=True)
class LabeledExample:
    exchange_id: str
    segments: tuple[tuple[str, ...], ...]
    score: float = field(default=0.0)


def build_examples(
    exchanges: list[Exchange],
    scores: dict[str, float] | None,
    template: InputTemplate,
) -> list[LabeledExample]:
    """Tokenized examples in exchange-id order; with scores given, only
    exchanges that have a gold score are kept."""
    out = []
    for ex in sorted(exchanges, key=lambda e: e.exchange_id):
        if scores is not None and ex.exchange_id not in scores:
            continue
        segments = tuple(
            tuple(tokenize(segment)) for segment in render(ex, template)
        )
        score = scores[ex.exchange_id] if scores is not None else 0.0
        out.append(LabeledExample(ex.exchange_id, segments, score))
    return out
