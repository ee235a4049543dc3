"""Transcript data model, ingestion, and gold-score aggregation.

Transcripts arrive as JSON Lines with one utterance per line plus optional
per-transcript metadata lines. Student-teacher exchanges are the adjacent
(student, teacher) turn pairs; expert judgments on exchanges are mapped to
numeric values per dataset variant, z-scored within each rater, and averaged
across raters into a single gold score per exchange.

Loaded corpora and gold-label sets are immutable after construction and safe
for concurrent reads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .ioutil import atomic_write


class Speaker(str, Enum):
    TEACHER = "teacher"
    STUDENT = "student"
    OTHER = "other"


class Label(str, Enum):
    NOT_APPLICABLE = "not_applicable"
    FUNNELING = "funneling"
    FOCUSING = "focusing"


class Variant(str, Enum):
    UNFILTERED = "unfiltered"
    FILTERED = "filtered"


# Judgment value per variant. UNFILTERED keeps every exchange on a 0/1/2
# scale; FILTERED drops not-applicable judgments and uses a 0/1 scale.
_LABEL_VALUES: dict[Variant, dict[Label, float | None]] = {
    Variant.UNFILTERED: {
        Label.NOT_APPLICABLE: 0.0,
        Label.FUNNELING: 1.0,
        Label.FOCUSING: 2.0,
    },
    Variant.FILTERED: {
        Label.NOT_APPLICABLE: None,
        Label.FUNNELING: 0.0,
        Label.FOCUSING: 1.0,
    },
}


@dataclass(frozen=True)
class Utterance:
    transcript_id: str
    turn_index: int
    speaker_role: Speaker
    text: str

    def __post_init__(self) -> None:
        if self.turn_index < 0:
            raise ValueError(f"negative turn_index {self.turn_index}")
        if not self.text and self.speaker_role is not Speaker.OTHER:
            raise ValueError(
                f"empty text for {self.speaker_role.value} turn "
                f"{self.transcript_id}:{self.turn_index}"
            )


@dataclass(frozen=True)
class Exchange:
    """A student utterance and the teacher utterance that follows it."""

    exchange_id: str
    transcript_id: str
    student_utt: Utterance
    teacher_utt: Utterance
    context: tuple[Utterance, ...] = ()
    lesson_topic: str | None = None

    def __post_init__(self) -> None:
        if self.student_utt.speaker_role is not Speaker.STUDENT:
            raise ValueError(f"{self.exchange_id}: student_utt has wrong role")
        if self.teacher_utt.speaker_role is not Speaker.TEACHER:
            raise ValueError(f"{self.exchange_id}: teacher_utt has wrong role")
        if self.teacher_utt.turn_index <= self.student_utt.turn_index:
            raise ValueError(f"{self.exchange_id}: teacher turn must follow student turn")
        if len(self.context) > 2:
            raise ValueError(f"{self.exchange_id}: context longer than 2 turns")


@dataclass(frozen=True)
class RaterJudgment:
    rater_id: str
    exchange_id: str
    label: Label


@dataclass(frozen=True)
class GoldLabel:
    exchange_id: str
    variant: Variant
    score: float
    n_raters: int

    def __post_init__(self) -> None:
        if self.n_raters < 1:
            raise ValueError(f"{self.exchange_id}: n_raters must be >= 1")
        if not math.isfinite(self.score):
            raise ValueError(f"{self.exchange_id}: non-finite gold score")


@dataclass(frozen=True)
class TranscriptMeta:
    transcript_id: str
    teacher_id: str
    n_exchanges: int
    mqi5: int | None = None
    participation: int | None = None
    explanations: int | None = None
    value_added: float | None = None

    def __post_init__(self) -> None:
        if self.n_exchanges < 0:
            raise ValueError(f"{self.transcript_id}: negative n_exchanges")
        _check_ordinal(self.transcript_id, "mqi5", self.mqi5, 1, 5)
        _check_ordinal(self.transcript_id, "participation", self.participation, 1, 4)
        _check_ordinal(self.transcript_id, "explanations", self.explanations, 1, 4)


def _check_ordinal(tid: str, name: str, value: int | None, lo: int, hi: int) -> None:
    if value is not None and not lo <= value <= hi:
        raise ValueError(f"{tid}: {name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class Corpus:
    """Utterances grouped by transcript (sorted by turn index) plus metadata."""

    utterances: Mapping[str, tuple[Utterance, ...]]
    meta: Mapping[str, TranscriptMeta]
    lesson_topics: Mapping[str, str] = field(default_factory=dict)

    @property
    def transcript_ids(self) -> list[str]:
        return sorted(self.utterances)


def count_exchanges(turns: Sequence[Utterance]) -> int:
    """Number of adjacent (student, teacher) turn pairs."""
    return sum(
        1
        for prev, cur in zip(turns, turns[1:])
        if prev.speaker_role is Speaker.STUDENT and cur.speaker_role is Speaker.TEACHER
    )


def load_transcripts(path: str | Path) -> Corpus:
    """Load a transcript JSONL file into an immutable corpus.

    Utterance lines carry transcript_id/turn_index/speaker_role/text; metadata
    lines carry transcript_id/teacher_id plus optional outcome fields. Errors
    name the offending line. Transcripts without a metadata line default
    teacher_id to the transcript_id.
    """
    path = Path(path)
    turns: dict[str, dict[int, Utterance]] = {}
    meta_raw: dict[str, dict] = {}
    topics: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            if "turn_index" in record:
                _ingest_utterance(path, lineno, record, turns)
            elif "teacher_id" in record:
                _ingest_meta(path, lineno, record, meta_raw, topics)
            else:
                raise InputError(
                    f"{path}:{lineno}: line is neither an utterance "
                    "(turn_index) nor metadata (teacher_id)"
                )

    utterances = {
        tid: tuple(by_turn[i] for i in sorted(by_turn)) for tid, by_turn in turns.items()
    }
    meta: dict[str, TranscriptMeta] = {}
    for tid in sorted(set(utterances) | set(meta_raw)):
        raw = meta_raw.get(tid, {})
        try:
            meta[tid] = TranscriptMeta(
                transcript_id=tid,
                teacher_id=raw.get("teacher_id", tid),
                n_exchanges=count_exchanges(utterances.get(tid, ())),
                mqi5=raw.get("mqi5"),
                participation=raw.get("participation"),
                explanations=raw.get("explanations"),
                value_added=raw.get("value_added"),
            )
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from exc
    return Corpus(utterances=utterances, meta=meta, lesson_topics=topics)


def _ingest_utterance(
    path: Path, lineno: int, record: dict, turns: dict[str, dict[int, Utterance]]
) -> None:
    try:
        tid = str(record["transcript_id"])
        turn_index = int(record["turn_index"])
        role = Speaker(record["speaker_role"])
        text = str(record["text"])
    except KeyError as exc:
        raise InputError(f"{path}:{lineno}: missing field {exc.args[0]}") from exc
    except ValueError as exc:
        raise InputError(
            f"{path}:{lineno}: unknown speaker_role {record.get('speaker_role')!r}"
        ) from exc
    by_turn = turns.setdefault(tid, {})
    if turn_index in by_turn:
        raise InputError(f"{path}:{lineno}: duplicate turn ({tid}, {turn_index})")
    try:
        by_turn[turn_index] = Utterance(tid, turn_index, role, text)
    except ValueError as exc:
        raise InputError(f"{path}:{lineno}: {exc}") from exc


def _ingest_meta(
    path: Path, lineno: int, record: dict, meta_raw: dict[str, dict], topics: dict[str, str]
) -> None:
    tid = str(record.get("transcript_id", ""))
    if not tid:
        raise InputError(f"{path}:{lineno}: metadata line missing transcript_id")
    if tid in meta_raw:
        raise InputError(f"{path}:{lineno}: duplicate metadata for transcript {tid}")
    parsed = {"teacher_id": str(record["teacher_id"])}
    for name in ("mqi5", "participation", "explanations"):
        if record.get(name) is not None:
            try:
                parsed[name] = int(record[name])
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: non-integer {name}") from exc
    if record.get("value_added") is not None:
        try:
            parsed["value_added"] = float(record["value_added"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: non-numeric value_added") from exc
    if record.get("lesson_topic") is not None:
        topics[tid] = str(record["lesson_topic"])
    meta_raw[tid] = parsed


def exchange_id_for(transcript_id: str, teacher_turn_index: int) -> str:
    """Deterministic content-derived exchange identifier."""
    return f"{transcript_id}:{teacher_turn_index}"


def extract_exchanges(corpus: Corpus) -> list[Exchange]:
    """One exchange per adjacent student-teacher turn pair, with up to two
    turns of context before the student utterance.

    With consecutive student turns the one directly before the teacher turn
    is the student side; transcripts with no such adjacency yield nothing.
    """
    exchanges: list[Exchange] = []
    for tid in corpus.transcript_ids:
        turns = corpus.utterances[tid]
        topic = corpus.lesson_topics.get(tid)
        for i in range(1, len(turns)):
            if (
                turns[i].speaker_role is Speaker.TEACHER
                and turns[i - 1].speaker_role is Speaker.STUDENT
            ):
                exchanges.append(
                    Exchange(
                        exchange_id=exchange_id_for(tid, turns[i].turn_index),
                        transcript_id=tid,
                        student_utt=turns[i - 1],
                        teacher_utt=turns[i],
                        context=tuple(turns[max(0, i - 3) : i - 1]),
                        lesson_topic=topic,
                    )
                )
    return exchanges


def extract_reply_pairs(corpus: Corpus) -> list[tuple[Utterance, Utterance]]:
    """(teacher turn, directly following student turn) pairs.

    These are the observations the reply-diversity measure is fitted on: the
    student turn is the reply elicited by the teacher turn.
    """
    pairs: list[tuple[Utterance, Utterance]] = []
    for tid in corpus.transcript_ids:
        turns = corpus.utterances[tid]
        for i in range(1, len(turns)):
            if (
                turns[i].speaker_role is Speaker.STUDENT
                and turns[i - 1].speaker_role is Speaker.TEACHER
            ):
                pairs.append((turns[i - 1], turns[i]))
    return pairs


def map_label(label: Label | str, variant: Variant | str) -> float | None:
    """Numeric judgment value under a variant; None means missing."""
    return _LABEL_VALUES[Variant(variant)][Label(label)]


def zscore_values(values: Mapping[str, float]) -> dict[str, float]:
    """Z-score a map of values with the sample (n-1) standard deviation.

    Fewer than two values, or zero variance, yields all-zero z-scores.
    """
    if not values:
        return {}
    # Accumulate in sorted key order so the result is bit-identical no matter
    # how the input was ordered.
    vals = [values[key] for key in sorted(values)]
    n = len(vals)
    mean = sum(vals) / n
    if n < 2:
        return {key: 0.0 for key in values}
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    if var == 0.0:
        return {key: 0.0 for key in values}
    std = math.sqrt(var)
    return {key: (v - mean) / std for key, v in values.items()}


def zscore_rater(
    judgments: Iterable[RaterJudgment], variant: Variant | str
) -> dict[str, float]:
    """Z-scores of one rater's judgments under a variant, keyed by exchange.

    Judgments mapping to missing are excluded; a rater with no non-missing
    judgments yields an empty map.
    """
    mapped: dict[str, float] = {}
    rater_ids: set[str] = set()
    seen: set[str] = set()
    for judgment in judgments:
        rater_ids.add(judgment.rater_id)
        if len(rater_ids) > 1:
            raise ValueError("zscore_rater expects judgments from a single rater")
        # Duplicates must be caught even when the label maps to missing.
        if judgment.exchange_id in seen:
            raise ValueError(
                f"duplicate judgment ({judgment.rater_id}, {judgment.exchange_id})"
            )
        seen.add(judgment.exchange_id)
        value = map_label(judgment.label, variant)
        if value is not None:
            mapped[judgment.exchange_id] = value
    return zscore_values(mapped)


def rater_zscores(
    judgments: Iterable[RaterJudgment], variant: Variant | str
) -> dict[str, dict[str, float]]:
    """Per-rater z-score maps for all raters, keyed rater -> exchange -> z."""
    by_rater: dict[str, dict[str, float | None]] = {}
    for judgment in judgments:
        per = by_rater.setdefault(judgment.rater_id, {})
        if judgment.exchange_id in per:
            raise ValueError(
                f"duplicate judgment ({judgment.rater_id}, {judgment.exchange_id})"
            )
        per[judgment.exchange_id] = map_label(judgment.label, variant)
    return {
        rater: zscore_values({eid: v for eid, v in per.items() if v is not None})
        for rater, per in sorted(by_rater.items())
    }


def aggregate_gold(
    judgments: Iterable[RaterJudgment], variant: Variant | str
) -> list[GoldLabel]:
    """Average per-rater z-scores into one gold score per exchange.

    Exchanges with no non-missing judgment under the variant are excluded.
    The result is sorted by exchange_id and invariant to input order.
    """
    variant = Variant(variant)
    zmaps = rater_zscores(judgments, variant)
    per_exchange: dict[str, list[float]] = {}
    for rater in sorted(zmaps):
        for eid, z in zmaps[rater].items():
            per_exchange.setdefault(eid, []).append(z)
    return [
        GoldLabel(
            exchange_id=eid,
            variant=variant,
            score=sum(zs) / len(zs),
            n_raters=len(zs),
        )
        for eid, zs in sorted(per_exchange.items())
    ]


def load_judgments(path: str | Path) -> list[RaterJudgment]:
    """Load the rater_id,exchange_id,label CSV, validating labels and
    (rater, exchange) uniqueness."""
    path = Path(path)
    judgments: list[RaterJudgment] = []
    seen: set[tuple[str, str]] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["rater_id", "exchange_id", "label"]:
            raise InputError(f"{path}: expected header rater_id,exchange_id,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            rater_id, exchange_id, label_raw = row
            try:
                label = Label(label_raw)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: unknown label {label_raw!r}") from exc
            key = (rater_id, exchange_id)
            if key in seen:
                raise InputError(f"{path}:{lineno}: duplicate judgment {key}")
            seen.add(key)
            judgments.append(RaterJudgment(rater_id, exchange_id, label))
    return judgments


def write_gold(gold: Sequence[GoldLabel], path: str | Path) -> None:
    """Write gold labels as exchange_id,variant,score,n_raters CSV."""
    lines = ["exchange_id,variant,score,n_raters"]
    for g in gold:
        lines.append(f"{g.exchange_id},{g.variant.value},{g.score!r},{g.n_raters}")
    atomic_write(path, "\n".join(lines) + "\n")


def load_gold(path: str | Path, variant: Variant | str | None = None) -> list[GoldLabel]:
    """Read a gold CSV back, optionally filtering to one variant."""
    path = Path(path)
    wanted = Variant(variant) if variant is not None else None
    gold: list[GoldLabel] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["exchange_id", "variant", "score", "n_raters"]:
            raise InputError(f"{path}: expected header exchange_id,variant,score,n_raters")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                label = GoldLabel(row[0], Variant(row[1]), float(row[2]), int(row[3]))
            except (IndexError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if wanted is None or label.variant is wanted:
                gold.append(label)
    return gold


def write_exchanges(exchanges: Sequence[Exchange], path: str | Path) -> None:
    """Dump exchanges as JSONL for downstream consumers (one per line)."""
    lines = []
    for ex in exchanges:
        lines.append(
            json.dumps(
                {
                    "exchange_id": ex.exchange_id,
                    "transcript_id": ex.transcript_id,
                    "student_text": ex.student_utt.text,
                    "teacher_text": ex.teacher_utt.text,
                    "context_texts": [u.text for u in ex.context],
                    "lesson_topic": ex.lesson_topic,
                },
                sort_keys=True,
                ensure_ascii=False,
            )
        )
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
