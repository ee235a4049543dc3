"""Seeded synthetic classroom corpus with known question-style ground truth.

Every teacher turn follows one of two fixed frames around a style marker
token. Funneling markers always draw the same one-token reply; focusing
markers draw replies from several orthogonal one-token templates. Reply
diversity therefore separates the styles by construction, which gives the
pipeline a corpus with a binary ground truth to validate against. Rater
judgments are the true style plus configurable not-applicable and flip
noise, and transcript outcomes are noisy functions of each transcript's
focusing fraction.

All randomness comes from one seeded generator consumed in a fixed order,
so a spec generates byte-identical files every time.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Label, RaterJudgment, Speaker, exchange_id_for
from .eval_stats import ScoreSeries, write_predictions
from .ioutil import atomic_write

FUNNEL_FRAME = "Okay so just tell us {marker} right now quickly."
FOCUS_FRAME = "How did you think about {marker} there?"
OPENING_LINE = "hello"

TRUTH_SERIES = "truth"


@dataclass(frozen=True)
class SynthSpec:
    n_exchanges: int = 2000
    exchanges_per_transcript: int = 50
    n_teachers: int = 8
    n_funnel_markers: int = 10
    n_focus_markers: int = 10
    focus_templates: int = 8
    n_raters: int = 3
    na_rate: float = 0.05
    label_noise: float = 0.1
    outcome_noise: float = 0.25
    explanations_missing_rate: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        for name in (
            "n_exchanges",
            "exchanges_per_transcript",
            "n_teachers",
            "n_funnel_markers",
            "n_focus_markers",
            "n_raters",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.focus_templates < 2:
            raise ValueError("focus_templates must be >= 2")
        for name in ("na_rate", "label_noise", "explanations_missing_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]")
        if self.outcome_noise < 0.0:
            raise ValueError("outcome_noise must be >= 0")


@dataclass(frozen=True)
class SynthCorpus:
    """Generated records ready for serialization."""

    utterance_lines: tuple[dict, ...]
    meta_lines: tuple[dict, ...]
    judgments: tuple[RaterJudgment, ...]
    truth: ScoreSeries


def generate(spec: SynthSpec) -> SynthCorpus:
    rng = random.Random(spec.seed)
    propensity = [rng.uniform(0.2, 0.8) for _ in range(spec.n_teachers)]

    per_transcript = _transcript_sizes(spec)
    utterances: list[dict] = []
    metas: list[dict] = []
    judgments: list[RaterJudgment] = []
    truth: dict[str, float] = {}
    styles_by_exchange: list[tuple[str, bool]] = []
    teacher_fracs: dict[int, list[float]] = {}
    funnel_next = 0
    focus_next = 0

    for t, size in enumerate(per_transcript):
        tid = f"t{t:04d}"
        teacher = t % spec.n_teachers
        p = min(0.95, max(0.05, propensity[teacher] + rng.uniform(-0.1, 0.1)))
        turn = 0
        utterances.append(_utt(tid, turn, Speaker.STUDENT, OPENING_LINE))
        turn += 1
        n_focus = 0
        for _ in range(size):
            focusing = rng.random() < p
            if focusing:
                marker = f"ponder{focus_next % spec.n_focus_markers}"
                focus_next += 1
                text = FOCUS_FRAME.format(marker=marker)
                template = rng.randrange(spec.focus_templates)
                reply = f"ripple{marker[6:]}x{template}"
                n_focus += 1
            else:
                marker = f"drill{funnel_next % spec.n_funnel_markers}"
                funnel_next += 1
                text = FUNNEL_FRAME.format(marker=marker)
                reply = f"echo{marker[5:]}"
            utterances.append(_utt(tid, turn, Speaker.TEACHER, text))
            eid = exchange_id_for(tid, turn)
            truth[eid] = 1.0 if focusing else 0.0
            styles_by_exchange.append((eid, focusing))
            turn += 1
            utterances.append(_utt(tid, turn, Speaker.STUDENT, reply))
            turn += 1
        frac = n_focus / size
        teacher_fracs.setdefault(teacher, []).append(frac)
        meta = {
            "transcript_id": tid,
            "teacher_id": f"teach{teacher}",
            "mqi5": _ordinal(frac, 5, rng.gauss(0.0, spec.outcome_noise)),
            "participation": _ordinal(frac, 4, rng.gauss(0.0, spec.outcome_noise)),
        }
        missing = rng.random() < spec.explanations_missing_rate
        explanations = _ordinal(frac, 4, rng.gauss(0.0, spec.outcome_noise))
        if not missing:
            meta["explanations"] = explanations
        metas.append(meta)

    value_added: dict[int, float] = {}
    for teacher in range(spec.n_teachers):
        fracs = teacher_fracs.get(teacher, [])
        noise = rng.gauss(0.0, spec.outcome_noise)
        if fracs:
            value_added[teacher] = 2.0 * (sum(fracs) / len(fracs) - 0.5) + noise
    for meta in metas:
        teacher = int(meta["teacher_id"][5:])
        meta["value_added"] = round(value_added[teacher], 6)

    for eid, focusing in styles_by_exchange:
        true_label = Label.FOCUSING if focusing else Label.FUNNELING
        flipped = Label.FUNNELING if focusing else Label.FOCUSING
        for r in range(spec.n_raters):
            u_na = rng.random()
            u_flip = rng.random()
            if u_na < spec.na_rate:
                label = Label.NOT_APPLICABLE
            elif u_flip < spec.label_noise:
                label = flipped
            else:
                label = true_label
            judgments.append(RaterJudgment(f"rater{r}", eid, label))

    return SynthCorpus(
        utterance_lines=tuple(utterances),
        meta_lines=tuple(metas),
        judgments=tuple(judgments),
        truth=ScoreSeries(name=TRUTH_SERIES, values=truth),
    )


def write_corpus(corpus: SynthCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write transcripts.jsonl, judgments.csv, and truth.jsonl into out_dir."""
    out_dir = Path(out_dir)
    paths = {
        "transcripts": out_dir / "transcripts.jsonl",
        "judgments": out_dir / "judgments.csv",
        "truth": out_dir / "truth.jsonl",
    }
    lines = [json.dumps(rec, sort_keys=True) for rec in corpus.utterance_lines]
    lines += [json.dumps(rec, sort_keys=True) for rec in corpus.meta_lines]
    atomic_write(paths["transcripts"], "\n".join(lines) + "\n")
    rows = ["rater_id,exchange_id,label"]
    rows += [f"{j.rater_id},{j.exchange_id},{j.label.value}" for j in corpus.judgments]
    atomic_write(paths["judgments"], "\n".join(rows) + "\n")
    write_predictions(corpus.truth, paths["truth"])
    return paths


def _transcript_sizes(spec: SynthSpec) -> list[int]:
    sizes = []
    remaining = spec.n_exchanges
    while remaining > 0:
        size = min(spec.exchanges_per_transcript, remaining)
        sizes.append(size)
        remaining -= size
    return sizes


def _utt(tid: str, turn: int, role: Speaker, text: str) -> dict:
    return {
        "transcript_id": tid,
        "turn_index": turn,
        "speaker_role": role.value,
        "text": text,
    }


def _ordinal(frac: float, top: int, noise: float) -> int:
    value = 1 + round((top - 1) * (frac + noise))
    return min(top, max(1, value))
