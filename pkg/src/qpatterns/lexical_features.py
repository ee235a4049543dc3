"""Count-based features of raw teacher utterances.

Length is the whitespace token count of the raw text. Lexicon matching is
case-insensitive and word-boundary-respecting: the text is reduced to its
sequence of words (edge punctuation stripped, apostrophes kept in-word, the
typographic apostrophe folded to '), and an entry matches contiguous runs in
that sequence, counted non-overlapping left to right. Each question word is
its own feature; the cognitive verbs aggregate into a single count.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Exchange
from .errors import InputError
from .ioutil import atomic_write, csv_field

COGNITIVE_VERBS = (
    "understand",
    "think",
    "know",
    "believe",
    "figure out",
    "find out",
    "deduce",
    "remember",
    "imagine",
    "realize",
    "discover",
)
QUESTION_UNIGRAMS = ("who", "what", "when", "where", "how", "why", "which")
QUESTION_BIGRAMS = ("how many", "how do", "what is", "what's", "what else")

_SECTIONS = ("cognitive_verbs", "question_unigrams", "question_bigrams")
_WORD_EDGE = re.compile(r"^[^a-z0-9']+|[^a-z0-9']+$")


@dataclass(frozen=True)
class Lexicon:
    """Entry tuples in feature-column order. Immutable."""

    cognitive_verbs: tuple[str, ...] = COGNITIVE_VERBS
    question_unigrams: tuple[str, ...] = QUESTION_UNIGRAMS
    question_bigrams: tuple[str, ...] = QUESTION_BIGRAMS

    def __post_init__(self) -> None:
        for section in _SECTIONS:
            for entry in getattr(self, section):
                if not entry or entry != entry.lower() or entry != entry.strip():
                    raise ValueError(f"bad lexicon entry {entry!r} in {section}")
                if any(not word for word in entry.split(" ")):
                    raise ValueError(f"empty word in lexicon entry {entry!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        """Count column names, matching the feature CSV order."""
        names = [feature_name(e) for e in self.question_unigrams]
        names += [feature_name(e) for e in self.question_bigrams]
        names.append("cognitive_verbs")
        return tuple(names)


@dataclass(frozen=True)
class FeatureVector:
    exchange_id: str
    length: int
    counts: Mapping[str, int]

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("negative length")
        for name, count in self.counts.items():
            if count < 0:
                raise ValueError(f"negative count for {name}")


def feature_name(entry: str) -> str:
    """Column name for a lexicon entry: spaces to underscores, "what's" to
    whats."""
    return entry.replace(" ", "_").replace("'", "")


def length(text: str) -> int:
    """Whitespace token count of the raw, unprocessed text."""
    return len(text.split())


def words(text: str) -> list[str]:
    """The text's word sequence used for matching.

    Lowercased whitespace tokens with edge punctuation stripped; tokens that
    are all punctuation drop out, so words separated only by punctuation
    count as adjacent.
    """
    out = []
    for token in text.lower().replace("’", "'").split():
        core = _WORD_EDGE.sub("", token)
        if core:
            out.append(core)
    return out


def count_entry(text: str, entry: str) -> int:
    """Non-overlapping occurrences of the entry's word sequence."""
    return _count_in(words(text), entry.split(" "))


def _count_in(sequence: list[str], entry_words: list[str]) -> int:
    k = len(entry_words)
    count = 0
    i = 0
    while i + k <= len(sequence):
        if sequence[i : i + k] == entry_words:
            count += 1
            i += k
        else:
            i += 1
    return count


def featurize(exchange: Exchange, lexicon: Lexicon) -> FeatureVector:
    """Length plus all lexicon counts for the exchange's teacher utterance."""
    text = exchange.teacher_utt.text
    sequence = words(text)
    counts: dict[str, int] = {}
    for entry in lexicon.question_unigrams + lexicon.question_bigrams:
        counts[feature_name(entry)] = _count_in(sequence, entry.split(" "))
    counts["cognitive_verbs"] = sum(
        _count_in(sequence, entry.split(" ")) for entry in lexicon.cognitive_verbs
    )
    return FeatureVector(
        exchange_id=exchange.exchange_id, length=length(text), counts=counts
    )


def load_lexicon(path: str | Path) -> Lexicon:
    """Parse a sectioned lexicon file ([cognitive_verbs] etc., one entry per
    line, '#' comments). Entries are lowercased on load."""
    path = Path(path)
    sections: dict[str, list[str]] = {name: [] for name in _SECTIONS}
    current: str | None = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in sections:
                raise InputError(f"{path}:{lineno}: unknown section [{current}]")
            continue
        if current is None:
            raise InputError(f"{path}:{lineno}: entry before any section header")
        sections[current].append(line.lower())
    try:
        return Lexicon(
            cognitive_verbs=tuple(sections["cognitive_verbs"]),
            question_unigrams=tuple(sections["question_unigrams"]),
            question_bigrams=tuple(sections["question_bigrams"]),
        )
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    """The shipped lexicon; equals the module-level entry constants."""
    with resources.as_file(
        resources.files("qpatterns.data").joinpath("lexicon.txt")
    ) as path:
        return load_lexicon(path)


def csv_header(lexicon: Lexicon) -> str:
    return "exchange_id,length," + ",".join(lexicon.feature_names)


def write_features(
    features: Iterable[FeatureVector], lexicon: Lexicon, path: str | Path
) -> None:
    """Write the feature CSV in the fixed column order."""
    lines = [csv_header(lexicon)]
    for fv in features:
        cells = [csv_field(fv.exchange_id), str(fv.length)]
        cells += [str(fv.counts[name]) for name in lexicon.feature_names]
        lines.append(",".join(cells))
    atomic_write(path, "\n".join(lines) + "\n")
