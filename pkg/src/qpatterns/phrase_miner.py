"""Bigram collocation mining over preprocessed token sequences.

Adjacent word pairs that score above a threshold are merged into single
underscore-joined tokens. The score for a pair (a, b) is

    (count(a, b) - min_count) * vocab_size / (count(a) * count(b))

where vocab_size is the number of distinct unigrams, and a pair is accepted
iff its score is strictly greater than the threshold.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .ioutil import atomic_write, csv_field, parse_model_header

_FORMAT_TAG = "phrase-model/1"


@dataclass(frozen=True)
class PhraseModel:
    """Fitted collocation table plus scoring parameters. Immutable."""

    unigram_counts: Mapping[str, int]
    bigram_counts: Mapping[tuple[str, str], int]
    min_count: int
    threshold: float

    def __post_init__(self) -> None:
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        for a, b in self.bigram_counts:
            if a not in self.unigram_counts or b not in self.unigram_counts:
                raise ValueError(f"bigram ({a!r}, {b!r}) has uncounted component")

    @property
    def vocab_size(self) -> int:
        return len(self.unigram_counts)

    def score(self, a: str, b: str) -> float:
        """Collocation score of the adjacent pair (a, b); -inf if uncounted."""
        count_ab = self.bigram_counts.get((a, b), 0)
        if count_ab == 0:
            return float("-inf")
        count_a = self.unigram_counts[a]
        count_b = self.unigram_counts[b]
        return (count_ab - self.min_count) * self.vocab_size / (count_a * count_b)

    def accepts(self, a: str, b: str) -> bool:
        return self.score(a, b) > self.threshold

    def merge(self, tokens: Sequence[str]) -> list[str]:
        """Single greedy left-to-right pass joining accepted pairs with '_'.

        Merged tokens do not participate in further merges, so accepted
        overlapping pairs resolve to the leftmost one.
        """
        out: list[str] = []
        i = 0
        n = len(tokens)
        while i < n:
            if i + 1 < n and self.accepts(tokens[i], tokens[i + 1]):
                out.append(tokens[i] + "_" + tokens[i + 1])
                i += 2
            else:
                out.append(tokens[i])
                i += 1
        return out

    def save(self, path: str | Path) -> None:
        """Write the model as CSV with a header block; unigram rows have an
        empty token_b column so reloads reproduce identical accept decisions."""
        lines = [
            f"# {_FORMAT_TAG}",
            f"# vocab_size={self.vocab_size}",
            f"# min_count={self.min_count}",
            f"# threshold={self.threshold!r}",
            "token_a,token_b,count",
        ]
        for token, count in sorted(self.unigram_counts.items()):
            lines.append(f"{csv_field(token)},,{count}")
        for (a, b), count in sorted(self.bigram_counts.items()):
            lines.append(f"{csv_field(a)},{csv_field(b)},{count}")
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PhraseModel":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        header = parse_model_header(path, lines, _FORMAT_TAG, ("vocab_size", "min_count", "threshold"))
        body = [ln for ln in lines if not ln.startswith("#")]
        if not body or body[0] != "token_a,token_b,count":
            raise InputError(f"{path}: missing phrase-model column header")
        unigrams: dict[str, int] = {}
        bigrams: dict[tuple[str, str], int] = {}
        for row in csv.reader(body[1:]):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}: bad row {row!r}")
            a, b, count = row[0], row[1], int(row[2])
            if b:
                bigrams[(a, b)] = count
            else:
                unigrams[a] = count
        model = cls(
            unigram_counts=unigrams,
            bigram_counts=bigrams,
            min_count=int(header["min_count"]),
            threshold=float(header["threshold"]),
        )
        if model.vocab_size != int(header["vocab_size"]):
            raise InputError(
                f"{path}: vocab_size header {header['vocab_size']} != "
                f"{model.vocab_size} unigram rows"
            )
        return model


def fit(
    sequences: Iterable[Sequence[str]],
    min_count: int = 500,
    threshold: float = 1.0,
) -> PhraseModel:
    """Count unigrams and adjacent bigrams over the corpus.

    An empty corpus yields a model with vocab_size 0 that accepts nothing.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    unigrams: Counter[str] = Counter()
    bigrams: Counter[tuple[str, str]] = Counter()
    for seq in sequences:
        unigrams.update(seq)
        bigrams.update(zip(seq, seq[1:]))
    return PhraseModel(
        unigram_counts=dict(unigrams),
        bigram_counts=dict(bigrams),
        min_count=min_count,
        threshold=threshold,
    )


def merge(tokens: Sequence[str], model: PhraseModel) -> list[str]:
    """Functional alias for :meth:`PhraseModel.merge`."""
    return model.merge(tokens)
