"""Utterance preprocessing for the reply-diversity pipeline.

Teacher turns pass through noun/number delexicalization, a tail cut that keeps
the question-bearing end of the turn, punctuation and case cleanup, whitespace
tokenization, and optional bigram merging. Student replies use the same steps
minus the tail cut. All operations are pure functions of their inputs, so the
pipeline is deterministic for a fixed tagger and phrase model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol, Sequence

NOUN_TOKEN = "[NOUN]"
NUMBER_TOKEN = "[NUMBER]"

# Tail cut: keep the last TAIL_SENTENCES sentences or the last TAIL_TOKENS
# whitespace tokens, whichever holds more tokens.
TAIL_SENTENCES = 2
TAIL_TOKENS = 20

# Sentence boundary: terminator char directly followed by whitespace or end of
# text. A '.' inside "3.5" is followed by a digit and does not split.
_SENT_BOUNDARY = re.compile(r"(?<=[.!?])(?=\s|$)")

# Numeric literals: integers, decimals, comma groups, fractions, ordinals.
_NUMERIC = re.compile(r"\d+(?:[.,/]\d+)*(?:st|nd|rd|th)?", re.IGNORECASE)

_PLACEHOLDER = re.compile(r"\[(?:NOUN|NUMBER)\]")
# clean() keeps lowercase letters, digits, underscores, and whitespace;
# brackets survive only inside the protected placeholder tokens.
_STRIP = re.compile(r"[^a-z0-9_\s]+")

_UNITS = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen"
).split()
_TENS = "twenty thirty forty fifty sixty seventy eighty ninety".split()
_SCALES = "hundred thousand million billion".split()
_FRACTION_WORDS = (
    "half halves third thirds quarter quarters fourth fourths fifth fifths "
    "sixth sixths seventh sevenths eighth eighths ninth ninths tenth tenths "
    "eleventh elevenths twelfth twelfths"
).split()

DEFAULT_NUMBER_WORDS = frozenset(_UNITS + _TENS + _SCALES + _FRACTION_WORDS)

# Words that follow a determiner without being nouns; keeps the heuristic rule
# from tagging "the other", "a few", "the same", and similar.
_DETERMINER_STOP = frozenset(
    "few little lot bit same other more most less least very really quite "
    "good great big small new old whole only main next last first second "
    "entire rest".split()
)

Rule = Callable[[Sequence[str], int], bool]


class TokenMerger(Protocol):
    """Anything that can merge accepted adjacent bigrams into single tokens."""

    def merge(self, tokens: Sequence[str]) -> list[str]: ...


def follows_determiner(cores: Sequence[str], i: int) -> bool:
    """Heuristic noun rule: token directly follows a/an/the."""
    if i == 0 or cores[i] in _DETERMINER_STOP:
        return False
    return cores[i - 1] in ("a", "an", "the")


@dataclass(frozen=True)
class Tagger:
    """Deterministic noun/number classifier used by :func:`delexicalize`.

    Classification is lexicon plus ordered heuristic rules; the same lexicons
    and rules always produce the same tags. ``rules`` receive the lowercased
    token cores of the whole utterance and the index under consideration.
    """

    noun_lexicon: frozenset[str]
    number_words: frozenset[str] = DEFAULT_NUMBER_WORDS
    rules: tuple[Rule, ...] = ()

    def is_number(self, core: str) -> bool:
        return bool(_NUMERIC.fullmatch(core)) or core in self.number_words

    def is_noun(self, cores: Sequence[str], i: int) -> bool:
        core = cores[i]
        if not core:
            return False
        if core in self.noun_lexicon:
            return True
        if core.endswith("'s") and core[:-2] in self.noun_lexicon:
            return True
        return any(rule(cores, i) for rule in self.rules)


def load_wordlist(path: str | Path) -> frozenset[str]:
    """Read a one-entry-per-line word list; '#' starts a comment."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            entries.add(entry)
    return frozenset(entries)


@lru_cache(maxsize=1)
def _shipped_nouns() -> frozenset[str]:
    text = resources.files("qpatterns.data").joinpath("nouns.txt").read_text("utf-8")
    entries = set()
    for line in text.splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            entries.add(entry)
    return frozenset(entries)


def default_tagger(noun_lexicon_path: str | Path | None = None) -> Tagger:
    """Tagger with the shipped noun list (or one loaded from a file) plus the
    determiner rule."""
    if noun_lexicon_path is None:
        nouns = _shipped_nouns()
    else:
        nouns = load_wordlist(noun_lexicon_path)
    return Tagger(noun_lexicon=nouns, rules=(follows_determiner,))


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' followed by whitespace or end of text.

    Terminators stay with their sentence; empty pieces are dropped.
    """
    return [part.strip() for part in _SENT_BOUNDARY.split(text) if part.strip()]


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization."""
    return text.split()


def _split_affixes(token: str) -> tuple[str, str, str]:
    """Split a token into (leading punctuation, core, trailing punctuation).

    Apostrophes count as core characters so contractions stay whole.
    """
    i, j = 0, len(token)
    while i < j and not (token[i].isalnum() or token[i] == "'"):
        i += 1
    while j > i and not (token[j - 1].isalnum() or token[j - 1] == "'"):
        j -= 1
    return token[:i], token[i:j], token[j:]


def delexicalize(tokens: Sequence[str], tagger: Tagger) -> list[str]:
    """Replace number tokens with [NUMBER] and noun tokens with [NOUN].

    Surrounding punctuation is preserved so sentence boundaries survive for
    the later tail cut; token count is always preserved. Tokens that already
    contain a placeholder pass through untouched, which makes the operation
    idempotent.
    """
    affixes = [_split_affixes(tok) for tok in tokens]
    cores = [core.lower() for _, core, _ in affixes]
    out = []
    for i, token in enumerate(tokens):
        if NOUN_TOKEN in token or NUMBER_TOKEN in token:
            out.append(token)
            continue
        pre, core, post = affixes[i]
        if not core:
            out.append(token)
        elif tagger.is_number(cores[i]):
            out.append(pre + NUMBER_TOKEN + post)
        elif tagger.is_noun(cores, i):
            out.append(pre + NOUN_TOKEN + post)
        else:
            out.append(token)
    return out


def truncate_tail(text: str) -> str:
    """Keep the tail of an utterance: last two sentences or last twenty
    tokens, whichever contains more tokens (ties go to the sentence cut).

    Text that already fits both limits is returned unchanged.
    """
    tokens = text.split()
    sentences = split_sentences(text)
    if len(tokens) <= TAIL_TOKENS and len(sentences) <= TAIL_SENTENCES:
        return text
    sentence_cut = " ".join(sentences[-TAIL_SENTENCES:])
    token_cut = " ".join(tokens[-TAIL_TOKENS:])
    if len(sentence_cut.split()) >= len(token_cut.split()):
        return sentence_cut
    return token_cut


def clean(text: str) -> str:
    """Lowercase and strip punctuation, protecting placeholder tokens and
    underscores; whitespace runs collapse to single spaces."""
    parts = []
    pos = 0
    for match in _PLACEHOLDER.finditer(text):
        parts.append(_STRIP.sub("", text[pos : match.start()].lower()))
        parts.append(match.group(0))
        pos = match.end()
    parts.append(_STRIP.sub("", text[pos:].lower()))
    return " ".join("".join(parts).split())


def preprocess_teacher(
    text: str,
    tagger: Tagger,
    phrase_model: TokenMerger | None = None,
) -> list[str]:
    """Full teacher-side pipeline: delexicalize, tail cut, clean, tokenize,
    then merge frequent bigrams when a phrase model is supplied."""
    delexed = " ".join(delexicalize(tokenize(text), tagger))
    tokens = tokenize(clean(truncate_tail(delexed)))
    if phrase_model is not None:
        tokens = phrase_model.merge(tokens)
    return tokens


def preprocess_reply(text: str, tagger: Tagger) -> list[str]:
    """Reply-side pipeline: delexicalize, clean, tokenize. No tail cut."""
    delexed = " ".join(delexicalize(tokenize(text), tagger))
    return tokenize(clean(delexed))
