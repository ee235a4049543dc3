"""Reply-diversity scoring for teacher questions.

Every student reply becomes an L2-normalized TF-IDF vector. For each term
that appears in enough teacher utterances, the replies those utterances drew
are averaged into a central point, and the term's range is the mean cosine
distance between the replies and that central point. A term whose replies all
look alike has range near 0; a term that draws scattered replies has a large
range. An utterance scores the mean range of its distinct in-model terms.

Fitted models are immutable and safe to score from concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .ioutil import atomic_write, csv_field, parse_model_header

DEFAULT_MIN_TERM_FREQ = 25

_TFIDF_TAG = "tfidf-model/1"
_RANGE_TAG = "range-model/1"

ReplyVector = dict[int, float]


@dataclass(frozen=True)
class TfIdfModel:
    """Vocabulary with smoothed inverse document frequencies.

    Columns are assigned in lexicographic term order, so two fits on the
    same replies produce identical vectors.
    """

    vocabulary: Mapping[str, int]
    idf: Mapping[str, float]
    doc_count: int

    def __post_init__(self) -> None:
        if self.doc_count < 1:
            raise ValueError("doc_count must be >= 1")
        if set(self.vocabulary) != set(self.idf):
            raise ValueError("vocabulary and idf cover different terms")
        for term, value in self.idf.items():
            if not value > 0.0:
                raise ValueError(f"non-positive idf for {term!r}")

    def save(self, path: str | Path) -> None:
        lines = [
            f"# {_TFIDF_TAG}",
            f"# doc_count={self.doc_count}",
            "term,idf",
        ]
        for term in sorted(self.vocabulary):
            lines.append(f"{csv_field(term)},{self.idf[term]!r}")
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TfIdfModel":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        header = parse_model_header(path, lines, _TFIDF_TAG, ("doc_count",))
        body = [ln for ln in lines if not ln.startswith("#")]
        if not body or body[0] != "term,idf":
            raise InputError(f"{path}: missing tfidf column header")
        idf: dict[str, float] = {}
        for row in csv.reader(body[1:]):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{path}: bad row {row!r}")
            idf[row[0]] = float(row[1])
        vocabulary = {term: col for col, term in enumerate(sorted(idf))}
        try:
            return cls(vocabulary=vocabulary, idf=idf, doc_count=int(header["doc_count"]))
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from exc


def fit_tfidf(reply_docs: Iterable[Sequence[str]]) -> TfIdfModel:
    """Fit vocabulary and idf over reply token sequences.

    Every document counts toward doc_count, empty ones included; idf uses
    the smoothed form ln((1 + D) / (1 + df)) + 1, which stays positive.
    """
    doc_count = 0
    df: dict[str, int] = {}
    for doc in reply_docs:
        doc_count += 1
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    if not df:
        raise InputError("all replies empty; cannot fit a TF-IDF model")
    vocabulary = {term: col for col, term in enumerate(sorted(df))}
    idf = {
        term: math.log((1 + doc_count) / (1 + df[term])) + 1.0 for term in vocabulary
    }
    return TfIdfModel(vocabulary=vocabulary, idf=idf, doc_count=doc_count)


def vectorize(tokens: Sequence[str], model: TfIdfModel) -> ReplyVector:
    """Sparse L2-normalized tf*idf vector; out-of-vocabulary terms ignored."""
    counts: dict[str, int] = {}
    for token in tokens:
        if token in model.vocabulary:
            counts[token] = counts.get(token, 0) + 1
    if not counts:
        return {}
    weights = {model.vocabulary[t]: c * model.idf[t] for t, c in counts.items()}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return {col: w / norm for col, w in sorted(weights.items())}


@dataclass(frozen=True)
class ForwardsRangeModel:
    """Per-term reply ranges plus the corpus-mean fallback. Immutable."""

    term_range: Mapping[str, float]
    term_freq: Mapping[str, int]
    min_term_freq: int
    fallback: float

    def __post_init__(self) -> None:
        if self.min_term_freq < 1:
            raise ValueError("min_term_freq must be >= 1")
        if not math.isfinite(self.fallback):
            raise ValueError("non-finite fallback")
        for term, value in self.term_range.items():
            if term not in self.term_freq or self.term_freq[term] < self.min_term_freq:
                raise ValueError(f"term {term!r} below min_term_freq")
            # Cosine distance: [0,1] for nonnegative vectors, [0,2] after a
            # latent-space projection.
            if not 0.0 <= value <= 2.0:
                raise ValueError(f"term {term!r} range {value} outside [0, 2]")

    def save(self, path: str | Path) -> None:
        lines = [
            f"# {_RANGE_TAG}",
            f"# min_term_freq={self.min_term_freq}",
            f"# fallback={self.fallback!r}",
            "term,frequency,range",
        ]
        for term in sorted(self.term_range):
            lines.append(
                f"{csv_field(term)},{self.term_freq[term]},{self.term_range[term]!r}"
            )
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ForwardsRangeModel":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        header = parse_model_header(
            path, lines, _RANGE_TAG, ("min_term_freq", "fallback")
        )
        body = [ln for ln in lines if not ln.startswith("#")]
        if not body or body[0] != "term,frequency,range":
            raise InputError(f"{path}: missing range column header")
        ranges: dict[str, float] = {}
        freqs: dict[str, int] = {}
        for row in csv.reader(body[1:]):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}: bad row {row!r}")
            ranges[row[0]] = float(row[2])
            freqs[row[0]] = int(row[1])
        try:
            return cls(
                term_range=ranges,
                term_freq=freqs,
                min_term_freq=int(header["min_term_freq"]),
                fallback=float(header["fallback"]),
            )
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from exc


def fit_ranges(
    pairs: Iterable[tuple[Sequence[str], ReplyVector]],
    tfidf: TfIdfModel,
    min_term_freq: int = DEFAULT_MIN_TERM_FREQ,
    svd_dim: int | None = None,
) -> ForwardsRangeModel:
    """Fit per-term ranges from (teacher tokens, reply vector) pairs.

    A term's observations are the nonempty reply vectors of the pairs whose
    teacher tokens contain it, each pair counted once. Terms observed fewer
    than min_term_freq times are dropped; the frequency recorded per kept
    term is that observation count. With svd_dim set, replies are projected
    into a truncated-SVD latent space (then renormalized) before the central
    points and distances are computed.
    """
    if min_term_freq < 1:
        raise InputError("min_term_freq must be >= 1")
    pair_list = list(pairs)
    if svd_dim is not None:
        latent = _project([vec for _, vec in pair_list], len(tfidf.vocabulary), svd_dim)
        usable = [i for i, vec in enumerate(latent) if vec is not None]
        range_of = lambda rows: _range_dense([latent[i] for i in rows])
    else:
        usable = [i for i, (_, vec) in enumerate(pair_list) if vec]
        range_of = lambda rows: _range_sparse([pair_list[i][1] for i in rows])
    occurrences: dict[str, list[int]] = {}
    for i in usable:
        for term in set(pair_list[i][0]):
            occurrences.setdefault(term, []).append(i)
    term_range: dict[str, float] = {}
    term_freq: dict[str, int] = {}
    for term in sorted(occurrences):
        rows = occurrences[term]
        if len(rows) < min_term_freq:
            continue
        term_range[term] = range_of(rows)
        term_freq[term] = len(rows)
    if not term_range:
        raise InputError(
            f"no term was observed min_term_freq={min_term_freq} times; "
            "use a smaller cutoff"
        )
    fallback = sum(term_range.values()) / len(term_range)
    return ForwardsRangeModel(
        term_range=term_range,
        term_freq=term_freq,
        min_term_freq=min_term_freq,
        fallback=fallback,
    )


def score_utterance(
    tokens: Sequence[str], model: ForwardsRangeModel
) -> tuple[float, bool]:
    """Mean range of the distinct in-model terms; (fallback, False) if none."""
    terms = sorted(set(tokens) & set(model.term_range))
    if not terms:
        return model.fallback, False
    return sum(model.term_range[t] for t in terms) / len(terms), True


def _range_sparse(vecs: list[ReplyVector]) -> float:
    """Mean cosine distance of sparse vectors to their arithmetic mean."""
    center: dict[int, float] = {}
    for vec in vecs:
        for col, w in vec.items():
            center[col] = center.get(col, 0.0) + w
    n = len(vecs)
    center = {col: s / n for col, s in center.items()}
    cnorm = math.sqrt(sum(w * w for w in center.values()))
    if cnorm == 0.0:
        raise ValueError("degenerate central point")
    total = 0.0
    for vec in vecs:
        dot = sum(w * center.get(col, 0.0) for col, w in vec.items())
        vnorm = math.sqrt(sum(w * w for w in vec.values()))
        total += 1.0 - dot / (vnorm * cnorm)
    # Unit vectors with nonnegative weights; clip float dust below zero.
    return max(0.0, total / n)


def _range_dense(vecs: list[np.ndarray]) -> float:
    center = np.mean(np.stack(vecs), axis=0)
    cnorm = float(np.sqrt(np.dot(center, center)))
    if cnorm == 0.0:
        raise ValueError("degenerate central point")
    total = 0.0
    for vec in vecs:
        vnorm = float(np.sqrt(np.dot(vec, vec)))
        total += 1.0 - float(np.dot(vec, center)) / (vnorm * cnorm)
    return max(0.0, total / len(vecs))


def _project(
    sparse_vecs: list[ReplyVector], n_terms: int, svd_dim: int
) -> list[np.ndarray | None]:
    """Truncated-SVD projection of the reply matrix, deterministic up to sign,
    with a fixed sign convention; projected vectors are L2-renormalized."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.linalg import svds

    nonempty = [i for i, vec in enumerate(sparse_vecs) if vec]
    if not nonempty:
        return [None] * len(sparse_vecs)
    if svd_dim < 1 or svd_dim >= min(len(nonempty), n_terms):
        raise InputError(
            f"svd_dim={svd_dim} must be >= 1 and smaller than both the "
            f"nonempty reply count ({len(nonempty)}) and the vocabulary "
            f"size ({n_terms})"
        )
    data, indices, indptr = [], [], [0]
    for i in nonempty:
        vec = sparse_vecs[i]
        indices.extend(vec.keys())
        data.extend(vec.values())
        indptr.append(len(indices))
    matrix = csr_matrix(
        (np.array(data), np.array(indices), np.array(indptr)),
        shape=(len(nonempty), n_terms),
    )
    v0 = np.ones(min(matrix.shape))
    _, _, vt = svds(matrix, k=svd_dim, v0=v0)
    # svds returns singular values ascending; component sign is arbitrary.
    # Flip each component so its largest-magnitude loading is positive.
    for j in range(vt.shape[0]):
        pivot = int(np.argmax(np.abs(vt[j])))
        if vt[j, pivot] < 0:
            vt[j] = -vt[j]
    out: list[np.ndarray | None] = [None] * len(sparse_vecs)
    for row, i in enumerate(nonempty):
        latent = matrix[row].toarray()[0] @ vt.T
        norm = float(np.sqrt(np.dot(latent, latent)))
        out[i] = latent / norm if norm > 0.0 else None
    return out
