"""Statistical evaluation: rank correlations, rater agreement, regressions.

Spearman correlations use average-tie ranking and a Student-t p-value, with
an exact permutation p available for very small n. Agreement comes in two
forms: leave-out correlation (each rater against the mean of the others) and
Fleiss kappa over items with the modal number of ratings. Outcome analyses
z-score all variables and fit OLS with an intercept, reporting the
predictor's standardized coefficient with a classical t-test.

Significance stars follow the usual thresholds: *** under 0.001, ** under
0.01, * under 0.05, and a dagger under 0.1.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import t as student_t

from .corpus import TranscriptMeta
from .errors import InputError
from .ioutil import atomic_write, csv_field

PREDICTIONS_SCHEMA = "predictions/1"

_STAR_LEVELS = (
    (0.001, "***"),
    (0.01, "**"),
    (0.05, "*"),
    (0.1, "†"),
)


def stars(p_value: float) -> str:
    for threshold, mark in _STAR_LEVELS:
        if p_value < threshold:
            return mark
    return ""


@dataclass(frozen=True)
class ScoreSeries:
    """A named per-exchange score map; absence of a key means missing."""

    name: str
    values: Mapping[str, float]

    def __post_init__(self) -> None:
        for eid, value in self.values.items():
            if not math.isfinite(value):
                raise ValueError(f"{self.name}: non-finite score for {eid}")


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.rho <= 1.0 + 1e-9:
            raise ValueError(f"rho {self.rho} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.n < 3:
            raise ValueError(f"n {self.n} < 3")

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass(frozen=True)
class RegressionResult:
    beta: float
    p_value: float
    n: int
    controls: tuple[str, ...]

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass(frozen=True)
class IrrResult:
    mean_rho: float
    per_rater: Mapping[str, float]
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.per_rater:
            if self.lo != min(self.per_rater.values()):
                raise ValueError("lo is not the per-rater minimum")
            if self.hi != max(self.per_rater.values()):
                raise ValueError("hi is not the per-rater maximum")


def _rank_average(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError("length mismatch")
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("undefined correlation: zero variance")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


def spearman(
    x: Sequence[float], y: Sequence[float], exact: bool = False
) -> CorrelationResult:
    """Spearman rank correlation over complete pairs (NaN on either side
    drops the pair), with a two-sided p-value.

    The p comes from t = rho*sqrt((n-2)/(1-rho^2)) on n-2 degrees of
    freedom; rho of exactly +-1 gives p = 0. With exact=True and n <= 10 the
    p is the two-sided permutation fraction instead.
    """
    if len(x) != len(y):
        raise ValueError("length mismatch")
    xs = []
    ys = []
    for a, b in zip(x, y):
        if not (math.isnan(a) or math.isnan(b)):
            xs.append(a)
            ys.append(b)
    n = len(xs)
    if n < 3:
        raise ValueError(f"undefined correlation: {n} complete pairs, need 3")
    rx = _rank_average(xs)
    ry = _rank_average(ys)
    try:
        rho = pearson(rx, ry)
    except ValueError as exc:
        raise ValueError(f"undefined correlation: constant ranks ({exc})") from exc
    rho = max(-1.0, min(1.0, rho))
    if exact and n <= 10:
        return CorrelationResult(rho=rho, p_value=_exact_p(rx, ry, rho), n=n)
    if abs(rho) == 1.0:
        return CorrelationResult(rho=rho, p_value=0.0, n=n)
    t_stat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(student_t.sf(abs(t_stat), n - 2))
    return CorrelationResult(rho=rho, p_value=min(1.0, p), n=n)


def _exact_p(rx: Sequence[float], ry: Sequence[float], rho: float) -> float:
    """Two-sided permutation p: the fraction of y-rank orderings whose rho is
    at least as extreme as the observed one."""
    n = len(rx)
    zx = _zscore(rx)
    zy = _zscore(ry)
    target = abs(rho) - 1e-12
    hits = 0
    total = 0
    chunk: list[Sequence[float]] = []
    for perm in itertools.permutations(zy):
        chunk.append(perm)
        if len(chunk) == 100_000:
            hits += _count_extreme(np.array(chunk), np.array(zx), n, target)
            total += len(chunk)
            chunk = []
    if chunk:
        hits += _count_extreme(np.array(chunk), np.array(zx), n, target)
        total += len(chunk)
    return hits / total


def _count_extreme(perms: np.ndarray, zx: np.ndarray, n: int, target: float) -> int:
    rhos = perms @ zx / (n - 1)
    return int(np.sum(np.abs(rhos) >= target))


def _zscore(values: Sequence[float]) -> list[float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    if var == 0.0:
        raise ValueError("zero variance")
    std = math.sqrt(var)
    return [(v - mean) / std for v in values]


def spearman_series(
    a: ScoreSeries, b: ScoreSeries, exact: bool = False
) -> CorrelationResult:
    """Spearman over the exchanges present in both series."""
    shared = sorted(set(a.values) & set(b.values))
    if len(shared) < 3:
        raise ValueError(
            f"undefined correlation: {len(shared)} shared exchanges "
            f"between {a.name} and {b.name}, need 3"
        )
    return spearman(
        [a.values[k] for k in shared], [b.values[k] for k in shared], exact=exact
    )


def leave_out_irr(z_by_rater: Mapping[str, Mapping[str, float]]) -> IrrResult:
    """Each rater's z-scores correlated with the mean of the other raters'
    z-scores on shared items; the per-rater values give the [lo, hi] band.

    Raters with fewer than 3 shared items, or degenerate ranks, are skipped
    with a warning.
    """
    if len(z_by_rater) < 2:
        raise ValueError("leave-out agreement needs at least 2 raters")
    per_rater: dict[str, float] = {}
    for rater in sorted(z_by_rater):
        own = z_by_rater[rater]
        others: dict[str, list[float]] = {}
        for other in sorted(z_by_rater):
            if other == rater:
                continue
            for eid, z in z_by_rater[other].items():
                if eid in own:
                    others.setdefault(eid, []).append(z)
        shared = sorted(others)
        if len(shared) < 3:
            warnings.warn(
                f"rater {rater}: {len(shared)} shared items, skipped", stacklevel=2
            )
            continue
        try:
            result = spearman(
                [own[eid] for eid in shared],
                [sum(others[eid]) / len(others[eid]) for eid in shared],
            )
        except ValueError as exc:
            warnings.warn(f"rater {rater}: skipped ({exc})", stacklevel=2)
            continue
        per_rater[rater] = result.rho
    if not per_rater:
        raise ValueError("no rater had enough shared items for agreement")
    values = per_rater.values()
    return IrrResult(
        mean_rho=sum(values) / len(values),
        per_rater=per_rater,
        lo=min(values),
        hi=max(values),
    )


def fleiss_kappa(
    ratings: Mapping[str, Sequence[str]], categories: Sequence[str]
) -> float:
    """Fleiss kappa over items holding the modal number of ratings.

    Items with any other rating count are excluded with a warning (the
    classical formula assumes a fixed count per item); a modal count below 2
    is an error. Complete uniform agreement returns 1 even when the chance
    term saturates.
    """
    if not ratings:
        raise ValueError("no rated items")
    category_index = {c: j for j, c in enumerate(categories)}
    counts = [len(item) for item in ratings.values()]
    m = _modal(counts)
    if m < 2:
        raise ValueError(f"modal rating count {m} < 2")
    kept: list[list[int]] = []
    skipped = 0
    for item_id in sorted(ratings):
        item = ratings[item_id]
        if len(item) != m:
            skipped += 1
            continue
        row = [0] * len(categories)
        for label in item:
            if label not in category_index:
                raise ValueError(f"item {item_id}: unknown category {label!r}")
            row[category_index[label]] += 1
        kept.append(row)
    if skipped:
        warnings.warn(
            f"excluded {skipped} items without the modal {m} ratings", stacklevel=2
        )
    if not kept:
        raise ValueError("no item has the modal rating count")
    n_items = len(kept)
    p_bar = sum(
        (sum(c * c for c in row) - m) / (m * (m - 1)) for row in kept
    ) / n_items
    totals = [sum(row[j] for row in kept) for j in range(len(categories))]
    grand = n_items * m
    pe_bar = sum((tot / grand) ** 2 for tot in totals)
    if pe_bar >= 1.0:
        return 1.0 if p_bar >= 1.0 else 0.0
    return (p_bar - pe_bar) / (1.0 - pe_bar)


def _modal(counts: Sequence[int]) -> int:
    freq: dict[int, int] = {}
    for c in counts:
        freq[c] = freq.get(c, 0) + 1
    best = max(freq.values())
    # Tie on frequency: prefer the larger rating count.
    return max(c for c, f in freq.items() if f == best)


def mean_aggregate(
    series: ScoreSeries, group: Mapping[str, str]
) -> dict[str, float]:
    """Arithmetic mean of the series per group id; ungrouped or valueless
    exchanges are omitted."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for eid in sorted(series.values):
        gid = group.get(eid)
        if gid is None:
            continue
        sums[gid] = sums.get(gid, 0.0) + series.values[eid]
        counts[gid] = counts.get(gid, 0) + 1
    return {gid: sums[gid] / counts[gid] for gid in sorted(sums)}


def ols_standardized(
    outcome: Sequence[float],
    predictor: Sequence[float],
    controls: Mapping[str, Sequence[float]] | None = None,
) -> RegressionResult:
    """Standardized OLS coefficient of the predictor with optional controls.

    Rows with a NaN anywhere are dropped; all remaining variables are
    z-scored (sample std) and fitted with an intercept by least squares. The
    p-value is the classical two-sided t-test for the predictor
    coefficient. Zero-variance controls are dropped with a warning;
    zero-variance outcome or predictor is an error, as is a collinear
    design.
    """
    controls = dict(controls or {})
    columns = [np.asarray(outcome, dtype=float), np.asarray(predictor, dtype=float)]
    names = ["outcome", "predictor"]
    for name in controls:
        columns.append(np.asarray(controls[name], dtype=float))
        names.append(name)
    if len({len(c) for c in columns}) != 1:
        raise ValueError("length mismatch across variables")
    data = np.stack(columns, axis=1)
    data = data[~np.isnan(data).any(axis=1)]
    n = data.shape[0]
    if n < 3:
        raise ValueError(f"n={n} too small after dropping incomplete rows")
    kept: list[int] = []
    for j in range(2, data.shape[1]):
        if np.std(data[:, j], ddof=1) > 0.0:
            kept.append(j)
        else:
            warnings.warn(f"control {names[j]} has zero variance, dropped", stacklevel=2)
    data = data[:, [0, 1] + kept]
    kept_names = [names[j] for j in kept]
    # Design columns: intercept + predictor + controls; need >= 1 residual dof.
    if n < data.shape[1] + 1:
        raise ValueError(f"n={n} too small for {data.shape[1] - 1} predictors")
    for j, what in ((0, "outcome"), (1, "predictor")):
        if np.std(data[:, j], ddof=1) == 0.0:
            raise ValueError(f"zero variance in {what}")
    z = (data - data.mean(axis=0)) / data.std(axis=0, ddof=1)
    design = np.column_stack([np.ones(n), z[:, 1:]])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise ValueError(
            "singular design matrix; collinear columns: "
            + ", ".join(_collinear(design, ["intercept", "predictor"] + kept_names))
        )
    coef, _, _, _ = np.linalg.lstsq(design, z[:, 0], rcond=None)
    residuals = z[:, 0] - design @ coef
    dof = n - design.shape[1]
    sigma2 = float(residuals @ residuals) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = math.sqrt(max(cov[1, 1], 0.0))
    if se == 0.0:
        p = 0.0
    else:
        t_stat = coef[1] / se
        p = 2.0 * float(student_t.sf(abs(t_stat), dof))
    return RegressionResult(
        beta=float(coef[1]), p_value=min(1.0, p), n=n, controls=tuple(kept_names)
    )


def _collinear(design: np.ndarray, names: list[str]) -> list[str]:
    """Columns whose removal restores full rank, i.e. the dependent ones."""
    full = np.linalg.matrix_rank(design)
    out = []
    for j in range(design.shape[1]):
        reduced = np.delete(design, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full:
            out.append(names[j])
    return out or names


def load_predictions(path: str | Path) -> ScoreSeries:
    """Read a JSON Lines predictions file into a ScoreSeries.

    The first line is a header with the schema tag and the series name; each
    following line carries exchange_id and a numeric score.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        if not header_line:
            raise InputError(f"{path}: empty predictions file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:1: invalid JSON: {exc.msg}") from exc
        if not isinstance(header, dict) or header.get("schema") != PREDICTIONS_SCHEMA:
            raise InputError(
                f"{path}:1: expected schema {PREDICTIONS_SCHEMA!r}, "
                f"got {header.get('schema') if isinstance(header, dict) else header!r}"
            )
        name = header.get("name")
        if not isinstance(name, str) or not name:
            raise InputError(f"{path}:1: header missing series name")
        values: dict[str, float] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict) or "exchange_id" not in record:
                raise InputError(f"{path}:{lineno}: expected exchange_id and score")
            eid = str(record["exchange_id"])
            score = record.get("score")
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise InputError(f"{path}:{lineno}: non-numeric score for {eid}")
            if not math.isfinite(score):
                raise InputError(f"{path}:{lineno}: non-finite score for {eid}")
            if eid in values:
                raise InputError(f"{path}:{lineno}: duplicate exchange_id {eid}")
            values[eid] = float(score)
    return ScoreSeries(name=name, values=values)


def write_predictions(series: ScoreSeries, path: str | Path) -> None:
    lines = [json.dumps({"schema": PREDICTIONS_SCHEMA, "name": series.name})]
    for eid in sorted(series.values):
        lines.append(
            json.dumps({"exchange_id": eid, "score": series.values[eid]}, sort_keys=True)
        )
    atomic_write(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class EvalRow:
    measure: str
    target: str
    stat: str
    value: float | None
    p: float | None
    n: int

    @property
    def stars(self) -> str:
        return "" if self.p is None else stars(self.p)


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[EvalRow, ...]

    def to_csv(self, path: str | Path) -> None:
        lines = ["measure,target,stat,value,p,n,stars"]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        csv_field(row.measure),
                        csv_field(row.target),
                        row.stat,
                        "" if row.value is None else repr(row.value),
                        "" if row.p is None else repr(row.p),
                        str(row.n),
                        row.stars,
                    ]
                )
            )
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "EvaluationReport":
        path = Path(path)
        rows: list[EvalRow] = []
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["measure", "target", "stat", "value", "p", "n", "stars"]:
                raise InputError(f"{path}: unexpected report header {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 7:
                    raise InputError(f"{path}:{lineno}: expected 7 fields")
                try:
                    rows.append(
                        EvalRow(
                            measure=row[0],
                            target=row[1],
                            stat=row[2],
                            value=float(row[3]) if row[3] else None,
                            p=float(row[4]) if row[4] else None,
                            n=int(row[5]),
                        )
                    )
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
        return cls(rows=tuple(rows))

    def to_text(self) -> str:
        """Aligned human-readable table."""
        header = ("measure", "target", "stat", "value", "p", "n", "")
        table = [header]
        for row in self.rows:
            table.append(
                (
                    row.measure,
                    row.target,
                    row.stat,
                    "insufficient n" if row.value is None else f"{row.value:.3f}",
                    "" if row.p is None else f"{row.p:.3g}",
                    str(row.n),
                    row.stars,
                )
            )
        widths = [max(len(r[c]) for r in table) for c in range(len(header))]
        lines = []
        for i, row in enumerate(table):
            lines.append(
                "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
            )
            if i == 0:
                lines.append("  ".join("-" * w for w in widths).rstrip())
        return "\n".join(lines) + "\n"


_TRANSCRIPT_OUTCOMES = ("mqi5", "participation", "explanations")


def evaluate(
    gold: ScoreSeries,
    measures: Sequence[ScoreSeries],
    metas: Mapping[str, TranscriptMeta],
    exchange_transcript: Mapping[str, str],
    spearman_exact: bool = False,
) -> EvaluationReport:
    """Assemble the full report: per-measure Spearman against gold, then
    outcome regressions at transcript level (exchange-count control) and at
    teacher level against value-added (summed-exchange control).

    Measures with too little overlap, or degenerate inputs, produce rows
    with an empty value rather than failing the run.
    """
    rows: list[EvalRow] = []
    for measure in measures:
        rows.append(_gold_row(gold, measure, spearman_exact))
        rows.extend(_outcome_rows(measure, metas, exchange_transcript))
    return EvaluationReport(rows=tuple(rows))


def _gold_row(gold: ScoreSeries, measure: ScoreSeries, exact: bool) -> EvalRow:
    shared = len(set(gold.values) & set(measure.values))
    try:
        result = spearman_series(measure, gold, exact=exact)
    except ValueError:
        return EvalRow(measure.name, gold.name, "spearman", None, None, shared)
    return EvalRow(
        measure.name, gold.name, "spearman", result.rho, result.p_value, result.n
    )


def _outcome_rows(
    measure: ScoreSeries,
    metas: Mapping[str, TranscriptMeta],
    exchange_transcript: Mapping[str, str],
) -> list[EvalRow]:
    rows: list[EvalRow] = []
    by_transcript = mean_aggregate(measure, exchange_transcript)
    transcripts = sorted(tid for tid in by_transcript if tid in metas)
    for outcome_name in _TRANSCRIPT_OUTCOMES:
        pairs = [
            (by_transcript[tid], getattr(metas[tid], outcome_name))
            for tid in transcripts
        ]
        pairs = [(x, y) for x, y in pairs if y is not None]
        rows.append(
            _regression_row(
                measure.name,
                outcome_name,
                outcome=[float(y) for _, y in pairs],
                predictor=[x for x, _ in pairs],
                control_name="n_exchanges",
                control=[
                    float(metas[tid].n_exchanges)
                    for tid in transcripts
                    if getattr(metas[tid], outcome_name) is not None
                ],
            )
        )
    exchange_teacher = {
        eid: metas[tid].teacher_id
        for eid, tid in exchange_transcript.items()
        if tid in metas
    }
    by_teacher = mean_aggregate(measure, exchange_teacher)
    outcome_by_teacher: dict[str, float] = {}
    exchanges_by_teacher: dict[str, float] = {}
    for tid in sorted(metas):
        meta = metas[tid]
        exchanges_by_teacher[meta.teacher_id] = (
            exchanges_by_teacher.get(meta.teacher_id, 0.0) + meta.n_exchanges
        )
        if meta.value_added is not None:
            outcome_by_teacher[meta.teacher_id] = meta.value_added
    teachers = sorted(set(by_teacher) & set(outcome_by_teacher))
    rows.append(
        _regression_row(
            measure.name,
            "value_added",
            outcome=[outcome_by_teacher[t] for t in teachers],
            predictor=[by_teacher[t] for t in teachers],
            control_name="n_exchanges",
            control=[exchanges_by_teacher[t] for t in teachers],
        )
    )
    return rows


def _regression_row(
    measure_name: str,
    target: str,
    outcome: list[float],
    predictor: list[float],
    control_name: str,
    control: list[float],
) -> EvalRow:
    try:
        result = ols_standardized(outcome, predictor, controls={control_name: control})
    except ValueError:
        return EvalRow(measure_name, target, "ols_beta", None, None, len(outcome))
    return EvalRow(
        measure_name, target, "ols_beta", result.beta, result.p_value, result.n
    )
