"""Command-line pipeline: gold, fit, score, evaluate, synth, report.

Typical run order on a fresh corpus:

    qpatterns synth --config run.json          # only for synthetic data
    qpatterns gold --config run.json
    qpatterns fit --config run.json
    qpatterns score --config run.json
    qpatterns evaluate --config run.json

Commands read one config file (see the config module for the key set);
--out, --seed, and --variant override it. Outputs are written atomically and
contain no timestamps, so reruns on unchanged inputs are byte-identical.
Exit codes: 0 success, 1 bad input or config, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import eval_stats, forwards_range, lexical_features, phrase_miner, synth
from .config import RunConfig, load_config
from .corpus import Variant
from .errors import InputError
from .ioutil import atomic_write, csv_field, sha256_file
from .textprep import default_tagger, preprocess_reply, preprocess_teacher

MANIFEST_SCHEMA = "fit-manifest/1"
SUMMARY_SCHEMA = "gold-summary/1"


class _Parser(argparse.ArgumentParser):
    # Bad flags are an input error (exit 1), not argparse's default exit 2.
    def error(self, message: str) -> None:
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", help="output directory override")
    common.add_argument("--seed", type=int, metavar="N", help="seed override")
    common.add_argument(
        "--variant",
        choices=[v.value for v in Variant],
        help="dataset variant override",
    )
    parser = _Parser(prog="qpatterns", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("gold", cmd_gold, "aggregate rater judgments into gold scores"),
        ("fit", cmd_fit, "fit phrase, TF-IDF, and range models"),
        ("score", cmd_score, "score every exchange with all measures"),
        ("evaluate", cmd_evaluate, "correlate measures with gold and outcomes"),
        ("synth", cmd_synth, "generate the seeded synthetic corpus"),
        ("report", cmd_report, "print a stored report as an aligned table"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config) if args.config else RunConfig()
        config = config.with_overrides(args.out, args.seed, args.variant)
        args.func(config)
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def cmd_gold(config: RunConfig) -> None:
    config.require("transcripts", "judgments")
    corpus = corpus_mod.load_transcripts(config.transcripts)
    judgments = corpus_mod.load_judgments(config.judgments)
    exchanges = corpus_mod.extract_exchanges(corpus)
    corpus_mod.write_exchanges(exchanges, config.out_dir / "exchanges.jsonl")

    summary: dict = {
        "schema": SUMMARY_SCHEMA,
        "n_exchanges": len(exchanges),
        "n_judgments": len(judgments),
        "variants": {},
    }
    for variant in Variant:
        gold = corpus_mod.aggregate_gold(judgments, variant)
        corpus_mod.write_gold(gold, config.out_dir / f"gold_{variant.value}.csv")
        summary["variants"][variant.value] = _variant_summary(judgments, variant, gold)
    atomic_write(
        config.out_dir / "summary.json",
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    for variant in Variant:
        count = summary["variants"][variant.value]["n_gold"]
        print(f"{variant.value}: {count} gold labels")


def _variant_summary(
    judgments: list[corpus_mod.RaterJudgment],
    variant: Variant,
    gold: list[corpus_mod.GoldLabel],
) -> dict:
    out: dict = {"n_gold": len(gold)}
    ratings: dict[str, list[str]] = {}
    for j in judgments:
        if corpus_mod.map_label(j.label, variant) is not None:
            ratings.setdefault(j.exchange_id, []).append(j.label.value)
    categories = sorted(
        {l.value for l in corpus_mod.Label if corpus_mod.map_label(l, variant) is not None}
    )
    try:
        out["fleiss_kappa"] = eval_stats.fleiss_kappa(ratings, categories)
    except ValueError:
        out["fleiss_kappa"] = None
    try:
        irr = eval_stats.leave_out_irr(corpus_mod.rater_zscores(judgments, variant))
        out["irr"] = {"mean": irr.mean_rho, "lo": irr.lo, "hi": irr.hi}
    except ValueError:
        out["irr"] = None
    return out


def cmd_fit(config: RunConfig) -> None:
    config.require("transcripts")
    if config.noun_lexicon is not None:
        config.require("noun_lexicon")
    corpus = corpus_mod.load_transcripts(config.transcripts)
    tagger = default_tagger(config.noun_lexicon)

    teacher_texts = [
        utt.text
        for tid in corpus.transcript_ids
        for utt in corpus.utterances[tid]
        if utt.speaker_role is corpus_mod.Speaker.TEACHER
    ]
    phrase_model = phrase_miner.fit(
        (preprocess_teacher(text, tagger) for text in teacher_texts),
        min_count=config.phrase_min_count,
        threshold=config.phrase_threshold,
    )
    phrase_model.save(config.out_dir / "phrase.csv")

    pairs = corpus_mod.extract_reply_pairs(corpus)
    reply_docs = [preprocess_reply(student.text, tagger) for _, student in pairs]
    tfidf = forwards_range.fit_tfidf(reply_docs)
    tfidf.save(config.out_dir / "tfidf.csv")

    range_pairs = [
        (
            preprocess_teacher(teacher.text, tagger, phrase_model),
            forwards_range.vectorize(doc, tfidf),
        )
        for (teacher, _), doc in zip(pairs, reply_docs)
    ]
    range_model = forwards_range.fit_ranges(
        range_pairs, tfidf, config.min_term_freq, config.svd_dim
    )
    range_model.save(config.out_dir / "range.csv")

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "phrase": {
            "min_count": config.phrase_min_count,
            "threshold": config.phrase_threshold,
        },
        "range": {"min_term_freq": config.min_term_freq, "svd_dim": config.svd_dim},
        "inputs": _input_digests(config),
    }
    atomic_write(
        config.out_dir / "manifest.json",
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    print(
        f"fitted phrase ({phrase_model.vocab_size} unigrams), "
        f"tfidf ({len(tfidf.vocabulary)} terms), "
        f"range ({len(range_model.term_range)} terms)"
    )


def _input_digests(config: RunConfig) -> dict:
    digests = {
        "transcripts": {
            "path": str(config.transcripts),
            "sha256": sha256_file(config.transcripts),
        }
    }
    if config.noun_lexicon is not None:
        digests["noun_lexicon"] = {
            "path": str(config.noun_lexicon),
            "sha256": sha256_file(config.noun_lexicon),
        }
    return digests


def _check_manifest(config: RunConfig) -> None:
    """Refuse to score with models fitted from different inputs."""
    path = config.out_dir / "manifest.json"
    if not path.exists():
        raise InputError(f"{path} not found; run fit first")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc.msg}") from exc
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise InputError(f"{path}: expected schema {MANIFEST_SCHEMA!r}")
    for name, entry in manifest.get("inputs", {}).items():
        current = config.transcripts if name == "transcripts" else config.noun_lexicon
        if current is None or str(current) != entry.get("path"):
            raise InputError(
                f"{path}: models were fitted from {name}={entry.get('path')}, "
                f"config now points at {current}"
            )
        digest = sha256_file(current)
        if digest != entry.get("sha256"):
            raise InputError(
                f"{path}: {name} changed since fit (digest mismatch); refit first"
            )


def cmd_score(config: RunConfig) -> None:
    config.require("transcripts")
    _check_manifest(config)
    corpus = corpus_mod.load_transcripts(config.transcripts)
    tagger = default_tagger(config.noun_lexicon)
    phrase_model = phrase_miner.PhraseModel.load(config.out_dir / "phrase.csv")
    range_model = forwards_range.ForwardsRangeModel.load(config.out_dir / "range.csv")
    if config.lexicon is not None:
        config.require("lexicon")
        lexicon = lexical_features.load_lexicon(config.lexicon)
    else:
        lexicon = lexical_features.default_lexicon()

    lines = [
        "exchange_id,forwards_range,covered,length,"
        + ",".join(lexicon.feature_names)
    ]
    for exchange in corpus_mod.extract_exchanges(corpus):
        tokens = preprocess_teacher(exchange.teacher_utt.text, tagger, phrase_model)
        score, covered = forwards_range.score_utterance(tokens, range_model)
        features = lexical_features.featurize(exchange, lexicon)
        cells = [
            csv_field(exchange.exchange_id),
            repr(score),
            "true" if covered else "false",
            str(features.length),
        ]
        cells += [str(features.counts[name]) for name in lexicon.feature_names]
        lines.append(",".join(cells))
    atomic_write(config.out_dir / "scores.csv", "\n".join(lines) + "\n")
    print(f"scored {len(lines) - 1} exchanges")


def _load_scores(path: Path) -> list[eval_stats.ScoreSeries]:
    """Score CSV columns as measure series; the covered flag is not a
    measure and is skipped."""
    if not path.exists():
        raise InputError(f"{path} not found; run score first")
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "exchange_id":
            raise InputError(f"{path}: unexpected header {header}")
        measure_cols = [
            (i, name) for i, name in enumerate(header) if name not in ("exchange_id", "covered")
        ]
        values: dict[str, dict[str, float]] = {name: {} for _, name in measure_cols}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields")
            eid = row[0]
            for i, name in measure_cols:
                try:
                    values[name][eid] = float(row[i])
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: non-numeric {name}") from exc
    return [
        eval_stats.ScoreSeries(name=name, values=values[name])
        for _, name in measure_cols
    ]


def cmd_evaluate(config: RunConfig) -> None:
    config.require("transcripts", "predictions")
    gold_path = config.out_dir / f"gold_{config.variant.value}.csv"
    if not gold_path.exists():
        raise InputError(f"{gold_path} not found; run gold first")
    gold_labels = corpus_mod.load_gold(gold_path, config.variant)
    gold = eval_stats.ScoreSeries(
        name=f"gold_{config.variant.value}",
        values={g.exchange_id: g.score for g in gold_labels},
    )
    measures = _load_scores(config.out_dir / "scores.csv")
    for path in config.predictions:
        measures.append(eval_stats.load_predictions(path))

    corpus = corpus_mod.load_transcripts(config.transcripts)
    exchange_transcript = {
        ex.exchange_id: ex.transcript_id
        for ex in corpus_mod.extract_exchanges(corpus)
    }
    report = eval_stats.evaluate(
        gold,
        measures,
        corpus.meta,
        exchange_transcript,
        spearman_exact=config.spearman_exact,
    )
    report.to_csv(config.out_dir / "report.csv")
    text = report.to_text()
    atomic_write(config.out_dir / "report.txt", text)
    print(text, end="")


def cmd_synth(config: RunConfig) -> None:
    try:
        spec = synth.SynthSpec(**{"seed": config.seed, **config.synth})
    except TypeError as exc:
        raise InputError(f"synth config: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"synth config: {exc}") from exc
    generated = synth.generate(spec)
    paths = synth.write_corpus(generated, config.out_dir)
    n_focus = sum(1 for v in generated.truth.values.values() if v == 1.0)
    print(
        f"wrote {len(generated.truth.values)} exchanges "
        f"({n_focus} focusing) to {config.out_dir}"
    )
    for name in sorted(paths):
        print(f"  {name}: {paths[name]}")


def cmd_report(config: RunConfig) -> None:
    path = config.out_dir / "report.csv"
    if not path.exists():
        raise InputError(f"{path} not found; run evaluate first")
    report = eval_stats.EvaluationReport.from_csv(path)
    print(report.to_text(), end="")


if __name__ == "__main__":
    sys.exit(main())
