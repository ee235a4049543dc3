"""Question-pattern analytics for teacher-student dialogue transcripts.

Measures how strongly teacher questions constrain student replies: reply
diversity per question term (forwards range), count-based lexical features,
gold-score aggregation from expert judgments, and a statistical harness that
relates all of it to outcomes. The cli module exposes the same pipeline as
the qpatterns command.
"""

from .corpus import (
    Corpus,
    Exchange,
    GoldLabel,
    Label,
    RaterJudgment,
    Speaker,
    TranscriptMeta,
    Utterance,
    Variant,
    aggregate_gold,
    extract_exchanges,
    extract_reply_pairs,
    load_judgments,
    load_transcripts,
    map_label,
)
from .errors import InputError
from .eval_stats import (
    CorrelationResult,
    EvaluationReport,
    IrrResult,
    RegressionResult,
    ScoreSeries,
    evaluate,
    fleiss_kappa,
    leave_out_irr,
    load_predictions,
    mean_aggregate,
    ols_standardized,
    spearman,
)
from .forwards_range import (
    ForwardsRangeModel,
    TfIdfModel,
    fit_ranges,
    fit_tfidf,
    score_utterance,
    vectorize,
)
from .lexical_features import FeatureVector, Lexicon, default_lexicon, featurize
from .phrase_miner import PhraseModel
from .textprep import Tagger, default_tagger, preprocess_reply, preprocess_teacher

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorrelationResult",
    "EvaluationReport",
    "Exchange",
    "FeatureVector",
    "ForwardsRangeModel",
    "GoldLabel",
    "InputError",
    "IrrResult",
    "Label",
    "Lexicon",
    "PhraseModel",
    "RaterJudgment",
    "RegressionResult",
    "ScoreSeries",
    "Speaker",
    "Tagger",
    "TfIdfModel",
    "TranscriptMeta",
    "Utterance",
    "Variant",
    "aggregate_gold",
    "default_lexicon",
    "default_tagger",
    "evaluate",
    "extract_exchanges",
    "extract_reply_pairs",
    "featurize",
    "fit_ranges",
    "fit_tfidf",
    "fleiss_kappa",
    "leave_out_irr",
    "load_judgments",
    "load_predictions",
    "load_transcripts",
    "map_label",
    "mean_aggregate",
    "ols_standardized",
    "preprocess_reply",
    "preprocess_teacher",
    "score_utterance",
    "spearman",
    "vectorize",
]
