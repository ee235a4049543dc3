"""Fine-tunes a small transformer regression head on exchange-level gold
scores and emits predictions the analytics pipeline can evaluate.

The package talks to the analytics side only through files: it reads the
exchange JSONL and gold CSV that pipeline writes, and produces a predictions
JSONL in the same schema that pipeline joins into its reports.
"""

from .errors import InputError
from .train import TrainSpec, predict, train

__all__ = ["InputError", "TrainSpec", "predict", "train"]
