"""Training and prediction over labeled exchanges.

train() fits the regressor on a seeded train split of the gold-labeled
exchanges and reports Spearman correlation on the held-out split, recomputed
from fresh predictions rather than from training statistics. predict()
scores any exchange list with a trained model; write_predictions() emits the
JSONL the analytics pipeline accepts.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import torch
from scipy.stats import spearmanr
from torch.optim import AdamW

from . import model as model_mod
from .data import Exchange, InputTemplate, LabeledExample, VARIANTS, build_examples
from .errors import InputError
from .model import Vocab, batch_tensors, build_model

MIN_EXAMPLES = 50
PREDICTIONS_SCHEMA = "predictions/1"
METRICS_SCHEMA = "trainer-metrics/1"


@dataclass(frozen=True)
class TrainSpec:
    variant: str = "unfiltered"
    epochs: int = 10
    split: float = 0.8
    seed: int = 0
    input_template: InputTemplate = InputTemplate.STUDENT_SEP_TEACHER
    max_len: int = 64
    batch_size: int = 16
    learning_rate: float = 1e-3

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise InputError(f"unknown variant {self.variant!r}")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if not 0.0 < self.split < 1.0:
            raise InputError("split must be strictly between 0 and 1")
        if not isinstance(self.input_template, InputTemplate):
            raise InputError(f"unknown input template {self.input_template!r}")
        if self.max_len < 8:
            raise InputError("max_len must be >= 8")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise InputError("learning_rate must be > 0")


@dataclass(frozen=True)
class TrainedModel:
    model: object
    vocab: Vocab
    spec: TrainSpec
    metrics: dict = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        model_mod.save_artifact(
            path,
            self.model,
            self.vocab,
            self.spec.max_len,
            self.spec.input_template.value,
            self.spec.variant,
        )


def split_ids(ids: list[str], split: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded shuffle split; both sides are always nonempty."""
    ordered = sorted(ids)
    random.Random(seed).shuffle(ordered)
    n_train = min(len(ordered) - 1, max(1, round(split * len(ordered))))
    return sorted(ordered[:n_train]), sorted(ordered[n_train:])


def _encode_all(
    examples: list[LabeledExample], vocab: Vocab, max_len: int
) -> list[list[int]]:
    encoded = []
    truncated = 0
    for example in examples:
        ids, was_cut = vocab.encode(example.segments, max_len)
        encoded.append(ids)
        truncated += was_cut
    if truncated:
        warnings.warn(f"truncated {truncated} inputs to {max_len} tokens")
    return encoded


def train(
    exchanges: list[Exchange],
    gold: tuple[str, dict[str, float]],
    spec: TrainSpec,
) -> TrainedModel:
    gold_variant, scores = gold
    if gold_variant != spec.variant:
        raise InputError(
            f"gold file is variant {gold_variant!r} but spec wants {spec.variant!r}"
        )
    examples = build_examples(exchanges, scores, spec.input_template)
    if len(examples) < MIN_EXAMPLES:
        raise InputError(
            f"{len(examples)} labeled examples; need at least {MIN_EXAMPLES}"
        )
    train_ids, heldout_ids = split_ids([e.exchange_id for e in examples], spec.split, spec.seed)
    by_id = {e.exchange_id: e for e in examples}
    train_set = [by_id[eid] for eid in train_ids]
    heldout_set = [by_id[eid] for eid in heldout_ids]

    # The vocabulary comes from the training split only; held-out novelties
    # map to the unknown id.
    vocab = Vocab.build(seg for e in train_set for seg in e.segments)
    encoded = _encode_all(train_set, vocab, spec.max_len)
    targets = [e.score for e in train_set]

    net = build_model(len(vocab), spec.max_len, spec.seed)
    optimizer = AdamW(net.parameters(), lr=spec.learning_rate)
    order_rng = random.Random(spec.seed)
    indices = list(range(len(train_set)))
    net.train()
    final_loss = 0.0
    for _ in range(spec.epochs):
        order_rng.shuffle(indices)
        epoch_loss = 0.0
        for start in range(0, len(indices), spec.batch_size):
            batch = indices[start : start + spec.batch_size]
            input_ids, mask = batch_tensors([encoded[i] for i in batch])
            labels = torch.tensor([[targets[i]] for i in batch], dtype=torch.float)
            out = net(input_ids=input_ids, attention_mask=mask, labels=labels)
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
            epoch_loss += out.loss.detach().item() * len(batch)
        final_loss = epoch_loss / len(indices)

    trained = TrainedModel(model=net, vocab=vocab, spec=spec)
    heldout_pred = _predict_examples(trained, heldout_set)
    rho, p_value = spearmanr(
        [heldout_pred[e.exchange_id] for e in heldout_set],
        [e.score for e in heldout_set],
    )
    metrics = {
        "schema": METRICS_SCHEMA,
        "variant": spec.variant,
        "input_template": spec.input_template.value,
        "seed": spec.seed,
        "epochs": spec.epochs,
        "n_examples": len(examples),
        "n_train": len(train_set),
        "n_heldout": len(heldout_set),
        "final_train_loss": final_loss,
        "heldout_spearman": float(rho),
        "heldout_p": float(p_value),
    }
    return TrainedModel(model=net, vocab=vocab, spec=spec, metrics=metrics)


def _predict_examples(
    trained: TrainedModel, examples: list[LabeledExample]
) -> dict[str, float]:
    encoded = _encode_all(examples, trained.vocab, trained.spec.max_len)
    net = trained.model
    net.eval()
    out: dict[str, float] = {}
    with torch.no_grad():
        for start in range(0, len(examples), 32):
            chunk = encoded[start : start + 32]
            input_ids, mask = batch_tensors(chunk)
            logits = net(input_ids=input_ids, attention_mask=mask).logits
            for offset, example in enumerate(examples[start : start + 32]):
                out[example.exchange_id] = float(logits[offset, 0])
    return out


def predict(trained: TrainedModel, exchanges: list[Exchange]) -> dict[str, float]:
    """Score every given exchange, gold or not."""
    examples = build_examples(exchanges, None, trained.spec.input_template)
    return _predict_examples(trained, examples)


def load_trained(path: str | Path) -> TrainedModel:
    net, vocab, max_len, template, variant = model_mod.load_artifact(path)
    spec = TrainSpec(
        variant=variant,
        input_template=InputTemplate(template),
        max_len=max_len,
    )
    return TrainedModel(model=net, vocab=vocab, spec=spec)


def write_predictions(name: str, values: dict[str, float], path: str | Path) -> None:
    if not name:
        raise InputError("predictions need a nonempty series name")
    lines = [json.dumps({"schema": PREDICTIONS_SCHEMA, "name": name})]
    for eid in sorted(values):
        lines.append(
            json.dumps({"exchange_id": eid, "score": values[eid]}, sort_keys=True)
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
