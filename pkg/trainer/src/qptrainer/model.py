"""Vocabulary, encoding, and the small transformer regressor.

No pretrained weights are downloaded; the encoder is a RoBERTa-architecture
model initialized from a local config over a whitespace vocabulary built
from the training split. Inputs are encoded as

    <s> segment tokens </s> segment tokens ... </s>

with ids truncated to max_len; shorter sequences are padded with id 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import torch
from transformers import RobertaConfig, RobertaForSequenceClassification
from transformers import logging as hf_logging

from .errors import InputError

PAD, BOS, SEP, UNK = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<s>", "</s>", "<unk>")

MODEL_SCHEMA = "trainer-model/1"


@dataclass(frozen=True)
class Vocab:
    ids: dict[str, int]

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]]) -> "Vocab":
        tokens = sorted({t for tokens in token_lists for t in tokens})
        ids = {t: i for i, t in enumerate(_SPECIALS)}
        for token in tokens:
            if token not in ids:
                ids[token] = len(ids)
        return cls(ids=ids)

    def __len__(self) -> int:
        return len(self.ids)

    def encode(self, segments: Sequence[Sequence[str]], max_len: int) -> tuple[list[int], bool]:
        """Ids for one example; the flag reports whether it was truncated."""
        ids = [BOS]
        for i, segment in enumerate(segments):
            if i:
                ids.append(SEP)
            ids.extend(self.ids.get(t, UNK) for t in segment)
        ids.append(SEP)
        if len(ids) <= max_len:
            return ids, False
        return ids[: max_len - 1] + [SEP], True


def build_model(vocab_size: int, max_len: int, seed: int) -> RobertaForSequenceClassification:
    hf_logging.set_verbosity_error()
    config = RobertaConfig(
        vocab_size=vocab_size,
        hidden_size=64,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=max_len + 8,
        num_labels=1,
        problem_type="regression",
        pad_token_id=PAD,
        bos_token_id=BOS,
        eos_token_id=SEP,
    )
    torch.manual_seed(seed)
    return RobertaForSequenceClassification(config)


def batch_tensors(encoded: Sequence[Sequence[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(ids) for ids in encoded)
    input_ids = torch.full((len(encoded), width), PAD, dtype=torch.long)
    for row, ids in enumerate(encoded):
        input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
    return input_ids, (input_ids != PAD).long()


def save_artifact(
    path: str | Path,
    model: RobertaForSequenceClassification,
    vocab: Vocab,
    max_len: int,
    template: str,
    variant: str,
) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema": MODEL_SCHEMA,
        "vocab": vocab.ids,
        "max_len": max_len,
        "input_template": template,
        "variant": variant,
    }
    (path / "model.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    torch.save(model.state_dict(), path / "weights.pt")


def load_artifact(path: str | Path) -> tuple[RobertaForSequenceClassification, Vocab, int, str, str]:
    path = Path(path)
    meta_path = path / "model.json"
    if not meta_path.exists():
        raise InputError(f"{meta_path}: model metadata not found")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("schema") != MODEL_SCHEMA:
        raise InputError(f"{meta_path}: expected schema {MODEL_SCHEMA!r}")
    vocab = Vocab(ids={str(k): int(v) for k, v in meta["vocab"].items()})
    max_len = int(meta["max_len"])
    model = build_model(len(vocab), max_len, seed=0)
    state = torch.load(path / "weights.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, vocab, max_len, str(meta["input_template"]), str(meta["variant"])
