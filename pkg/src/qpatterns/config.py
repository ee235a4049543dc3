"""Run configuration: a JSON file with documented keys, overridable by flags.

Layout:

    {
      "paths": {
        "transcripts": "data/transcripts.jsonl",
        "judgments": "data/judgments.csv",
        "lexicon": null,
        "noun_lexicon": null,
        "predictions": ["out/roberta.jsonl"],
        "out_dir": "out"
      },
      "phrase": {"min_count": 500, "threshold": 1.0},
      "range": {"min_term_freq": 25, "svd_dim": null},
      "variant": "unfiltered",
      "seed": 0,
      "spearman_exact": false,
      "synth": {"n_exchanges": 2000}
    }

Every key is optional; unknown keys are rejected so typos fail loudly. Input
paths are checked per command, since early commands create the files later
ones read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .corpus import Variant
from .errors import InputError

_PATH_KEYS = ("transcripts", "judgments", "lexicon", "noun_lexicon", "out_dir")
_TOP_KEYS = {"paths", "phrase", "range", "variant", "seed", "spearman_exact", "synth"}


@dataclass(frozen=True)
class RunConfig:
    transcripts: Path | None = None
    judgments: Path | None = None
    lexicon: Path | None = None
    noun_lexicon: Path | None = None
    predictions: tuple[Path, ...] = ()
    out_dir: Path = Path("out")
    phrase_min_count: int = 500
    phrase_threshold: float = 1.0
    min_term_freq: int = 25
    svd_dim: int | None = None
    variant: Variant = Variant.UNFILTERED
    seed: int = 0
    spearman_exact: bool = False
    synth: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.phrase_min_count < 1:
            raise InputError("phrase.min_count must be >= 1")
        if not self.phrase_threshold > 0.0:
            raise InputError("phrase.threshold must be > 0")
        if self.min_term_freq < 1:
            raise InputError("range.min_term_freq must be >= 1")
        if self.svd_dim is not None and self.svd_dim < 1:
            raise InputError("range.svd_dim must be >= 1 when set")

    def with_overrides(
        self,
        out_dir: str | None = None,
        seed: int | None = None,
        variant: str | None = None,
    ) -> "RunConfig":
        """Apply command-line flag overrides; flags win over the file."""
        updates: dict = {}
        if out_dir is not None:
            updates["out_dir"] = Path(out_dir)
        if seed is not None:
            updates["seed"] = seed
        if variant is not None:
            updates["variant"] = Variant(variant)
        return replace(self, **updates) if updates else self

    def require(self, *names: str) -> None:
        """Check that the named input paths are configured and exist."""
        for name in names:
            if name == "predictions":
                for path in self.predictions:
                    if not path.exists():
                        raise InputError(f"paths.predictions: {path} does not exist")
                continue
            value = getattr(self, name)
            if value is None:
                raise InputError(f"config paths.{name} is required for this command")
            if not Path(value).exists():
                raise InputError(f"paths.{name}: {value} does not exist")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"{path}: config file not found") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise InputError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")

    paths = _section(path, raw, "paths", set(_PATH_KEYS) | {"predictions"})
    phrase = _section(path, raw, "phrase", {"min_count", "threshold"})
    range_ = _section(path, raw, "range", {"min_term_freq", "svd_dim"})

    kwargs: dict = {}
    for key in _PATH_KEYS:
        if paths.get(key) is not None:
            kwargs[key] = _as_path(path, f"paths.{key}", paths[key])
    predictions = paths.get("predictions", [])
    if not isinstance(predictions, list):
        raise InputError(f"{path}: paths.predictions must be a list")
    kwargs["predictions"] = tuple(
        _as_path(path, "paths.predictions", p) for p in predictions
    )
    if phrase.get("min_count") is not None:
        kwargs["phrase_min_count"] = _as_int(path, "phrase.min_count", phrase["min_count"])
    if phrase.get("threshold") is not None:
        kwargs["phrase_threshold"] = _as_float(path, "phrase.threshold", phrase["threshold"])
    if range_.get("min_term_freq") is not None:
        kwargs["min_term_freq"] = _as_int(path, "range.min_term_freq", range_["min_term_freq"])
    if range_.get("svd_dim") is not None:
        kwargs["svd_dim"] = _as_int(path, "range.svd_dim", range_["svd_dim"])
    if raw.get("variant") is not None:
        try:
            kwargs["variant"] = Variant(raw["variant"])
        except ValueError as exc:
            raise InputError(f"{path}: unknown variant {raw['variant']!r}") from exc
    if raw.get("seed") is not None:
        kwargs["seed"] = _as_int(path, "seed", raw["seed"])
    if raw.get("spearman_exact") is not None:
        if not isinstance(raw["spearman_exact"], bool):
            raise InputError(f"{path}: spearman_exact must be true or false")
        kwargs["spearman_exact"] = raw["spearman_exact"]
    synth = raw.get("synth", {})
    if not isinstance(synth, dict):
        raise InputError(f"{path}: synth must be an object")
    kwargs["synth"] = dict(synth)
    return RunConfig(**kwargs)


def _section(path: Path, raw: dict, name: str, allowed: set[str]) -> dict:
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise InputError(f"{path}: {name} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise InputError(
            f"{path}: unknown {name} keys: {', '.join(sorted(unknown))}"
        )
    return section


def _as_path(path: Path, key: str, value: object) -> Path:
    if not isinstance(value, str) or not value:
        raise InputError(f"{path}: {key} must be a nonempty string")
    return Path(value)


def _as_int(path: Path, key: str, value: object) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{path}: {key} must be an integer")
    return value


def _as_float(path: Path, key: str, value: object) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{path}: {key} must be a number")
    return float(value)
