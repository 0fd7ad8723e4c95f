"""Readers for the exported file formats this bridge consumes.

Three inputs cross the boundary: the JSONL training set (one record per
line), the train_config.json with hyperparameters, and the optional
alignment config. Everything is validated on the way in so that a bad
export fails loudly before any training starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .model import BOS, EOS, SEP

PROVENANCES = ("original", "augmented")

DEFAULT_HYPERPARAMETERS = {
    "gender": {"learning_rate": 1e-5, "epochs": 3},
    "culture": {"learning_rate": 1e-6, "epochs": 3},
}
ARABIC_ONLY_EPOCHS = 5
DEFAULT_ADAPTER_RANK = 8


class DataError(ValueError):
    pass


def default_hyperparameters(axis: str, arabic_only: bool = False) -> dict:
    if axis not in DEFAULT_HYPERPARAMETERS:
        raise DataError(f"unknown axis {axis!r}")
    hp = dict(DEFAULT_HYPERPARAMETERS[axis])
    if axis == "culture" and arabic_only:
        hp["epochs"] = ARABIC_ONLY_EPOCHS
    hp["adapter_rank"] = DEFAULT_ADAPTER_RANK
    return hp


@dataclass(frozen=True)
class TrainRecord:
    id: str
    prompt: str
    completion: str
    provenance: str


def _validate_record(obj: dict, lineno: int) -> TrainRecord:
    for key in ("id", "prompt", "provenance"):
        if key not in obj:
            raise DataError(f"line {lineno}: record is missing {key!r}")
    if not isinstance(obj["prompt"], str) or not obj["prompt"]:
        raise DataError(f"line {lineno}: prompt must be a non-empty string")
    if obj["provenance"] not in PROVENANCES:
        raise DataError(
            f"line {lineno}: provenance must be one of {PROVENANCES}, "
            f"got {obj['provenance']!r}"
        )
    completion = obj.get("completion")
    if not isinstance(completion, str) or not completion:
        raise DataError(
            f"line {lineno}: record {obj['id']!r} has no completion; "
            "fine-tuning needs prompt/completion pairs"
        )
    return TrainRecord(
        id=str(obj["id"]),
        prompt=obj["prompt"],
        completion=completion,
        provenance=obj["provenance"],
    )


def load_training_records(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON: {exc}") from exc
            records.append(_validate_record(obj, lineno))
    if not records:
        raise DataError(f"dataset is empty: {path}")

    # The exporter writes a manifest sidecar; when present, use it as an
    # integrity check on provenance counts.
    sidecar = Path(str(path) + ".manifest.json")
    if sidecar.is_file():
        counts = json.loads(sidecar.read_text())["counts"]
        actual = {
            p: sum(1 for r in records if r.provenance == p) for p in PROVENANCES
        }
        actual = {k: v for k, v in actual.items() if v}
        declared = {k: v for k, v in counts.items() if v}
        if declared != actual:
            raise DataError(
                f"manifest counts {declared} disagree with dataset contents {actual}"
            )
    return records


def load_alignment_config(path) -> dict:
    """Returns {"lam": float, "field": str}; extra keys are ignored."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"alignment config not found: {path}")
    obj = json.loads(path.read_text())
    if "lambda" not in obj:
        raise DataError(f"alignment config {path} has no lambda")
    lam = float(obj["lambda"])
    if lam < 0:
        raise DataError(f"lambda must be non-negative, got {lam}")
    field = obj.get("partition", {}).get("field", "provenance")
    if field != "provenance":
        raise DataError(f"unsupported partition field {field!r}")
    return {"lam": lam, "field": field}


def encode_example(prompt: str, completion: str, max_len: int):
    """Token row for one training pair.

    Layout is BOS, prompt bytes, newline, completion bytes, EOS. When the
    pair does not fit, the prompt is trimmed from the left (keeping at
    least 32 bytes) and then the completion tail goes.

    Returns (tokens, answer_from, terminal) where targets at positions
    >= answer_from carry task loss (completion bytes plus EOS) and
    terminal is the input index of the last completion byte, whose hidden
    state is the record's embedding.
    """
    p = list(prompt.encode("utf-8"))
    a = list(completion.encode("utf-8"))
    over = len(p) + len(a) + 3 - max_len
    if over > 0:
        cut = min(over, max(len(p) - 32, 0))
        p = p[cut:]
        over -= cut
    if over > 0:
        a = a[: max(len(a) - over, 1)]
    tokens = [BOS] + p + [SEP] + a + [EOS]
    answer_from = 1 + len(p) + 1
    terminal = len(tokens) - 2
    return tokens, answer_from, terminal


def encode_text(text: str, max_len: int):
    """Token row for embedding extraction; terminal is the last position.

    For text of the form prompt + "\\n" + completion this lines up with
    the training-time answer-terminal position, since nothing after a
    position can influence its hidden state.
    """
    if not text:
        raise DataError("cannot embed empty text")
    tokens = [BOS] + list(text.encode("utf-8"))[: max_len - 1]
    return tokens, len(tokens) - 1


@dataclass(frozen=True)
class TrainJob:
    """One fine-tuning request over an exported training set."""

    dataset: Path
    learning_rate: float
    epochs: int
    adapter_rank: int
    alignment_config: Optional[Path] = None
    checkpoint_id: Optional[str] = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.adapter_rank < 1:
            raise DataError(f"adapter rank must be >= 1, got {self.adapter_rank}")

    @classmethod
    def from_export_dir(cls, export_dir, checkpoint_id: Optional[str] = None) -> "TrainJob":
        """Read train_config.json as written by the exporter."""
        export_dir = Path(export_dir)
        cfg_path = export_dir / "train_config.json"
        if not cfg_path.is_file():
            raise DataError(f"no train_config.json under {export_dir}")
        cfg = json.loads(cfg_path.read_text())
        hp = cfg.get("hyperparameters")
        if hp is None:
            hp = default_hyperparameters(cfg.get("axis", "gender"))
        align = cfg.get("alignment_config")
        return cls(
            dataset=export_dir / cfg["dataset"],
            learning_rate=float(hp["learning_rate"]),
            epochs=int(hp["epochs"]),
            adapter_rank=int(hp.get("adapter_rank", DEFAULT_ADAPTER_RANK)),
            alignment_config=export_dir / align if align else None,
            checkpoint_id=checkpoint_id,
        )
