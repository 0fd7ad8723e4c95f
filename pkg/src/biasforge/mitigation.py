"""Three bias mitigations: a warning-token prefix, sensitive-term masking,
and an embedding alignment penalty for fine-tuning.

The alignment loss is the squared Euclidean norm of the difference
between the mean embedding of the original partition and the mean of the
augmented partition. train_bridge adds lambda times this to its task
loss; emit_alignment_config is the file that tells it how.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core.types import CULTURES, NAME_POOLS, Dataset, Record
from .llm_client import EmbeddingSet

GUARD_TEXT = "The following text may contain biases. "
MASK_TOKEN = "[MASK]"


class MitigationError(ValueError):
    pass


def apply_token_guard(r: Record) -> Record:
    """Prefix an augmented record's prompt with the warning token."""
    if r.provenance != "augmented":
        raise MitigationError(
            f"token guard is for augmented records; {r.id!r} is {r.provenance}"
        )
    if r.guarded:
        return r
    return r.with_(prompt=GUARD_TEXT + r.prompt, guarded=True)


# Inflections that would leak the label even after the bare names are
# masked ("Arab traditions", "from Spain").
_CULTURE_INFLECTIONS = {
    "Arabic": ("Arab", "Arabs"),
    "Chinese": ("China",),
    "Portuguese": ("Portugal",),
    "Spanish": ("Spain", "Spaniard", "Spaniards"),
}

# Gendered pronouns and nouns -> neutral forms. "her" maps to the
# possessive reading; the masker cannot do part-of-speech work and the
# object reading ("saw her") comes out as "saw their", an accepted
# roughness of dictionary replacement. Keys must be lowercase.
PRONOUN_MAP = {
    "he": "they",
    "she": "they",
    "him": "them",
    "her": "their",
    "his": "their",
    "hers": "theirs",
    "himself": "themselves",
    "herself": "themselves",
    "man": "person",
    "woman": "person",
    "men": "people",
    "women": "people",
    "male": "person",
    "female": "person",
}


def _default_name_terms() -> tuple:
    names = set()
    for pool in NAME_POOLS.values():
        names.update(pool)
    return tuple(sorted(names))


@dataclass(frozen=True)
class MaskLexicon:
    culture_terms: tuple = ()
    name_terms: tuple = ()
    pronoun_map: dict = field(default_factory=dict)

    @classmethod
    def default(cls) -> "MaskLexicon":
        terms = []
        for culture in CULTURES:
            terms.append(culture)
            terms.extend(_CULTURE_INFLECTIONS[culture])
        return cls(
            culture_terms=tuple(terms),
            name_terms=_default_name_terms(),
            pronoun_map=dict(PRONOUN_MAP),
        )


def _word_re(terms: Iterable[str], ignore_case: bool) -> re.Pattern:
    alts = "|".join(re.escape(t) for t in sorted(terms, key=len, reverse=True))
    return re.compile(rf"\b(?:{alts})\b", re.IGNORECASE if ignore_case else 0)


def _preserve_case(source: str, replacement: str) -> str:
    if source.isupper() and len(source) > 1:
        return replacement.upper()
    if source[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _mask_text_culture(text: str, lex: MaskLexicon) -> str:
    pattern = _word_re(lex.culture_terms, ignore_case=True)
    return pattern.sub(MASK_TOKEN, text)


def _mask_text_gender(text: str, lex: MaskLexicon) -> str:
    if lex.name_terms:
        # Names are matched case-sensitively: "Na" is a Chinese name,
        # "na" mid-sentence is not.
        text = _word_re(lex.name_terms, ignore_case=False).sub(MASK_TOKEN, text)
    if lex.pronoun_map:
        pattern = _word_re(lex.pronoun_map.keys(), ignore_case=True)

        def sub(m: re.Match) -> str:
            word = m.group(0)
            replacement = lex.pronoun_map.get(word.lower())
            if replacement is None:
                return word
            return _preserve_case(word, replacement)

        text = pattern.sub(sub, text)
    return text


def mask_text(text: str, lex: MaskLexicon, axis: str) -> str:
    if axis == "culture":
        return _mask_text_culture(text, lex)
    if axis == "gender":
        return _mask_text_gender(text, lex)
    raise MitigationError(f"unknown axis {axis!r}")


def apply_mask(r: Record, lex: MaskLexicon, axis: str) -> Record:
    """Mask sensitive terms in prompt and completion. Idempotent; no-op
    records pass through unchanged (same object)."""
    prompt = mask_text(r.prompt, lex, axis)
    completion = r.completion
    if completion is not None:
        completion = mask_text(completion, lex, axis)
    if prompt == r.prompt and completion == r.completion:
        return r
    return r.with_(prompt=prompt, completion=completion)


def compute_alignment_loss(orig: EmbeddingSet, aug: EmbeddingSet) -> float:
    """Squared L2 distance between the two partitions' mean embeddings."""
    if len(orig) == 0 or len(aug) == 0:
        raise MitigationError("alignment loss needs non-empty embedding sets")
    if orig.dim != aug.dim:
        raise MitigationError(
            f"embedding dims differ: {orig.dim} (original) vs {aug.dim} (augmented)"
        )
    mean_o = np.asarray(orig.vectors, dtype=np.float64).mean(axis=0)
    mean_a = np.asarray(aug.vectors, dtype=np.float64).mean(axis=0)
    diff = mean_o - mean_a
    return float(np.dot(diff, diff))


LOSS_DEFINITION = "squared-L2-of-means"


@dataclass(frozen=True)
class AlignmentConfig:
    weight: float = 0.1
    embedding_source: str = "endpoint"

    def __post_init__(self):
        if not (self.weight >= 0 and np.isfinite(self.weight)):
            raise MitigationError(f"alignment weight must be finite and >= 0, got {self.weight}")
        if self.embedding_source not in ("endpoint", "bridge"):
            raise MitigationError(f"unknown embedding source {self.embedding_source!r}")


def emit_alignment_config(cfg: AlignmentConfig, dataset: Dataset, dataset_path: str, out_path: str) -> dict:
    """Write the alignment-loss config the fine-tuning bridge consumes.

    The partition rule is spelled out explicitly so the bridge needs no
    shared code with this package to apply it.
    """
    obj = {
        "lambda": cfg.weight,
        "loss": LOSS_DEFINITION,
        "embedding_source": cfg.embedding_source,
        "dataset": dataset_path,
        "partition": {
            "field": "provenance",
            "original": "original",
            "augmented": "augmented",
        },
        "counts": dict(dataset.manifest.counts),
    }
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return obj


def apply_strategy(
    dataset: Dataset,
    strategy: str,
    axis: str,
    lex: Optional[MaskLexicon] = None,
) -> Dataset:
    """Dataset-level application of token or mask mitigation.

    The guard goes on augmented records only (original data needs no
    warning); the mask rewrites every record so no sensitive term
    survives anywhere in the corpus.
    """
    if strategy == "token":
        records = [
            apply_token_guard(r) if r.provenance == "augmented" else r
            for r in dataset.records
        ]
    elif strategy == "mask":
        lex = lex or MaskLexicon.default()
        records = [apply_mask(r, lex, axis) for r in dataset.records]
    else:
        raise MitigationError(f"unknown mitigation strategy {strategy!r}")
    return Dataset(records=tuple(records), manifest=dataset.manifest)
