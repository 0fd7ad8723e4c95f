"""Adjective-rate scoring of generated stories along the three
person-perception dimensions (agency, beliefs, communion).

The shipped lexicon is package data and deliberately replaceable: pass
any AbcLexicon with the same shape to rescore against a different word
list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .report import EvalReport, ReportRow, group_key

DIMENSIONS = ("agency", "beliefs", "communion")
POLARITIES = ("positive", "negative")

_TOKEN_RE = re.compile(r"[a-zA-Z]+")


@dataclass(frozen=True)
class AbcLexicon:
    entries: tuple  # ((adjective, dimension, polarity), ...)

    def __post_init__(self):
        seen = set()
        for word, dim, pol in self.entries:
            if word != word.lower():
                raise ValueError(f"lexicon adjectives must be lowercase: {word!r}")
            if word in seen:
                raise ValueError(f"duplicate lexicon adjective {word!r}")
            seen.add(word)
            if dim not in DIMENSIONS:
                raise ValueError(f"unknown dimension {dim!r} for {word!r}")
            if pol not in POLARITIES:
                raise ValueError(f"unknown polarity {pol!r} for {word!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "AbcLexicon":
        entries = tuple(
            (word, spec["dimension"], spec["polarity"])
            for word, spec in sorted(mapping.items())
        )
        return cls(entries=entries)

    def lookup(self) -> dict:
        return {word: (dim, pol) for word, dim, pol in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def load_abc_lexicon() -> AbcLexicon:
    raw = resources.files("biasforge.data").joinpath("abc_lexicon.json").read_text("utf-8")
    return AbcLexicon.from_mapping(json.loads(raw)["adjectives"])


_DEFAULT = None


def default_abc_lexicon() -> AbcLexicon:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_abc_lexicon()
    return _DEFAULT


def count_hits(text: str, lex: AbcLexicon) -> dict:
    """(dimension, polarity) -> hit count for one text."""
    table = lex.lookup()
    counts = {(d, p): 0 for d in DIMENSIONS for p in POLARITIES}
    for token in _TOKEN_RE.findall(text):
        entry = table.get(token.lower())
        if entry:
            counts[entry] += 1
    return counts


def adjective_rates(stories, lex: AbcLexicon = None) -> EvalReport:
    """Negative-adjective rates per group and dimension.

    The rate's denominator is the dimension's total lexicon hits
    (positive + negative). The extra negative_share metric pools all
    three dimensions, one number per group.
    """
    if lex is None:
        lex = default_abc_lexicon()
    if len(lex) == 0:
        raise ValueError("adjective lexicon is empty")

    slice_keys = None
    for story in stories:
        present = set(story["groups"].present()) & {"culture", "gender", "profession"}
        slice_keys = present if slice_keys is None else (slice_keys & present)
    slice_keys = sorted(slice_keys or ())

    # group -> (dimension, polarity) -> hits; and per-group story counts
    by_group: dict = {}
    n_stories: dict = {}
    for story in stories:
        gkey = group_key(**{k: getattr(story["groups"], k) for k in slice_keys})
        hits = count_hits(story["text"], lex)
        acc = by_group.setdefault(gkey, {(d, p): 0 for d in DIMENSIONS for p in POLARITIES})
        for key, c in hits.items():
            acc[key] += c
        n_stories[gkey] = n_stories.get(gkey, 0) + 1

    rows, warnings = [], []
    groups = sorted(by_group)
    scopes = groups + [()] if () not in by_group else groups
    for gkey in scopes:
        if gkey == () and gkey not in by_group:
            counts = {(d, p): 0 for d in DIMENSIONS for p in POLARITIES}
            for acc in by_group.values():
                for key, c in acc.items():
                    counts[key] += c
            n = sum(n_stories.values())
        else:
            counts = by_group[gkey]
            n = n_stories[gkey]
        total_all = sum(counts.values())
        neg_all = sum(counts[(d, "negative")] for d in DIMENSIONS)
        for dim in DIMENSIONS:
            denom = counts[(dim, "positive")] + counts[(dim, "negative")]
            if denom == 0:
                warnings.append(
                    f"group {gkey or 'overall'}: no {dim} lexicon hits; rate omitted"
                )
                continue
            rows.append(
                ReportRow(
                    group=gkey,
                    metric=f"{dim}_negative_rate",
                    value=counts[(dim, "negative")] / denom,
                    n=n,
                )
            )
        if total_all > 0:
            rows.append(
                ReportRow(group=gkey, metric="negative_share", value=neg_all / total_all, n=n)
            )
        else:
            warnings.append(f"group {gkey or 'overall'}: zero lexicon hits in any dimension")
    return EvalReport.build(rows, warnings=warnings, meta={"lexicon_size": len(lex)})
