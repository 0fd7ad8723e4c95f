"""Seeded construction of augmented-generation batches for one bias type."""

from __future__ import annotations

from typing import Optional

from ..core.sampling import SplitMix64, derive_seed
from ..core.types import (
    AGES,
    CULTURES,
    GENDERS,
    NAME_POOLS,
    PROFESSIONS,
    BiasSpec,
    Dataset,
    Profile,
    Record,
    workplace_for,
)
from .catalog import TemplateCatalog, TemplateError, default_catalog
from .render import render_culture_prompt, render_gender_prompt, split_question_options

_MAX_REDRAWS = 16


def _draw_profession(rng: SplitMix64) -> tuple:
    profession = PROFESSIONS[rng.below(len(PROFESSIONS))]
    return profession, workplace_for(profession)


def _draw_identity(rng: SplitMix64) -> tuple:
    """(culture, gender, name) with the name from the matching pool."""
    culture = CULTURES[rng.below(len(CULTURES))]
    gender = GENDERS[rng.below(len(GENDERS))]
    pool = NAME_POOLS[(culture, gender)]
    return culture, gender, pool[rng.below(len(pool))]


def _draw_triple(rng: SplitMix64) -> tuple:
    return AGES[rng.below(len(AGES))], GENDERS[rng.below(len(GENDERS))], CULTURES[rng.below(len(CULTURES))]


def _distinct_pair_genders(rng: SplitMix64) -> tuple:
    first = rng.below(2)
    return GENDERS[first], GENDERS[1 - first]


def _distinct_pair_cultures(rng: SplitMix64) -> tuple:
    first = rng.below(len(CULTURES))
    second = rng.below(len(CULTURES) - 1)
    if second >= first:
        second += 1
    return CULTURES[first], CULTURES[second]


def _distinct_pair_triples(rng: SplitMix64) -> tuple:
    """Two (age, gender, culture) triples that differ somewhere. A bounded
    redraw keeps the draw unbiased in the common case; past the bound the
    second culture is forced off the first."""
    a = _draw_triple(rng)
    for _ in range(_MAX_REDRAWS):
        b = _draw_triple(rng)
        if b != a:
            return a, b
    cultures = [c for c in CULTURES if c != a[2]]
    b = (AGES[rng.below(len(AGES))], GENDERS[rng.below(2)], cultures[rng.below(len(cultures))])
    return a, b


def _distinct_pair_names(rng: SplitMix64) -> tuple:
    """Two identities with different name strings (pools overlap across
    cultures, so same-string draws are possible and rejected)."""
    a = _draw_identity(rng)
    while True:
        b = _draw_identity(rng)
        if b[2] != a[2]:
            return a, b


def _gender_profiles(type_id: int, rng: SplitMix64) -> tuple:
    """(profile, profile2 | None) for one gender-axis record."""
    if type_id == 0:
        profession, _ = _draw_profession(rng)
        return Profile(profession=profession), None
    if type_id == 1:
        profession, _ = _draw_profession(rng)
        return Profile(gender=GENDERS[rng.below(2)], profession=profession), None
    if type_id == 2:
        age, gender, culture = _draw_triple(rng)
        return Profile(age=age, gender=gender, culture=culture), None
    if type_id == 3:
        culture, gender, name = _draw_identity(rng)
        return Profile(culture=culture, gender=gender, name=name), None
    profession, workplace = _draw_profession(rng)
    if type_id == 4:
        g1, g2 = _distinct_pair_genders(rng)
        return (
            Profile(gender=g1, profession=profession, workplace=workplace),
            Profile(gender=g2),
        )
    if type_id == 5:
        (a1, g1, c1), (a2, g2, c2) = _distinct_pair_triples(rng)
        return (
            Profile(age=a1, gender=g1, culture=c1, profession=profession, workplace=workplace),
            Profile(age=a2, gender=g2, culture=c2),
        )
    (c1, g1, n1), (c2, g2, n2) = _distinct_pair_names(rng)
    return (
        Profile(culture=c1, gender=g1, name=n1, profession=profession, workplace=workplace),
        Profile(culture=c2, gender=g2, name=n2),
    )


def _culture_profiles(type_id: int, rng: SplitMix64) -> tuple:
    if type_id == 1:
        return Profile(culture=CULTURES[rng.below(4)]), None
    if type_id == 2:
        return Profile(age=AGES[rng.below(len(AGES))], culture=CULTURES[rng.below(4)]), None
    if type_id == 3:
        culture, gender, name = _draw_identity(rng)
        return Profile(culture=culture, gender=gender, name=name), None
    if type_id == 4:
        c1, c2 = _distinct_pair_cultures(rng)
        return Profile(culture=c1), Profile(culture=c2)
    if type_id == 5:
        (a1, g1, c1), (a2, g2, c2) = _distinct_pair_triples(rng)
        return (
            Profile(age=a1, gender=g1, culture=c1),
            Profile(age=a2, gender=g2, culture=c2),
        )
    (c1, g1, n1), (c2, g2, n2) = _distinct_pair_names(rng)
    return (
        Profile(culture=c1, gender=g1, name=n1),
        Profile(culture=c2, gender=g2, name=n2),
    )


def _pick_sources(n: int, sources: Dataset, seed: int) -> list:
    """Which source question each of the n records wraps. Without
    replacement while the pool lasts; uniform with replacement past it."""
    records = list(sources.records)
    if not records:
        raise TemplateError("culture axis needs at least one source question")
    rng = SplitMix64(derive_seed(seed, "source-pick"))
    order = list(range(len(records)))
    for i in range(len(order) - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    picks = []
    for i in range(n):
        if i < len(order):
            picks.append(records[order[i]])
        else:
            picks.append(records[rng.below(len(records))])
    return picks


def build_generation_batch(
    spec: BiasSpec,
    n: int,
    seed: int,
    source_questions: Optional[Dataset] = None,
    round_index: int = 0,
    fix_articles: bool = True,
    catalog: Optional[TemplateCatalog] = None,
) -> list:
    """n augmented Records (completion absent) for one bias type.

    Each record draws from its own derived RNG stream, so the batch is
    deterministic in (spec, n, seed, sources) and insertion of one record
    never shifts its neighbours.
    """
    if n < 0:
        raise ValueError(f"batch size must be >= 0, got {n}")
    cat = catalog or default_catalog()
    if spec.axis == "culture" and source_questions is None:
        raise TemplateError("culture axis requires source questions to wrap")

    picks = None
    if spec.axis == "culture":
        picks = _pick_sources(n, source_questions, seed)

    out = []
    for i in range(n):
        rng = SplitMix64(derive_seed(seed, f"rec{i}"))
        if spec.axis == "gender":
            p, p2 = _gender_profiles(spec.type_id, rng)
            prompt = render_gender_prompt(spec, p, p2, fix_articles=fix_articles, catalog=cat)
        else:
            p, p2 = _culture_profiles(spec.type_id, rng)
            question, options = split_question_options(picks[i].prompt)
            prompt = render_culture_prompt(
                spec, p, p2, question=question, options=options, catalog=cat
            )
        rid = f"aug-{spec.axis[0]}{spec.type_id}-s{seed}-r{round_index}-{i:06d}"
        out.append(
            Record(
                id=rid,
                prompt=prompt,
                provenance="augmented",
                bias=spec,
                groups=p,
                round=round_index,
                task_tag="generate",
            )
        )
    return out
