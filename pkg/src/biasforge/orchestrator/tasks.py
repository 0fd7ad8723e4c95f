"""Per-task evaluation drivers used by the experiment runner.

Each driver takes a model handle plus fixtures, runs the chat/embedding
calls, and returns (EvalReport, responses_payload). The responses payload
is persisted verbatim so every reported number can be recomputed from the
run directory.
"""

from __future__ import annotations

import re
from typing import Optional

from ..biasgen.catalog import default_catalog
from ..biasgen.render import render_culture_prompt, render_gender_prompt, render_task_prompt
from ..core.sampling import derive_seed, seeded_sample
from ..core.types import BiasSpec, Dataset, Profile, Record
from ..eval import (
    EvalReport,
    ReportRow,
    adjective_rates,
    embedding_distance,
    group_counts,
    grouped_accuracy,
    macro_f1,
    project3,
    tally_hiring,
    value_misalignment,
    salary_report,
)
from ..llm_client import ModelHandle, chat_complete_many, embed

_OPTION_LETTER_RE = re.compile(r"\(([A-Z])\)")


def parse_option_index(response: str) -> Optional[int]:
    m = _OPTION_LETTER_RE.search(response)
    if not m:
        return None
    return ord(m.group(1)) - ord("A")


def run_classification(handle: ModelHandle, items) -> tuple:
    prompts = [it["prompt"] for it in items]
    responses = chat_complete_many(handle, prompts)
    preds = []
    skipped = 0
    for it, resp in zip(items, responses):
        idx = parse_option_index(resp)
        if idx is None or idx >= len(it["labels"]):
            skipped += 1
            continue
        preds.append({"gold": it["gold"], "pred": it["labels"][idx], "groups": it["groups"]})
    if not preds:
        raise ValueError("no classification response carried an option letter")
    acc = grouped_accuracy(preds, by=["gender"])
    f1 = macro_f1(preds)
    rows = acc.rows + (ReportRow(group=(), metric="macro_f1", value=f1, n=len(preds)),)
    warnings = acc.warnings
    if skipped:
        warnings = warnings + (f"{skipped} responses had no parseable option letter",)
    report = EvalReport.build(rows, gaps=acc.gaps, warnings=warnings, meta=dict(acc.meta))
    payload = [
        {"id": it["id"], "prompt": it["prompt"], "gold": it["gold"], "response": resp}
        for it, resp in zip(items, responses)
    ]
    return report, payload


def run_story(handle: ModelHandle, profiles) -> tuple:
    cat = default_catalog()
    prompts = [render_task_prompt("story", catalog=cat, name=p.name) for p in profiles]
    responses = chat_complete_many(handle, prompts)
    stories = [{"text": r, "groups": Profile(gender=p.gender)} for p, r in zip(profiles, responses)]
    report = adjective_rates(stories)
    payload = [
        {"name": p.name, "gender": p.gender, "profession": p.profession, "response": r}
        for p, r in zip(profiles, responses)
    ]
    return report, payload


def run_story_counts(profiles, responses) -> EvalReport:
    """Who did the model write about? Group tallies with pronoun-inferred
    gender, over the same story responses."""
    records = [
        Record(
            id=f"story-{i:04d}",
            prompt="story",
            completion=resp,
            provenance="original",
            groups=Profile(profession=p.profession),
        )
        for i, (p, resp) in enumerate(zip(profiles, responses))
    ]
    return group_counts(Dataset.from_records(records))


def run_hiring(handle: ModelHandle, octets) -> tuple:
    cat = default_catalog()
    prompts = [
        render_task_prompt(
            "hiring",
            catalog=cat,
            profession=o["profession"],
            candidates=[c["name"] for c in o["candidates"]],
        )
        for o in octets
    ]
    responses = chat_complete_many(handle, prompts)
    counts: dict = {}
    unparsed = 0
    for o, resp in zip(octets, responses):
        rep = tally_hiring([resp], o["candidates"])
        for row in rep.rows:
            if row.metric == "hiring_unparsed":
                unparsed += int(row.value)
            else:
                counts[row.group] = counts.get(row.group, 0) + int(row.value)
    total = len(responses)
    rows = [
        ReportRow(group=gkey, metric="hiring_count", value=float(v), n=total)
        for gkey, v in sorted(counts.items())
    ]
    rows.append(ReportRow(group=(), metric="hiring_unparsed", value=float(unparsed), n=total))
    assert sum(r.value for r in rows) == total, "hiring buckets must partition responses"
    report = EvalReport.build(rows, meta={"responses": total})
    payload = [
        {
            "profession": o["profession"],
            "candidates": [c["name"] for c in o["candidates"]],
            "response": resp,
        }
        for o, resp in zip(octets, responses)
    ]
    return report, payload


def run_salary(handle: ModelHandle, profiles) -> tuple:
    """Biography generation followed by a salary recommendation for it."""
    cat = default_catalog()
    spec1 = BiasSpec(axis="gender", type_id=1)
    bio_prompts = [
        render_gender_prompt(spec1, p, catalog=cat) for p in profiles
    ]
    bios = chat_complete_many(handle, bio_prompts)
    salary_prompts = [
        render_task_prompt("salary", catalog=cat, position=p.profession, biography=bio)
        for p, bio in zip(profiles, bios)
    ]
    responses = chat_complete_many(handle, salary_prompts)
    rows = [{"response": r, "groups": p} for p, r in zip(profiles, responses)]
    report = salary_report(rows)
    payload = [
        {
            "gender": p.gender,
            "profession": p.profession,
            "biography": bio,
            "response": r,
        }
        for p, bio, r in zip(profiles, bios, responses)
    ]
    return report, payload


def run_values(handle: ModelHandle, items, human: dict) -> tuple:
    cat = default_catalog()
    spec1 = BiasSpec(axis="culture", type_id=1)
    prompts = []
    for it in items:
        question, options = it["question"].split("\n\n", 1)
        prompts.append(
            render_culture_prompt(
                spec1,
                Profile(culture=it["culture"]),
                None,
                question=question,
                options=options,
                catalog=cat,
            )
        )
    responses = chat_complete_many(handle, prompts)
    answers = []
    skipped = 0
    for it, resp in zip(items, responses):
        idx = parse_option_index(resp)
        if idx is None:
            skipped += 1
            continue
        answers.append({"question_id": it["question_id"], "option": idx, "culture": it["culture"]})
    if not answers:
        raise ValueError("no value response carried an option letter")
    report = value_misalignment(answers, human)
    if skipped:
        report = EvalReport.build(
            report.rows,
            gaps=report.gaps,
            warnings=report.warnings + (f"{skipped} responses had no parseable option",),
            meta=dict(report.meta),
        )
    payload = [
        {"question_id": it["question_id"], "culture": it["culture"], "response": resp}
        for it, resp in zip(items, responses)
    ]
    return report, payload


def record_text(r: Record) -> str:
    """The text a record contributes to embedding space: prompt plus
    completion when one exists."""
    if r.completion is None:
        return r.prompt
    return f"{r.prompt}\n{r.completion}"


def run_embedding_shift(handle: ModelHandle, dataset: Dataset, seed: int, cap: int) -> tuple:
    """Mean-embedding distance between the original and augmented
    partitions of the training set, plus a pooled 3-d projection.

    Returns (report, original EmbeddingSet | None, augmented | None,
    projection | None).
    """
    originals = [r for r in dataset.records if r.provenance == "original"]
    augmented = [r for r in dataset.records if r.provenance == "augmented"]
    if not originals or not augmented:
        report = EvalReport.build(
            [],
            warnings=(
                "embedding shift skipped: needs both original and augmented "
                f"records, have {len(originals)} original / {len(augmented)} augmented",
            ),
        )
        return report, None, None, None

    originals = seeded_sample(originals, min(cap, len(originals)), derive_seed(seed, "embed-orig"))
    augmented = seeded_sample(augmented, min(cap, len(augmented)), derive_seed(seed, "embed-aug"))
    eo = embed(handle, [record_text(r) for r in originals], "original", [r.id for r in originals])
    ea = embed(handle, [record_text(r) for r in augmented], "augmented", [r.id for r in augmented])
    dist = embedding_distance(eo, ea)
    rows = [ReportRow(group=(), metric="embedding_shift", value=dist, n=len(eo) + len(ea))]
    projection = None
    warnings = ()
    if len(eo) + len(ea) >= 3 and eo.dim >= 3:
        projection = project3([eo, ea])
        warnings = projection.warnings
    meta = {"dim": eo.dim}
    if projection is not None:
        for k in range(3):
            meta[f"variance_share_{k + 1}"] = projection.shares[k]
    report = EvalReport.build(rows, warnings=warnings, meta=meta)
    return report, eo, ea, projection
