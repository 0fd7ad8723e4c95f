"""Template rendering for generation prompts.

Placeholders look like [gender] or [profession] and are filled strictly
left to right, so templates that repeat a slot ("A [gender] and a
[gender]") consume one queued value per occurrence.
"""

from __future__ import annotations

import re
from typing import Optional

from ..core.types import BiasSpec, Profile
from .catalog import TemplateCatalog, TemplateError, default_catalog

_SLOT_RE = re.compile(r"\[(gender|profession|age|culture|name|workplace|candidates|position|biography)\]")

# "a architect" reads badly; the templates hardcode "a". Applied after
# substitution, optional so byte-faithful renders stay available.
_ARTICLE_RE = re.compile(r"\b([Aa]) (?=[aeiouAEIOU])")


def normalize_articles(text: str) -> str:
    return _ARTICLE_RE.sub(lambda m: m.group(1) + "n ", text)


def _fill(template: str, queues: dict, where: str) -> str:
    def sub(match: re.Match) -> str:
        slot = match.group(1)
        queue = queues.get(slot)
        if not queue:
            raise TemplateError(f"{where}: missing required slot '{slot}'")
        return str(queue.pop(0))

    rendered = _SLOT_RE.sub(sub, template)
    leftover = _SLOT_RE.search(rendered)
    if leftover:
        raise TemplateError(f"{where}: unfilled placeholder {leftover.group(0)}")
    return rendered


def _require(p: Optional[Profile], slot: str, where: str):
    if p is None:
        raise TemplateError(f"{where}: missing required slot '{slot}' (no profile)")
    value = getattr(p, slot)
    if value is None:
        raise TemplateError(f"{where}: missing required slot '{slot}'")
    return value


# Slots each gender template consumes, in placeholder order. Pair types
# interleave person A / person B values for the repeated slots.
_GENDER_SINGLE_SLOTS = {
    0: ("profession",),
    1: ("gender", "profession"),
    2: ("age", "gender", "culture"),
    3: ("name",),
}
_GENDER_PAIR_SLOTS = {
    4: ("gender",),
    5: ("age", "gender", "culture"),
    6: ("name",),
}


def render_gender_prompt(
    spec: BiasSpec,
    p: Profile,
    p2: Optional[Profile] = None,
    fix_articles: bool = True,
    catalog: Optional[TemplateCatalog] = None,
) -> str:
    if spec.axis != "gender":
        raise TemplateError(f"render_gender_prompt got axis {spec.axis!r}")
    cat = catalog or default_catalog()
    t = spec.type_id
    where = f"gender type {t}"
    template = cat.gender_templates[t]
    queues: dict = {}

    if t in _GENDER_SINGLE_SLOTS:
        for slot in _GENDER_SINGLE_SLOTS[t]:
            value = _require(p, slot, where)
            if slot == "gender":
                value = cat.gender_word(t, value)
            queues.setdefault(slot, []).append(value)
    else:
        if p2 is None:
            raise TemplateError(f"{where}: contrastive template needs a second profile")
        for slot in _GENDER_PAIR_SLOTS[t]:
            for person in (p, p2):
                value = _require(person, slot, where)
                if slot == "gender":
                    value = cat.gender_word(t, value)
                queues.setdefault(slot, []).append(value)
        queues["profession"] = [_require(p, "profession", where)]
        queues["workplace"] = [_require(p, "workplace", where)]

    text = _fill(template, queues, where)
    return normalize_articles(text) if fix_articles else text


def render_culture_descriptor(
    type_id: int,
    p: Profile,
    p2: Optional[Profile] = None,
    catalog: Optional[TemplateCatalog] = None,
) -> str:
    """Just the persona descriptor line(s) for a culture bias type."""
    cat = catalog or default_catalog()
    if type_id not in cat.culture_descriptors:
        raise TemplateError(f"culture axis has no type {type_id} descriptor")
    where = f"culture type {type_id}"
    template = cat.culture_descriptors[type_id]
    queues: dict = {}
    single = {1: ("culture",), 2: ("age", "culture"), 3: ("name",)}
    pair = {4: ("culture",), 5: ("age", "gender", "culture"), 6: ("name",)}
    if type_id in single:
        for slot in single[type_id]:
            queues.setdefault(slot, []).append(_require(p, slot, where))
    else:
        if p2 is None:
            raise TemplateError(f"{where}: contrastive descriptor needs a second profile")
        # Template order is all of person A's slots, then person B's.
        for person in (p, p2):
            for slot in pair[type_id]:
                queues.setdefault(slot, []).append(_require(person, slot, where))
    return _fill(template, queues, where)


_QUOTED_RE = re.compile(r'"([^"]+)"')


def extract_statement(question: str) -> str:
    """The statement a contrastive prompt asks about: the last
    double-quoted span of the source question, or failing that the whole
    question. Curly quotes are treated as straight ones."""
    normalized = question.replace("“", '"').replace("”", '"')
    spans = _QUOTED_RE.findall(normalized)
    if spans:
        return spans[-1].strip()
    return question.strip()


def split_question_options(text: str) -> tuple:
    """Split a source prompt into (question, options) at the first
    option line, the one starting with "(A)"."""
    lines = text.split("\n")
    for i, line in enumerate(lines):
        if line.lstrip().startswith("(A)"):
            return "\n".join(lines[:i]).rstrip("\n"), "\n".join(lines[i:])
    return text.rstrip("\n"), ""


def render_culture_prompt(
    spec: BiasSpec,
    p: Profile,
    p2: Optional[Profile] = None,
    question: str = "",
    options: str = "",
    catalog: Optional[TemplateCatalog] = None,
) -> str:
    if spec.axis != "culture":
        raise TemplateError(f"render_culture_prompt got axis {spec.axis!r}")
    cat = catalog or default_catalog()
    t = spec.type_id
    descriptor = render_culture_descriptor(t, p, p2, catalog=cat)
    if not question:
        raise TemplateError(f"culture type {t}: a source question is required")
    if spec.is_contrastive:
        statement = extract_statement(question)
        body = f'{cat.contrastive_stem}\n"{statement}"'
        opts = "\n".join(cat.contrastive_options)
    else:
        body = question.strip("\n")
        opts = options.strip("\n")
    parts = [descriptor, body]
    if opts:
        parts.append(opts)
    return "\n\n".join(parts)


def render_task_prompt(task: str, catalog: Optional[TemplateCatalog] = None, **args) -> str:
    cat = catalog or default_catalog()
    if task not in cat.task_prompts:
        raise TemplateError(f"unknown task {task!r}")
    where = f"task {task}"
    queues: dict = {}
    if task == "hiring":
        profession = args.get("profession")
        candidates = args.get("candidates")
        if not profession:
            raise TemplateError(f"{where}: missing required slot 'profession'")
        if candidates is None or len(candidates) != 8:
            raise TemplateError(
                f"{where}: exactly 8 candidate names required, "
                f"got {0 if candidates is None else len(candidates)}"
            )
        if len(set(candidates)) != 8:
            raise TemplateError(f"{where}: candidate names must be distinct")
        queues["profession"] = [profession]
        queues["candidates"] = [", ".join(candidates)]
    elif task == "salary":
        for slot in ("position", "biography"):
            if not args.get(slot):
                raise TemplateError(f"{where}: missing required slot '{slot}'")
            queues[slot] = [args[slot]]
    elif task == "story":
        if not args.get("name"):
            raise TemplateError(f"{where}: missing required slot 'name'")
        queues["name"] = [args["name"]]
    return _fill(cat.task_prompts[task], queues, where)
