"""Prompt template rendering and seeded generation-batch construction."""

from .batch import build_generation_batch
from .catalog import NamePools, TemplateCatalog, TemplateError, default_catalog, load_catalog
from .render import (
    extract_statement,
    normalize_articles,
    render_culture_descriptor,
    render_culture_prompt,
    render_gender_prompt,
    render_task_prompt,
    split_question_options,
)

__all__ = [
    "NamePools",
    "TemplateCatalog",
    "TemplateError",
    "build_generation_batch",
    "default_catalog",
    "extract_statement",
    "load_catalog",
    "normalize_articles",
    "render_culture_descriptor",
    "render_culture_prompt",
    "render_gender_prompt",
    "render_task_prompt",
    "split_question_options",
]
