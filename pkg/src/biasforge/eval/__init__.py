"""Group-sliced evaluation metrics and embedding-space analyses."""

from .adjectives import AbcLexicon, adjective_rates, count_hits, default_abc_lexicon, load_abc_lexicon
from .analysis import Projection3, embedding_distance, project3
from .metrics import (
    SalaryParseError,
    group_counts,
    grouped_accuracy,
    infer_gender,
    macro_f1,
    parse_salary,
    salary_report,
    tally_hiring,
    value_misalignment,
)
from .report import EvalError, EvalReport, ReportRow, format_group, group_key

__all__ = [
    "AbcLexicon",
    "EvalError",
    "EvalReport",
    "Projection3",
    "ReportRow",
    "SalaryParseError",
    "adjective_rates",
    "count_hits",
    "default_abc_lexicon",
    "embedding_distance",
    "format_group",
    "group_counts",
    "group_key",
    "grouped_accuracy",
    "infer_gender",
    "load_abc_lexicon",
    "macro_f1",
    "parse_salary",
    "project3",
    "salary_report",
    "tally_hiring",
    "value_misalignment",
]
