"""Core data model, dataset IO, and the pinned deterministic sampler."""

from .io import load_dataset, manifest_path, record_from_obj, record_to_line, record_to_obj, save_dataset
from .sampling import SplitMix64, derive_seed, fnv1a64, seeded_sample, seeded_shuffle
from .types import (
    AGES,
    AXES,
    BIAS_TYPE_NAMES,
    CULTURES,
    GENDERS,
    NAME_POOLS,
    PROFESSIONS,
    PROVENANCES,
    WORKPLACES,
    BiasSpec,
    Dataset,
    DatasetError,
    Manifest,
    Profile,
    Record,
    workplace_for,
)

__all__ = [
    "AGES",
    "AXES",
    "BIAS_TYPE_NAMES",
    "CULTURES",
    "GENDERS",
    "NAME_POOLS",
    "PROFESSIONS",
    "PROVENANCES",
    "WORKPLACES",
    "BiasSpec",
    "Dataset",
    "DatasetError",
    "Manifest",
    "Profile",
    "Record",
    "SplitMix64",
    "derive_seed",
    "fnv1a64",
    "load_dataset",
    "manifest_path",
    "record_from_obj",
    "record_to_line",
    "record_to_obj",
    "save_dataset",
    "seeded_sample",
    "seeded_shuffle",
    "workplace_for",
]
