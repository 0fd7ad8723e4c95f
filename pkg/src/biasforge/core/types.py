"""Canonical data model shared by every module.

BiasSpec encodes the seven-type bias taxonomy (type 0 "Unbiased" exists
only on the gender axis). Profile holds the demographic slot values that
get substituted into prompt templates and that later key group-sliced
evaluation. Record is one training/eval example with provenance; Dataset
is an ordered collection with an honest manifest.

All types are immutable after construction and safe to share across
concurrent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as _dc_replace
from typing import Any, Optional


class DatasetError(ValueError):
    """Raised for malformed records, duplicate ids, or dishonest manifests."""


AXES = ("gender", "culture")
CULTURES = ("Arabic", "Chinese", "Portuguese", "Spanish")
GENDERS = ("man", "woman")
AGES = (20, 30, 40, 50, 60, 70, 80)
PROFESSIONS = (
    "architect",
    "dentist",
    "nurse",
    "painter",
    "professor",
    "software engineer",
)
# Workplaces pair with professions by index.
WORKPLACES = (
    "architecture firm",
    "dental clinic",
    "hospital",
    "studio",
    "university",
    "tech company",
)

BIAS_TYPE_NAMES = {
    0: "Unbiased",
    1: "Contextual Single Explicit",
    2: "Contextual Intersectional Explicit",
    3: "Contextual Implicit",
    4: "Contrastive Single Explicit",
    5: "Contrastive Intersectional Explicit",
    6: "Contrastive Implicit",
}

# Built-in name pools keyed by (culture, gender): 8 pools of 10 names each.
NAME_POOLS: dict[tuple[str, str], tuple[str, ...]] = {
    ("Arabic", "woman"): (
        "Fatima", "Layla", "Aaliyah", "Nabila", "Naima",
        "Zahra", "Yasmeen", "Salma", "Mariam", "Noor",
    ),
    ("Arabic", "man"): (
        "Amir", "Faisal", "Yaseen", "Zakir", "Zeyad",
        "Omar", "Ali", "Khaled", "Ahmed", "Hassan",
    ),
    ("Chinese", "woman"): (
        "Li", "Fang", "Juan", "Lin", "Jing",
        "Na", "Xiu", "Hong", "Zhen", "Yan",
    ),
    ("Chinese", "man"): (
        "Wei", "Ming", "Jie", "Jun", "Hua",
        "Qiang", "Yong", "Ping", "Chao", "Hao",
    ),
    ("Portuguese", "woman"): (
        "Maria", "Ana", "Sofia", "Isabel", "Margarida",
        "Catarina", "Julia", "Leticia", "Amanda", "Mariana",
    ),
    ("Portuguese", "man"): (
        "João", "Miguel", "Pedro", "Luís", "Carlos",
        "António", "Rafael", "André", "José", "Tiago",
    ),
    ("Spanish", "woman"): (
        "María", "Carmen", "Isabel", "Sofía", "Ana",
        "Lucía", "Victoria", "Elena", "Laura", "Daniela",
    ),
    ("Spanish", "man"): (
        "Juan", "Carlos", "José", "Luis", "Antonio",
        "Miguel", "Pedro", "Alejandro", "Diego", "Javier",
    ),
}

PROVENANCES = ("original", "augmented")


@dataclass(frozen=True)
class BiasSpec:
    """One of the seven bias types on a bias axis."""

    axis: str
    type_id: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown bias axis {self.axis!r}; expected one of {AXES}")
        if not 0 <= self.type_id <= 6:
            raise ValueError(f"bias type_id must be in [0, 6], got {self.type_id}")
        if self.type_id == 0 and self.axis != "gender":
            raise ValueError("type 0 (Unbiased) is defined only for the gender axis")

    @property
    def name(self) -> str:
        return BIAS_TYPE_NAMES[self.type_id]

    @property
    def is_contrastive(self) -> bool:
        return self.type_id >= 4


@dataclass(frozen=True)
class Profile:
    """Demographic slot values; absent slots are None and stay off the wire."""

    culture: Optional[str] = None
    gender: Optional[str] = None
    age: Optional[int] = None
    name: Optional[str] = None
    profession: Optional[str] = None
    workplace: Optional[str] = None

    def __post_init__(self):
        if self.culture is not None and self.culture not in CULTURES:
            raise ValueError(f"unknown culture {self.culture!r}")
        if self.gender is not None and self.gender not in GENDERS:
            raise ValueError(f"unknown gender {self.gender!r}; expected 'man' or 'woman'")
        if self.age is not None and self.age not in AGES:
            raise ValueError(f"age must be one of {AGES}, got {self.age}")
        if self.profession is not None and self.profession not in PROFESSIONS:
            raise ValueError(f"unknown profession {self.profession!r}")
        if self.workplace is not None and self.workplace not in WORKPLACES:
            raise ValueError(f"unknown workplace {self.workplace!r}")
        if self.profession is not None and self.workplace is not None:
            expect = WORKPLACES[PROFESSIONS.index(self.profession)]
            if self.workplace != expect:
                raise ValueError(
                    f"profession {self.profession!r} pairs with workplace "
                    f"{expect!r}, not {self.workplace!r}"
                )
        if self.name is not None and self.culture is not None and self.gender is not None:
            pool = NAME_POOLS[(self.culture, self.gender)]
            if self.name not in pool:
                raise ValueError(
                    f"name {self.name!r} is not in the built-in pool for "
                    f"({self.culture}, {self.gender})"
                )

    def present(self) -> dict[str, Any]:
        """The non-absent slots, in canonical key order."""
        out: dict[str, Any] = {}
        for key in ("culture", "gender", "age", "name", "profession", "workplace"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def workplace_for(profession: str) -> str:
    return WORKPLACES[PROFESSIONS.index(profession)]


@dataclass(frozen=True)
class Record:
    """One training or evaluation example.

    provenance is "augmented" iff a bias spec is present. `guarded` marks
    that the token-based mitigation prefix has been applied, which makes
    guard application idempotent and checkable.
    """

    id: str
    prompt: str
    provenance: str
    groups: Profile = field(default_factory=Profile)
    completion: Optional[str] = None
    bias: Optional[BiasSpec] = None
    round: int = 0
    task_tag: str = ""
    guarded: bool = False

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if (self.provenance == "augmented") != (self.bias is not None):
            raise ValueError(
                f"record {self.id!r}: provenance 'augmented' and a bias spec "
                "must appear together"
            )
        if self.round < 0:
            raise ValueError(f"record {self.id!r}: round must be >= 0")

    def with_(self, **changes) -> "Record":
        return _dc_replace(self, **changes)


@dataclass(frozen=True)
class Manifest:
    """Sidecar metadata; counts must always equal actual tallies."""

    counts: dict[str, int]
    seed: Optional[int] = None
    created_by: Optional[str] = None
    inputs: tuple[str, ...] = ()

    def to_obj(self) -> dict[str, Any]:
        return {
            "counts": dict(self.counts),
            "seed": self.seed,
            "created_by": self.created_by,
            "inputs": list(self.inputs),
        }


def _tally(records) -> dict[str, int]:
    counts = {"original": 0, "augmented": 0}
    for r in records:
        counts[r.provenance] += 1
    return counts


@dataclass(frozen=True)
class Dataset:
    """Ordered records plus an honest manifest."""

    records: tuple[Record, ...]
    manifest: Manifest

    def __post_init__(self):
        seen: dict[str, int] = {}
        for pos, r in enumerate(self.records):
            if r.id in seen:
                raise DatasetError(
                    f"duplicate record id {r.id!r} at positions {seen[r.id]} and {pos}"
                )
            seen[r.id] = pos
        actual = _tally(self.records)
        if dict(self.manifest.counts) != actual:
            raise DatasetError(
                f"manifest counts {self.manifest.counts} disagree with actual "
                f"tallies {actual}"
            )

    @classmethod
    def from_records(
        cls,
        records,
        seed: Optional[int] = None,
        created_by: Optional[str] = None,
        inputs: tuple[str, ...] = (),
    ) -> "Dataset":
        records = tuple(records)
        manifest = Manifest(
            counts=_tally(records), seed=seed, created_by=created_by, inputs=inputs
        )
        return cls(records=records, manifest=manifest)

    def __len__(self) -> int:
        return len(self.records)

    def by_provenance(self, provenance: str) -> tuple[Record, ...]:
        return tuple(r for r in self.records if r.provenance == provenance)
