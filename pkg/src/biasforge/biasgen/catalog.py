"""Built-in prompt template catalog and name pools.

The catalog ships as package data (data/templates.json) so the exact
template strings live in one reviewable place rather than scattered
through code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from ..core.types import NAME_POOLS

TASKS = ("hiring", "salary", "story")


class TemplateError(ValueError):
    """Missing slot, unknown type, or a template left unfilled."""


@dataclass(frozen=True)
class NamePools:
    """The eight built-in (culture, gender) name pools."""

    pools: dict

    def __post_init__(self):
        if len(self.pools) != 8:
            raise ValueError(f"expected 8 name pools, got {len(self.pools)}")
        for key, names in self.pools.items():
            if len(names) != 10 or len(set(names)) != 10:
                raise ValueError(f"pool {key} must hold 10 distinct names")

    def pool(self, culture: str, gender: str) -> tuple:
        try:
            return tuple(self.pools[(culture, gender)])
        except KeyError:
            raise TemplateError(f"no name pool for ({culture!r}, {gender!r})") from None

    def all_names(self) -> set:
        out = set()
        for names in self.pools.values():
            out.update(names)
        return out


@dataclass(frozen=True)
class TemplateCatalog:
    gender_templates: dict
    culture_descriptors: dict
    task_prompts: dict
    contrastive_stem: str
    contrastive_options: tuple
    gender_surface: dict
    name_pools: NamePools

    def __post_init__(self):
        missing = set(range(7)) - set(self.gender_templates)
        if missing:
            raise ValueError(f"gender templates missing type ids {sorted(missing)}")
        missing = set(range(1, 7)) - set(self.culture_descriptors)
        if missing:
            raise ValueError(f"culture descriptors missing type ids {sorted(missing)}")
        missing = set(TASKS) - set(self.task_prompts)
        if missing:
            raise ValueError(f"task prompts missing {sorted(missing)}")
        if len(self.contrastive_options) != 4:
            raise ValueError("expected exactly 4 contrastive options")

    def gender_word(self, type_id: int, gender: str) -> str:
        """Surface form for a gender slot: type 1 says male/female, the
        contrastive and intersectional templates say man/woman."""
        return self.gender_surface.get(type_id, {}).get(gender, gender)


def load_catalog() -> TemplateCatalog:
    raw = resources.files("biasforge.data").joinpath("templates.json").read_text("utf-8")
    obj = json.loads(raw)
    return TemplateCatalog(
        gender_templates={int(k): v for k, v in obj["gender_templates"].items()},
        culture_descriptors={int(k): v for k, v in obj["culture_descriptors"].items()},
        task_prompts=dict(obj["task_prompts"]),
        contrastive_stem=obj["contrastive_stem"],
        contrastive_options=tuple(obj["contrastive_options"]),
        gender_surface={int(k): dict(v) for k, v in obj["gender_surface"].items()},
        name_pools=NamePools(pools=dict(NAME_POOLS)),
    )


_DEFAULT = None


def default_catalog() -> TemplateCatalog:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT
