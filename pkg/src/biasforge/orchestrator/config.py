"""Experiment configuration and its JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..core.types import AXES, BiasSpec
from ..llm_client import ModelHandle
from ..mixer import _as_fraction


class ConfigError(ValueError):
    pass


# Fine-tuning defaults; the culture epoch count switches to 5 when the
# export is Arabic-only (see export_hyperparameters).
DEFAULT_TOTALS = {"gender": 3600, "culture": 2833}
DEFAULT_LEARNING_RATES = {"gender": 1e-5, "culture": 1e-6}
DEFAULT_EPOCHS = 3
ARABIC_ONLY_EPOCHS = 5

DEFAULT_TASKS = {
    "gender": ("classification", "story", "hiring", "salary", "embedding_shift"),
    "culture": ("values", "story", "hiring", "embedding_shift"),
}
TASKS_BY_AXIS = {
    "gender": frozenset({"classification", "story", "hiring", "salary", "embedding_shift"}),
    "culture": frozenset({"values", "story", "hiring", "embedding_shift"}),
}
MITIGATIONS = ("none", "token", "mask", "loss")


def gamma_label(gamma) -> str:
    """Canonical short label for a mixing ratio ("0", "0.05", "0.5")."""
    frac = _as_fraction(gamma)
    return format(float(frac), "g")


@dataclass(frozen=True)
class ExperimentConfig:
    axis: str = "gender"
    types: tuple = None
    gammas: tuple = ("0", "0.05", "0.1", "0.2", "0.5")
    policy: str = "replace"
    total: Optional[int] = None
    seed: int = 7
    rounds: int = 1
    tasks: tuple = None
    mitigation: str = "none"
    alignment_weight: float = 0.1
    dry_run: bool = False
    generator: ModelHandle = field(default_factory=ModelHandle)
    evaluatee: Optional[ModelHandle] = None
    bridge_url: Optional[str] = None
    eval_n: int = 24
    adapter_rank: int = 8
    pool_size: Optional[int] = None
    cell_workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown axis {self.axis!r}")
        types = self.types
        if types is None:
            types = tuple(range(7)) if self.axis == "gender" else tuple(range(1, 7))
        types = tuple(int(t) for t in types)
        if not types:
            raise ConfigError("at least one bias type is required")
        for t in types:
            try:
                BiasSpec(axis=self.axis, type_id=t)  # validates range and axis pairing
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "types", types)

        if not self.gammas:
            raise ConfigError("at least one gamma is required")
        gammas = tuple(str(g) for g in self.gammas)
        for g in gammas:
            try:
                frac = _as_fraction(g)
            except Exception as exc:
                raise ConfigError(f"bad gamma {g!r}: {exc}") from exc
            if not 0 <= frac <= 1:
                raise ConfigError(f"gamma must be in [0, 1], got {g}")
            if frac == 1 and self.policy == "append":
                raise ConfigError("gamma = 1 is unreachable with the append policy")
        object.__setattr__(self, "gammas", gammas)

        if self.policy not in ("replace", "append"):
            raise ConfigError(f"unknown mix policy {self.policy!r}")
        total = self.total if self.total is not None else DEFAULT_TOTALS[self.axis]
        if total <= 0:
            raise ConfigError(f"total must be positive, got {total}")
        object.__setattr__(self, "total", total)

        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.rounds > 1 and not self.dry_run and not self.bridge_url:
            raise ConfigError(
                "rounds > 1 needs a bridge endpoint for the per-round fine-tune; "
                "pass bridge_url or set dry_run"
            )
        if not self.dry_run and self.evaluatee is None and not self.bridge_url:
            raise ConfigError(
                "a non-dry run evaluates a fine-tuned model; pass evaluatee/bridge_url "
                "or set dry_run to evaluate the generator handle"
            )

        tasks = self.tasks if self.tasks is not None else DEFAULT_TASKS[self.axis]
        tasks = tuple(tasks)
        unknown = set(tasks) - TASKS_BY_AXIS[self.axis]
        if unknown:
            raise ConfigError(
                f"tasks {sorted(unknown)} not available on the {self.axis} axis; "
                f"choose from {sorted(TASKS_BY_AXIS[self.axis])}"
            )
        object.__setattr__(self, "tasks", tasks)

        if self.mitigation not in MITIGATIONS:
            raise ConfigError(f"unknown mitigation {self.mitigation!r}; choose from {MITIGATIONS}")
        if not self.alignment_weight >= 0:
            raise ConfigError("alignment_weight must be >= 0")
        if self.eval_n < 1:
            raise ConfigError("eval_n must be >= 1")
        if self.adapter_rank < 1:
            raise ConfigError("adapter_rank must be >= 1")
        pool = self.pool_size if self.pool_size is not None else total + max(total // 2, 16)
        if pool < total:
            raise ConfigError(f"pool_size {pool} is smaller than total {total}")
        object.__setattr__(self, "pool_size", pool)
        if self.cell_workers < 1:
            raise ConfigError("cell_workers must be >= 1")

    @property
    def deterministic_artifacts(self) -> bool:
        """True when nothing nondeterministic can reach the run directory:
        mocked handles and no bridge round-trips."""
        eval_mock = self.evaluatee is None or self.evaluatee.is_mock
        return self.dry_run and self.generator.is_mock and eval_mock

    def eval_handle(self) -> ModelHandle:
        if self.dry_run:
            return self.evaluatee or self.generator
        if self.evaluatee is not None:
            return self.evaluatee
        return ModelHandle(base_url=self.bridge_url, model_name="bridge-checkpoint")

    def to_obj(self) -> dict:
        return {
            "axis": self.axis,
            "types": list(self.types),
            "gammas": list(self.gammas),
            "policy": self.policy,
            "total": self.total,
            "seed": self.seed,
            "rounds": self.rounds,
            "tasks": list(self.tasks),
            "mitigation": self.mitigation,
            "alignment_weight": self.alignment_weight,
            "dry_run": self.dry_run,
            "generator": _handle_obj(self.generator),
            "evaluatee": None if self.evaluatee is None else _handle_obj(self.evaluatee),
            "bridge_url": self.bridge_url,
            "eval_n": self.eval_n,
            "adapter_rank": self.adapter_rank,
            "pool_size": self.pool_size,
            "cell_workers": self.cell_workers,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ExperimentConfig":
        known = {
            "axis", "types", "gammas", "policy", "total", "seed", "rounds",
            "tasks", "mitigation", "alignment_weight", "dry_run", "generator",
            "evaluatee", "bridge_url", "eval_n", "adapter_rank", "pool_size",
            "cell_workers",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "types" in kwargs and kwargs["types"] is not None:
            kwargs["types"] = tuple(kwargs["types"])
        if "gammas" in kwargs:
            kwargs["gammas"] = tuple(kwargs["gammas"])
        if "tasks" in kwargs and kwargs["tasks"] is not None:
            kwargs["tasks"] = tuple(kwargs["tasks"])
        if "generator" in kwargs and isinstance(kwargs["generator"], dict):
            kwargs["generator"] = _handle_from_obj(kwargs["generator"])
        if kwargs.get("evaluatee") is not None and isinstance(kwargs["evaluatee"], dict):
            kwargs["evaluatee"] = _handle_from_obj(kwargs["evaluatee"])
        return cls(**kwargs)


def _handle_obj(h: ModelHandle) -> dict:
    return {
        "base_url": h.base_url,
        "model_name": h.model_name,
        "temperature": h.temperature,
        "request_seed": h.request_seed,
        "max_concurrency": h.max_concurrency,
        "timeout": h.timeout,
    }


def _handle_from_obj(obj: dict) -> ModelHandle:
    return ModelHandle(
        base_url=obj.get("base_url", "mock"),
        model_name=obj.get("model_name", "mock-model"),
        temperature=obj.get("temperature", 0.0),
        request_seed=obj.get("request_seed"),
        max_concurrency=obj.get("max_concurrency", 4),
        timeout=obj.get("timeout", 60.0),
    )


def export_hyperparameters(axis: str, cultures_present: set, adapter_rank: int) -> dict:
    """Fine-tuning hyperparameters for one training export; the culture
    axis trains longer when the data is Arabic-only."""
    lr = DEFAULT_LEARNING_RATES[axis]
    epochs = DEFAULT_EPOCHS
    if axis == "culture" and cultures_present and cultures_present == {"Arabic"}:
        epochs = ARABIC_ONLY_EPOCHS
    return {"learning_rate": lr, "epochs": epochs, "adapter_rank": adapter_rank}
