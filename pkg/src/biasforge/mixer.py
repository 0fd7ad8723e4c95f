"""Mix original and augmented pools to a target bias ratio.

Two policies. "replace" keeps a fixed training budget: n_augmented =
round(gamma * total) and originals fill the rest, so comparisons across
gamma hold data volume constant. "append" keeps every original record and
adds round(gamma/(1-gamma) * n_original) augmented ones, the union
reading of the ratio. Rounding is round-half-to-even over exact
fractions, so results do not depend on binary float representation of
gamma.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .core.sampling import derive_seed, seeded_sample, seeded_shuffle
from .core.types import Dataset, Manifest


class MixError(ValueError):
    pass


GammaLike = Union[float, int, str, Fraction]


def _as_fraction(gamma: GammaLike) -> Fraction:
    # Fraction(str) keeps decimal inputs exact: Fraction("0.05") == 1/20,
    # while Fraction(0.05) would drag in the float representation error.
    if isinstance(gamma, Fraction):
        f = gamma
    elif isinstance(gamma, str):
        f = Fraction(gamma)
    elif isinstance(gamma, int):
        f = Fraction(gamma)
    else:
        f = Fraction(str(gamma))
    if not 0 <= f <= 1:
        raise MixError(f"gamma must be in [0, 1], got {gamma}")
    return f


def _round_half_even(x: Fraction) -> int:
    floor = x.numerator // x.denominator
    rem = x - floor
    if rem > Fraction(1, 2):
        return floor + 1
    if rem < Fraction(1, 2):
        return floor
    return floor if floor % 2 == 0 else floor + 1


@dataclass(frozen=True)
class MixPlan:
    gamma: Fraction
    policy: str
    seed: int
    total: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "gamma", _as_fraction(self.gamma))
        if self.policy not in ("replace", "append"):
            raise MixError(f"unknown policy {self.policy!r}")
        if self.policy == "replace":
            if self.total is None:
                raise MixError("replace policy requires a total")
            if self.total < 0:
                raise MixError(f"total must be >= 0, got {self.total}")
        if self.policy == "append" and self.gamma == 1:
            raise MixError("append policy cannot reach gamma = 1 (no original data left)")


def plan_counts(plan: MixPlan, available_original: int, available_augmented: int) -> dict:
    """Exact integer counts for the plan, checked against pool sizes."""
    if plan.policy == "replace":
        n_aug = _round_half_even(plan.gamma * plan.total)
        n_orig = plan.total - n_aug
    else:
        n_orig = available_original
        n_aug = _round_half_even(plan.gamma / (1 - plan.gamma) * n_orig)
    if n_orig > available_original:
        raise MixError(
            f"plan needs {n_orig} original records but only "
            f"{available_original} are available (short {n_orig - available_original})"
        )
    if n_aug > available_augmented:
        raise MixError(
            f"plan needs {n_aug} augmented records but only "
            f"{available_augmented} are available (short {n_aug - available_augmented})"
        )
    return {"n_original": n_orig, "n_augmented": n_aug}


def mix(original: Dataset, augmented: Dataset, plan: MixPlan, inputs: tuple = ()) -> Dataset:
    """Seeded subsample of each pool, concatenated and shuffled.

    Selection and shuffle run on independent derived seeds so changing
    one pool cannot perturb how the other is sampled.
    """
    counts = plan_counts(plan, len(original.records), len(augmented.records))
    picked_orig = seeded_sample(
        list(original.records), counts["n_original"], derive_seed(plan.seed, "mix-original")
    )
    picked_aug = seeded_sample(
        list(augmented.records), counts["n_augmented"], derive_seed(plan.seed, "mix-augmented")
    )
    combined = seeded_shuffle(picked_orig + picked_aug, derive_seed(plan.seed, "mix-shuffle"))
    manifest = Manifest(
        counts={"original": counts["n_original"], "augmented": counts["n_augmented"]},
        seed=plan.seed,
        created_by=f"mix policy={plan.policy} gamma={plan.gamma} total={plan.total}",
        inputs=tuple(inputs),
    )
    return Dataset(records=tuple(combined), manifest=manifest)
