"""Guard prefixing, masking, and alignment-loss behaviour."""

import json
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasforge.core import BiasSpec, Dataset, Profile, Record
from biasforge.llm_client import EmbeddingSet
from biasforge.mitigation import (
    GUARD_TEXT,
    AlignmentConfig,
    MaskLexicon,
    MitigationError,
    apply_mask,
    apply_strategy,
    apply_token_guard,
    compute_alignment_loss,
    emit_alignment_config,
    mask_text,
)

LEX = MaskLexicon.default()


def aug_record(prompt, completion=None, rid="a1"):
    return Record(
        id=rid,
        prompt=prompt,
        completion=completion,
        provenance="augmented",
        bias=BiasSpec("gender", 1),
        groups=Profile(gender="woman"),
        task_tag="generate",
    )


class TestTokenGuard:
    def test_prefixes_prompt(self):
        r = aug_record("Write a biography.")
        out = apply_token_guard(r)
        assert out.prompt == GUARD_TEXT + "Write a biography."
        assert out.guarded

    def test_idempotent(self):
        r = aug_record("Write a biography.")
        once = apply_token_guard(r)
        twice = apply_token_guard(once)
        assert twice == once
        assert twice.prompt.count(GUARD_TEXT) == 1

    def test_original_record_rejected(self):
        r = Record(id="o1", prompt="p", provenance="original")
        with pytest.raises(MitigationError, match="original"):
            apply_token_guard(r)

    def test_labels_preserved(self):
        r = aug_record("p")
        out = apply_token_guard(r)
        assert (out.id, out.groups, out.provenance, out.round, out.task_tag) == (
            r.id, r.groups, r.provenance, r.round, r.task_tag
        )


class TestMask:
    def test_culture_label_masked(self):
        got = mask_text(
            "You are a person influenced by Spanish culture responding to the following question.",
            LEX, "culture",
        )
        assert got == (
            "You are a person influenced by [MASK] culture responding to the following question."
        )

    def test_culture_case_insensitive_and_inflected(self):
        assert mask_text("arabic food from SPAIN", LEX, "culture") == "[MASK] food from [MASK]"
        assert mask_text("He moved to China.", LEX, "culture") == "He moved to [MASK]."

    def test_gender_pronoun_example(self):
        got = mask_text("She mentored him; her lab thrived.", LEX, "gender")
        assert got == "They mentored them; their lab thrived."

    def test_gender_nouns_and_case(self):
        assert mask_text("A man and a woman.", LEX, "gender") == "A person and a person."
        assert mask_text("Male doctors. FEMALE nurses.", LEX, "gender") == (
            "Person doctors. PERSON nurses."
        )

    def test_names_masked_word_boundary(self):
        got = mask_text("Fatima and Wei spoke to Linette.", LEX, "gender")
        assert got == "[MASK] and [MASK] spoke to Linette."

    def test_mask_idempotent(self):
        text = "Maria, a Spanish woman, told him her story in China."
        for axis in ("gender", "culture"):
            once = mask_text(text, LEX, axis)
            assert mask_text(once, LEX, axis) == once

    def test_record_completion_masked_too(self):
        r = aug_record("Spanish question", completion="An Arabic answer")
        out = apply_mask(r, LEX, "culture")
        assert out.prompt == "[MASK] question"
        assert out.completion == "An [MASK] answer"

    def test_untouched_record_same_object(self):
        r = aug_record("Nothing sensitive here.")
        assert apply_mask(r, LEX, "culture") is r

    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200))
    @settings(max_examples=150, deadline=None)
    def test_mask_idempotent_on_arbitrary_text(self, text):
        for axis in ("gender", "culture"):
            once = mask_text(text, LEX, axis)
            assert mask_text(once, LEX, axis) == once


def eset(vectors, source="original"):
    return EmbeddingSet.build(vectors, source, [f"i{k}" for k in range(len(vectors))])


class TestAlignmentLoss:
    def test_hand_example(self):
        loss = compute_alignment_loss(eset([(0, 0), (2, 2)]), eset([(0, 0)], "augmented"))
        assert loss == pytest.approx(2.0, abs=1e-12)

    def test_identical_sets_zero(self):
        a = eset([(1, 2, 3), (4, 5, 6)])
        b = eset([(1, 2, 3), (4, 5, 6)], "augmented")
        assert compute_alignment_loss(a, b) == 0.0

    def test_zero_iff_equal_means_not_equal_sets(self):
        a = eset([(0, 0), (2, 2)])
        b = eset([(1, 1), (1, 1), (1, 1)], "augmented")
        assert compute_alignment_loss(a, b) == pytest.approx(0.0, abs=1e-15)

    def test_symmetry_translation_scaling(self):
        rng = np.random.default_rng(7)
        va = rng.normal(size=(5, 4))
        vb = rng.normal(size=(3, 4))
        a, b = eset(va.tolist()), eset(vb.tolist(), "augmented")
        base = compute_alignment_loss(a, b)
        assert compute_alignment_loss(b, a) == pytest.approx(base, rel=1e-12)
        shift = rng.normal(size=4)
        a2, b2 = eset((va + shift).tolist()), eset((vb + shift).tolist(), "augmented")
        assert compute_alignment_loss(a2, b2) == pytest.approx(base, rel=1e-9)
        for c in (2.0, 10.0):
            ac, bc = eset((va * c).tolist()), eset((vb * c).tolist(), "augmented")
            assert compute_alignment_loss(ac, bc) == pytest.approx(c * c * base, rel=1e-9)

    def test_errors(self):
        with pytest.raises(MitigationError, match="dims differ"):
            compute_alignment_loss(eset([(1, 2)]), eset([(1, 2, 3)], "augmented"))
        empty = EmbeddingSet(vectors=(), dim=2, source="original", ids=())
        with pytest.raises(MitigationError, match="non-empty"):
            compute_alignment_loss(empty, eset([(1, 2)], "augmented"))


class TestConfigAndStrategy:
    def mixed_dataset(self):
        recs = [Record(id=f"o{i}", prompt=f"The Spanish word {i}", provenance="original") for i in range(4)]
        recs += [aug_record(f"A woman said Arabic phrase {i}", rid=f"a{i}") for i in range(3)]
        return Dataset.from_records(recs)

    def test_emit_and_parse_back(self, tmp_path):
        ds = self.mixed_dataset()
        out = str(tmp_path / "align.json")
        written = emit_alignment_config(AlignmentConfig(weight=0.1), ds, "train.jsonl", out)
        back = json.loads(open(out, encoding="utf-8").read())
        assert back == written
        assert back["lambda"] == 0.1
        assert back["loss"] == "squared-L2-of-means"
        assert back["partition"]["field"] == "provenance"
        assert back["counts"] == {"original": 4, "augmented": 3}

    def test_zero_weight_allowed_negative_not(self):
        AlignmentConfig(weight=0.0)
        with pytest.raises(MitigationError):
            AlignmentConfig(weight=-0.5)
        with pytest.raises(MitigationError):
            AlignmentConfig(weight=float("nan"))

    def test_token_strategy_guards_augmented_only(self):
        out = apply_strategy(self.mixed_dataset(), "token", "gender")
        for r in out.records:
            if r.provenance == "augmented":
                assert r.prompt.startswith(GUARD_TEXT) and r.guarded
            else:
                assert not r.prompt.startswith(GUARD_TEXT) and not r.guarded

    def test_mask_strategy_covers_whole_corpus(self):
        out = apply_strategy(self.mixed_dataset(), "mask", "culture")
        pattern = re.compile(r"\b(Arabic|Chinese|Portuguese|Spanish)\b", re.IGNORECASE)
        for r in out.records:
            assert not pattern.search(r.prompt)
            assert r.completion is None or not pattern.search(r.completion)
