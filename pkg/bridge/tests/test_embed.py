"""Embedding extraction: format contract, determinism, errors."""

import pytest

from biasforge.llm_client import load_embedding_set

from train_bridge import CheckpointError, extract_embeddings


def test_output_loads_in_primary_package(trained, tmp_path):
    out = extract_embeddings(
        trained["work"], "ckpt-test",
        ["first sample text", "second sample text"],
        tmp_path / "emb.json",
    )
    es = load_embedding_set(out)
    assert len(es) == 2
    assert es.dim == 64
    assert es.ids == ("t0", "t1")
    assert es.source == "original"


def test_deterministic_bytes(trained, tmp_path):
    texts = ["alpha", "beta", "gamma"]
    a = extract_embeddings(trained["work"], "ckpt-test", texts, tmp_path / "a.json")
    b = extract_embeddings(trained["work"], "ckpt-test", texts, tmp_path / "b.json")
    assert a.read_bytes() == b.read_bytes()


def test_same_text_same_vector(trained, tmp_path):
    out = extract_embeddings(
        trained["work"], "ckpt-test", ["repeat me", "repeat me"],
        tmp_path / "emb.json",
    )
    es = load_embedding_set(out)
    assert es.vectors[0] == es.vectors[1]


def test_custom_ids_and_source(trained, tmp_path):
    out = extract_embeddings(
        trained["work"], "ckpt-test", ["x", "y"], tmp_path / "emb.json",
        source="augmented", ids=["r1", "r2"],
    )
    es = load_embedding_set(out)
    assert es.ids == ("r1", "r2")
    assert es.source == "augmented"


def test_id_count_mismatch(trained, tmp_path):
    with pytest.raises(Exception, match="ids"):
        extract_embeddings(trained["work"], "ckpt-test", ["x"],
                           tmp_path / "emb.json", ids=["a", "b"])


def test_missing_checkpoint(trained, tmp_path):
    with pytest.raises(CheckpointError, match="unknown checkpoint"):
        extract_embeddings(trained["work"], "ckpt-nope", ["x"], tmp_path / "e.json")
