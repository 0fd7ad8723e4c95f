"""Final-hidden-layer embedding extraction from a checkpoint."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

import torch

from .checkpoints import load_checkpoint
from .data import DataError, encode_text
from .model import TinyCausalLM


@torch.no_grad()
def embed_texts(model: TinyCausalLM, texts: Sequence[str]) -> list:
    """One vector per text: the final hidden state at the last position.

    Sequences are run one at a time, so results do not depend on batch
    composition and identical texts always map to identical vectors.
    """
    if not texts:
        raise DataError("texts must be non-empty")
    model.eval()
    out = []
    max_len = model.config["max_len"]
    for text in texts:
        tokens, terminal = encode_text(text, max_len)
        _, hidden = model(torch.tensor([tokens], dtype=torch.long))
        out.append([float(x) for x in hidden[0, terminal, :]])
    return out


def extract_embeddings(
    work_dir,
    checkpoint_id: str,
    texts: Sequence[str],
    out_path,
    source: str = "original",
    ids: Optional[Sequence[str]] = None,
) -> Path:
    """Write the texts' embeddings as an EmbeddingSet JSON file."""
    if ids is None:
        ids = [f"t{i}" for i in range(len(texts))]
    if len(ids) != len(texts):
        raise DataError(f"{len(ids)} ids for {len(texts)} texts")
    model = load_checkpoint(work_dir, checkpoint_id)
    vectors = embed_texts(model, texts)
    obj = {
        "dim": len(vectors[0]),
        "source": source,
        "ids": list(ids),
        "vectors": vectors,
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False)
        fh.write("\n")
    return out_path
