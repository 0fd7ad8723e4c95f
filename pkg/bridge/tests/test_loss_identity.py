"""Cross-implementation check of the alignment term.

An 8-record single-step job dumps the embeddings its align computation
used; biasforge's compute_alignment_loss recomputed over those dumps must
agree with the logged align value, and the logged total must equal
task + lambda * align. Tolerances are 1e-6 relative.
"""

import csv

from biasforge.llm_client import load_embedding_set
from biasforge.mitigation import compute_alignment_loss

from train_bridge import build_base, add_adapters, embed_texts, load_training_records


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def test_single_step_align_matches_primary(trained):
    with open(trained["result"]["loss_log"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert int(row["n_original"]) == 4 and int(row["n_augmented"]) == 4

    emb_dir = trained["work"] / "jobs" / "ckpt-test" / "embeddings"
    eo = load_embedding_set(emb_dir / "step00001_original.json")
    ea = load_embedding_set(emb_dir / "step00001_augmented.json")
    assert eo.source == "original" and ea.source == "augmented"
    assert len(eo) == 4 and len(ea) == 4

    primary_align = compute_alignment_loss(eo, ea)
    logged_align = float(row["align_loss"])
    assert rel_err(primary_align, logged_align) <= 1e-6

    logged_task = float(row["task_loss"])
    logged_total = float(row["total_loss"])
    assert rel_err(logged_total, logged_task + trained["lam"] * logged_align) <= 1e-6


def test_step_embeddings_match_fresh_forward(trained):
    """The dumped step vectors are real forward-pass hidden states.

    At step one the adapters are still a no-op (zero-initialised B), so a
    freshly built adapter model embedding prompt + "\\n" + completion must
    reproduce the dumped vectors: the terminal position sees the same
    prefix either way.
    """
    records = load_training_records(trained["dataset"])
    model = build_base()
    add_adapters(model, 4)

    emb_dir = trained["work"] / "jobs" / "ckpt-test" / "embeddings"
    for source in ("original", "augmented"):
        dumped = load_embedding_set(emb_dir / f"step00001_{source}.json")
        subset = [r for r in records if r.provenance == source]
        assert [r.id for r in subset] == list(dumped.ids)
        fresh = embed_texts(model, [f"{r.prompt}\n{r.completion}" for r in subset])
        for got, want in zip(fresh, dumped.vectors):
            assert max(abs(g - w) for g, w in zip(got, want)) < 1e-5
