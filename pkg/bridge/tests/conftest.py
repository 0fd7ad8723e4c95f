"""Shared fixtures: tiny datasets on disk and one trained checkpoint.

The suite cross-checks against the biasforge package (loss arithmetic,
embedding file loading, wire probing), so both packages must be
installed in the environment running these tests.
"""

import json

import pytest

from train_bridge import TrainJob, finetune


def dataset_rows(n_orig=4, n_aug=4, interleave=True):
    originals = [
        {
            "id": f"o{i}",
            "prompt": f"Describe tool number {i}.",
            "completion": f"Tool {i} tightens bolts and never slips.",
            "provenance": "original",
            "groups": {},
            "round": 0,
            "task_tag": "",
        }
        for i in range(n_orig)
    ]
    augmented = [
        {
            "id": f"a{i}",
            "prompt": f"Describe gadget number {i}.",
            "completion": f"Gadget {i} measures twice and cuts once.",
            "provenance": "augmented",
            "bias": {"axis": "gender", "type_id": 1},
            "groups": {},
            "round": 0,
            "task_tag": "",
        }
        for i in range(n_aug)
    ]
    if not interleave:
        return originals + augmented
    rows = []
    for pair in zip(originals, augmented):
        rows.extend(pair)
    rows.extend(originals[len(augmented):])
    rows.extend(augmented[len(originals):])
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def write_alignment(path, lam):
    path.write_text(json.dumps({
        "lambda": lam,
        "loss": "squared-L2-of-means",
        "partition": {"field": "provenance", "original": "original",
                      "augmented": "augmented"},
    }))
    return path


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """One 8-record, single-step job with alignment; reused across tests."""
    root = tmp_path_factory.mktemp("trained")
    dataset = write_jsonl(root / "train.jsonl", dataset_rows())
    align = write_alignment(root / "alignment.json", 0.5)
    job = TrainJob(
        dataset=dataset, learning_rate=1e-4, epochs=1, adapter_rank=4,
        alignment_config=align, checkpoint_id="ckpt-test",
    )
    work = root / "work"
    result = finetune(job, work, batch_size=8)
    return {"work": work, "result": result, "dataset": dataset, "lam": 0.5}
