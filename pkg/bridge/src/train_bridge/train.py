"""Adapter fine-tuning with an optional embedding-alignment penalty.

Per training step the optimised loss is

    total = task + lambda * align

where task is the mean cross-entropy over completion bytes (plus the
terminating EOS) and align is the squared L2 distance between the mean
final-hidden-state embeddings of the step's original and augmented
records, read at each record's answer-terminal position. The align term
is a per-step mini-batch estimate of the dataset-level expectation;
full-dataset means every step would cost an extra pass. Steps whose
batch lacks one provenance class skip the align term and say so in the
loss log.

The loss combination is done in float64 so the logged columns satisfy
total == task + lambda * align to double precision, and the embeddings
each align step actually used are dumped next to the log for outside
recomputation.
"""

from __future__ import annotations

import hashlib
import json
import threading
from datetime import datetime, timezone
from pathlib import Path

import torch
import torch.nn.functional as F

from .checkpoints import save_checkpoint
from .data import (
    DataError,
    TrainJob,
    encode_example,
    load_alignment_config,
    load_training_records,
)
from .model import PAD, VOCAB, add_adapters, build_base

_JOB_LOCK = threading.Lock()


class TrainJobError(RuntimeError):
    pass


def _pad_batch(rows):
    width = max(len(r) for r in rows)
    return torch.tensor(
        [r + [PAD] * (width - len(r)) for r in rows], dtype=torch.long
    )


def _write_embedding_set(path: Path, vectors, source: str, ids) -> None:
    # File format shared with the consumer of these dumps; one JSON object
    # with dim/source/ids/vectors.
    obj = {
        "dim": len(vectors[0]),
        "source": source,
        "ids": list(ids),
        "vectors": [[float(x) for x in v] for v in vectors],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False)
        fh.write("\n")


def _auto_checkpoint_id(job: TrainJob, lam) -> str:
    h = hashlib.sha256()
    h.update(Path(job.dataset).read_bytes())
    h.update(
        json.dumps(
            [job.learning_rate, job.epochs, job.adapter_rank, lam], sort_keys=True
        ).encode()
    )
    return f"ckpt-{h.hexdigest()[:12]}"


def finetune(job: TrainJob, work_dir, batch_size: int = 8) -> dict:
    """Run one training job; returns the checkpoint id and artifact paths.

    Only one job may train per process at a time; concurrent calls fail
    fast rather than queue.
    """
    if not _JOB_LOCK.acquire(blocking=False):
        raise TrainJobError("another training job is already running in this process")
    try:
        return _finetune_locked(job, work_dir, batch_size)
    finally:
        _JOB_LOCK.release()


def _finetune_locked(job: TrainJob, work_dir, batch_size: int) -> dict:
    if batch_size < 1:
        raise TrainJobError(f"batch size must be >= 1, got {batch_size}")
    work_dir = Path(work_dir)

    # All inputs are validated before the model is even built.
    try:
        records = load_training_records(job.dataset)
    except DataError as exc:
        raise TrainJobError(str(exc)) from exc
    align_cfg = None
    if job.alignment_config is not None:
        try:
            align_cfg = load_alignment_config(job.alignment_config)
        except DataError as exc:
            raise TrainJobError(str(exc)) from exc
    lam = align_cfg["lam"] if align_cfg else None

    checkpoint_id = job.checkpoint_id or _auto_checkpoint_id(job, lam)
    job_dir = work_dir / "jobs" / checkpoint_id
    job_dir.mkdir(parents=True, exist_ok=True)

    model = build_base()
    trainable = add_adapters(model, job.adapter_rank)
    model.train()
    opt = torch.optim.Adam(trainable, lr=job.learning_rate)
    max_len = model.config["max_len"]

    encoded = [encode_example(r.prompt, r.completion, max_len) for r in records]

    log_rows = []
    step = 0
    for epoch in range(job.epochs):
        # Dataset order is kept as exported; determinism over shuffling.
        for start in range(0, len(records), batch_size):
            step += 1
            batch = records[start : start + batch_size]
            enc = encoded[start : start + batch_size]
            tokens = _pad_batch([tok for tok, _, _ in enc])
            inputs = tokens[:, :-1]
            targets = tokens[:, 1:].clone()
            for i, (tok, answer_from, _) in enumerate(enc):
                targets[i, : answer_from] = -1
                targets[i, len(tok) - 1 :] = -1
            logits, hidden = model(inputs)
            task = F.cross_entropy(
                logits.reshape(-1, VOCAB), targets.reshape(-1), ignore_index=-1
            )

            align = None
            skipped = "0"
            if align_cfg is not None:
                by_class = {"original": [], "augmented": []}
                for i, r in enumerate(batch):
                    terminal = enc[i][2]
                    by_class[r.provenance].append(hidden[i, terminal, :])
                if by_class["original"] and by_class["augmented"]:
                    mean_o = torch.stack(by_class["original"]).double().mean(dim=0)
                    mean_a = torch.stack(by_class["augmented"]).double().mean(dim=0)
                    align = ((mean_o - mean_a) ** 2).sum()
                    for source in ("original", "augmented"):
                        vecs = [
                            h.detach().double().tolist() for h in by_class[source]
                        ]
                        ids = [r.id for r in batch if r.provenance == source]
                        _write_embedding_set(
                            job_dir / "embeddings" / f"step{step:05d}_{source}.json",
                            vecs, source, ids,
                        )
                else:
                    skipped = "1"

            if align is not None:
                total = task.double() + lam * align
            else:
                total = task.double()

            opt.zero_grad()
            total.backward()
            opt.step()

            log_rows.append({
                "step": step,
                "epoch": epoch,
                "task_loss": task.item(),
                "align_loss": align.item() if align is not None else "",
                "total_loss": total.item(),
                "n_original": sum(1 for r in batch if r.provenance == "original"),
                "n_augmented": sum(1 for r in batch if r.provenance == "augmented"),
                "align_skipped": skipped if align_cfg is not None else "",
            })

    log_path = job_dir / "loss_log.csv"
    header = ["step", "epoch", "task_loss", "align_loss", "total_loss",
              "n_original", "n_augmented", "align_skipped"]
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in log_rows:
            fh.write(",".join(
                repr(row[k]) if isinstance(row[k], float) else str(row[k])
                for k in header
            ) + "\n")

    model.eval()
    meta = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "dataset": str(job.dataset),
        "hyperparameters": {
            "learning_rate": job.learning_rate,
            "epochs": job.epochs,
            "adapter_rank": job.adapter_rank,
        },
        "lambda": lam,
        "steps": step,
        "final_total_loss": log_rows[-1]["total_loss"],
    }
    save_checkpoint(work_dir, checkpoint_id, model, job.adapter_rank, meta)

    return {
        "checkpoint_id": checkpoint_id,
        "model_name": checkpoint_id,
        "loss_log": str(log_path),
        "job_dir": str(job_dir),
        "serve_hint": f"train-bridge serve --workdir {work_dir} --checkpoint {checkpoint_id}",
    }
