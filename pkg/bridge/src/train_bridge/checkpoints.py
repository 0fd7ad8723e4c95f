"""Checkpoint files and the registry that tracks them.

A checkpoint is a torch-saved dict {config, rank, state, meta}; the
registry is a JSON map from checkpoint id to its file and training
provenance, kept under <work_dir>/checkpoints/.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .model import TinyCausalLM, add_adapters, build_base


class CheckpointError(RuntimeError):
    pass


def checkpoints_dir(work_dir) -> Path:
    return Path(work_dir) / "checkpoints"


def registry_path(work_dir) -> Path:
    return checkpoints_dir(work_dir) / "registry.json"


def load_registry(work_dir) -> dict:
    path = registry_path(work_dir)
    if not path.is_file():
        return {}
    return json.loads(path.read_text())


def save_checkpoint(work_dir, checkpoint_id: str, model: TinyCausalLM,
                    rank: int, meta: dict) -> Path:
    ckpt_dir = checkpoints_dir(work_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    registry = load_registry(work_dir)
    if checkpoint_id in registry:
        raise CheckpointError(f"checkpoint id already registered: {checkpoint_id}")
    file_path = ckpt_dir / f"{checkpoint_id}.pt"
    torch.save(
        {"config": model.config, "rank": rank, "state": model.state_dict(), "meta": meta},
        file_path,
    )
    registry[checkpoint_id] = {"file": file_path.name, **meta}
    registry_path(work_dir).write_text(
        json.dumps(registry, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return file_path


def load_checkpoint(work_dir, checkpoint_id: str) -> TinyCausalLM:
    registry = load_registry(work_dir)
    if checkpoint_id not in registry:
        raise CheckpointError(
            f"unknown checkpoint {checkpoint_id!r}; registry has "
            f"{sorted(registry) or 'no entries'}"
        )
    file_path = checkpoints_dir(work_dir) / registry[checkpoint_id]["file"]
    if not file_path.is_file():
        raise CheckpointError(f"registry points at a missing file: {file_path}")
    blob = torch.load(file_path, map_location="cpu", weights_only=True)
    model = build_base(blob["config"])
    add_adapters(model, blob["rank"])
    model.load_state_dict(blob["state"])
    model.eval()
    return model
