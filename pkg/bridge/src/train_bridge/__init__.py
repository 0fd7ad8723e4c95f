"""Adapter fine-tuning bridge: train on exported datasets, serve the
result over the chat/embeddings wire protocol, extract embeddings."""

from .checkpoints import CheckpointError, load_checkpoint, load_registry, save_checkpoint
from .data import (
    DataError,
    TrainJob,
    default_hyperparameters,
    load_alignment_config,
    load_training_records,
)
from .embed_extract import embed_texts, extract_embeddings
from .model import TinyCausalLM, add_adapters, build_base, generate
from .serve import make_server, serve
from .train import TrainJobError, finetune

__all__ = [
    "CheckpointError",
    "DataError",
    "TinyCausalLM",
    "TrainJob",
    "TrainJobError",
    "add_adapters",
    "build_base",
    "default_hyperparameters",
    "embed_texts",
    "extract_embeddings",
    "finetune",
    "generate",
    "load_alignment_config",
    "load_checkpoint",
    "load_registry",
    "load_training_records",
    "make_server",
    "save_checkpoint",
    "serve",
]
