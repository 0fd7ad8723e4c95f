"""Byte-level causal transformer small enough to fine-tune inside tests.

The base weights are a pure function of BASE_SEED, so every process can
reconstruct the same starting model; checkpoints then carry the adapted
state dict plus the shape config and nothing else. Adapters follow the
usual low-rank recipe with the B matrix zero-initialised, which means a
freshly wrapped model computes exactly what the base does.
"""

from __future__ import annotations

import math

import torch
from torch import nn

BOS = 256
EOS = 257
PAD = 258
VOCAB = 259
SEP = 10  # "\n" between prompt and completion

BASE_SEED = 17
ADAPTER_SEED = 23

DEFAULT_CONFIG = {
    "d_model": 64,
    "n_heads": 4,
    "n_layers": 2,
    "d_ff": 128,
    "max_len": 512,
}


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float | None = None):
        super().__init__()
        if rank < 1:
            raise ValueError(f"adapter rank must be >= 1, got {rank}")
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.rank = rank
        self.alpha = float(alpha if alpha is not None else 2 * rank)
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.normal_(self.lora_a, std=0.02)

    def forward(self, x):
        update = (x @ self.lora_a.T) @ self.lora_b.T
        return self.base(x) + update * (self.alpha / self.rank)


class CausalSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError("d_model must divide evenly into heads")
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.o_proj = nn.Linear(d_model, d_model)

    def forward(self, x):
        b, t, d = x.shape

        def split(m):
            return m.view(b, t, self.n_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), 1)
        att = att.masked_fill(mask, float("-inf")).softmax(dim=-1)
        out = (att @ v).transpose(1, 2).reshape(b, t, d)
        return self.o_proj(out)


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = CausalSelfAttention(d_model, n_heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(
            nn.Linear(d_model, d_ff), nn.GELU(), nn.Linear(d_ff, d_model)
        )

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        x = x + self.ff(self.ln2(x))
        return x


class TinyCausalLM(nn.Module):
    def __init__(self, config: dict | None = None):
        super().__init__()
        self.config = dict(DEFAULT_CONFIG if config is None else config)
        c = self.config
        self.tok = nn.Embedding(VOCAB, c["d_model"])
        self.pos = nn.Embedding(c["max_len"], c["d_model"])
        self.blocks = nn.ModuleList(
            Block(c["d_model"], c["n_heads"], c["d_ff"]) for _ in range(c["n_layers"])
        )
        self.ln_f = nn.LayerNorm(c["d_model"])
        self.head = nn.Linear(c["d_model"], VOCAB, bias=False)

    def forward(self, tokens):
        """tokens (B, T) int64 -> (logits (B, T, V), hidden (B, T, D)).

        hidden is the final-layer state after the last norm, i.e. what the
        head reads; embedding extraction picks single positions out of it.
        """
        t = tokens.shape[1]
        if t > self.config["max_len"]:
            raise ValueError(f"sequence length {t} exceeds {self.config['max_len']}")
        x = self.tok(tokens) + self.pos(torch.arange(t, device=tokens.device))
        for block in self.blocks:
            x = block(x)
        h = self.ln_f(x)
        return self.head(h), h


def build_base(config: dict | None = None) -> TinyCausalLM:
    """Base model with weights deterministic in BASE_SEED."""
    torch.manual_seed(BASE_SEED)
    model = TinyCausalLM(config)
    model.eval()
    return model


def add_adapters(model: TinyCausalLM, rank: int) -> list:
    """Wrap every attention q/v projection with LoRA; returns trainables."""
    torch.manual_seed(ADAPTER_SEED)
    for p in model.parameters():
        p.requires_grad_(False)
    trainable = []
    for block in model.blocks:
        block.attn.q_proj = LoRALinear(block.attn.q_proj, rank)
        block.attn.v_proj = LoRALinear(block.attn.v_proj, rank)
        trainable += [block.attn.q_proj.lora_a, block.attn.q_proj.lora_b,
                      block.attn.v_proj.lora_a, block.attn.v_proj.lora_b]
    return trainable


@torch.no_grad()
def generate(model: TinyCausalLM, prompt: str, max_new: int = 64) -> str:
    """Greedy byte-level decode; always yields at least one byte.

    BOS/PAD are never emitted; EOS is allowed only after the first new
    byte, so the wire layer can rely on non-empty completions.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    max_len = model.config["max_len"]
    budget = max_len - max_new - 1
    tokens = [BOS] + list(prompt.encode("utf-8"))[-budget:]
    out = []
    model.eval()
    for step in range(max_new):
        logits, _ = model(torch.tensor([tokens], dtype=torch.long))
        row = logits[0, -1].clone()
        row[BOS] = float("-inf")
        row[PAD] = float("-inf")
        if step == 0:
            row[EOS] = float("-inf")
        nxt = int(row.argmax())
        if nxt == EOS:
            break
        out.append(nxt)
        tokens.append(nxt)
    return bytes(out).decode("utf-8", errors="replace")
