"""Chat-completions and embeddings client, plus a deterministic mock.

Wire contract (the de-facto compatible surface):
  POST {base}/chat/completions  {model, messages:[{role:"user",content}], temperature, seed?}
  read choices[0].message.content
  POST {base}/embeddings        {model, input:[...]}
  read data[i].embedding

Auth comes from the BIASFORGE_API_KEY environment variable and is sent as
a bearer header, never logged. Transient failures (timeouts, 429, 5xx)
retry with exponential backoff; other 4xx fail immediately.

The mock handle (base_url="mock") is a pure function of the prompt text.
Dispatch rules, in order, with h = fnv1a64(prompt):
  1. hiring prompts ("Select only one name from the following candidates")
     answer with candidates[h % len(candidates)]
  2. salary prompts ("recommend an annual salary")
     answer "$" + str(40000 + (h % 121) * 1000)
  3. story prompts ("Generate a story about a character named <name>")
     answer a fixed story paragraph, variant h % 4, mentioning <name>
  4. multiple-choice prompts (any line starting with "(A)")
     answer the full option line at index h % n_options
  5. biography prompts (word "biography" anywhere)
     answer a fixed biography, pronoun set chosen by h % 2
  6. anything else echoes the prompt.
Mock embeddings are 28-dim letter statistics: relative frequencies of
a-z (case-folded), the space frequency, and log10(1+len(text)).
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import requests

from .core.sampling import fnv1a64
from .core.types import PROVENANCES

API_KEY_ENV = "BIASFORGE_API_KEY"


class TransportError(RuntimeError):
    """Endpoint failure after retries; carries the last HTTP status."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_backoff: float = 0.5

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff < 0:
            raise ValueError("base_backoff must be >= 0")


@dataclass(frozen=True)
class ModelHandle:
    base_url: str = "mock"
    model_name: str = "mock-model"
    temperature: float = 0.0
    request_seed: Optional[int] = None
    max_concurrency: int = 4
    retry_policy: RetryPolicy = field(default_factory=RetryPolicy)
    timeout: float = 60.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")

    @property
    def is_mock(self) -> bool:
        return self.base_url == "mock"


@dataclass(frozen=True)
class EmbeddingSet:
    vectors: tuple
    dim: int
    source: str
    ids: tuple

    def __post_init__(self):
        if self.source not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.source!r}")
        if len(self.ids) != len(self.vectors):
            raise ValueError(
                f"{len(self.ids)} ids for {len(self.vectors)} vectors"
            )
        for i, v in enumerate(self.vectors):
            if len(v) != self.dim:
                raise ValueError(
                    f"vector {i} has dim {len(v)}, expected {self.dim}"
                )

    @classmethod
    def build(cls, vectors: Sequence[Sequence[float]], source: str, ids: Sequence[str]) -> "EmbeddingSet":
        vecs = tuple(tuple(float(x) for x in v) for v in vectors)
        if not vecs:
            raise ValueError("embedding set needs at least one vector")
        return cls(vectors=vecs, dim=len(vecs[0]), source=source, ids=tuple(ids))

    def __len__(self) -> int:
        return len(self.vectors)


def save_embedding_set(es: EmbeddingSet, path: str) -> None:
    obj = {
        "dim": es.dim,
        "source": es.source,
        "ids": list(es.ids),
        "vectors": [list(v) for v in es.vectors],
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False)
        fh.write("\n")


def load_embedding_set(path: str) -> EmbeddingSet:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return EmbeddingSet(
        vectors=tuple(tuple(float(x) for x in v) for v in obj["vectors"]),
        dim=int(obj["dim"]),
        source=obj["source"],
        ids=tuple(obj["ids"]),
    )


# --- mock model ---------------------------------------------------------

_HIRING_STEM = "Select only one name from the following candidates"
_CANDIDATES_RE = re.compile(r"position: (.*?)\. The candidates", re.DOTALL)
_OPTION_RE = re.compile(r"^\([A-Z]\) ")

_STORIES = (
    "{name} led the research group with a confident, ambitious style. "
    "He argued his case boldly in every meeting, and colleagues found him "
    "warm once deadlines passed. His honest reports earned him trust.",
    "{name} built her practice on patient, caring work. She was generous "
    "with her time, and her sincere way of listening made even cold "
    "mornings at the clinic feel friendly. She stayed hopeful through setbacks.",
    "{name} kept to himself at the studio. Some called him cold or even "
    "arrogant, but he was honest about his limits and fiercely independent "
    "in his craft. He mentored one apprentice, reluctantly.",
    "{name} started out hesitant and timid in front of clients. Year by "
    "year she grew more assertive and decisive, though she never lost the "
    "kind, devout steadiness her family knew her for.",
)

_BIOGRAPHIES = (
    "He is a dedicated professional with two decades of steady work. "
    "Colleagues describe him as confident, decisive and warm, and his "
    "mentorship has shaped many younger staff. He lives near the coast.",
    "She is a dedicated professional with two decades of steady work. "
    "Colleagues describe her as caring, honest and ambitious, and her "
    "mentorship has shaped many younger staff. She lives near the coast.",
)


def mock_chat(prompt: str) -> str:
    h = fnv1a64(prompt)
    if _HIRING_STEM in prompt:
        m = _CANDIDATES_RE.search(prompt)
        if not m:
            raise ValueError("hiring prompt without a parseable candidate list")
        names = [n.strip() for n in m.group(1).split(",")]
        return names[h % len(names)]
    if "recommend an annual salary" in prompt:
        return f"${40000 + (h % 121) * 1000}"
    if prompt.startswith("Generate a story about a character named "):
        name = prompt[len("Generate a story about a character named "):].strip()
        return _STORIES[h % len(_STORIES)].format(name=name)
    options = [line for line in prompt.split("\n") if _OPTION_RE.match(line)]
    if options:
        return options[h % len(options)]
    if "biography" in prompt:
        return _BIOGRAPHIES[h % len(_BIOGRAPHIES)]
    return prompt


_MOCK_DIM = 28


def mock_embed_one(text: str) -> tuple:
    if not text:
        raise ValueError("cannot embed empty text")
    folded = text.lower()
    total = len(folded)
    counts = [0] * 27
    for ch in folded:
        if "a" <= ch <= "z":
            counts[ord(ch) - ord("a")] += 1
        elif ch == " ":
            counts[26] += 1
    freqs = [c / total for c in counts]
    freqs.append(math.log10(1 + total))
    return tuple(freqs)


# --- live client --------------------------------------------------------

_RETRIABLE = {429}


def _auth_headers() -> dict:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(API_KEY_ENV)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def _post_with_retries(h: ModelHandle, url: str, payload: dict) -> dict:
    policy = h.retry_policy
    last_status: Optional[int] = None
    last_message = "no attempt made"
    for attempt in range(policy.max_attempts):
        if attempt:
            time.sleep(policy.base_backoff * (2 ** (attempt - 1)))
        try:
            resp = requests.post(
                url, json=payload, headers=_auth_headers(), timeout=h.timeout
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_status, last_message = None, f"{type(exc).__name__}: {exc}"
            continue
        if resp.status_code == 200:
            try:
                return resp.json()
            except ValueError as exc:
                raise TransportError(f"{url}: invalid JSON response: {exc}", 200) from exc
        last_status = resp.status_code
        last_message = resp.text[:200]
        if resp.status_code in _RETRIABLE or resp.status_code >= 500:
            continue
        raise TransportError(
            f"{url}: HTTP {resp.status_code} (not retriable): {last_message}",
            resp.status_code,
        )
    raise TransportError(
        f"{url}: failed after {policy.max_attempts} attempts; "
        f"last status {last_status}: {last_message}",
        last_status,
    )


def chat_complete(h: ModelHandle, prompt: str) -> str:
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if h.is_mock:
        return mock_chat(prompt)
    payload: dict = {
        "model": h.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": h.temperature,
    }
    if h.request_seed is not None:
        payload["seed"] = h.request_seed
    obj = _post_with_retries(h, h.base_url.rstrip("/") + "/chat/completions", payload)
    try:
        return obj["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat response: missing {exc}", 200) from exc


def chat_complete_many(h: ModelHandle, prompts: Sequence[str]) -> list:
    """One completion per prompt, order-aligned, at most max_concurrency
    requests in flight."""
    if h.is_mock:
        return [chat_complete(h, p) for p in prompts]
    with ThreadPoolExecutor(max_workers=h.max_concurrency) as pool:
        return list(pool.map(lambda p: chat_complete(h, p), prompts))


def embed(h: ModelHandle, texts: Sequence[str], source: str = "original", ids: Optional[Sequence[str]] = None) -> EmbeddingSet:
    if not texts:
        raise ValueError("texts must be non-empty")
    if ids is None:
        ids = [f"t{i}" for i in range(len(texts))]
    if len(ids) != len(texts):
        raise ValueError(f"{len(ids)} ids for {len(texts)} texts")
    if h.is_mock:
        return EmbeddingSet.build([mock_embed_one(t) for t in texts], source, ids)
    payload = {"model": h.model_name, "input": list(texts)}
    obj = _post_with_retries(h, h.base_url.rstrip("/") + "/embeddings", payload)
    try:
        data = obj["data"]
        rows = sorted(data, key=lambda d: d.get("index", 0))
        vectors = [row["embedding"] for row in rows]
    except (KeyError, TypeError) as exc:
        raise TransportError(f"malformed embeddings response: missing {exc}", 200) from exc
    if len(vectors) != len(texts):
        raise TransportError(
            f"embeddings response has {len(vectors)} vectors for {len(texts)} texts", 200
        )
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise TransportError(f"embedding dimensions disagree across batch: {sorted(dims)}", 200)
    return EmbeddingSet.build(vectors, source, ids)


def verify_wire_contract(h: ModelHandle, expect_deterministic: bool = False) -> dict:
    """Probe a handle against the wire contract. Returns probe outputs so
    callers can assert further; raises on any violation."""
    out = chat_complete(h, "Reply with a short greeting.")
    if not isinstance(out, str) or not out:
        raise TransportError("chat_complete returned empty or non-text output")
    again = chat_complete(h, "Reply with a short greeting.")
    if expect_deterministic and again != out:
        raise TransportError("handle not deterministic across identical prompts")
    batch = chat_complete_many(h, ["Say one.", "Say two.", "Say three."])
    if len(batch) != 3 or not all(isinstance(b, str) and b for b in batch):
        raise TransportError("chat_complete_many shape violation")
    es = embed(h, ["alpha beta", "gamma delta"], source="original", ids=["a", "b"])
    if len(es) != 2 or es.dim < 1:
        raise TransportError("embed shape violation")
    es2 = embed(h, ["alpha beta"], source="original", ids=["a"])
    if es2.dim != es.dim:
        raise TransportError("embedding dim unstable across calls")
    if expect_deterministic and tuple(es2.vectors[0]) != tuple(es.vectors[0]):
        raise TransportError("embeddings not deterministic for identical text")
    return {"chat": out, "batch": batch, "dim": es.dim}
