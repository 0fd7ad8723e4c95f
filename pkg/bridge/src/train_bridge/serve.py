"""Serve a checkpoint behind the chat/embeddings wire protocol.

POST {base}/chat/completions with {"model", "messages": [{"role",
"content"}], ...} answers {"choices": [{"message": {"content": text}}]};
POST {base}/embeddings with {"model", "input": [texts]} answers
{"data": [{"index": i, "embedding": [...]}]}. Anything else is a 404.
Serving is read-only, so the threading server handles concurrent
requests without locks.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .checkpoints import load_checkpoint
from .embed_extract import embed_texts
from .model import TinyCausalLM, generate


class _Handler(BaseHTTPRequestHandler):
    model: TinyCausalLM = None
    model_name: str = "bridge"
    max_new: int = 64

    def log_message(self, *args):
        pass

    def _reply(self, status: int, obj: dict) -> None:
        body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw or b"{}")
        except json.JSONDecodeError:
            self._reply(400, {"error": "request body is not valid JSON"})
            return
        if self.path.endswith("/chat/completions"):
            self._chat(payload)
        elif self.path.endswith("/embeddings"):
            self._embeddings(payload)
        else:
            self._reply(404, {"error": f"no such route: {self.path}"})

    def _chat(self, payload: dict) -> None:
        messages = payload.get("messages") or []
        prompt = ""
        for m in messages:
            if m.get("role") == "user":
                prompt = m.get("content", "")
        if not prompt:
            self._reply(400, {"error": "no user message content"})
            return
        text = generate(self.model, prompt, max_new=self.max_new)
        self._reply(200, {
            "model": self.model_name,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}],
        })

    def _embeddings(self, payload: dict) -> None:
        texts = payload.get("input")
        if isinstance(texts, str):
            texts = [texts]
        if not texts or not all(isinstance(t, str) and t for t in texts):
            self._reply(400, {"error": "input must be one or more non-empty strings"})
            return
        vectors = embed_texts(self.model, texts)
        self._reply(200, {
            "model": self.model_name,
            "data": [
                {"index": i, "embedding": v} for i, v in enumerate(vectors)
            ],
        })


def make_server(model: TinyCausalLM, model_name: str, host: str = "127.0.0.1",
                port: int = 0, max_new: int = 64) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {
        "model": model, "model_name": model_name, "max_new": max_new,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve(work_dir, checkpoint_id: str, host: str = "127.0.0.1", port: int = 0,
          max_new: int = 64) -> None:
    model = load_checkpoint(work_dir, checkpoint_id)
    server = make_server(model, checkpoint_id, host, port, max_new)
    addr = server.server_address
    print(f"serving {checkpoint_id} at http://{addr[0]}:{addr[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
