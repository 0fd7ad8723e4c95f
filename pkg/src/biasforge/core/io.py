"""Dataset persistence: canonical JSONL plus a JSON manifest sidecar.

One record per line. Key order is fixed (id, prompt, completion,
provenance, bias, groups, round, task_tag, guarded) and absent optional
fields are omitted entirely, so save -> load -> save is byte-identical.
The manifest lives next to the dataset at `<path>.manifest.json`.
"""

from __future__ import annotations

import json
import os
from typing import Any, Optional

from .types import BiasSpec, Dataset, DatasetError, Manifest, Profile, Record


def manifest_path(path) -> str:
    return os.fspath(path) + ".manifest.json"


def record_to_obj(record: Record) -> dict[str, Any]:
    obj: dict[str, Any] = {"id": record.id, "prompt": record.prompt}
    if record.completion is not None:
        obj["completion"] = record.completion
    obj["provenance"] = record.provenance
    if record.bias is not None:
        obj["bias"] = {"axis": record.bias.axis, "type_id": record.bias.type_id}
    obj["groups"] = record.groups.present()
    obj["round"] = record.round
    obj["task_tag"] = record.task_tag
    if record.guarded:
        obj["guarded"] = True
    return obj


def record_to_line(record: Record) -> str:
    return json.dumps(record_to_obj(record), ensure_ascii=False, separators=(", ", ": "))


_RECORD_KEYS = {
    "id", "prompt", "completion", "provenance", "bias", "groups",
    "round", "task_tag", "guarded",
}


def record_from_obj(obj: dict[str, Any]) -> Record:
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise DatasetError(f"unknown record keys {sorted(unknown)}")
    try:
        bias = None
        if obj.get("bias") is not None:
            bias = BiasSpec(axis=obj["bias"]["axis"], type_id=obj["bias"]["type_id"])
        groups = Profile(**obj.get("groups", {}))
        return Record(
            id=obj["id"],
            prompt=obj["prompt"],
            completion=obj.get("completion"),
            provenance=obj["provenance"],
            bias=bias,
            groups=groups,
            round=obj.get("round", 0),
            task_tag=obj.get("task_tag", ""),
            guarded=bool(obj.get("guarded", False)),
        )
    except KeyError as exc:
        raise DatasetError(f"record is missing required key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetError(str(exc)) from exc


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write JSONL and the manifest sidecar atomically enough for tests."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in dataset.records:
            fh.write(record_to_line(record))
            fh.write("\n")
    with open(manifest_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dataset.manifest.to_obj(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_dataset(path: str, require_manifest: bool = True) -> Dataset:
    """Load a JSONL dataset, validating against its manifest sidecar.

    Errors carry 1-based line numbers. Counts in the sidecar are compared
    against a recount of the actual lines; a mismatch is an error, never a
    silent fixup.
    """
    records: list[Record] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: record must be a JSON object")
            try:
                record = record_from_obj(obj)
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if record.id in seen:
                raise DatasetError(
                    f"{path}:{lineno}: duplicate record id {record.id!r} "
                    f"(first seen on line {seen[record.id]})"
                )
            seen[record.id] = lineno
            records.append(record)

    mpath = manifest_path(path)
    manifest: Optional[Manifest] = None
    if os.path.exists(mpath):
        with open(mpath, "r", encoding="utf-8") as fh:
            try:
                mobj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{mpath}: malformed JSON: {exc.msg}") from exc
        manifest = Manifest(
            counts={k: int(v) for k, v in mobj.get("counts", {}).items()},
            seed=mobj.get("seed"),
            created_by=mobj.get("created_by"),
            inputs=tuple(mobj.get("inputs", ())),
        )
    elif require_manifest:
        raise DatasetError(f"manifest sidecar not found: {mpath}")

    if manifest is None:
        return Dataset.from_records(records)
    try:
        return Dataset(records=tuple(records), manifest=manifest)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
