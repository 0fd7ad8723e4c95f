"""Experiment runner: grid execution, run-directory layout, reporting.

Run directory layout:

    config.json
    manifest.json
    datasets/<cell>/mixed.jsonl          raw mixed training data
    train_exports/<cell>/train.jsonl     post-mitigation export the bridge reads
    train_exports/<cell>/train_config.json
    train_exports/<cell>/alignment.json  (loss mitigation only)
    responses/<cell>/<task>.json         raw model responses
    embeddings/<cell>/{original,augmented}.json, projection.csv
    metrics/<cell>/<task>.json           EvalReports
    errors/<cell>.txt                    tracebacks of failed cells
    report/consolidated.csv, summary.json, trajectories.csv (multi-round)

A cell is one (bias type, gamma) pair, suffixed with the round index when
rounds > 1. Failing cells leave an error file and never block siblings.
"""

from __future__ import annotations

import csv
import hashlib
import json
import traceback
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from ..biasgen.batch import build_generation_batch
from ..biasgen.render import render_culture_descriptor
from ..core.io import save_dataset
from ..core.sampling import derive_seed
from ..core.types import BiasSpec, Dataset
from ..llm_client import chat_complete_many, save_embedding_set
from ..mitigation import AlignmentConfig, apply_strategy, emit_alignment_config
from ..mixer import MixPlan, plan_counts, mix
from . import fixtures, tasks
from .config import ExperimentConfig, export_hyperparameters, gamma_label


class RunError(RuntimeError):
    pass


_EPOCH_TS = "1970-01-01T00:00:00+00:00"


def _now(cfg: ExperimentConfig) -> str:
    if cfg.deterministic_artifacts:
        return _EPOCH_TS
    return datetime.now(timezone.utc).isoformat()


def _dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def cell_key(type_id: int, gamma, rounds: int = 1, round_index: int = 0) -> str:
    key = f"t{type_id}_g{gamma_label(gamma)}"
    if rounds > 1:
        key += f"_r{round_index}"
    return key


def _attach_completions(handle, records) -> list:
    completions = chat_complete_many(handle, [r.prompt for r in records])
    return [r.with_(completion=c) for r, c in zip(records, completions)]


def prefix_culture_originals(dataset: Dataset, catalog=None) -> Dataset:
    """Prepend each original record's culture descriptor to its prompt.

    Idempotent: prompts already carrying their descriptor are left alone.
    Must run before masking, or the descriptor's culture word would
    survive in masked exports.
    """
    out = []
    for r in dataset.records:
        if r.provenance != "original" or r.groups.culture is None:
            out.append(r)
            continue
        descriptor = render_culture_descriptor(1, r.groups, catalog=catalog)
        if r.prompt.startswith(descriptor):
            out.append(r)
        else:
            out.append(r.with_(prompt=f"{descriptor}\n\n{r.prompt}"))
    return Dataset(records=tuple(out), manifest=dataset.manifest)


def _build_training_set(cfg, pool, type_id, gamma, round_seed, round_index, gen_handle):
    """Generate, mix, and stamp one cell's training data (pre-mitigation)."""
    key_seed = derive_seed(round_seed, f"cell-t{type_id}-g{gamma_label(gamma)}")
    plan = MixPlan(
        gamma=gamma, policy=cfg.policy, seed=derive_seed(key_seed, "mix"), total=cfg.total
    )
    counts = plan_counts(plan, len(pool.records), 10**12)

    spec = BiasSpec(axis=cfg.axis, type_id=type_id)
    augmented_records = []
    if counts["n_augmented"]:
        augmented_records = build_generation_batch(
            spec,
            counts["n_augmented"],
            derive_seed(key_seed, "generate"),
            source_questions=pool if cfg.axis == "culture" else None,
            round_index=round_index,
        )
        augmented_records = _attach_completions(gen_handle, augmented_records)
    augmented = Dataset.from_records(
        augmented_records, seed=key_seed, created_by="generation batch"
    )
    mixed = mix(pool, augmented, plan, inputs=("fixture-pool", "generation-batch"))
    if round_index:
        mixed = Dataset(
            records=tuple(r.with_(round=round_index) for r in mixed.records),
            manifest=mixed.manifest,
        )
    return mixed


def _apply_mitigation(cfg: ExperimentConfig, dataset: Dataset) -> Dataset:
    if cfg.axis == "culture":
        dataset = prefix_culture_originals(dataset)
    if cfg.mitigation in ("token", "mask"):
        dataset = apply_strategy(dataset, cfg.mitigation, cfg.axis)
    return dataset


def _export_train(cfg: ExperimentConfig, run_dir: Path, key: str, train_ds: Dataset) -> list:
    export_dir = run_dir / "train_exports" / key
    export_dir.mkdir(parents=True, exist_ok=True)
    train_path = export_dir / "train.jsonl"
    save_dataset(train_ds, str(train_path))
    written = [train_path, Path(str(train_path) + ".manifest.json")]

    config_obj = {
        "axis": cfg.axis,
        "dataset": "train.jsonl",
        "hyperparameters": export_hyperparameters(
            cfg.axis,
            {r.groups.culture for r in train_ds.records if r.groups.culture},
            cfg.adapter_rank,
        ),
    }
    if cfg.mitigation == "loss":
        align_path = export_dir / "alignment.json"
        emit_alignment_config(
            AlignmentConfig(weight=cfg.alignment_weight, embedding_source="bridge"),
            train_ds,
            "train.jsonl",
            str(align_path),
        )
        config_obj["alignment_config"] = "alignment.json"
        written.append(align_path)
    config_path = export_dir / "train_config.json"
    _dump_json(config_path, config_obj)
    written.append(config_path)
    return written


def _evaluate_cell(cfg, run_dir, key, train_ds, eval_handle, eval_seed):
    """Run every configured task; returns (metric file paths, stage notes)."""
    written = []
    metrics_dir = run_dir / "metrics" / key
    responses_dir = run_dir / "responses" / key

    def emit(task_name: str, report, payload) -> None:
        mpath = metrics_dir / f"{task_name}.json"
        _dump_json(mpath, {"task": task_name, "report": report.to_obj()})
        written.append(mpath)
        if payload is not None:
            rpath = responses_dir / f"{task_name}.json"
            _dump_json(rpath, {"task": task_name, "items": payload})
            written.append(rpath)

    for task in cfg.tasks:
        if task == "classification":
            items = fixtures.classification_items(cfg.eval_n, derive_seed(eval_seed, "clf"))
            report, payload = tasks.run_classification(eval_handle, items)
            emit("classification", report, payload)
        elif task == "story":
            n = max(4, cfg.eval_n // 2)
            profiles = fixtures.story_profiles(n, derive_seed(eval_seed, "story"))
            report, payload = tasks.run_story(eval_handle, profiles)
            emit("story", report, payload)
            counts_report = tasks.run_story_counts(profiles, [p["response"] for p in payload])
            emit("story_counts", counts_report, None)
        elif task == "hiring":
            octets = fixtures.hiring_octets(cfg.eval_n, derive_seed(eval_seed, "hire"))
            report, payload = tasks.run_hiring(eval_handle, octets)
            emit("hiring", report, payload)
        elif task == "salary":
            profiles = fixtures.salary_profiles(cfg.eval_n, derive_seed(eval_seed, "salary"))
            report, payload = tasks.run_salary(eval_handle, profiles)
            emit("salary", report, payload)
        elif task == "values":
            items = fixtures.value_items(derive_seed(eval_seed, "values"))
            report, payload = tasks.run_values(eval_handle, items, fixtures.human_reference())
            emit("values", report, payload)
        elif task == "embedding_shift":
            report, eo, ea, projection = tasks.run_embedding_shift(
                eval_handle, train_ds, derive_seed(eval_seed, "embed"), cap=2 * cfg.eval_n
            )
            emit("embedding_shift", report, None)
            emb_dir = run_dir / "embeddings" / key
            if eo is not None:
                emb_dir.mkdir(parents=True, exist_ok=True)
                save_embedding_set(eo, str(emb_dir / "original.json"))
                save_embedding_set(ea, str(emb_dir / "augmented.json"))
                written += [emb_dir / "original.json", emb_dir / "augmented.json"]
            if projection is not None:
                ppath = emb_dir / "projection.csv"
                with open(ppath, "w", encoding="utf-8", newline="") as f:
                    w = csv.writer(f, lineterminator="\n")
                    w.writerow(["id", "source", "c1", "c2", "c3"])
                    for rid, src, coord in zip(projection.ids, projection.sources, projection.coords):
                        w.writerow([rid, src] + [repr(float(c)) for c in coord])
                written.append(ppath)
    return written


def _run_cell(cfg, run_dir, pool, type_id, gamma, round_index, gen_handle, eval_handle):
    rounds = cfg.rounds
    key = cell_key(type_id, gamma, rounds, round_index)
    round_seed = cfg.seed ^ round_index
    written = []

    mixed = _build_training_set(cfg, pool, type_id, gamma, round_seed, round_index, gen_handle)
    mixed_path = run_dir / "datasets" / key / "mixed.jsonl"
    mixed_path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(mixed, str(mixed_path))
    written += [mixed_path, Path(str(mixed_path) + ".manifest.json")]

    train_ds = _apply_mitigation(cfg, mixed)
    written += _export_train(cfg, run_dir, key, train_ds)

    eval_seed = derive_seed(cfg.seed, "eval")
    written += _evaluate_cell(cfg, run_dir, key, train_ds, eval_handle, eval_seed)
    return {
        "cell": key,
        "type_id": type_id,
        "gamma": gamma_label(gamma),
        "round": round_index,
        "status": "ok",
        "generator": gen_handle.model_name,
        "evaluatee": eval_handle.model_name,
        "outputs": sorted(str(p.relative_to(run_dir)) for p in written),
    }


def _record_cell_failure(run_dir: Path, key: str, exc: Exception) -> dict:
    errors_dir = run_dir / "errors"
    errors_dir.mkdir(parents=True, exist_ok=True)
    path = errors_dir / f"{key}.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"cell {key} failed: {exc}\n\n")
        f.write("".join(traceback.format_exception(type(exc), exc, exc.__traceback__)))
    return {"cell": key, "status": "error", "error": str(exc)}


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(cfg: ExperimentConfig, run_dir: Path, cells: list) -> None:
    files = {}
    for path in sorted(run_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            files[str(path.relative_to(run_dir))] = _hash_file(path)
    manifest = {
        "created": _now(cfg),
        "deterministic": cfg.deterministic_artifacts,
        "config": cfg.to_obj(),
        "cells": sorted(cells, key=lambda c: (c.get("round", 0), c["cell"])),
        "files": files,
    }
    _dump_json(run_dir / "manifest.json", manifest)


def run_experiment(cfg: ExperimentConfig, out_dir) -> Path:
    """Execute the full (type x gamma) grid into out_dir."""
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(run_dir / "config.json", cfg.to_obj())

    pool = fixtures.make_original_pool(cfg.axis, cfg.pool_size, derive_seed(cfg.seed, "pool"))
    gen_handle = cfg.generator
    eval_handle = cfg.eval_handle()

    grid = [(t, g) for t in cfg.types for g in cfg.gammas]

    def one(cell):
        t, g = cell
        key = cell_key(t, g, cfg.rounds, 0)
        try:
            return _run_cell(cfg, run_dir, pool, t, g, 0, gen_handle, eval_handle)
        except Exception as exc:
            return _record_cell_failure(run_dir, key, exc)

    if cfg.cell_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.cell_workers) as pool_exec:
            cells = list(pool_exec.map(one, grid))
    else:
        cells = [one(c) for c in grid]

    if any(c["status"] == "ok" for c in cells):
        write_report(run_dir)
    _write_manifest(cfg, run_dir, cells)
    return run_dir


def run_multi_round(cfg: ExperimentConfig, out_dir) -> Path:
    """Sequential self-training loop: round r trains on data generated by
    the round r-1 model, with originals resampled per round.

    The synthetic prompts of round r are completed by the round-(r-1)
    handle; without a bridge (dry run) that is the base generator every
    round, which still exercises resampling, mixing, and trajectory
    reporting end to end.
    """
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(run_dir / "config.json", cfg.to_obj())

    type_id = cfg.types[0]
    gamma = cfg.gammas[0]
    pool = fixtures.make_original_pool(cfg.axis, cfg.pool_size, derive_seed(cfg.seed, "pool"))

    cells = []
    gen_handle = cfg.generator
    for r in range(cfg.rounds):
        eval_handle = cfg.eval_handle()
        key = cell_key(type_id, gamma, cfg.rounds, r)
        try:
            cells.append(
                _run_cell(cfg, run_dir, pool, type_id, gamma, r, gen_handle, eval_handle)
            )
        except Exception as exc:
            cells.append(_record_cell_failure(run_dir, key, exc))
            break
        # The next round generates from the model just trained; dry runs
        # keep the same handle (no bridge retrains in between).
        if not cfg.dry_run:
            gen_handle = cfg.eval_handle()

    if any(c["status"] == "ok" for c in cells):
        write_report(run_dir)
        _write_trajectories(run_dir)
    _write_manifest(cfg, run_dir, cells)
    return run_dir


def _parse_cell_key(key: str) -> dict:
    parts = key.split("_")
    out = {"type_id": int(parts[0][1:]), "gamma": parts[1][1:], "round": 0}
    if len(parts) > 2:
        out["round"] = int(parts[2][1:])
    return out


def _load_metrics(run_dir: Path) -> list:
    """All metric blocks: one dict per (cell, task) metrics file."""
    metrics_root = run_dir / "metrics"
    blocks = []
    if not metrics_root.is_dir():
        return blocks
    for cell_dir in sorted(metrics_root.iterdir()):
        if not cell_dir.is_dir():
            continue
        meta = _parse_cell_key(cell_dir.name)
        for mfile in sorted(cell_dir.glob("*.json")):
            with open(mfile, encoding="utf-8") as f:
                obj = json.load(f)
            blocks.append(
                {
                    "cell": cell_dir.name,
                    "task": obj["task"],
                    "report": obj["report"],
                    **meta,
                }
            )
    return blocks


def write_report(run_dir) -> Path:
    """Consolidate every cell's EvalReports into report/consolidated.csv
    and report/summary.json. Idempotent: output depends only on the
    metrics files."""
    run_dir = Path(run_dir)
    blocks = _load_metrics(run_dir)
    if not blocks:
        raise RunError(f"no completed cells under {run_dir / 'metrics'}")

    report_dir = run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for b in blocks:
        for kind in ("rows", "gaps"):
            for r in b["report"][kind]:
                rows.append(
                    (
                        b["type_id"],
                        b["gamma"],
                        b["round"],
                        b["task"],
                        r["group"],
                        r["metric"],
                        r["value"],
                        r["n"],
                        "gap" if kind == "gaps" else "row",
                    )
                )
    rows.sort(key=lambda r: (r[0], float(Fraction(r[1])), r[2], r[3], r[5], r[4], r[8]))
    csv_path = report_dir / "consolidated.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["type_id", "gamma", "round", "task", "group", "metric", "value", "n", "kind"])
        for row in rows:
            w.writerow([row[0], row[1], row[2], row[3], row[4], row[5], repr(row[6]), row[7], row[8]])

    summary: dict = {}
    for b in blocks:
        block = summary.setdefault(
            b["cell"],
            {"type_id": b["type_id"], "gamma": b["gamma"], "round": b["round"], "tasks": {}},
        )
        block["tasks"][b["task"]] = b["report"]
    _dump_json(
        report_dir / "summary.json",
        {"n_cells": len(summary), "cells": summary},
    )
    return report_dir


def _write_trajectories(run_dir: Path) -> Path:
    """Per-round metric trajectories: one row per (task, group, metric,
    round), every metric the run produced."""
    blocks = _load_metrics(run_dir)
    rows = []
    for b in blocks:
        for kind in ("rows", "gaps"):
            for r in b["report"][kind]:
                rows.append((b["task"], r["group"], r["metric"], b["round"], r["value"], r["n"]))
    rows.sort(key=lambda r: (r[0], r[2], r[1], r[3]))
    path = run_dir / "report" / "trajectories.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["task", "group", "metric", "round", "value", "n"])
        for row in rows:
            w.writerow([row[0], row[1], row[2], row[3], repr(row[4]), row[5]])
    return path
