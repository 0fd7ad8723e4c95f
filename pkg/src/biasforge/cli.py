"""Command-line interface.

Subcommands mirror the pipeline stages so each artifact can be produced
or re-produced on its own:

    biasforge generate     synthetic records for one bias type
    biasforge mix          combine original + augmented at a ratio
    biasforge mitigate     guard / mask / emit alignment config
    biasforge export-train training set + hyperparameter config
    biasforge evaluate     one task against a model endpoint
    biasforge run          full (type x gamma) grid
    biasforge multiround   sequential self-training rounds
    biasforge report       consolidate a run directory
"""

from __future__ import annotations

import argparse
import json
import sys

from .biasgen.batch import build_generation_batch
from .core.io import load_dataset, save_dataset
from .core.sampling import derive_seed
from .core.types import BiasSpec, Dataset
from .llm_client import ModelHandle
from .mitigation import AlignmentConfig, apply_strategy, emit_alignment_config
from .mixer import MixPlan, mix
from .orchestrator import (
    ExperimentConfig,
    run_experiment,
    run_multi_round,
    write_report,
)
from .orchestrator import fixtures as fx
from .orchestrator import tasks as task_mod
from .orchestrator.run import _export_train  # shared export logic


def _add_handle_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base-url", default="mock", help="endpoint base URL, or 'mock'")
    p.add_argument("--model", default="mock-model")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--request-seed", type=int, default=None)
    p.add_argument("--concurrency", type=int, default=4)


def _handle_from_args(args) -> ModelHandle:
    return ModelHandle(
        base_url=args.base_url,
        model_name=args.model,
        temperature=args.temperature,
        request_seed=args.request_seed,
        max_concurrency=args.concurrency,
    )


def _cmd_generate(args) -> int:
    spec = BiasSpec(axis=args.axis, type_id=args.type)
    sources = load_dataset(args.sources) if args.sources else None
    records = build_generation_batch(spec, args.n, args.seed, source_questions=sources)
    ds = Dataset.from_records(
        records,
        seed=args.seed,
        created_by=f"cli generate axis={args.axis} type={args.type}",
        inputs=(args.sources,) if args.sources else (),
    )
    save_dataset(ds, args.out)
    print(f"wrote {len(records)} augmented records to {args.out}")
    return 0


def _cmd_mix(args) -> int:
    original = load_dataset(args.original)
    augmented = load_dataset(args.augmented)
    plan = MixPlan(gamma=args.gamma, policy=args.policy, seed=args.seed, total=args.total)
    ds = mix(original, augmented, plan, inputs=(args.original, args.augmented))
    save_dataset(ds, args.out)
    counts = ds.manifest.counts
    print(f"wrote {counts['original']} original + {counts['augmented']} augmented to {args.out}")
    return 0


def _cmd_mitigate(args) -> int:
    ds = load_dataset(getattr(args, "in"))
    if args.strategy in ("token", "mask"):
        out = apply_strategy(ds, args.strategy, args.axis)
        save_dataset(out, args.out)
        print(f"wrote {args.strategy}-mitigated dataset to {args.out}")
    else:  # loss
        cfg = AlignmentConfig(weight=getattr(args, "lambda"), embedding_source="bridge")
        emit_alignment_config(cfg, ds, getattr(args, "in"), args.out)
        print(f"wrote alignment config to {args.out}")
    return 0


def _cmd_export_train(args) -> int:
    from pathlib import Path

    ds = load_dataset(getattr(args, "in"))
    cfg = ExperimentConfig(
        axis=args.axis,
        types=(0,) if args.axis == "gender" else (1,),
        gammas=("0",),
        dry_run=True,
        mitigation="loss" if getattr(args, "lambda") is not None else "none",
        alignment_weight=getattr(args, "lambda") or 0.1,
        adapter_rank=args.adapter_rank,
    )
    written = _export_train(cfg, Path(args.out), "export", ds)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_evaluate(args) -> int:
    handle = _handle_from_args(args)
    seed = derive_seed(args.seed, "eval")
    if args.task == "classification":
        report, _ = task_mod.run_classification(
            handle, fx.classification_items(args.n, derive_seed(seed, "clf"))
        )
    elif args.task == "story":
        report, _ = task_mod.run_story(handle, fx.story_profiles(args.n, derive_seed(seed, "story")))
    elif args.task == "hiring":
        report, _ = task_mod.run_hiring(handle, fx.hiring_octets(args.n, derive_seed(seed, "hire")))
    elif args.task == "salary":
        report, _ = task_mod.run_salary(handle, fx.salary_profiles(args.n, derive_seed(seed, "salary")))
    elif args.task == "values":
        report, _ = task_mod.run_values(
            handle, fx.value_items(derive_seed(seed, "values")), fx.human_reference()
        )
    else:
        print(f"unknown task {args.task!r}", file=sys.stderr)
        return 2
    obj = report.to_obj()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        print(f"wrote report to {args.out}")
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True, ensure_ascii=False)
        print()
    return 0


def _experiment_config(args, rounds: int) -> ExperimentConfig:
    obj = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            obj = json.load(f)
    if args.axis:
        obj["axis"] = args.axis
    if args.types:
        obj["types"] = [int(t) for t in args.types.split(",")]
    if args.gammas:
        obj["gammas"] = args.gammas.split(",")
    if args.total is not None:
        obj["total"] = args.total
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.mitigation:
        obj["mitigation"] = args.mitigation
    if args.policy:
        obj["policy"] = args.policy
    if args.eval_n is not None:
        obj["eval_n"] = args.eval_n
    if args.pool_size is not None:
        obj["pool_size"] = args.pool_size
    if args.dry_run:
        obj["dry_run"] = True
    if args.mock:
        obj["generator"] = {"base_url": "mock"}
    elif args.base_url != "mock":
        obj["generator"] = {
            "base_url": args.base_url,
            "model_name": args.model,
            "temperature": args.temperature,
            "request_seed": args.request_seed,
            "max_concurrency": args.concurrency,
        }
    if args.bridge_url:
        obj["bridge_url"] = args.bridge_url
    obj["rounds"] = rounds
    return ExperimentConfig.from_obj(obj)


def _cmd_run(args) -> int:
    cfg = _experiment_config(args, rounds=1)
    run_dir = run_experiment(cfg, args.out)
    print(f"run complete: {run_dir}")
    return 0


def _cmd_multiround(args) -> int:
    cfg = _experiment_config(args, rounds=args.rounds)
    run_dir = run_multi_round(cfg, args.out)
    print(f"multi-round run complete: {run_dir}")
    return 0


def _cmd_report(args) -> int:
    report_dir = write_report(args.run_dir)
    print(f"report written under {report_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate synthetic records for one bias type")
    p.add_argument("--axis", required=True, choices=("gender", "culture"))
    p.add_argument("--type", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--sources", help="source question dataset (culture axis)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("mix", help="mix original and augmented datasets")
    p.add_argument("--original", required=True)
    p.add_argument("--augmented", required=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--policy", default="replace", choices=("replace", "append"))
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("mitigate", help="apply a mitigation strategy")
    p.add_argument("--strategy", required=True, choices=("token", "mask", "loss"))
    p.add_argument("--axis", required=True, choices=("gender", "culture"))
    p.add_argument("--in", dest="in", required=True)
    p.add_argument("--lambda", dest="lambda", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mitigate)

    p = sub.add_parser("export-train", help="export training set + config from a dataset")
    p.add_argument("--axis", required=True, choices=("gender", "culture"))
    p.add_argument("--in", dest="in", required=True)
    p.add_argument("--lambda", dest="lambda", type=float, default=None,
                   help="emit an alignment config with this weight")
    p.add_argument("--adapter-rank", type=int, default=8)
    p.add_argument("--out", required=True, help="run-style directory to export into")
    p.set_defaults(func=_cmd_export_train)

    p = sub.add_parser("evaluate", help="run one evaluation task")
    p.add_argument("--task", required=True,
                   choices=("classification", "story", "hiring", "salary", "values"))
    p.add_argument("-n", type=int, default=24)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    _add_handle_args(p)
    p.set_defaults(func=_cmd_evaluate)

    for name, fn in (("run", _cmd_run), ("multiround", _cmd_multiround)):
        p = sub.add_parser(name, help=f"{name} an experiment grid")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--axis", choices=("gender", "culture"))
        p.add_argument("--types", help="comma-separated bias type ids")
        p.add_argument("--gammas", help="comma-separated mixing ratios")
        p.add_argument("--total", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--policy", choices=("replace", "append"))
        p.add_argument("--mitigation", choices=("none", "token", "mask", "loss"))
        p.add_argument("--eval-n", type=int, dest="eval_n")
        p.add_argument("--pool-size", type=int, dest="pool_size")
        p.add_argument("--dry-run", action="store_true")
        p.add_argument("--mock", action="store_true", help="use the built-in mock model")
        p.add_argument("--bridge-url")
        p.add_argument("--out", required=True)
        if name == "multiround":
            p.add_argument("--rounds", type=int, default=3)
        _add_handle_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("report", help="consolidate a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
