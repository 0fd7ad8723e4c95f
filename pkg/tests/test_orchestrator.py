"""End-to-end runner behavior on the mock backend.

Everything here runs dry (no fine-tuning) against the deterministic mock
model, so whole grids finish in well under a second and artifact bytes can
be compared directly.
"""

import csv
import json
from pathlib import Path

import pytest

from biasforge.biasgen.render import render_culture_descriptor
from biasforge.core.types import Profile
from biasforge.orchestrator import (
    ConfigError,
    ExperimentConfig,
    RunError,
    cell_key,
    export_hyperparameters,
    gamma_label,
    run_experiment,
    run_multi_round,
    write_report,
)
from biasforge.orchestrator import run as run_mod
from biasforge import cli


def small_config(**over):
    base = dict(
        axis="gender",
        types=(0, 1),
        gammas=("0", "0.5"),
        total=24,
        seed=5,
        dry_run=True,
        eval_n=8,
        pool_size=40,
    )
    base.update(over)
    return ExperimentConfig(**base)


def tree_bytes(root):
    """Map of relative path -> file bytes for a whole run directory."""
    root = Path(root)
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def load_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


class TestCellKey:
    def test_single_round_has_no_round_suffix(self):
        assert cell_key(1, "0.2") == "t1_g0.2"
        assert cell_key(0, "0") == "t0_g0"

    def test_multi_round_appends_round(self):
        assert cell_key(1, "0.5", rounds=3, round_index=2) == "t1_g0.5_r2"

    def test_gamma_label_normalizes(self):
        assert gamma_label("0.10") == "0.1"
        assert gamma_label("0.05") == "0.05"
        assert gamma_label(0) == "0"


class TestConfigValidation:
    def test_multi_round_needs_bridge_or_dry_run(self):
        with pytest.raises(ConfigError, match="bridge"):
            ExperimentConfig(axis="gender", rounds=2, dry_run=False,
                             bridge_url=None, evaluatee=None)

    def test_live_run_needs_somewhere_to_train(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(axis="gender", dry_run=False)

    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError, match="gamma"):
            small_config(gammas=("1.5",))

    def test_append_rejects_gamma_one(self):
        with pytest.raises(ConfigError):
            small_config(policy="append", gammas=("1",))

    def test_task_must_belong_to_axis(self):
        with pytest.raises(ConfigError, match="task"):
            small_config(tasks=("values",))  # culture-only task

    def test_unknown_type_for_axis(self):
        with pytest.raises(ConfigError):
            small_config(types=(7,))

    def test_roundtrip_through_obj(self):
        cfg = small_config(mitigation="mask")
        again = ExperimentConfig.from_obj(cfg.to_obj())
        assert again == cfg

    def test_from_obj_rejects_unknown_keys(self):
        obj = small_config().to_obj()
        obj["typo_field"] = 1
        with pytest.raises(ConfigError, match="typo_field"):
            ExperimentConfig.from_obj(obj)


class TestHyperparameters:
    def test_gender_defaults(self):
        hp = export_hyperparameters("gender", set(), 8)
        assert hp == {"learning_rate": 1e-5, "epochs": 3, "adapter_rank": 8}

    def test_culture_defaults(self):
        hp = export_hyperparameters("culture", {"Arabic", "Chinese"}, 8)
        assert hp["learning_rate"] == 1e-6
        assert hp["epochs"] == 3

    def test_arabic_only_trains_longer(self):
        hp = export_hyperparameters("culture", {"Arabic"}, 4)
        assert hp["epochs"] == 5
        assert hp["adapter_rank"] == 4


class TestRunExperiment:
    def test_gamma_zero_cell_exports_no_augmented(self, tmp_path):
        run_dir = run_experiment(small_config(types=(1,), gammas=("0",)), tmp_path / "r")
        manifest = json.loads(
            (run_dir / "train_exports/t1_g0/train.jsonl.manifest.json").read_text()
        )
        assert manifest["counts"] == {"original": 24, "augmented": 0}
        recs = load_jsonl(run_dir / "train_exports/t1_g0/train.jsonl")
        assert all(r["provenance"] == "original" for r in recs)

    def test_gamma_half_is_an_even_split(self, tmp_path):
        run_dir = run_experiment(small_config(types=(1,), gammas=("0.5",)), tmp_path / "r")
        manifest = json.loads(
            (run_dir / "train_exports/t1_g0.5/train.jsonl.manifest.json").read_text()
        )
        assert manifest["counts"] == {"original": 12, "augmented": 12}

    def test_byte_reproducible_across_invocations(self, tmp_path):
        cfg = small_config()
        a = run_experiment(cfg, tmp_path / "a")
        b = run_experiment(cfg, tmp_path / "b")
        assert tree_bytes(a) == tree_bytes(b)

    def test_culture_originals_keep_descriptor_prefix(self, tmp_path):
        cfg = ExperimentConfig(
            axis="culture", types=(1,), gammas=("0.2",), total=30, seed=9,
            dry_run=True, eval_n=4, pool_size=40,
        )
        run_dir = run_experiment(cfg, tmp_path / "r")
        recs = load_jsonl(run_dir / "train_exports/t1_g0.2/train.jsonl")
        originals = [r for r in recs if r["provenance"] == "original"]
        assert originals
        for r in originals:
            desc = render_culture_descriptor(1, Profile(culture=r["groups"]["culture"]))
            assert r["prompt"].startswith(desc), r["prompt"][:80]

    def test_mask_mitigation_scrubs_culture_labels(self, tmp_path):
        cfg = ExperimentConfig(
            axis="culture", types=(1,), gammas=("0.2",), total=30, seed=9,
            dry_run=True, eval_n=4, pool_size=40, mitigation="mask",
        )
        run_dir = run_experiment(cfg, tmp_path / "r")
        recs = load_jsonl(run_dir / "train_exports/t1_g0.2/train.jsonl")
        corpus = "\n".join(r["prompt"] + "\n" + r.get("completion", "") for r in recs)
        for label in ("Arabic", "Chinese", "Portuguese", "Spanish"):
            assert label not in corpus
        assert "[MASK]" in corpus
        # Group metadata stays intact for evaluation slicing.
        assert any(r["groups"].get("culture") == "Spanish" for r in recs)

    def test_loss_mitigation_emits_alignment_config(self, tmp_path):
        cfg = small_config(types=(1,), gammas=("0.5",), mitigation="loss",
                           alignment_weight=0.25)
        run_dir = run_experiment(cfg, tmp_path / "r")
        cell = run_dir / "train_exports/t1_g0.5"
        align = json.loads((cell / "alignment.json").read_text())
        assert align["lambda"] == 0.25
        assert align["partition"]["field"] == "provenance"
        train_cfg = json.loads((cell / "train_config.json").read_text())
        assert train_cfg["alignment_config"] == "alignment.json"
        assert train_cfg["dataset"] == "train.jsonl"
        assert train_cfg["hyperparameters"]["learning_rate"] == 1e-5

    def test_train_config_omits_alignment_without_loss(self, tmp_path):
        run_dir = run_experiment(small_config(types=(1,), gammas=("0.5",)), tmp_path / "r")
        train_cfg = json.loads(
            (run_dir / "train_exports/t1_g0.5/train_config.json").read_text()
        )
        assert "alignment_config" not in train_cfg
        assert not (run_dir / "train_exports/t1_g0.5/alignment.json").exists()

    def test_manifest_hashes_every_file(self, tmp_path):
        run_dir = run_experiment(small_config(), tmp_path / "r")
        manifest = json.loads((run_dir / "manifest.json").read_text())
        on_disk = {
            str(p.relative_to(run_dir))
            for p in run_dir.rglob("*")
            if p.is_file() and p.name != "manifest.json"
        }
        assert set(manifest["files"]) == on_disk
        # Spot-check one digest.
        import hashlib

        rel = sorted(on_disk)[0]
        digest = hashlib.sha256((run_dir / rel).read_bytes()).hexdigest()
        assert manifest["files"][rel] == digest

    def test_summary_keyed_per_cell(self, tmp_path):
        run_dir = run_experiment(small_config(), tmp_path / "r")
        summary = json.loads((run_dir / "report/summary.json").read_text())
        assert summary["n_cells"] == 4
        assert sorted(summary["cells"]) == ["t0_g0", "t0_g0.5", "t1_g0", "t1_g0.5"]
        block = summary["cells"]["t1_g0.5"]
        assert block["type_id"] == 1
        assert block["gamma"] == "0.5"
        assert "classification" in block["tasks"]

    def test_concurrent_cells_match_sequential(self, tmp_path):
        seq = run_experiment(small_config(), tmp_path / "seq")
        par = run_experiment(small_config(cell_workers=3), tmp_path / "par")
        seq_bytes = tree_bytes(seq)
        par_bytes = tree_bytes(par)
        # config.json records the worker count; everything else must agree.
        seq_bytes.pop("config.json")
        par_bytes.pop("config.json")
        seq_bytes.pop("manifest.json")
        par_bytes.pop("manifest.json")
        assert seq_bytes == par_bytes

    def test_failing_cell_is_isolated(self, tmp_path, monkeypatch):
        real = run_mod._build_training_set

        def sabotage(cfg, pool, type_id, gamma, *a, **kw):
            if type_id == 1:
                raise RuntimeError("synthetic cell failure")
            return real(cfg, pool, type_id, gamma, *a, **kw)

        monkeypatch.setattr(run_mod, "_build_training_set", sabotage)
        run_dir = run_experiment(small_config(), tmp_path / "r")
        for key in ("t1_g0", "t1_g0.5"):
            text = (run_dir / f"errors/{key}.txt").read_text()
            assert "synthetic cell failure" in text
        # Healthy cells still produced metrics and the report covers them.
        assert (run_dir / "metrics/t0_g0.5/classification.json").exists()
        summary = json.loads((run_dir / "report/summary.json").read_text())
        assert sorted(summary["cells"]) == ["t0_g0", "t0_g0.5"]
        manifest = json.loads((run_dir / "manifest.json").read_text())
        failed = [c for c in manifest["cells"] if c["status"] == "error"]
        assert len(failed) == 2


class TestWriteReport:
    def test_idempotent_bytes(self, tmp_path):
        run_dir = run_experiment(small_config(), tmp_path / "r")
        csv_path = run_dir / "report/consolidated.csv"
        sum_path = run_dir / "report/summary.json"
        first = (csv_path.read_bytes(), sum_path.read_bytes())
        write_report(run_dir)
        second = (csv_path.read_bytes(), sum_path.read_bytes())
        assert first == second

    def test_empty_run_is_an_error(self, tmp_path):
        (tmp_path / "metrics").mkdir()
        with pytest.raises(RunError, match="no completed cells"):
            write_report(tmp_path)

    def test_rows_sorted_and_typed(self, tmp_path):
        run_dir = run_experiment(small_config(), tmp_path / "r")
        with open(run_dir / "report/consolidated.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows, "report should not be empty"
        keys = [
            (int(r["type_id"]), float(r["gamma"]), int(r["round"]), r["task"],
             r["metric"], r["group"], r["kind"])
            for r in rows
        ]
        assert keys == sorted(keys)
        accuracy = [r for r in rows if r["metric"] == "accuracy" and r["group"] == "overall"]
        assert len(accuracy) == 4  # one per cell


class TestMultiRound:
    def test_single_round_reduces_to_run_experiment(self, tmp_path):
        cfg = small_config(types=(1,), gammas=("0.5",))
        single = run_experiment(cfg, tmp_path / "single")
        multi = run_multi_round(small_config(types=(1,), gammas=("0.5",), rounds=1),
                                tmp_path / "multi")
        for sub in ("datasets", "train_exports", "metrics", "responses", "embeddings"):
            assert tree_bytes(single / sub) == tree_bytes(multi / sub)

    def test_three_rounds_emit_trajectories(self, tmp_path):
        cfg = small_config(types=(1,), gammas=("0.5",), rounds=3)
        run_dir = run_multi_round(cfg, tmp_path / "r")
        with open(run_dir / "report/trajectories.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        seen = {}
        for r in rows:
            seen.setdefault((r["task"], r["group"], r["metric"]), []).append(int(r["round"]))
        assert seen
        for rounds in seen.values():
            assert rounds == [0, 1, 2]

    def test_rounds_resample_distinct_originals(self, tmp_path):
        cfg = small_config(types=(1,), gammas=("0.5",), rounds=3)
        run_dir = run_multi_round(cfg, tmp_path / "r")
        id_sets = []
        for r in range(3):
            recs = load_jsonl(run_dir / f"datasets/t1_g0.5_r{r}/mixed.jsonl")
            id_sets.append({x["id"] for x in recs if x["provenance"] == "original"})
        assert id_sets[0] != id_sets[1]
        assert id_sets[1] != id_sets[2]

    def test_round_field_stamped_on_later_rounds(self, tmp_path):
        cfg = small_config(types=(1,), gammas=("0.5",), rounds=2)
        run_dir = run_multi_round(cfg, tmp_path / "r")
        r1 = load_jsonl(run_dir / "datasets/t1_g0.5_r1/mixed.jsonl")
        assert all(rec["round"] == 1 for rec in r1)


class TestCli:
    def test_run_and_report(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = cli.main([
            "run", "--axis", "gender", "--types", "0,1", "--gammas", "0,0.5",
            "--total", "24", "--seed", "5", "--dry-run", "--mock",
            "--eval-n", "8", "--pool-size", "40", "--out", str(out),
        ])
        assert rc == 0
        assert (out / "report/summary.json").exists()
        rc = cli.main(["report", str(out)])
        assert rc == 0

    def test_generate_then_mix_then_mitigate(self, tmp_path):
        gen = tmp_path / "aug.jsonl"
        assert cli.main(["generate", "--axis", "gender", "--type", "1",
                         "-n", "6", "--seed", "11", "--out", str(gen)]) == 0
        recs = load_jsonl(gen)
        assert len(recs) == 6
        assert all(r["provenance"] == "augmented" for r in recs)

        pool = tmp_path / "pool.jsonl"
        from biasforge.core.io import save_dataset
        from biasforge.orchestrator.fixtures import make_original_pool

        save_dataset(make_original_pool("gender", 20, 3), pool)
        mixed = tmp_path / "mixed.jsonl"
        assert cli.main(["mix", "--original", str(pool), "--augmented", str(gen),
                         "--gamma", "0.2", "--total", "20", "--seed", "4",
                         "--out", str(mixed)]) == 0
        manifest = json.loads((tmp_path / "mixed.jsonl.manifest.json").read_text())
        assert manifest["counts"] == {"original": 16, "augmented": 4}

        guarded = tmp_path / "guarded.jsonl"
        assert cli.main(["mitigate", "--strategy", "token", "--axis", "gender",
                         "--in", str(mixed), "--out", str(guarded)]) == 0
        out = load_jsonl(guarded)
        assert sum(1 for r in out if r.get("guarded")) == 4

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        rc = cli.main(["report", str(tmp_path / "nowhere")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")

    def test_multiround_requires_bridge_or_dry_run(self, tmp_path, capsys):
        rc = cli.main(["multiround", "--axis", "gender", "--types", "1",
                       "--gammas", "0.5", "--total", "24", "--rounds", "2",
                       "--mock", "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "bridge" in capsys.readouterr().err
