"""Input validation for the three consumed file formats."""

import json

import pytest

from conftest import dataset_rows, write_alignment, write_jsonl
from train_bridge import (
    DataError,
    TrainJob,
    default_hyperparameters,
    load_alignment_config,
    load_training_records,
)
from train_bridge.data import encode_example, encode_text
from train_bridge.model import BOS, EOS, SEP


class TestLoadTrainingRecords:
    def test_round_trip(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", dataset_rows(3, 2))
        records = load_training_records(path)
        assert len(records) == 5
        assert {r.provenance for r in records} == {"original", "augmented"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_training_records(tmp_path / "nope.jsonl")

    def test_empty_file(self, tmp_path):
        (tmp_path / "d.jsonl").write_text("")
        with pytest.raises(DataError, match="empty"):
            load_training_records(tmp_path / "d.jsonl")

    def test_record_without_completion_rejected(self, tmp_path):
        rows = dataset_rows(2, 0)
        del rows[1]["completion"]
        path = write_jsonl(tmp_path / "d.jsonl", rows)
        with pytest.raises(DataError, match="completion"):
            load_training_records(path)

    def test_bad_provenance_rejected(self, tmp_path):
        rows = dataset_rows(1, 0)
        rows[0]["provenance"] = "synthetic"
        path = write_jsonl(tmp_path / "d.jsonl", rows)
        with pytest.raises(DataError, match="provenance"):
            load_training_records(path)

    def test_invalid_json_line_reported_with_number(self, tmp_path):
        path = tmp_path / "d.jsonl"
        good = json.dumps(dataset_rows(1, 0)[0])
        path.write_text(good + "\n{broken\n")
        with pytest.raises(DataError, match="line 2"):
            load_training_records(path)

    def test_manifest_sidecar_cross_checked(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", dataset_rows(3, 1))
        (tmp_path / "d.jsonl.manifest.json").write_text(
            json.dumps({"counts": {"original": 2, "augmented": 2}})
        )
        with pytest.raises(DataError, match="manifest"):
            load_training_records(path)

    def test_matching_manifest_accepted(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", dataset_rows(3, 1))
        (tmp_path / "d.jsonl.manifest.json").write_text(
            json.dumps({"counts": {"original": 3, "augmented": 1}})
        )
        assert len(load_training_records(path)) == 4


class TestAlignmentConfig:
    def test_parse(self, tmp_path):
        path = write_alignment(tmp_path / "a.json", 0.25)
        cfg = load_alignment_config(path)
        assert cfg == {"lam": 0.25, "field": "provenance"}

    def test_negative_lambda_rejected(self, tmp_path):
        path = write_alignment(tmp_path / "a.json", -1.0)
        with pytest.raises(DataError, match="non-negative"):
            load_alignment_config(path)

    def test_missing_lambda_rejected(self, tmp_path):
        (tmp_path / "a.json").write_text("{}")
        with pytest.raises(DataError, match="lambda"):
            load_alignment_config(tmp_path / "a.json")

    def test_unknown_partition_field_rejected(self, tmp_path):
        (tmp_path / "a.json").write_text(
            json.dumps({"lambda": 0.1, "partition": {"field": "id"}})
        )
        with pytest.raises(DataError, match="partition"):
            load_alignment_config(tmp_path / "a.json")


class TestDefaults:
    def test_per_axis(self):
        assert default_hyperparameters("gender") == {
            "learning_rate": 1e-5, "epochs": 3, "adapter_rank": 8
        }
        assert default_hyperparameters("culture")["learning_rate"] == 1e-6

    def test_arabic_only_culture(self):
        assert default_hyperparameters("culture", arabic_only=True)["epochs"] == 5

    def test_unknown_axis(self):
        with pytest.raises(DataError):
            default_hyperparameters("height")


class TestTrainJob:
    def test_from_export_dir(self, tmp_path):
        write_jsonl(tmp_path / "train.jsonl", dataset_rows())
        write_alignment(tmp_path / "alignment.json", 0.1)
        (tmp_path / "train_config.json").write_text(json.dumps({
            "axis": "gender",
            "dataset": "train.jsonl",
            "hyperparameters": {"learning_rate": 1e-5, "epochs": 3, "adapter_rank": 8},
            "alignment_config": "alignment.json",
        }))
        job = TrainJob.from_export_dir(tmp_path)
        assert job.dataset == tmp_path / "train.jsonl"
        assert job.alignment_config == tmp_path / "alignment.json"
        assert job.epochs == 3

    def test_from_export_dir_defaults_when_hyperparameters_absent(self, tmp_path):
        write_jsonl(tmp_path / "train.jsonl", dataset_rows())
        (tmp_path / "train_config.json").write_text(json.dumps({
            "axis": "culture", "dataset": "train.jsonl",
        }))
        job = TrainJob.from_export_dir(tmp_path)
        assert job.learning_rate == 1e-6
        assert job.alignment_config is None

    def test_missing_config_rejected(self, tmp_path):
        with pytest.raises(DataError, match="train_config"):
            TrainJob.from_export_dir(tmp_path)

    def test_bad_hyperparameters_rejected(self, tmp_path):
        with pytest.raises(DataError, match="epochs"):
            TrainJob(dataset=tmp_path / "x", learning_rate=1e-5, epochs=0,
                     adapter_rank=8)


class TestEncoding:
    def test_layout(self):
        tokens, answer_from, terminal = encode_example("ab", "xyz", 512)
        assert tokens == [BOS, 97, 98, SEP, 120, 121, 122, EOS]
        assert answer_from == 4  # first target position carrying answer loss
        assert tokens[terminal] == 122  # last completion byte

    def test_truncation_keeps_answer(self):
        tokens, _, terminal = encode_example("p" * 600, "done", 128)
        assert len(tokens) <= 128
        assert bytes(tokens[terminal - 3 : terminal + 1]) == b"done"

    def test_text_terminal_matches_training_terminal(self):
        joined = "ab\nxyz"
        train_tokens, _, train_terminal = encode_example("ab", "xyz", 512)
        text_tokens, text_terminal = encode_text(joined, 512)
        assert text_tokens == train_tokens[:-1]
        assert text_terminal == train_terminal

    def test_empty_text_rejected(self):
        with pytest.raises(DataError):
            encode_text("", 512)
