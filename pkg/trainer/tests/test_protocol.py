import json
import subprocess
import sys

from conftest import GOLDEN
from seqtrainer.serve import dumps_line, handle_request
from seqtrainer.train import TrainerSettings


def load_transcript():
    records = []
    with open(GOLDEN / "transcript.jsonl", encoding="utf-8") as fh:
        for line in fh:
            records.append(json.loads(line))
    return records


class TestGoldenTranscript:
    def test_handler_reproduces_golden_lines(self, tiny_dataset):
        records = load_transcript()
        settings = TrainerSettings()
        for record in records[1:]:  # the first record is the handshake
            response = dumps_line(handle_request(record["request"], tiny_dataset,
                                                 settings))
            assert response == record["response"]

    def test_session_subprocess_replays_golden_bit_exact(self):
        records = load_transcript()
        stdin_payload = "\n".join(r["request"] for r in records) + "\n"
        proc = subprocess.run(
            [sys.executable, "-m", "seqtrainer.cli", "serve",
             "--dataset", str(GOLDEN / "tiny_synth"),
             "--format", "csv-sequences", "--session"],
            input=stdin_payload, capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        out_lines = proc.stdout.splitlines()
        expected = [r["response"] for r in records]
        assert out_lines == expected


class TestRequestHandling:
    def test_unknown_fold_is_protocol_error(self, tiny_dataset):
        request = json.dumps({
            "type": "evaluate", "trial_id": 9,
            "genotype": {"layer_type": "LSTM", "fusion": "early",
                         "branches": [{"num_layers": 1, "num_units": 8,
                                       "ff_dim": None, "attention_heads": None}],
                         "head": {"num_layers": 1, "num_units": 8}},
            "input_shape": None,
            "budget": {"max_epochs": 1, "early_stopping_patience": 0},
            "dataset": "default", "fold": 42, "seed": 0})
        doc = handle_request(request, tiny_dataset, TrainerSettings())
        assert doc["status"] == "error"
        assert doc["trial_id"] == 9
        assert "fold" in doc["message"]

    def test_bad_dataset_path_exits_nonzero(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "seqtrainer.cli", "serve",
             "--dataset", str(tmp_path / "nope"), "--format", "csv-sequences"],
            input="", capture_output=True, text=True, timeout=120)
        assert proc.returncode == 1
        assert "manifest.json" in proc.stderr

    def test_stateless_serve_answers_once(self):
        request = json.dumps({
            "type": "evaluate", "trial_id": 1,
            "genotype": {"layer_type": "LSTM", "fusion": "early",
                         "branches": [{"num_layers": 1, "num_units": 8,
                                       "ff_dim": None, "attention_heads": None}],
                         "head": {"num_layers": 1, "num_units": 8}},
            "input_shape": None,
            "budget": {"max_epochs": 1, "early_stopping_patience": 0},
            "dataset": "default", "fold": 0, "seed": 1})
        proc = subprocess.run(
            [sys.executable, "-m", "seqtrainer.cli", "serve",
             "--dataset", str(GOLDEN / "tiny_synth"),
             "--format", "csv-sequences"],
            input=request + "\n", capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        lines = [ln for ln in proc.stdout.splitlines() if ln]
        assert len(lines) == 1
        doc = json.loads(lines[0])
        assert doc["status"] == "ok"
        assert doc["trial_id"] == 1
        assert doc["epochs_ran"] == 1
