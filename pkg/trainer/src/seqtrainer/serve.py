"""Wire-protocol server: one JSON document per line over stdin/stdout.

Stateless mode answers a single evaluate request and exits; session mode is
negotiated by a hello handshake and serves requests until stdin closes.
Responses use the canonical serialization (sorted keys, compact
separators) pinned by the golden transcripts.
"""

from __future__ import annotations

import json
import sys

from .data import SequenceDataset
from .genotype import GenotypeError, parse_genotype
from .train import TrainerSettings, TrainingError, train_and_evaluate

PROTOCOL_VERSION = 1


def dumps_line(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def error_response(trial_id: int, message: str) -> dict:
    return {"type": "result", "trial_id": trial_id, "status": "error",
            "message": message}


def handle_request(line: str, dataset: SequenceDataset,
                   settings: TrainerSettings) -> dict:
    """One request line to one response document."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        return error_response(0, f"unparseable request: {exc}")
    if not isinstance(doc, dict):
        return error_response(0, "request is not a JSON object")
    trial_id = doc.get("trial_id", 0)
    if not isinstance(trial_id, int):
        trial_id = 0
    if doc.get("type") != "evaluate":
        return error_response(trial_id, f"unsupported request type {doc.get('type')!r}")
    try:
        genotype = parse_genotype(doc["genotype"])
    except (KeyError, TypeError) as exc:
        return error_response(trial_id, f"missing genotype: {exc}")
    except GenotypeError as exc:
        return error_response(trial_id, str(exc))

    shape = doc.get("input_shape")
    if shape is not None:
        dims = [int(d) for d in shape.get("feature_dims", [])]
        if dims and dims != dataset.feature_dims:
            return error_response(
                trial_id,
                f"input_shape feature_dims {dims} do not match dataset "
                f"{dataset.feature_dims}")
        classes = shape.get("num_classes")
        if classes is not None and int(classes) != len(dataset.class_names):
            return error_response(
                trial_id,
                f"input_shape num_classes {classes} does not match dataset "
                f"{len(dataset.class_names)}")

    budget = doc.get("budget") or {}
    try:
        max_epochs = int(budget.get("max_epochs", 100))
        patience = int(budget.get("early_stopping_patience", 25))
        fold = int(doc.get("fold", 0))
        seed = int(doc.get("seed", 0))
    except (TypeError, ValueError) as exc:
        return error_response(trial_id, f"malformed budget/fold/seed: {exc}")

    try:
        outcome = train_and_evaluate(genotype, dataset, max_epochs=max_epochs,
                                     patience=patience, fold=fold, seed=seed,
                                     settings=settings)
    except (TrainingError, ValueError) as exc:
        return error_response(trial_id, str(exc))
    return {
        "type": "result",
        "trial_id": trial_id,
        "status": "ok",
        "metrics": outcome.metrics,
        "flops": None,
        "epochs_ran": outcome.epochs_ran,
    }


def serve(dataset: SequenceDataset, settings: TrainerSettings, session: bool,
          stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def emit(doc: dict) -> None:
        stdout.write(dumps_line(doc) + "\n")
        stdout.flush()

    if session:
        hello = stdin.readline()
        if not hello:
            return 0
        try:
            doc = json.loads(hello)
        except json.JSONDecodeError:
            emit(error_response(0, "expected hello handshake"))
            return 1
        if doc.get("type") != "hello":
            emit(error_response(0, "expected hello handshake"))
            return 1
        emit({"type": "hello", "version": PROTOCOL_VERSION, "session": True})
        for line in stdin:
            if not line.strip():
                continue
            emit(handle_request(line, dataset, settings))
        return 0

    line = stdin.readline()
    if not line.strip():
        return 1
    emit(handle_request(line, dataset, settings))
    return 0
