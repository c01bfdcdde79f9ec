"""Performance estimation: built-in surrogate objectives and the external
trainer wire protocol.

Surrogates give the engine objectives with known structure for desk-scale
verification; real training happens in an external trainer process speaking
the line-delimited JSON protocol documented in PROTOCOL.md (one request
line, one response line; an optional persistent session negotiated by a
hello handshake).
"""

from __future__ import annotations

import hashlib
import json
import logging
import queue
import subprocess
import threading
from dataclasses import dataclass

import numpy as np

from .complexity import InputShape
from .errors import TableMissError, ValidationError
from .space import Genotype, SearchSpaceDef, distance, genotype_key, genotype_to_dict, validate_genotype

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

SURROGATE_KINDS = ("distance", "deceptive", "noisy_distance", "tabular")


@dataclass(frozen=True)
class EvaluationBudget:
    max_epochs: int = 100
    early_stopping_patience: int = 25
    fold: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.early_stopping_patience > self.max_epochs:
            raise ValidationError("early_stopping_patience must be <= max_epochs")
        if self.max_epochs < 1 or self.fold < 0:
            raise ValidationError("max_epochs must be >= 1 and fold >= 0")


@dataclass(frozen=True)
class SurrogateSpec:
    """A synthetic objective over the space.

    distance       - pseudometric to a hidden target; unique optimum 0.
    deceptive      - min(d, 0.35 + 0.8*|d - 0.6|): a false basin at d = 0.6.
    noisy_distance - distance plus seeded Gaussian noise, deterministic per
                     (genotype, seed).
    tabular        - exact lookup from a pre-enumerated table; errors on miss.
    """

    kind: str
    space: SearchSpaceDef
    target: Genotype | None = None
    noise_sigma: float = 0.0
    table_path: str | None = None

    def validate(self) -> None:
        if self.kind not in SURROGATE_KINDS:
            raise ValidationError(f"unknown surrogate kind {self.kind!r}")
        if self.kind in ("distance", "deceptive", "noisy_distance"):
            if self.target is None:
                raise ValidationError(f"surrogate kind {self.kind!r} requires a target")
            validate_genotype(self.target, self.space)
        if self.noise_sigma != 0.0 and self.kind != "noisy_distance":
            raise ValidationError("noise_sigma must be 0 unless kind is noisy_distance")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.kind == "tabular" and not self.table_path:
            raise ValidationError("tabular surrogate requires table_path")


@dataclass
class EvaluationResult:
    """Outcome of evaluating one genotype."""

    status: str  # ok | failed | timeout
    ce: float = float("nan")
    accuracy: float = 0.0
    precision_macro: float = 0.0
    recall_macro: float = 0.0
    f1_macro: float = 0.0
    per_fold: list[dict] | None = None
    epochs_ran: int | None = None
    flops: int | None = None
    message: str = ""


_TABLE_CACHE: dict[str, dict[str, float]] = {}


def _load_table(path: str) -> dict[str, float]:
    if path not in _TABLE_CACHE:
        table: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                key = json.dumps(row["genotype"], sort_keys=True, separators=(",", ":"))
                table[key] = float(row["objective"])
        _TABLE_CACHE[path] = table
    return _TABLE_CACHE[path]


def _noise(g: Genotype, seed: int, sigma: float) -> float:
    digest = hashlib.sha256(f"{genotype_key(g)}|{seed}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return float(rng.normal(0.0, sigma))


def deceptive_objective(d: float) -> float:
    return min(d, 0.35 + 0.8 * abs(d - 0.6))


def evaluate_surrogate(spec: SurrogateSpec, g: Genotype, seed: int) -> EvaluationResult:
    """Deterministic synthetic evaluation for fixed (spec, genotype, seed)."""
    spec.validate()
    validate_genotype(g, spec.space)
    if spec.kind == "tabular":
        table = _load_table(spec.table_path)
        key = genotype_key(g)
        if key not in table:
            raise TableMissError(f"genotype not in table {spec.table_path}: {key}")
        objective = table[key]
    else:
        d = distance(g, spec.target, spec.space)
        if spec.kind == "distance":
            objective = d
        elif spec.kind == "deceptive":
            objective = deceptive_objective(d)
        else:
            objective = d + _noise(g, seed, spec.noise_sigma)
    score = min(100.0, max(0.0, 100.0 * (1.0 - objective)))
    return EvaluationResult(
        status="ok",
        ce=objective,
        accuracy=score,
        precision_macro=score,
        recall_macro=score,
        f1_macro=score,
    )


# ---------------------------------------------------------------------------
# External trainer protocol (see PROTOCOL.md)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainerEndpoint:
    command: tuple[str, ...]
    dataset: str = "default"
    input_shape: InputShape | None = None
    session: bool = False


def dumps_line(doc: dict) -> str:
    """Canonical protocol serialization: compact separators, sorted keys."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def build_request(trial_id: int, g: Genotype, shape: InputShape | None,
                  budget: EvaluationBudget, dataset: str) -> dict:
    shape_doc = None
    if shape is not None:
        shape_doc = {
            "seq_len": shape.seq_len,
            "feature_dims": list(shape.feature_dims),
            "num_classes": shape.num_classes,
        }
    return {
        "type": "evaluate",
        "trial_id": trial_id,
        "genotype": genotype_to_dict(g),
        "input_shape": shape_doc,
        "budget": {
            "max_epochs": budget.max_epochs,
            "early_stopping_patience": budget.early_stopping_patience,
        },
        "dataset": dataset,
        "fold": budget.fold,
        "seed": budget.seed,
    }


def parse_response(line: str, trial_id: int) -> EvaluationResult:
    """Map one trainer response line to an EvaluationResult; any protocol
    violation becomes a failed result carrying the raw payload."""
    raw = line.strip()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError:
        return EvaluationResult(status="failed", message=f"unparseable response: {raw[:200]!r}")
    if not isinstance(doc, dict):
        return EvaluationResult(status="failed", message=f"non-object response: {raw[:200]!r}")
    if doc.get("type") != "result":
        return EvaluationResult(status="failed", message=f"unexpected type: {raw[:200]!r}")
    if doc.get("trial_id") != trial_id:
        return EvaluationResult(
            status="failed",
            message=f"trial_id mismatch (expected {trial_id}): {raw[:200]!r}",
        )
    status = doc.get("status")
    if status == "error":
        return EvaluationResult(status="failed",
                                message=str(doc.get("message", "trainer error")))
    if status != "ok":
        return EvaluationResult(status="failed", message=f"unknown status: {raw[:200]!r}")
    metrics = doc.get("metrics")
    if not isinstance(metrics, dict):
        return EvaluationResult(status="failed", message=f"missing metrics: {raw[:200]!r}")
    try:
        flops = doc.get("flops")
        return EvaluationResult(
            status="ok",
            ce=float(metrics["ce"]),
            accuracy=float(metrics["accuracy"]),
            precision_macro=float(metrics["precision_macro"]),
            recall_macro=float(metrics["recall_macro"]),
            f1_macro=float(metrics["f1_macro"]),
            epochs_ran=int(doc["epochs_ran"]) if doc.get("epochs_ran") is not None else None,
            flops=int(flops) if flops is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        return EvaluationResult(status="failed",
                                message=f"malformed metrics ({exc}): {raw[:200]!r}")


def _evaluate_stateless(endpoint: TrainerEndpoint, request: dict, trial_id: int,
                        timeout: float) -> EvaluationResult:
    try:
        proc = subprocess.Popen(
            list(endpoint.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        return EvaluationResult(status="failed", message=f"spawn failure: {exc}")
    try:
        out, err = proc.communicate(dumps_line(request) + "\n", timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return EvaluationResult(status="timeout",
                                message=f"no response within {timeout}s")
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.communicate()
    lines = [ln for ln in out.splitlines() if ln.strip()]
    if not lines:
        return EvaluationResult(
            status="failed",
            message=f"empty response (exit {proc.returncode}, stderr {err.strip()[:200]!r})",
        )
    return parse_response(lines[0], trial_id)


class TrainerSession:
    """Persistent trainer process: hello handshake, then one request/response
    pair per evaluation over the same pipes."""

    def __init__(self, endpoint: TrainerEndpoint, timeout: float = 600.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader: threading.Thread | None = None

    def _pump(self) -> None:
        assert self.proc is not None and self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def start(self) -> None:
        self.proc = subprocess.Popen(
            list(self.endpoint.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._send({"type": "hello", "version": PROTOCOL_VERSION, "mode": "session"})
        reply = self._read_line(self.timeout)
        if reply is None:
            raise ValidationError("trainer session handshake failed: no hello response")
        try:
            doc = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"trainer session handshake failed: {reply[:200]!r}") from exc
        if doc.get("type") != "hello" or not doc.get("session"):
            raise ValidationError(f"trainer refused session mode: {reply[:200]!r}")

    def _send(self, doc: dict) -> None:
        assert self.proc is not None and self.proc.stdin is not None
        self.proc.stdin.write(dumps_line(doc) + "\n")
        self.proc.stdin.flush()

    def _read_line(self, timeout: float) -> str | None:
        try:
            return self._lines.get(timeout=timeout)
        except queue.Empty:
            return None

    def evaluate(self, request: dict, trial_id: int,
                 timeout: float | None = None) -> EvaluationResult:
        if self.proc is None or self.proc.poll() is not None:
            return EvaluationResult(status="failed", message="trainer session not running")
        try:
            self._send(request)
        except (BrokenPipeError, OSError) as exc:
            return EvaluationResult(status="failed", message=f"session write failed: {exc}")
        line = self._read_line(timeout or self.timeout)
        if line is None:
            if self.proc.poll() is not None:
                return EvaluationResult(
                    status="failed",
                    message=f"trainer session exited with code {self.proc.returncode}")
            self.close()
            return EvaluationResult(status="timeout",
                                    message=f"no response within {timeout or self.timeout}s")
        return parse_response(line, trial_id)

    def close(self) -> None:
        if self.proc is None:
            return
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self) -> "TrainerSession":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def evaluate_external(
    endpoint: TrainerEndpoint,
    g: Genotype,
    budget: EvaluationBudget,
    timeout: float = 600.0,
    trial_id: int = 0,
    session: TrainerSession | None = None,
) -> EvaluationResult:
    """One evaluation over the wire protocol.  The child process is reaped on
    every path; timeouts, malformed responses and trainer-reported errors
    come back as distinct failed/timeout statuses with the raw payload."""
    budget.validate()
    request = build_request(trial_id, g, endpoint.input_shape, budget, endpoint.dataset)
    if session is not None:
        result = session.evaluate(request, trial_id, timeout)
    else:
        result = _evaluate_stateless(endpoint, request, trial_id, timeout)
    if result.status != "ok":
        logger.warning("external evaluation of trial %d: %s (%s)",
                       trial_id, result.status, result.message)
    return result
