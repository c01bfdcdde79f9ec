"""Run orchestration: the propose -> evaluate -> observe loop, the
append-only trial log with crash recovery, top-k selection, cross-validation
passes over an external trainer, and multi-run reporting."""

from __future__ import annotations

import csv
import io
import json
import logging
import pickle
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__ as ENGINE_VERSION
from .complexity import InputShape, estimate_flops
from .errors import EvaluatorFailureThreshold, StrategyConverged, ValidationError
from .evaluation import (
    EvaluationBudget,
    EvaluationResult,
    SurrogateSpec,
    TrainerEndpoint,
    TrainerSession,
    evaluate_external,
    evaluate_surrogate,
)
from .metrics import MetricReport
from .space import (
    Genotype,
    SearchSpaceDef,
    genotype_from_dict,
    genotype_to_dict,
    sample_uniform,
    space_from_dict,
    space_to_dict,
    validate_space,
)
from .strategies import STRATEGIES, TrialRecord, make_strategy

logger = logging.getLogger(__name__)

# A run aborts once more than half its trials failed, checked only after
# this many trials so a single early failure cannot kill a run.
FAILURE_ABORT_MIN_TRIALS = 4

DEFAULT_INPUT_SHAPE = InputShape(seq_len=20, feature_dims=(8,), num_classes=3)

REPORT_COLUMNS = ("strategy", "seed", "ce", "accuracy", "precision_macro",
                  "recall_macro", "f1_macro", "flops")


@dataclass(frozen=True)
class RunConfig:
    space: SearchSpaceDef
    strategy: str
    output_dir: str
    evaluator: SurrogateSpec | TrainerEndpoint
    strategy_params: dict = field(default_factory=dict)
    trials: int = 50
    seed: int = 0
    layer_type_restriction: str | None = None
    fusion_restriction: str | None = None
    concurrency: int = 1
    input_shape: InputShape = DEFAULT_INPUT_SHAPE
    budget: EvaluationBudget = EvaluationBudget()
    timeout_s: float = 600.0

    def validate(self) -> None:
        validate_space(self.space)
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}; available: {sorted(STRATEGIES)}"
            )
        if self.concurrency < 1:
            raise ValidationError("concurrency must be >= 1")
        if (self.layer_type_restriction is not None
                and self.layer_type_restriction not in self.space.seq_layer_types):
            raise ValidationError(
                f"layer_type_restriction {self.layer_type_restriction!r} not in space"
            )
        if (self.fusion_restriction is not None
                and self.fusion_restriction not in self.space.fusion_modes):
            raise ValidationError(
                f"fusion_restriction {self.fusion_restriction!r} not in space"
            )


def project_space(config: RunConfig) -> SearchSpaceDef:
    """Apply the per-run restrictions by shrinking the space, so strategies
    never have to know about them."""
    space = config.space
    if config.layer_type_restriction is not None:
        kwargs = {"seq_layer_types": (config.layer_type_restriction,)}
        if config.layer_type_restriction != "TST":
            kwargs["tst_ff_dim"] = None
            kwargs["tst_attention_heads"] = None
        space = replace(space, **kwargs)
    if config.fusion_restriction is not None:
        space = replace(space, fusion_modes=(config.fusion_restriction,))
    validate_space(space)
    return space


@dataclass
class RunRecord:
    config: RunConfig
    trials: list[TrialRecord]
    best: TrialRecord | None
    wall_time_s: float
    engine_version: str = ENGINE_VERSION


class TrialLog:
    """Append-only JSONL trial log.

    Every record is written as one flushed line before the strategy observes
    it.  On open, a malformed trailing line (torn write from a crash) is
    dropped and the file truncated back to the last intact record, so any
    crash leaves a valid, parseable prefix.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self.records: list[TrialRecord] = []
        self._recover()

    def _recover(self) -> None:
        if not self.path.exists():
            return
        keep = 0
        with open(self.path, "rb") as fh:
            data = fh.read()
        for raw in data.splitlines(keepends=True):
            if not raw.endswith(b"\n"):
                break
            try:
                self.records.append(TrialRecord.from_dict(json.loads(raw.decode("utf-8"))))
            except (ValueError, KeyError, ValidationError):
                break
            keep += len(raw)
        if keep < len(data):
            logger.warning("trial log %s: dropping %d bytes of torn tail",
                           self.path, len(data) - keep)
            with open(self.path, "r+b") as fh:
                fh.truncate(keep)

    def append(self, record: TrialRecord) -> None:
        payload = record.to_dict()
        if record.status != "ok":
            payload["objective"] = None
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
            fh.flush()
        self.records.append(record)


def _record_from_result(trial_id: int, g: Genotype, result: EvaluationResult,
                        seed: int, flops: int, wall_time: float) -> TrialRecord:
    def clamp(x: float) -> float:
        return min(100.0, max(0.0, x))

    if result.status == "ok":
        metrics = MetricReport(
            cross_entropy=result.ce,
            accuracy=clamp(result.accuracy),
            precision_macro=clamp(result.precision_macro),
            recall_macro=clamp(result.recall_macro),
            f1_macro=clamp(result.f1_macro),
        )
        objective = result.ce
    else:
        metrics = MetricReport(0.0, 0.0, 0.0, 0.0, 0.0)
        objective = float("nan")
    return TrialRecord(
        trial_id=trial_id,
        genotype=g,
        objective=objective,
        metrics=metrics,
        flops=flops,
        seed=seed,
        status=result.status,
        wall_time=wall_time,
    )


def _trial_seed(run_seed: int, trial_id: int) -> int:
    return (run_seed * 1_000_003 + trial_id) % (2 ** 31)


class _Evaluator:
    """Dispatches evaluations to the surrogate or the external trainer and
    owns the optional persistent trainer session."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.session: TrainerSession | None = None
        if isinstance(config.evaluator, TrainerEndpoint) and config.evaluator.session:
            self.session = TrainerSession(config.evaluator, timeout=config.timeout_s)
            self.session.start()

    def evaluate(self, trial_id: int, g: Genotype) -> TrialRecord:
        seed = _trial_seed(self.config.seed, trial_id)
        flops = estimate_flops(g, self.config.input_shape).total
        start = time.monotonic()
        if isinstance(self.config.evaluator, SurrogateSpec):
            result = evaluate_surrogate(self.config.evaluator, g, seed)
        else:
            budget = replace(self.config.budget, seed=seed)
            result = evaluate_external(
                self.config.evaluator, g, budget,
                timeout=self.config.timeout_s, trial_id=trial_id,
                session=self.session,
            )
        return _record_from_result(trial_id, g, result, seed, flops,
                                   time.monotonic() - start)

    def close(self) -> None:
        if self.session is not None:
            self.session.close()


def run_search(config: RunConfig) -> RunRecord:
    """Execute (or resume) one search run.

    Every trial is appended to the log before the strategy observes it; with
    concurrency 1 the run is a pure function of (config, evaluator) and a
    rerun or resume reproduces the identical log.
    """
    config.validate()
    started = time.monotonic()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config_to_dict(config), indent=2))

    space = project_space(config)
    strategy = make_strategy(config.strategy, space, config.seed, **config.strategy_params)
    fallback_rng = np.random.default_rng(_trial_seed(config.seed, 0) ^ 0x5EED)
    log = TrialLog(out / "trials.jsonl")
    evaluator = _Evaluator(config)
    records: list[TrialRecord] = []
    failed = 0

    def account(rec: TrialRecord) -> None:
        nonlocal failed
        records.append(rec)
        strategy.observe(rec)
        if rec.status != "ok":
            failed += 1
        if len(records) >= FAILURE_ABORT_MIN_TRIALS and failed * 2 > len(records):
            raise EvaluatorFailureThreshold(
                f"{failed}/{len(records)} trials failed; aborting run"
            )

    def propose() -> Genotype:
        try:
            return strategy.propose()
        except StrategyConverged as exc:
            logger.info("strategy %s converged (%s); falling back to uniform sampling",
                        config.strategy, exc)
            return sample_uniform(space, fallback_rng)

    try:
        if config.concurrency == 1:
            existing = list(log.records)
            for trial_id in range(1, config.trials + 1):
                g = propose()
                if trial_id <= len(existing):
                    rec = existing[trial_id - 1]
                    if rec.genotype != g:
                        logger.warning(
                            "resume: logged genotype for trial %d does not match the "
                            "replayed proposal; keeping the log", trial_id)
                else:
                    rec = evaluator.evaluate(trial_id, g)
                    log.append(rec)
                account(rec)
        else:
            for rec in log.records:  # resume path: feed logged trials back
                account(rec)
            next_id = max((r.trial_id for r in records), default=0) + 1
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                in_flight = {}
                while next_id <= config.trials or in_flight:
                    while next_id <= config.trials and len(in_flight) < config.concurrency:
                        g = propose()
                        strategy.note_pending(g)
                        in_flight[pool.submit(evaluator.evaluate, next_id, g)] = next_id
                        next_id += 1
                    done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
                    for fut in done:
                        del in_flight[fut]
                        rec = fut.result()
                        log.append(rec)
                        account(rec)
    finally:
        evaluator.close()
        try:
            with open(out / "strategy_state.pkl", "wb") as fh:
                pickle.dump(strategy, fh)
        except Exception as exc:  # state snapshot is diagnostic, never fatal
            logger.warning("could not serialize strategy state: %s", exc)

    ranked = top_k_records(records, 1)
    best = ranked[0] if ranked else None
    record = RunRecord(config=config, trials=records, best=best,
                       wall_time_s=time.monotonic() - started)
    _write_run_outputs(out, record)
    return record


def _write_run_outputs(out: Path, record: RunRecord) -> None:
    doc = {
        "engine_version": record.engine_version,
        "strategy": record.config.strategy,
        "seed": record.config.seed,
        "trials": len(record.trials),
        "best": record.best.to_dict() if record.best else None,
        "wall_time_s": record.wall_time_s,
        "trial_wall_times": [r.wall_time for r in record.trials],
    }
    (out / "run_record.json").write_text(json.dumps(doc, indent=2))
    (out / "report.csv").write_text(report_csv([run_row(record)]))


# ---------------------------------------------------------------------------
# Selection and cross-validation
# ---------------------------------------------------------------------------


def top_k_records(trials: list[TrialRecord], k: int) -> list[TrialRecord]:
    if k < 1:
        raise ValidationError("k must be >= 1")
    ok = [t for t in trials if t.status == "ok"]
    return sorted(ok, key=lambda t: (t.objective, t.flops, t.trial_id))[:k]


def top_k(run: RunRecord, k: int) -> list[TrialRecord]:
    """The k successful trials with the lowest objective; ties break toward
    lower FLOPs, then lower trial id."""
    return top_k_records(run.trials, k)


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.3f}"


@dataclass
class CrossValidationEntry:
    genotype: Genotype
    folds: int
    metrics: dict[str, tuple[float, float]]  # name -> (mean, population std)
    partial: bool
    fold_metrics: list[MetricReport | None]

    def formatted(self) -> dict[str, str]:
        return {name: format_mean_std(m, s) for name, (m, s) in self.metrics.items()}


def cross_validate(
    genotypes: list[Genotype],
    endpoint: TrainerEndpoint,
    folds: int,
    budget: EvaluationBudget = EvaluationBudget(),
    timeout: float = 600.0,
) -> list[CrossValidationEntry]:
    """Evaluate each genotype on folds 0..folds-1 over the wire protocol and
    aggregate per-metric mean and population standard deviation.  Any fold
    failure marks that genotype's entry as partial."""
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    session = None
    if endpoint.session:
        session = TrainerSession(endpoint, timeout=timeout)
        session.start()
    entries = []
    try:
        for gi, g in enumerate(genotypes):
            per_fold: list[MetricReport | None] = []
            for fold in range(folds):
                fold_budget = replace(budget, fold=fold)
                result = evaluate_external(endpoint, g, fold_budget, timeout=timeout,
                                           trial_id=gi * folds + fold, session=session)
                if result.status == "ok":
                    per_fold.append(MetricReport(
                        cross_entropy=result.ce,
                        accuracy=result.accuracy,
                        precision_macro=result.precision_macro,
                        recall_macro=result.recall_macro,
                        f1_macro=result.f1_macro,
                    ))
                else:
                    per_fold.append(None)
            collected = [m for m in per_fold if m is not None]
            partial = len(collected) < folds
            stats: dict[str, tuple[float, float]] = {}
            if collected:
                for name in ("ce", "accuracy", "precision_macro", "recall_macro", "f1_macro"):
                    values = np.array([m.to_dict()[name] for m in collected])
                    stats[name] = (float(values.mean()), float(values.std()))
            if partial:
                logger.warning("cross-validation of genotype %d incomplete: "
                               "%d/%d folds ok", gi, len(collected), folds)
            entries.append(CrossValidationEntry(
                genotype=g, folds=folds, metrics=stats,
                partial=partial, fold_metrics=per_fold,
            ))
    finally:
        if session is not None:
            session.close()
    return entries


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def run_row(record: RunRecord) -> dict:
    best = record.best
    row = {"strategy": record.config.strategy, "seed": record.config.seed}
    if best is None:
        row.update({name: float("nan") for name in REPORT_COLUMNS[2:]})
        return row
    md = best.metrics.to_dict()
    row.update({
        "ce": md["ce"],
        "accuracy": md["accuracy"],
        "precision_macro": md["precision_macro"],
        "recall_macro": md["recall_macro"],
        "f1_macro": md["f1_macro"],
        "flops": best.flops,
    })
    return row


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def report_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row: dict = {"strategy": raw["strategy"], "seed": int(raw["seed"])}
        for c in REPORT_COLUMNS[2:]:
            row[c] = float(raw[c])
        rows.append(row)
    return rows


def report_table(rows: list[dict]) -> str:
    headers = ("Strategy", "CE (down)", "Acc (up)", "Pr (up)", "Re (up)",
               "F1 (up)", "FLOPs")
    keys = ("strategy", "ce", "accuracy", "precision_macro", "recall_macro",
            "f1_macro", "flops")
    table = [[_fmt(row[k]) for k in keys] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in table)) if table else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def scatter_data(records: list[RunRecord], k: int) -> str:
    """(flops, ce, labels) triples for the top-k trials of each run, as CSV
    ready for external plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("flops", "ce", "layer_type", "fusion", "strategy"))
    for record in records:
        for t in top_k(record, k):
            writer.writerow((t.flops, _fmt(t.objective), t.genotype.layer_type,
                             t.genotype.fusion, record.config.strategy))
    return buf.getvalue()


def load_run(run_dir: str | Path) -> RunRecord:
    run_dir = Path(run_dir)
    config = config_from_dict(json.loads((run_dir / "config.json").read_text()))
    log = TrialLog(run_dir / "trials.jsonl")
    ranked = top_k_records(log.records, 1)
    return RunRecord(config=config, trials=log.records,
                     best=ranked[0] if ranked else None, wall_time_s=0.0)


def report(run_dirs: list[str | Path], fmt: str = "table", k: int = 3) -> str:
    """Aggregate one document over several run directories.  Missing or
    corrupt runs are skipped with a warning; the rest are still reported."""
    records = []
    for d in run_dirs:
        try:
            records.append(load_run(d))
        except (OSError, ValueError, KeyError, ValidationError) as exc:
            logger.warning("skipping run dir %s: %s", d, exc)
    records.sort(key=lambda r: (r.config.strategy, r.config.seed))
    if fmt == "scatter-data":
        return scatter_data(records, k)
    rows = [run_row(r) for r in records]
    if fmt == "csv":
        return report_csv(rows)
    if fmt == "table":
        return report_table(rows)
    raise ValidationError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# Config (de)serialization
# ---------------------------------------------------------------------------


def _shape_to_dict(shape: InputShape) -> dict:
    return {"seq_len": shape.seq_len, "feature_dims": list(shape.feature_dims),
            "num_classes": shape.num_classes}


def _shape_from_dict(d: dict) -> InputShape:
    return InputShape(seq_len=int(d["seq_len"]),
                      feature_dims=tuple(int(x) for x in d["feature_dims"]),
                      num_classes=int(d["num_classes"]))


def evaluator_to_dict(ev: SurrogateSpec | TrainerEndpoint) -> dict:
    if isinstance(ev, SurrogateSpec):
        return {
            "type": "surrogate",
            "kind": ev.kind,
            "target": genotype_to_dict(ev.target) if ev.target else None,
            "noise_sigma": ev.noise_sigma,
            "table_path": ev.table_path,
        }
    return {
        "type": "subprocess",
        "command": list(ev.command),
        "dataset": ev.dataset,
        "session": ev.session,
        "input_shape": _shape_to_dict(ev.input_shape) if ev.input_shape else None,
    }


def evaluator_from_dict(d: dict, space: SearchSpaceDef) -> SurrogateSpec | TrainerEndpoint:
    if d["type"] == "surrogate":
        return SurrogateSpec(
            kind=d["kind"],
            space=space,
            target=genotype_from_dict(d["target"]) if d.get("target") else None,
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            table_path=d.get("table_path"),
        )
    if d["type"] == "subprocess":
        shape = d.get("input_shape")
        return TrainerEndpoint(
            command=tuple(d["command"]),
            dataset=d.get("dataset", "default"),
            session=bool(d.get("session", False)),
            input_shape=_shape_from_dict(shape) if shape else None,
        )
    raise ValidationError(f"unknown evaluator type {d.get('type')!r}")


def config_to_dict(config: RunConfig) -> dict:
    return {
        "space": space_to_dict(config.space),
        "strategy": {"name": config.strategy, "params": config.strategy_params},
        "evaluator": evaluator_to_dict(config.evaluator),
        "trials": config.trials,
        "seed": config.seed,
        "layer_type_restriction": config.layer_type_restriction,
        "fusion_restriction": config.fusion_restriction,
        "output_dir": str(config.output_dir),
        "concurrency": config.concurrency,
        "input_shape": _shape_to_dict(config.input_shape),
        "budget": {
            "max_epochs": config.budget.max_epochs,
            "early_stopping_patience": config.budget.early_stopping_patience,
            "fold": config.budget.fold,
        },
        "timeout_s": config.timeout_s,
    }


def config_from_dict(d: dict) -> RunConfig:
    try:
        space = space_from_dict(d["space"])
        budget_doc = d.get("budget", {})
        return RunConfig(
            space=space,
            strategy=d["strategy"]["name"],
            strategy_params=d["strategy"].get("params", {}),
            evaluator=evaluator_from_dict(d["evaluator"], space),
            trials=int(d.get("trials", 50)),
            seed=int(d.get("seed", 0)),
            layer_type_restriction=d.get("layer_type_restriction"),
            fusion_restriction=d.get("fusion_restriction"),
            output_dir=d["output_dir"],
            concurrency=int(d.get("concurrency", 1)),
            input_shape=(_shape_from_dict(d["input_shape"])
                         if d.get("input_shape") else DEFAULT_INPUT_SHAPE),
            budget=EvaluationBudget(
                max_epochs=int(budget_doc.get("max_epochs", 100)),
                early_stopping_patience=int(budget_doc.get("early_stopping_patience", 25)),
                fold=int(budget_doc.get("fold", 0)),
            ),
            timeout_s=float(d.get("timeout_s", 600.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed run config: {exc}") from exc
