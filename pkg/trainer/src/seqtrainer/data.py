"""Sequence-dataset ingestion and the bundled synthetic generator.

csv-sequences is the normative generic on-disk format: a directory with a
``manifest.json`` and one CSV file per instance.  The manifest lists class
names, modality names, instances (id, file, label) and an explicit fold
partition; the CSV header names columns ``modality:feature`` and each row
is one time step.  Two convenience loaders normalize the published
driving-dataset layouts into the same in-memory form; no real data is
bundled, only schema-matching fixtures in the test suite.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Schema violation while ingesting a dataset."""


@dataclass
class SequenceDataset:
    instances: list[dict[str, np.ndarray]]  # per-modality (seq_len, dim) arrays
    labels: np.ndarray  # (n,) integer class indices
    class_names: list[str]
    modality_names: list[str]
    folds: np.ndarray  # (n,) fold id per instance

    @property
    def num_instances(self) -> int:
        return len(self.instances)

    @property
    def num_folds(self) -> int:
        return int(self.folds.max()) + 1 if len(self.folds) else 0

    @property
    def feature_dims(self) -> list[int]:
        first = self.instances[0]
        return [first[m].shape[1] for m in self.modality_names]

    @property
    def seq_len(self) -> int:
        return self.instances[0][self.modality_names[0]].shape[0]

    def validate(self) -> None:
        n = self.num_instances
        if n == 0:
            raise DatasetError("dataset has no instances")
        if self.labels.shape != (n,) or self.folds.shape != (n,):
            raise DatasetError("labels/folds length mismatch")
        if len(self.class_names) < 2:
            raise DatasetError("need at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise DatasetError("label index out of range")
        dims = {m: self.instances[0][m].shape[1] for m in self.modality_names}
        for i, inst in enumerate(self.instances):
            for m in self.modality_names:
                if m not in inst:
                    raise DatasetError(f"instance {i} missing modality {m!r}")
                if inst[m].ndim != 2 or inst[m].shape[1] != dims[m]:
                    raise DatasetError(
                        f"instance {i} modality {m!r}: shape {inst[m].shape} "
                        f"inconsistent with feature dim {dims[m]}")


def _read_instance_csv(path: Path, modality_names: list[str]) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        columns: dict[str, list[int]] = {m: [] for m in modality_names}
        for idx, name in enumerate(header):
            modality, sep, _ = name.partition(":")
            if not sep:
                raise DatasetError(f"{path}: header column {name!r} is not "
                                   "'modality:feature'")
            if modality not in columns:
                raise DatasetError(f"{path}: unknown modality {modality!r} in header")
            columns[modality].append(idx)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    table = np.asarray(rows)
    if table.shape[1] != len(header):
        raise DatasetError(f"{path}: ragged rows")
    return {m: table[:, cols] for m, cols in columns.items()}


def load_csv_sequences(root: str | Path) -> SequenceDataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{root}: manifest.json not found")
    manifest = json.loads(manifest_path.read_text())
    try:
        class_names = list(manifest["classes"])
        modality_names = list(manifest["modalities"])
        instance_docs = manifest["instances"]
        fold_map = manifest["folds"]
    except KeyError as exc:
        raise DatasetError(f"manifest missing key {exc}") from exc

    ids = [doc["id"] for doc in instance_docs]
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate instance ids in manifest")

    fold_of: dict[str, int] = {}
    for fold_name, members in fold_map.items():
        fold_id = int(fold_name)
        for member in members:
            if member in fold_of:
                raise DatasetError(
                    f"instance {member!r} appears in folds {fold_of[member]} "
                    f"and {fold_id}: folds must partition the instances")
            fold_of[member] = fold_id
    missing = [i for i in ids if i not in fold_of]
    if missing:
        raise DatasetError(f"instances missing a fold assignment: {missing[:5]}")
    unknown = [i for i in fold_of if i not in set(ids)]
    if unknown:
        raise DatasetError(f"folds reference unknown instances: {unknown[:5]}")

    instances, labels, folds = [], [], []
    for doc in instance_docs:
        label = doc["label"]
        if label not in class_names:
            raise DatasetError(f"instance {doc['id']!r}: unknown label {label!r}")
        instances.append(_read_instance_csv(root / doc["file"], modality_names))
        labels.append(class_names.index(label))
        folds.append(fold_of[doc["id"]])
    dataset = SequenceDataset(instances, np.asarray(labels), class_names,
                              modality_names, np.asarray(folds))
    dataset.validate()
    return dataset


def load_b4c_layout(root: str | Path, num_folds: int = 5) -> SequenceDataset:
    """Maneuver-per-directory layout with two modality files per instance:
    ``cabin.csv`` (in-cabin features) and ``scene.csv`` (driving-scene
    features; vehicle speed is grouped with the scene modality).  Folds are
    assigned round-robin over sorted instance ids unless a ``folds.json``
    mapping is present."""
    root = Path(root)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if len(class_dirs) < 2:
        raise DatasetError(f"{root}: expected one directory per maneuver class")
    class_names = [d.name for d in class_dirs]
    entries = []
    for class_dir in class_dirs:
        for inst_dir in sorted(d for d in class_dir.iterdir() if d.is_dir()):
            cabin, scene = inst_dir / "cabin.csv", inst_dir / "scene.csv"
            if not cabin.exists() or not scene.exists():
                raise DatasetError(f"{inst_dir}: cabin.csv and scene.csv required")
            entries.append((f"{class_dir.name}/{inst_dir.name}",
                            class_names.index(class_dir.name), cabin, scene))
    if not entries:
        raise DatasetError(f"{root}: no instances found")

    folds_path = root / "folds.json"
    if folds_path.exists():
        fold_of = {k: int(v) for k, v in json.loads(folds_path.read_text()).items()}
    else:
        fold_of = {key: i % num_folds
                   for i, (key, _, _, _) in enumerate(sorted(entries))}

    def read_single(path: Path, modality: str) -> np.ndarray:
        return _read_instance_csv(path, [modality])[modality]

    instances, labels, folds = [], [], []
    for key, label, cabin, scene in entries:
        instances.append({"cabin": read_single(cabin, "cabin"),
                          "scene": read_single(scene, "scene")})
        labels.append(label)
        if key not in fold_of:
            raise DatasetError(f"folds.json missing instance {key!r}")
        folds.append(fold_of[key])
    dataset = SequenceDataset(instances, np.asarray(labels), class_names,
                              ["cabin", "scene"], np.asarray(folds))
    dataset.validate()
    return dataset


def load_roundabout_layout(root: str | Path, num_folds: int = 5) -> SequenceDataset:
    """Single-modality layout: ``labels.csv`` (file,label) plus one CSV per
    vehicle track with columns distance, angle, speed."""
    root = Path(root)
    labels_path = root / "labels.csv"
    if not labels_path.exists():
        raise DatasetError(f"{root}: labels.csv not found")
    class_names = ["left", "straight", "right"]
    instances, labels, folds = [], [], []
    with open(labels_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or ()) != {"file", "label"}:
            raise DatasetError("labels.csv must have columns file,label")
        for i, row in enumerate(reader):
            if row["label"] not in class_names:
                raise DatasetError(f"labels.csv row {i}: unknown label {row['label']!r}")
            track = _read_instance_csv(root / row["file"], ["track"])
            if track["track"].shape[1] != 3:
                raise DatasetError(f"{row['file']}: expected 3 features "
                                   "(distance, angle, speed)")
            instances.append(track)
            labels.append(class_names.index(row["label"]))
            folds.append(i % num_folds)
    dataset = SequenceDataset(instances, np.asarray(labels), class_names,
                              ["track"], np.asarray(folds))
    dataset.validate()
    return dataset


def save_csv_sequences(dataset: SequenceDataset, out_dir: str | Path) -> Path:
    """Write a dataset back out in csv-sequences form (full float precision,
    so load -> save -> load is lossless)."""
    dataset.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instance_docs = []
    fold_map: dict[str, list[str]] = {}
    header = [f"{m}:f{j}" for m in dataset.modality_names
              for j in range(dataset.instances[0][m].shape[1])]
    for i, inst in enumerate(dataset.instances):
        inst_id = f"inst_{i:05d}"
        filename = f"{inst_id}.csv"
        table = np.concatenate([inst[m] for m in dataset.modality_names], axis=1)
        with open(out / filename, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows([[repr(v) for v in row] for row in table.tolist()])
        instance_docs.append({"id": inst_id, "file": filename,
                              "label": dataset.class_names[dataset.labels[i]]})
        fold_map.setdefault(str(int(dataset.folds[i])), []).append(inst_id)
    manifest = {
        "classes": dataset.class_names,
        "modalities": dataset.modality_names,
        "instances": instance_docs,
        "folds": fold_map,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


FORMATS = {
    "csv-sequences": load_csv_sequences,
    "b4c-layout": load_b4c_layout,
    "roundabout-layout": load_roundabout_layout,
}


def ingest(path: str | Path, fmt: str) -> SequenceDataset:
    if fmt not in FORMATS:
        raise DatasetError(f"unknown format {fmt!r}; available: {sorted(FORMATS)}")
    return FORMATS[fmt](path)


def generate_synthetic(
    out_dir: str | Path,
    n: int = 600,
    num_classes: int = 3,
    seed: int = 1,
    seq_len: int = 16,
    feature_dims: tuple[int, ...] = (3, 3),
    num_folds: int = 5,
    drift_scale: float = 2.0,
    noise_scale: float = 0.25,
) -> Path:
    """Write a separable synthetic dataset in csv-sequences format.

    Each class drifts along its own fixed direction per modality; instances
    add Gaussian noise around the drift, which makes every class linearly
    distinguishable from short observation windows.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    modality_names = [f"m{i}" for i in range(len(feature_dims))]
    class_names = [f"class_{c}" for c in range(num_classes)]
    directions = {
        (c, m): rng.normal(size=dim) / math.sqrt(dim)
        for c in range(num_classes)
        for m, dim in enumerate(feature_dims)
    }
    instance_docs = []
    fold_map: dict[str, list[str]] = {str(f): [] for f in range(num_folds)}
    t_ramp = np.linspace(0.0, 1.0, seq_len)[:, None]
    for i in range(n):
        label = i % num_classes
        inst_id = f"inst_{i:05d}"
        filename = f"{inst_id}.csv"
        header, blocks = [], []
        for m, dim in enumerate(feature_dims):
            drift = t_ramp * drift_scale * directions[(label, m)][None, :]
            block = drift + noise_scale * rng.normal(size=(seq_len, dim))
            blocks.append(block)
            header.extend(f"{modality_names[m]}:f{j}" for j in range(dim))
        table = np.concatenate(blocks, axis=1)
        with open(out / filename, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(np.round(table, 6).tolist())
        instance_docs.append({"id": inst_id, "file": filename,
                              "label": class_names[label]})
        fold_map[str(i % num_folds)].append(inst_id)
    manifest = {
        "classes": class_names,
        "modalities": modality_names,
        "instances": instance_docs,
        "folds": fold_map,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
