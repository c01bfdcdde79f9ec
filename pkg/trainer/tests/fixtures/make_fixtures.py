"""Regenerates the committed loader fixtures (synthetic, schema-matching).

Run from this directory:  python make_fixtures.py
"""

import csv
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def write_csv(path: Path, header: list[str], table: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(np.round(table, 4).tolist())


def make_b4c(root: Path) -> None:
    """Five instances over three maneuver classes, two modality files each.
    Vehicle speed is grouped with the scene (exterior) modality."""
    rng = np.random.default_rng(7)
    cabin_header = [f"cabin:face_{i}" for i in range(4)]
    scene_header = ["scene:intersection", "scene:lane", "scene:lanes_left",
                    "scene:speed"]
    layout = [("lchange", "i01"), ("lchange", "i02"), ("rturn", "i01"),
              ("straight", "i01"), ("straight", "i02")]
    for maneuver, inst in layout:
        base = root / maneuver / inst
        write_csv(base / "cabin.csv", cabin_header, rng.normal(size=(10, 4)))
        write_csv(base / "scene.csv", scene_header, rng.normal(size=(10, 4)))


def make_roundabout(root: Path) -> None:
    rng = np.random.default_rng(11)
    header = ["track:distance", "track:angle", "track:speed"]
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, label in enumerate(["left", "straight", "right", "straight"]):
        name = f"track_{i:03d}.csv"
        write_csv(root / name, header, rng.normal(size=(12, 3)))
        rows.append((name, label))
    with open(root / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "label"])
        writer.writerows(rows)


if __name__ == "__main__":
    make_b4c(HERE / "b4c")
    make_roundabout(HERE / "roundabout")
    print("fixtures written")
