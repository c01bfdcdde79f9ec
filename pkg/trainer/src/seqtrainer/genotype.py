"""Genotype documents as they arrive over the wire.

The trainer is a standalone protocol peer: it parses the documented
genotype JSON schema itself rather than importing the search engine.
"""

from __future__ import annotations

from dataclasses import dataclass

LAYER_TYPES = ("LSTM", "TCN", "TST")
FUSION_MODES = ("none", "early", "intermediate", "late")


class GenotypeError(ValueError):
    """The genotype document is malformed or internally inconsistent."""


@dataclass(frozen=True)
class BlockSpec:
    num_layers: int
    num_units: int
    ff_dim: int | None = None
    attention_heads: int | None = None


@dataclass(frozen=True)
class HeadSpec:
    num_layers: int
    num_units: int


@dataclass(frozen=True)
class GenotypeSpec:
    layer_type: str
    fusion: str
    branches: tuple[BlockSpec, ...]
    head: HeadSpec


def expected_branches(fusion: str, num_modalities: int) -> int:
    if fusion in ("none", "early"):
        return 1
    if fusion == "late":
        return num_modalities
    return num_modalities + 1  # intermediate: per-modality plus shared


def parse_genotype(doc: dict) -> GenotypeSpec:
    try:
        layer_type = doc["layer_type"]
        fusion = doc.get("fusion", "none")
        branches = tuple(
            BlockSpec(
                num_layers=int(b["num_layers"]),
                num_units=int(b["num_units"]),
                ff_dim=None if b.get("ff_dim") is None else int(b["ff_dim"]),
                attention_heads=(None if b.get("attention_heads") is None
                                 else int(b["attention_heads"])),
            )
            for b in doc["branches"]
        )
        head = HeadSpec(num_layers=int(doc["head"]["num_layers"]),
                        num_units=int(doc["head"]["num_units"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise GenotypeError(f"malformed genotype document: {exc}") from exc

    if layer_type not in LAYER_TYPES:
        raise GenotypeError(f"unknown layer_type {layer_type!r}")
    if fusion not in FUSION_MODES:
        raise GenotypeError(f"unknown fusion {fusion!r}")
    if not branches:
        raise GenotypeError("genotype has no branches")
    for i, b in enumerate(branches):
        if b.num_layers < 1 or b.num_units < 1:
            raise GenotypeError(f"branches[{i}]: non-positive size")
        if layer_type == "TST":
            if b.ff_dim is None or b.attention_heads is None:
                raise GenotypeError(f"branches[{i}]: TST genotype missing "
                                    "ff_dim/attention_heads")
            if b.ff_dim < 1 or b.attention_heads < 1:
                raise GenotypeError(f"branches[{i}]: non-positive TST fields")
    if head.num_layers < 1 or head.num_units < 1:
        raise GenotypeError("head: non-positive size")
    return GenotypeSpec(layer_type, fusion, branches, head)
