"""Block-encoded architecture search space.

A genotype describes one sequence-classification architecture: a stack of
sequence layers (LSTM, TCN or TST), an optional multimodal fusion wiring,
and a dense classification head.  This module owns the space definition,
genotype validation, uniform sampling, single-step perturbation (neighbors,
mutate), a fixed-length [0,1] vector encoding used by the vector-based
search strategies, and a normalized pseudometric between genotypes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import LayoutError, ValidationError

LAYER_TYPES = ("LSTM", "TCN", "TST")
FUSION_MODES = ("none", "early", "intermediate", "late")

# Smallest granular move per numeric dimension, used by hill-climbing.
DEFAULT_STEP_SIZES = {
    "num_layers": 1,
    "num_units": 8,
    "ff_dim": 16,
    "attention_heads": 2,
    "head_num_layers": 1,
    "head_num_units": 8,
}

RngLike = Union[int, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(int(rng))


@dataclass(frozen=True)
class IntRange:
    """Closed integer interval [lo, hi]."""

    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def span(self) -> int:
        return self.hi - self.lo

    def contains(self, v: int) -> bool:
        return self.lo <= v <= self.hi

    def clip(self, v: int) -> int:
        return min(self.hi, max(self.lo, v))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def sample_excluding(self, rng: np.random.Generator, current: int) -> int:
        """Uniform draw over the range minus ``current`` (range must have >= 2 values)."""
        v = int(rng.integers(self.lo, self.hi))
        return v + 1 if v >= current else v


@dataclass(frozen=True)
class SearchSpaceDef:
    """Boundaries of the block-encoded search space.

    ``tst_ff_dim`` and ``tst_attention_heads`` are conditional dimensions:
    they exist iff "TST" is among the layer types.  With a single modality
    the only fusion mode is "none"; with several, fusion becomes a search
    dimension over {early, intermediate, late}.
    """

    seq_layer_types: tuple[str, ...]
    seq_num_layers: IntRange
    seq_num_units: IntRange
    head_num_layers: IntRange
    head_num_units: IntRange
    fusion_modes: tuple[str, ...] = ("none",)
    num_modalities: int = 1
    tst_ff_dim: IntRange | None = None
    tst_attention_heads: IntRange | None = None

    @property
    def has_tst(self) -> bool:
        return "TST" in self.seq_layer_types

    @property
    def multimodal(self) -> bool:
        return self.num_modalities > 1

    def block_slot_count(self) -> int:
        """Fixed number of sequence-block slots in the encoding layout.

        Slot i < num_modalities holds the per-modality (or the single) block;
        the extra slot holds the shared post-fusion block used by
        intermediate fusion.  With one modality there is a single slot.
        """
        return 1 if self.num_modalities == 1 else self.num_modalities + 1


def branch_count(fusion: str, num_modalities: int) -> int:
    """Number of sequence blocks a genotype carries for a fusion mode."""
    if fusion in ("none", "early"):
        return 1
    if fusion == "late":
        return num_modalities
    if fusion == "intermediate":
        return num_modalities + 1
    raise ValidationError(f"unknown fusion mode {fusion!r}")


def validate_space(space: SearchSpaceDef) -> None:
    """Raise ValidationError listing every offending field."""
    problems: list[str] = []
    if not space.seq_layer_types:
        problems.append("seq_layer_types: empty")
    for t in space.seq_layer_types:
        if t not in LAYER_TYPES:
            problems.append(f"seq_layer_types: unknown layer type {t!r}")
    if len(set(space.seq_layer_types)) != len(space.seq_layer_types):
        problems.append("seq_layer_types: duplicate entries")

    for name in ("seq_num_layers", "seq_num_units", "head_num_layers", "head_num_units"):
        rng: IntRange = getattr(space, name)
        if rng.lo > rng.hi:
            problems.append(f"{name}: empty range [{rng.lo}, {rng.hi}]")
        if rng.lo < 1:
            problems.append(f"{name}: minimum must be >= 1")

    if space.has_tst:
        for name in ("tst_ff_dim", "tst_attention_heads"):
            rng = getattr(space, name)
            if rng is None:
                problems.append(f"{name}: required when TST is a layer type")
            elif rng.lo > rng.hi:
                problems.append(f"{name}: empty range [{rng.lo}, {rng.hi}]")
            elif rng.lo < 1:
                problems.append(f"{name}: minimum must be >= 1")
    else:
        if space.tst_ff_dim is not None or space.tst_attention_heads is not None:
            problems.append("tst_ff_dim/tst_attention_heads: set without TST in seq_layer_types")

    if space.num_modalities < 1:
        problems.append("num_modalities: must be >= 1")
    if not space.fusion_modes:
        problems.append("fusion_modes: empty")
    for m in space.fusion_modes:
        if m not in FUSION_MODES:
            problems.append(f"fusion_modes: unknown mode {m!r}")
    if len(set(space.fusion_modes)) != len(space.fusion_modes):
        problems.append("fusion_modes: duplicate entries")
    if space.num_modalities == 1 and tuple(space.fusion_modes) != ("none",):
        problems.append("fusion_modes: must be exactly ('none',) with a single modality")
    if space.num_modalities > 1 and "none" in space.fusion_modes:
        problems.append("fusion_modes: 'none' is not a valid mode with multiple modalities")

    if problems:
        raise ValidationError("invalid search space: " + "; ".join(problems))


def default_space(
    layer_types: Iterable[str] = LAYER_TYPES,
    fusion_modes: Iterable[str] = ("none",),
    num_modalities: int = 1,
) -> SearchSpaceDef:
    """The standard search space: LSTM/TCN/TST stacks, 1-4 layers of 8-256
    units (TST feed-forward 16-256, 2-16 heads), head of 1-3 layers with
    8-128 units."""
    types = tuple(t for t in LAYER_TYPES if t in set(layer_types))
    space = SearchSpaceDef(
        seq_layer_types=types,
        seq_num_layers=IntRange(1, 4),
        seq_num_units=IntRange(8, 256),
        head_num_layers=IntRange(1, 3),
        head_num_units=IntRange(8, 128),
        fusion_modes=tuple(m for m in FUSION_MODES if m in set(fusion_modes)),
        num_modalities=num_modalities,
        tst_ff_dim=IntRange(16, 256) if "TST" in types else None,
        tst_attention_heads=IntRange(2, 16) if "TST" in types else None,
    )
    validate_space(space)
    return space


@dataclass(frozen=True)
class SequenceBlock:
    """One stack of sequence layers; a single width applies to every layer."""

    num_layers: int
    num_units: int
    ff_dim: int | None = None
    attention_heads: int | None = None


@dataclass(frozen=True)
class ClassificationHead:
    num_layers: int
    num_units: int


@dataclass(frozen=True)
class Genotype:
    """One concrete architecture drawn from a SearchSpaceDef.

    ``branches`` holds one block for fusion none/early, one per modality for
    late fusion, and one per modality plus a trailing shared block for
    intermediate fusion.
    """

    layer_type: str
    fusion: str
    branches: tuple[SequenceBlock, ...]
    head: ClassificationHead


def validate_genotype(g: Genotype, space: SearchSpaceDef) -> None:
    validate_space(space)
    problems: list[str] = []
    if g.layer_type not in space.seq_layer_types:
        problems.append(f"layer_type {g.layer_type!r} not in space")
    if g.fusion not in space.fusion_modes:
        problems.append(f"fusion {g.fusion!r} not in space")
    else:
        expected = branch_count(g.fusion, space.num_modalities)
        if len(g.branches) != expected:
            problems.append(
                f"branch count {len(g.branches)} inconsistent with fusion "
                f"{g.fusion!r} ({expected} expected)"
            )
    is_tst = g.layer_type == "TST"
    for i, b in enumerate(g.branches):
        if not space.seq_num_layers.contains(b.num_layers):
            problems.append(f"branches[{i}].num_layers={b.num_layers} out of range")
        if not space.seq_num_units.contains(b.num_units):
            problems.append(f"branches[{i}].num_units={b.num_units} out of range")
        if is_tst:
            if b.ff_dim is None or b.attention_heads is None:
                problems.append(f"branches[{i}]: TST fields unset for TST genotype")
            elif space.has_tst:
                if not space.tst_ff_dim.contains(b.ff_dim):
                    problems.append(f"branches[{i}].ff_dim={b.ff_dim} out of range")
                if not space.tst_attention_heads.contains(b.attention_heads):
                    problems.append(
                        f"branches[{i}].attention_heads={b.attention_heads} out of range"
                    )
        else:
            if b.ff_dim is not None or b.attention_heads is not None:
                problems.append(f"branches[{i}]: TST fields set on non-TST genotype")
    if not space.head_num_layers.contains(g.head.num_layers):
        problems.append(f"head.num_layers={g.head.num_layers} out of range")
    if not space.head_num_units.contains(g.head.num_units):
        problems.append(f"head.num_units={g.head.num_units} out of range")
    if problems:
        raise ValidationError("invalid genotype: " + "; ".join(problems))


def _sample_block(space: SearchSpaceDef, rng: np.random.Generator, is_tst: bool) -> SequenceBlock:
    return SequenceBlock(
        num_layers=space.seq_num_layers.sample(rng),
        num_units=space.seq_num_units.sample(rng),
        ff_dim=space.tst_ff_dim.sample(rng) if is_tst else None,
        attention_heads=space.tst_attention_heads.sample(rng) if is_tst else None,
    )


def sample_uniform(space: SearchSpaceDef, rng: RngLike) -> Genotype:
    """Uniform draw: every independent dimension uniform over its range,
    conditional dimensions sampled only when active."""
    validate_space(space)
    r = as_generator(rng)
    layer_type = space.seq_layer_types[int(r.integers(len(space.seq_layer_types)))]
    fusion = space.fusion_modes[int(r.integers(len(space.fusion_modes)))]
    is_tst = layer_type == "TST"
    n_branches = branch_count(fusion, space.num_modalities)
    branches = tuple(_sample_block(space, r, is_tst) for _ in range(n_branches))
    head = ClassificationHead(
        num_layers=space.head_num_layers.sample(r),
        num_units=space.head_num_units.sample(r),
    )
    return Genotype(layer_type=layer_type, fusion=fusion, branches=branches, head=head)


def minimal_genotype(space: SearchSpaceDef) -> Genotype:
    """The compact corner: every numeric dimension at its minimum, the first
    canonical layer type and fusion mode."""
    validate_space(space)
    layer_type = space.seq_layer_types[0]
    fusion = space.fusion_modes[0]
    is_tst = layer_type == "TST"
    block = SequenceBlock(
        num_layers=space.seq_num_layers.lo,
        num_units=space.seq_num_units.lo,
        ff_dim=space.tst_ff_dim.lo if is_tst else None,
        attention_heads=space.tst_attention_heads.lo if is_tst else None,
    )
    branches = tuple(block for _ in range(branch_count(fusion, space.num_modalities)))
    head = ClassificationHead(space.head_num_layers.lo, space.head_num_units.lo)
    return Genotype(layer_type, fusion, branches, head)


# ---------------------------------------------------------------------------
# Logical dimensions
# ---------------------------------------------------------------------------
# The space is described by a list of logical dimensions (independent of the
# one-hot expansion used by the vector encoding).  Each dimension knows how
# to read/write its value on a genotype and whether it is active for a given
# genotype.  Block slots are indexed 0..block_slot_count-1; a slot is active
# when the genotype's branch list covers it; TST-only fields are active only
# on TST genotypes.


@dataclass(frozen=True)
class DimInfo:
    name: str
    kind: str  # "cat" | "int"
    choices: tuple[str, ...] = ()
    rng: IntRange | None = None
    block: int | None = None  # block slot index, None for non-block dims
    field: str = ""  # genotype field within the block/head
    tst_only: bool = False

    def active(self, g: Genotype) -> bool:
        if self.block is not None and self.block >= len(g.branches):
            return False
        if self.tst_only and g.layer_type != "TST":
            return False
        return True

    def read(self, g: Genotype):
        if self.name == "layer_type":
            return g.layer_type
        if self.name == "fusion":
            return g.fusion
        if self.block is not None:
            return getattr(g.branches[self.block], self.field)
        return getattr(g.head, self.field)


@lru_cache(maxsize=64)
def logical_dims(space: SearchSpaceDef) -> tuple[DimInfo, ...]:
    dims: list[DimInfo] = [
        DimInfo("layer_type", "cat", choices=space.seq_layer_types)
    ]
    if space.multimodal:
        dims.append(DimInfo("fusion", "cat", choices=space.fusion_modes))
    for slot in range(space.block_slot_count()):
        dims.append(DimInfo(f"block{slot}.num_layers", "int", rng=space.seq_num_layers,
                            block=slot, field="num_layers"))
        dims.append(DimInfo(f"block{slot}.num_units", "int", rng=space.seq_num_units,
                            block=slot, field="num_units"))
        if space.has_tst:
            dims.append(DimInfo(f"block{slot}.ff_dim", "int", rng=space.tst_ff_dim,
                                block=slot, field="ff_dim", tst_only=True))
            dims.append(DimInfo(f"block{slot}.attention_heads", "int",
                                rng=space.tst_attention_heads,
                                block=slot, field="attention_heads", tst_only=True))
    dims.append(DimInfo("head.num_layers", "int", rng=space.head_num_layers, field="num_layers"))
    dims.append(DimInfo("head.num_units", "int", rng=space.head_num_units, field="num_units"))
    return tuple(dims)


def _set_dim(g: Genotype, space: SearchSpaceDef, dim: DimInfo, value,
             rng: np.random.Generator | None = None) -> Genotype:
    """Return a copy of g with one logical dimension changed.

    Structural side effects (layer-type flips toggling TST fields, fusion
    changes resizing the branch list) initialize newly active fields by
    sampling when ``rng`` is given, or at their range minimum / as copies of
    branch 0 when deterministic behavior is required (neighbors).
    """
    if dim.name == "layer_type":
        return _with_layer_type(g, space, value, rng)
    if dim.name == "fusion":
        return _with_fusion(g, space, value, rng)
    if dim.block is not None:
        block = replace(g.branches[dim.block], **{dim.field: value})
        branches = g.branches[: dim.block] + (block,) + g.branches[dim.block + 1:]
        return replace(g, branches=branches)
    return replace(g, head=replace(g.head, **{dim.field: value}))


def _with_layer_type(g: Genotype, space: SearchSpaceDef, new_type: str,
                     rng: np.random.Generator | None) -> Genotype:
    was_tst, is_tst = g.layer_type == "TST", new_type == "TST"
    branches = g.branches
    if is_tst and not was_tst:
        if rng is not None:
            branches = tuple(
                replace(b, ff_dim=space.tst_ff_dim.sample(rng),
                        attention_heads=space.tst_attention_heads.sample(rng))
                for b in branches
            )
        else:
            branches = tuple(
                replace(b, ff_dim=space.tst_ff_dim.lo,
                        attention_heads=space.tst_attention_heads.lo)
                for b in branches
            )
    elif was_tst and not is_tst:
        branches = tuple(replace(b, ff_dim=None, attention_heads=None) for b in branches)
    return replace(g, layer_type=new_type, branches=branches)


def _with_fusion(g: Genotype, space: SearchSpaceDef, new_fusion: str,
                 rng: np.random.Generator | None) -> Genotype:
    target = branch_count(new_fusion, space.num_modalities)
    branches = list(g.branches[:target])
    is_tst = g.layer_type == "TST"
    while len(branches) < target:
        if rng is not None:
            branches.append(_sample_block(space, rng, is_tst))
        else:
            branches.append(g.branches[0])
    return replace(g, fusion=new_fusion, branches=tuple(branches))


def mutate(g: Genotype, space: SearchSpaceDef, rng: RngLike) -> Genotype:
    """Re-sample exactly one uniformly chosen active dimension, rejecting the
    current value.  Dimensions with a single possible value are not eligible.
    Structural flips (layer type to/from TST, fusion mode) sample or clear
    the conditional fields they toggle."""
    validate_genotype(g, space)
    r = as_generator(rng)
    mutable: list[DimInfo] = []
    for dim in logical_dims(space):
        if not dim.active(g):
            continue
        n_values = len(dim.choices) if dim.kind == "cat" else dim.rng.size
        if n_values >= 2:
            mutable.append(dim)
    if not mutable:
        raise ValidationError("space has no mutable dimension")
    dim = mutable[int(r.integers(len(mutable)))]
    current = dim.read(g)
    if dim.kind == "cat":
        others = [c for c in dim.choices if c != current]
        value = others[int(r.integers(len(others)))]
    else:
        value = dim.rng.sample_excluding(r, current)
    return _set_dim(g, space, dim, value, rng=r)


def neighbors(
    g: Genotype,
    space: SearchSpaceDef,
    step_sizes: dict[str, int] | None = None,
) -> list[Genotype]:
    """All genotypes one move away: +/- step on a numeric dimension or a
    switch to each other categorical value.  Moves leaving a range are
    dropped; results are deduplicated and exclude g itself.

    Categorical switches resolve newly active conditional fields
    deterministically: TST fields start at their range minimum and branch
    slots opened by a fusion switch copy branch 0.
    """
    validate_genotype(g, space)
    steps = dict(DEFAULT_STEP_SIZES)
    if step_sizes:
        steps.update(step_sizes)
    out: list[Genotype] = []
    seen: set[Genotype] = {g}
    for dim in logical_dims(space):
        if not dim.active(g):
            continue
        current = dim.read(g)
        if dim.kind == "cat":
            candidates = [c for c in dim.choices if c != current]
        else:
            key = dim.field if dim.block is not None else f"head_{dim.field}"
            step = steps.get(key, 1)
            candidates = [v for v in (current - step, current + step) if dim.rng.contains(v)]
        for value in candidates:
            ng = _set_dim(g, space, dim, value, rng=None)
            if ng not in seen:
                seen.add(ng)
                out.append(ng)
    return out


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------


def _dim_term(dim: DimInfo, a: Genotype, b: Genotype) -> tuple[float, bool]:
    """(cost, counted) for one logical dimension of a genotype pair."""
    act_a, act_b = dim.active(a), dim.active(b)
    if not act_a and not act_b:
        return 0.0, False
    if act_a != act_b:
        return 1.0, True
    va, vb = dim.read(a), dim.read(b)
    if dim.kind == "cat":
        return (0.0 if va == vb else 1.0), True
    span = dim.rng.span
    if span == 0:
        return 0.0, True
    return abs(va - vb) / span, True


def distance(a: Genotype, b: Genotype, space: SearchSpaceDef) -> float:
    """Normalized pseudometric in [0, 1]: mean over counted dimensions of the
    normalized absolute difference (numeric) or 0/1 mismatch (categorical).
    Dimensions inactive in both genotypes are skipped; dimensions active in
    exactly one count as 1."""
    validate_genotype(a, space)
    validate_genotype(b, space)
    total, counted = 0.0, 0
    for dim in logical_dims(space):
        cost, used = _dim_term(dim, a, b)
        if used:
            total += cost
            counted += 1
    return total / counted


def dim_feature_matrix(
    genotypes: list[Genotype], space: SearchSpaceDef
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized view of genotypes over logical dimensions.

    Returns (values, active, is_cat): values holds normalized numerics or
    categorical codes, active marks dimension activity, is_cat flags the
    categorical dimensions.  Used by the batched distance path.
    """
    dims = logical_dims(space)
    n, d = len(genotypes), len(dims)
    values = np.full((n, d), 0.5)
    active = np.zeros((n, d), dtype=bool)
    is_cat = np.array([dim.kind == "cat" for dim in dims])
    for i, g in enumerate(genotypes):
        for j, dim in enumerate(dims):
            if not dim.active(g):
                continue
            active[i, j] = True
            v = dim.read(g)
            if dim.kind == "cat":
                values[i, j] = dim.choices.index(v)
            else:
                span = dim.rng.span
                values[i, j] = 0.0 if span == 0 else (v - dim.rng.lo) / span
    return values, active, is_cat


def distance_matrix(
    a: list[Genotype], b: list[Genotype], space: SearchSpaceDef
) -> np.ndarray:
    """Pairwise pseudometric between two genotype lists (len(a) x len(b))."""
    va, aa, is_cat = dim_feature_matrix(a, space)
    vb, ab, _ = dim_feature_matrix(b, space)
    va_, aa_ = va[:, None, :], aa[:, None, :]
    vb_, ab_ = vb[None, :, :], ab[None, :, :]
    both = aa_ & ab_
    either = aa_ | ab_
    base = np.where(is_cat[None, None, :], (va_ != vb_).astype(float), np.abs(va_ - vb_))
    cost = np.where(both, base, np.where(either, 1.0, 0.0))
    return cost.sum(axis=2) / either.sum(axis=2)


# ---------------------------------------------------------------------------
# Fixed-length vector encoding
# ---------------------------------------------------------------------------
# Categoricals expand to one-hot slot groups resolved by argmax on decode;
# numerics occupy one min-max-normalized slot.  Inactive conditional slots
# carry the sentinel 0.5 so the vector length never depends on the genotype,
# which is what the GP/TPE/PSO/tree strategies require.

SENTINEL = 0.5


@dataclass(frozen=True)
class SlotSpec:
    dim: DimInfo
    offset: int
    width: int


@lru_cache(maxsize=64)
def vector_layout(space: SearchSpaceDef) -> tuple[SlotSpec, ...]:
    slots: list[SlotSpec] = []
    offset = 0
    for dim in logical_dims(space):
        width = len(dim.choices) if dim.kind == "cat" else 1
        slots.append(SlotSpec(dim=dim, offset=offset, width=width))
        offset += width
    return tuple(slots)


def vector_length(space: SearchSpaceDef) -> int:
    layout = vector_layout(space)
    last = layout[-1]
    return last.offset + last.width


@dataclass(frozen=True)
class EncodedVector:
    """Fixed-length real vector in [0,1]^L mirroring the layout of a space."""

    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def encode(g: Genotype, space: SearchSpaceDef) -> EncodedVector:
    validate_genotype(g, space)
    vec = np.full(vector_length(space), SENTINEL)
    for slot in vector_layout(space):
        dim = slot.dim
        if not dim.active(g):
            continue
        v = dim.read(g)
        if dim.kind == "cat":
            vec[slot.offset: slot.offset + slot.width] = 0.0
            vec[slot.offset + dim.choices.index(v)] = 1.0
        else:
            span = dim.rng.span
            vec[slot.offset] = 0.0 if span == 0 else (v - dim.rng.lo) / span
    return EncodedVector(values=tuple(float(x) for x in vec))


def denormalize_int(x: float, rng: IntRange) -> int:
    """Map a real in [0,1] (clipped) back to the integer range, rounding to
    the nearest value with halves up."""
    x = min(1.0, max(0.0, x))
    v = rng.lo + x * rng.span
    return rng.clip(int(math.floor(v + 0.5)))


def decode(v: EncodedVector | np.ndarray, space: SearchSpaceDef) -> Genotype:
    """Inverse of encode.  Out-of-range reals clip to the nearest bound,
    numeric slots round to the nearest integer, categorical slot groups
    resolve by argmax (ties to the lowest index)."""
    validate_space(space)
    arr = v.as_array() if isinstance(v, EncodedVector) else np.asarray(v, dtype=float)
    if arr.shape != (vector_length(space),):
        raise LayoutError(
            f"vector length {arr.shape} does not match layout ({vector_length(space)},)"
        )
    layout = {slot.dim.name: slot for slot in vector_layout(space)}

    def cat_value(name: str) -> str:
        slot = layout[name]
        group = arr[slot.offset: slot.offset + slot.width]
        return slot.dim.choices[int(np.argmax(group))]

    def int_value(name: str) -> int:
        slot = layout[name]
        return denormalize_int(arr[slot.offset], slot.dim.rng)

    layer_type = cat_value("layer_type")
    fusion = cat_value("fusion") if space.multimodal else "none"
    is_tst = layer_type == "TST"
    branches = []
    for i in range(branch_count(fusion, space.num_modalities)):
        branches.append(SequenceBlock(
            num_layers=int_value(f"block{i}.num_layers"),
            num_units=int_value(f"block{i}.num_units"),
            ff_dim=int_value(f"block{i}.ff_dim") if is_tst and space.has_tst else None,
            attention_heads=(
                int_value(f"block{i}.attention_heads") if is_tst and space.has_tst else None
            ),
        ))
    head = ClassificationHead(
        num_layers=int_value("head.num_layers"),
        num_units=int_value("head.num_units"),
    )
    return Genotype(layer_type, fusion, tuple(branches), head)


# ---------------------------------------------------------------------------
# JSON serialization (documented schema, see README)
# ---------------------------------------------------------------------------


def space_to_dict(space: SearchSpaceDef) -> dict:
    d = {
        "seq_layer_types": list(space.seq_layer_types),
        "seq_num_layers": [space.seq_num_layers.lo, space.seq_num_layers.hi],
        "seq_num_units": [space.seq_num_units.lo, space.seq_num_units.hi],
        "head_num_layers": [space.head_num_layers.lo, space.head_num_layers.hi],
        "head_num_units": [space.head_num_units.lo, space.head_num_units.hi],
        "fusion_modes": list(space.fusion_modes),
        "num_modalities": space.num_modalities,
    }
    if space.tst_ff_dim is not None:
        d["tst_ff_dim"] = [space.tst_ff_dim.lo, space.tst_ff_dim.hi]
        d["tst_attention_heads"] = [space.tst_attention_heads.lo, space.tst_attention_heads.hi]
    return d


def space_from_dict(d: dict) -> SearchSpaceDef:
    def rng(key: str, required: bool = False) -> IntRange | None:
        if key not in d:
            if required:
                raise KeyError(key)
            return None
        lo, hi = d[key]
        return IntRange(int(lo), int(hi))

    try:
        space = SearchSpaceDef(
            seq_layer_types=tuple(d["seq_layer_types"]),
            seq_num_layers=rng("seq_num_layers", required=True),
            seq_num_units=rng("seq_num_units", required=True),
            head_num_layers=rng("head_num_layers", required=True),
            head_num_units=rng("head_num_units", required=True),
            fusion_modes=tuple(d.get("fusion_modes", ["none"])),
            num_modalities=int(d.get("num_modalities", 1)),
            tst_ff_dim=rng("tst_ff_dim"),
            tst_attention_heads=rng("tst_attention_heads"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed space document: {exc}") from exc
    validate_space(space)
    return space


def genotype_to_dict(g: Genotype) -> dict:
    return {
        "layer_type": g.layer_type,
        "fusion": g.fusion,
        "branches": [
            {
                "num_layers": b.num_layers,
                "num_units": b.num_units,
                "ff_dim": b.ff_dim,
                "attention_heads": b.attention_heads,
            }
            for b in g.branches
        ],
        "head": {"num_layers": g.head.num_layers, "num_units": g.head.num_units},
    }


def genotype_from_dict(d: dict) -> Genotype:
    try:
        return Genotype(
            layer_type=d["layer_type"],
            fusion=d.get("fusion", "none"),
            branches=tuple(
                SequenceBlock(
                    num_layers=int(b["num_layers"]),
                    num_units=int(b["num_units"]),
                    ff_dim=None if b.get("ff_dim") is None else int(b["ff_dim"]),
                    attention_heads=(
                        None if b.get("attention_heads") is None
                        else int(b["attention_heads"])
                    ),
                )
                for b in d["branches"]
            ),
            head=ClassificationHead(
                num_layers=int(d["head"]["num_layers"]),
                num_units=int(d["head"]["num_units"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed genotype document: {exc}") from exc


def genotype_key(g: Genotype) -> str:
    """Canonical JSON string, usable as a stable dictionary key."""
    return json.dumps(genotype_to_dict(g), sort_keys=True, separators=(",", ":"))


def load_space(path: str | Path) -> SearchSpaceDef:
    return space_from_dict(json.loads(Path(path).read_text()))


def load_genotype(path: str | Path) -> Genotype:
    return genotype_from_dict(json.loads(Path(path).read_text()))
