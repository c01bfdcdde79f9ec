"""Forward-pass FLOPs estimation for genotypes.

Counting convention (every formula below and the instrumented reference
pass in the test suite follow it exactly):

- one scalar multiply, add, divide, or activation evaluation (sigmoid,
  tanh, ReLU, exp) = 1 FLOP;
- dot products and reductions accumulate from an explicit zero, so a
  length-n reduction costs n adds;
- a dense map d_in -> d_out with bias therefore costs (2*d_in + 1)*d_out
  per application;
- softmax over a row of length n costs 3*n (exp, sum, divide);
- LSTM layers: four gate maps over the concatenated [input, hidden]
  vector plus 9 elementwise ops per unit per step (3 multiplies, 1 add,
  5 activations: the four gate nonlinearities and the output tanh);
- TCN layers: one residual block per layer, two causal convolutions with
  kernel size 3 and dilation 2**level, ReLU after each convolution and
  after the residual add, and a biased 1x1 convolution on the residual
  path when the channel count changes.  Zero padding contributes full
  multiply-accumulate cost (framework-style counting);
- TST layers: a token projection into the model width (rounded up to a
  multiple of the attention heads), then per encoder layer the Q/K/V
  projections, the query-key score products, softmax per attention row,
  the attention-value products, the output projection and the two-map
  feed-forward with its hidden activation.  Score scaling, residual
  connections, normalization layers and the positional-encoding add are
  excluded from the convention;
- classification heads: hidden dense maps with one activation per unit,
  an output projection to the class count, and a final softmax;
- late fusion averages the per-branch probability vectors: M adds plus
  one divide per class.

Concatenation (early/intermediate fusion) is free.  Only inference is
counted, never the backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .space import Genotype, SequenceBlock

TCN_KERNEL_SIZE = 3


@dataclass(frozen=True)
class InputShape:
    """Shape of one input instance: k time steps of per-modality features."""

    seq_len: int
    feature_dims: tuple[int, ...]
    num_classes: int


def validate_shape(shape: InputShape) -> None:
    problems = []
    if shape.seq_len < 1:
        problems.append(f"seq_len={shape.seq_len} must be >= 1")
    if not shape.feature_dims:
        problems.append("feature_dims is empty")
    for i, d in enumerate(shape.feature_dims):
        if d < 1:
            problems.append(f"feature_dims[{i}]={d} must be >= 1")
    if shape.num_classes < 2:
        problems.append(f"num_classes={shape.num_classes} must be >= 2")
    if problems:
        raise ValidationError("invalid input shape: " + "; ".join(problems))


@dataclass(frozen=True)
class FlopsBreakdown:
    total: int
    per_block: tuple[tuple[str, int], ...]


def dense_flops(d_in: int, d_out: int) -> int:
    """One biased dense application: (2*d_in + 1)*d_out."""
    return (2 * d_in + 1) * d_out


def lstm_layer_flops(d_in: int, hidden: int, seq_len: int) -> int:
    gates = 4 * dense_flops(d_in + hidden, hidden)
    elementwise = 9 * hidden
    return seq_len * (gates + elementwise)


def tcn_block_flops(d_in: int, channels: int, seq_len: int) -> int:
    conv1 = seq_len * channels * (2 * TCN_KERNEL_SIZE * d_in + 1)
    conv2 = seq_len * channels * (2 * TCN_KERNEL_SIZE * channels + 1)
    relus = 3 * seq_len * channels
    residual_add = seq_len * channels
    downsample = seq_len * dense_flops(d_in, channels) if d_in != channels else 0
    return conv1 + conv2 + relus + residual_add + downsample


def tst_model_dim(num_units: int, attention_heads: int) -> int:
    """Model width rounded up to the nearest multiple of the head count."""
    return math.ceil(num_units / attention_heads) * attention_heads


def tst_encoder_layer_flops(d_model: int, heads: int, ff_dim: int, seq_len: int) -> int:
    qkv = 3 * seq_len * dense_flops(d_model, d_model)
    scores = 2 * seq_len * seq_len * d_model
    softmax = 3 * heads * seq_len * seq_len
    attend = 2 * seq_len * seq_len * d_model
    out_proj = seq_len * dense_flops(d_model, d_model)
    feed_forward = (
        seq_len * dense_flops(d_model, ff_dim)
        + seq_len * ff_dim
        + seq_len * dense_flops(ff_dim, d_model)
    )
    return qkv + scores + softmax + attend + out_proj + feed_forward


def sequence_block_flops(block: SequenceBlock, layer_type: str, d_in: int, seq_len: int) -> int:
    if layer_type == "LSTM":
        total = lstm_layer_flops(d_in, block.num_units, seq_len)
        for _ in range(block.num_layers - 1):
            total += lstm_layer_flops(block.num_units, block.num_units, seq_len)
        return total
    if layer_type == "TCN":
        total = tcn_block_flops(d_in, block.num_units, seq_len)
        for _ in range(block.num_layers - 1):
            total += tcn_block_flops(block.num_units, block.num_units, seq_len)
        return total
    if layer_type == "TST":
        d_model = tst_model_dim(block.num_units, block.attention_heads)
        total = seq_len * dense_flops(d_in, d_model)
        total += block.num_layers * tst_encoder_layer_flops(
            d_model, block.attention_heads, block.ff_dim, seq_len
        )
        return total
    raise ValidationError(f"unknown layer type {layer_type!r}")


def block_output_dim(block: SequenceBlock, layer_type: str) -> int:
    if layer_type == "TST":
        return tst_model_dim(block.num_units, block.attention_heads)
    return block.num_units


def head_flops(rep_dim: int, head_layers: int, head_units: int, num_classes: int) -> int:
    total = dense_flops(rep_dim, head_units) + head_units
    for _ in range(head_layers - 1):
        total += dense_flops(head_units, head_units) + head_units
    total += dense_flops(head_units, num_classes)
    total += 3 * num_classes
    return total


def estimate_flops(g: Genotype, shape: InputShape) -> FlopsBreakdown:
    """Deterministic FLOPs count of one forward pass under the documented
    convention, broken down by architecture block."""
    validate_shape(shape)
    modalities = len(shape.feature_dims)
    lt, seq_len, classes = g.layer_type, shape.seq_len, shape.num_classes
    parts: list[tuple[str, int]] = []

    if g.fusion == "none":
        if modalities != 1 or len(g.branches) != 1:
            raise ValidationError("fusion 'none' requires exactly one modality and one branch")
        block = g.branches[0]
        parts.append(("branch_0", sequence_block_flops(block, lt, shape.feature_dims[0], seq_len)))
        parts.append(("head", head_flops(block_output_dim(block, lt), g.head.num_layers,
                                         g.head.num_units, classes)))
    elif g.fusion == "early":
        if len(g.branches) != 1:
            raise ValidationError("early fusion requires exactly one branch")
        block = g.branches[0]
        d_in = sum(shape.feature_dims)
        parts.append(("branch_0", sequence_block_flops(block, lt, d_in, seq_len)))
        parts.append(("head", head_flops(block_output_dim(block, lt), g.head.num_layers,
                                         g.head.num_units, classes)))
    elif g.fusion == "intermediate":
        if len(g.branches) != modalities + 1:
            raise ValidationError(
                f"intermediate fusion requires {modalities + 1} branches "
                f"(one per modality plus the shared block), got {len(g.branches)}"
            )
        rep_total = 0
        for i in range(modalities):
            block = g.branches[i]
            parts.append((f"branch_{i}",
                          sequence_block_flops(block, lt, shape.feature_dims[i], seq_len)))
            rep_total += block_output_dim(block, lt)
        shared = g.branches[modalities]
        parts.append(("shared", sequence_block_flops(shared, lt, rep_total, seq_len)))
        parts.append(("head", head_flops(block_output_dim(shared, lt), g.head.num_layers,
                                         g.head.num_units, classes)))
    elif g.fusion == "late":
        if len(g.branches) != modalities:
            raise ValidationError(
                f"late fusion requires one branch per modality "
                f"({modalities}), got {len(g.branches)}"
            )
        for i, block in enumerate(g.branches):
            parts.append((f"branch_{i}",
                          sequence_block_flops(block, lt, shape.feature_dims[i], seq_len)))
            parts.append((f"head_{i}", head_flops(block_output_dim(block, lt),
                                                  g.head.num_layers, g.head.num_units, classes)))
        parts.append(("fusion_avg", (modalities + 1) * classes))
    else:
        raise ValidationError(f"unknown fusion mode {g.fusion!r}")

    return FlopsBreakdown(total=sum(v for _, v in parts), per_block=tuple(parts))
