"""Instrumented reference forward pass for FLOPs verification.

Runs a real (randomly weighted) forward computation and counts every scalar
multiply, add, divide and activation as it happens.  The counting convention
matches the estimator's documented one: reductions accumulate from an
explicit zero, zero padding in convolutions costs full multiply-accumulates,
and the simplified transformer encoder omits score scaling, residual paths,
normalization and positional encodings.  Everything here is structured as an
actual computation over arrays, independent of the closed-form block
formulas in the package.
"""

from __future__ import annotations

import math

import numpy as np

from archsearch.complexity import InputShape
from archsearch.space import Genotype, SequenceBlock

KERNEL = 3


class OpCounter:
    def __init__(self):
        self.muls = 0
        self.adds = 0
        self.divs = 0
        self.acts = 0

    @property
    def total(self) -> int:
        return self.muls + self.adds + self.divs + self.acts


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def dense(c: OpCounter, weights: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    d_out, d_in = weights.shape
    out = np.empty(d_out)
    for j in range(d_out):
        out[j] = float(np.dot(weights[j], x)) + bias[j]
        c.muls += d_in
        c.adds += d_in + 1  # zero-initialized accumulator plus the bias
    return out


def activation(c: OpCounter, x: np.ndarray, fn) -> np.ndarray:
    c.acts += x.size
    return fn(x)


def softmax_row(c: OpCounter, row: np.ndarray) -> np.ndarray:
    e = np.exp(row)
    c.acts += row.size
    total = 0.0
    for v in e:
        total += v
        c.adds += 1
    out = e / total
    c.divs += row.size
    return out


def lstm_layer(c: OpCounter, x: np.ndarray, hidden: int,
               rng: np.random.Generator) -> np.ndarray:
    seq_len, d_in = x.shape
    w = rng.normal(scale=0.1, size=(4, hidden, d_in + hidden))
    b = rng.normal(scale=0.1, size=(4, hidden))
    h = np.zeros(hidden)
    cell = np.zeros(hidden)
    outputs = np.empty((seq_len, hidden))
    for t in range(seq_len):
        z = np.concatenate([x[t], h])
        gate_i = activation(c, dense(c, w[0], b[0], z), _sigmoid)
        gate_f = activation(c, dense(c, w[1], b[1], z), _sigmoid)
        gate_g = activation(c, dense(c, w[2], b[2], z), np.tanh)
        gate_o = activation(c, dense(c, w[3], b[3], z), _sigmoid)
        fc = gate_f * cell
        c.muls += hidden
        ig = gate_i * gate_g
        c.muls += hidden
        cell = fc + ig
        c.adds += hidden
        tanh_cell = activation(c, cell, np.tanh)
        h = gate_o * tanh_cell
        c.muls += hidden
        outputs[t] = h
    return outputs


def causal_conv1d(c: OpCounter, x: np.ndarray, weights: np.ndarray,
                  bias: np.ndarray, dilation: int) -> np.ndarray:
    seq_len, d_in = x.shape
    d_out = weights.shape[0]  # (d_out, KERNEL, d_in)
    pad = (KERNEL - 1) * dilation
    padded = np.vstack([np.zeros((pad, d_in)), x])
    out = np.empty((seq_len, d_out))
    for t in range(seq_len):
        window = padded[t: t + pad + 1: dilation, :]  # (KERNEL, d_in)
        for j in range(d_out):
            out[t, j] = float(np.sum(weights[j] * window)) + bias[j]
            c.muls += KERNEL * d_in
            c.adds += KERNEL * d_in + 1
    return out


def tcn_block(c: OpCounter, x: np.ndarray, channels: int, level: int,
              rng: np.random.Generator) -> np.ndarray:
    seq_len, d_in = x.shape
    dilation = 2 ** level
    w1 = rng.normal(scale=0.1, size=(channels, KERNEL, d_in))
    b1 = rng.normal(scale=0.1, size=channels)
    w2 = rng.normal(scale=0.1, size=(channels, KERNEL, channels))
    b2 = rng.normal(scale=0.1, size=channels)
    h = activation(c, causal_conv1d(c, x, w1, b1, dilation), lambda v: np.maximum(v, 0))
    h = activation(c, causal_conv1d(c, h, w2, b2, dilation), lambda v: np.maximum(v, 0))
    if d_in != channels:
        wd = rng.normal(scale=0.1, size=(channels, d_in))
        bd = rng.normal(scale=0.1, size=channels)
        res = np.stack([dense(c, wd, bd, x[t]) for t in range(seq_len)])
    else:
        res = x
    out = h + res
    c.adds += out.size
    return activation(c, out, lambda v: np.maximum(v, 0))


def tst_block(c: OpCounter, x: np.ndarray, block: SequenceBlock,
              rng: np.random.Generator) -> np.ndarray:
    seq_len, d_in = x.shape
    heads = block.attention_heads
    d_model = math.ceil(block.num_units / heads) * heads
    d_head = d_model // heads
    wp = rng.normal(scale=0.1, size=(d_model, d_in))
    bp = rng.normal(scale=0.1, size=d_model)
    h = np.stack([dense(c, wp, bp, x[t]) for t in range(seq_len)])
    for _ in range(block.num_layers):
        wq, wk, wv, wo = (rng.normal(scale=0.1, size=(d_model, d_model)) for _ in range(4))
        bq, bk, bv, bo = (rng.normal(scale=0.1, size=d_model) for _ in range(4))
        q = np.stack([dense(c, wq, bq, h[t]) for t in range(seq_len)])
        k = np.stack([dense(c, wk, bk, h[t]) for t in range(seq_len)])
        v = np.stack([dense(c, wv, bv, h[t]) for t in range(seq_len)])
        context = np.empty((seq_len, d_model))
        for hd in range(heads):
            sel = slice(hd * d_head, (hd + 1) * d_head)
            qh, kh, vh = q[:, sel], k[:, sel], v[:, sel]
            attended = np.empty((seq_len, d_head))
            for i in range(seq_len):
                scores = np.empty(seq_len)
                for j in range(seq_len):
                    scores[j] = float(np.dot(qh[i], kh[j]))
                    c.muls += d_head
                    c.adds += d_head
                weights_row = softmax_row(c, scores)
                attended[i] = weights_row @ vh
                c.muls += seq_len * d_head
                c.adds += seq_len * d_head
            context[:, sel] = attended
        h = np.stack([dense(c, wo, bo, context[t]) for t in range(seq_len)])
        wf1 = rng.normal(scale=0.1, size=(block.ff_dim, d_model))
        bf1 = rng.normal(scale=0.1, size=block.ff_dim)
        wf2 = rng.normal(scale=0.1, size=(d_model, block.ff_dim))
        bf2 = rng.normal(scale=0.1, size=d_model)
        out = np.empty((seq_len, d_model))
        for t in range(seq_len):
            hidden = activation(c, dense(c, wf1, bf1, h[t]), lambda z: np.maximum(z, 0))
            out[t] = dense(c, wf2, bf2, hidden)
        h = out
    return h


def sequence_block(c: OpCounter, x: np.ndarray, block: SequenceBlock, layer_type: str,
                   rng: np.random.Generator) -> np.ndarray:
    if layer_type == "LSTM":
        h = x
        for _ in range(block.num_layers):
            h = lstm_layer(c, h, block.num_units, rng)
        return h
    if layer_type == "TCN":
        h = x
        for level in range(block.num_layers):
            h = tcn_block(c, h, block.num_units, level, rng)
        return h
    if layer_type == "TST":
        return tst_block(c, x, block, rng)
    raise AssertionError(layer_type)


def head_forward(c: OpCounter, rep: np.ndarray, layers: int, units: int,
                 classes: int, rng: np.random.Generator) -> np.ndarray:
    z = rep
    for _ in range(layers):
        w = rng.normal(scale=0.1, size=(units, z.shape[0]))
        b = rng.normal(scale=0.1, size=units)
        z = activation(c, dense(c, w, b, z), lambda v: np.maximum(v, 0))
    wo = rng.normal(scale=0.1, size=(classes, units))
    bo = rng.normal(scale=0.1, size=classes)
    return softmax_row(c, dense(c, wo, bo, z))


def count_forward_flops(g: Genotype, shape: InputShape, seed: int = 0) -> int:
    """Execute one instrumented forward pass and return the op count."""
    rng = np.random.default_rng(seed)
    counter = OpCounter()
    inputs = [rng.normal(size=(shape.seq_len, d)) for d in shape.feature_dims]
    classes = shape.num_classes

    if g.fusion in ("none", "early"):
        x = inputs[0] if g.fusion == "none" else np.concatenate(inputs, axis=1)
        seq = sequence_block(counter, x, g.branches[0], g.layer_type, rng)
        head_forward(counter, seq[-1], g.head.num_layers, g.head.num_units, classes, rng)
    elif g.fusion == "intermediate":
        reps = [sequence_block(counter, x, b, g.layer_type, rng)
                for x, b in zip(inputs, g.branches)]
        joint = np.concatenate(reps, axis=1)
        shared = sequence_block(counter, joint, g.branches[-1], g.layer_type, rng)
        head_forward(counter, shared[-1], g.head.num_layers, g.head.num_units, classes, rng)
    elif g.fusion == "late":
        probs = []
        for x, b in zip(inputs, g.branches):
            seq = sequence_block(counter, x, b, g.layer_type, rng)
            probs.append(head_forward(counter, seq[-1], g.head.num_layers,
                                      g.head.num_units, classes, rng))
        acc = np.zeros(classes)
        for p in probs:
            acc = acc + p
            counter.adds += classes
        _ = acc / len(probs)
        counter.divs += classes
    else:
        raise AssertionError(g.fusion)
    return counter.total
