"""Model construction from genotype specs.

Sequence blocks keep the full sequence so intermediate fusion can stack a
shared block on the concatenated representations; classification happens on
the final time step.  All models output class probabilities: early and
intermediate fusion apply one softmax head, late fusion averages the
per-modality heads' probabilities.  TST widths round up to the nearest
multiple of the attention head count.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .genotype import BlockSpec, GenotypeSpec, expected_branches

TCN_KERNEL_SIZE = 3


class ModelBuildError(ValueError):
    pass


class LstmBlock(nn.Module):
    def __init__(self, d_in: int, spec: BlockSpec, dropout: float):
        super().__init__()
        self.lstm = nn.LSTM(
            d_in, spec.num_units, num_layers=spec.num_layers, batch_first=True,
            dropout=dropout if spec.num_layers > 1 else 0.0,
        )
        self.out_dim = spec.num_units

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.lstm(x)
        return out


class TcnResidualLayer(nn.Module):
    def __init__(self, d_in: int, channels: int, dilation: int, dropout: float):
        super().__init__()
        self.pad = (TCN_KERNEL_SIZE - 1) * dilation
        self.conv1 = nn.Conv1d(d_in, channels, TCN_KERNEL_SIZE, dilation=dilation)
        self.conv2 = nn.Conv1d(channels, channels, TCN_KERNEL_SIZE, dilation=dilation)
        self.dropout = nn.Dropout(dropout)
        self.downsample = nn.Conv1d(d_in, channels, 1) if d_in != channels else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, channels, time); causal left padding keeps length fixed
        h = torch.relu(self.conv1(nn.functional.pad(x, (self.pad, 0))))
        h = self.dropout(h)
        h = torch.relu(self.conv2(nn.functional.pad(h, (self.pad, 0))))
        h = self.dropout(h)
        res = x if self.downsample is None else self.downsample(x)
        return torch.relu(h + res)


class TcnBlock(nn.Module):
    def __init__(self, d_in: int, spec: BlockSpec, dropout: float):
        super().__init__()
        layers = []
        for level in range(spec.num_layers):
            layers.append(TcnResidualLayer(d_in if level == 0 else spec.num_units,
                                           spec.num_units, 2 ** level, dropout))
        self.layers = nn.Sequential(*layers)
        self.out_dim = spec.num_units

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x.transpose(1, 2)).transpose(1, 2)


def sinusoidal_encoding(seq_len: int, dim: int) -> torch.Tensor:
    position = torch.arange(seq_len, dtype=torch.float32).unsqueeze(1)
    half = torch.arange(0, dim, 2, dtype=torch.float32)
    freq = torch.exp(-math.log(10000.0) * half / dim)
    enc = torch.zeros(seq_len, dim)
    enc[:, 0::2] = torch.sin(position * freq)
    enc[:, 1::2] = torch.cos(position * freq[: enc[:, 1::2].shape[1]])
    return enc


class TstBlock(nn.Module):
    def __init__(self, d_in: int, spec: BlockSpec, dropout: float):
        super().__init__()
        heads = spec.attention_heads
        self.d_model = math.ceil(spec.num_units / heads) * heads
        self.project = nn.Linear(d_in, self.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=self.d_model, nhead=heads, dim_feedforward=spec.ff_dim,
            dropout=dropout, batch_first=True, activation="relu",
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=spec.num_layers)
        self.out_dim = self.d_model

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.project(x)
        h = h + sinusoidal_encoding(h.shape[1], self.d_model).to(h.device)
        return self.encoder(h)


def make_block(layer_type: str, d_in: int, spec: BlockSpec, dropout: float):
    if layer_type == "LSTM":
        return LstmBlock(d_in, spec, dropout)
    if layer_type == "TCN":
        return TcnBlock(d_in, spec, dropout)
    if layer_type == "TST":
        return TstBlock(d_in, spec, dropout)
    raise ModelBuildError(f"unknown layer type {layer_type!r}")


class ClassifierHead(nn.Module):
    def __init__(self, d_in: int, num_layers: int, num_units: int,
                 num_classes: int, dropout: float):
        super().__init__()
        layers: list[nn.Module] = []
        width = d_in
        for _ in range(num_layers):
            layers.extend([nn.Linear(width, num_units), nn.ReLU(), nn.Dropout(dropout)])
            width = num_units
        layers.append(nn.Linear(width, num_classes))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.net(x), dim=-1)


class SequenceClassifier(nn.Module):
    """Fusion wiring around the sequence blocks.

    forward takes one tensor per modality, each (batch, seq_len, dim), and
    returns class probabilities (batch, num_classes).
    """

    def __init__(self, genotype: GenotypeSpec, feature_dims: list[int],
                 num_classes: int, dropout: float = 0.3):
        super().__init__()
        self.fusion = genotype.fusion
        self.num_modalities = len(feature_dims)
        expected = expected_branches(genotype.fusion, self.num_modalities)
        if len(genotype.branches) != expected:
            raise ModelBuildError(
                f"fusion {genotype.fusion!r} over {self.num_modalities} "
                f"modalities needs {expected} branches, genotype has "
                f"{len(genotype.branches)}")
        if genotype.fusion == "none" and self.num_modalities != 1:
            raise ModelBuildError("fusion 'none' requires exactly one modality")
        lt = genotype.layer_type

        if genotype.fusion in ("none", "early"):
            d_in = sum(feature_dims)
            self.blocks = nn.ModuleList([make_block(lt, d_in, genotype.branches[0],
                                                    dropout)])
            self.shared = None
            self.heads = nn.ModuleList([ClassifierHead(
                self.blocks[0].out_dim, genotype.head.num_layers,
                genotype.head.num_units, num_classes, dropout)])
        elif genotype.fusion == "intermediate":
            self.blocks = nn.ModuleList([
                make_block(lt, d, b, dropout)
                for d, b in zip(feature_dims, genotype.branches)])
            joint_dim = sum(block.out_dim for block in self.blocks)
            self.shared = make_block(lt, joint_dim, genotype.branches[-1], dropout)
            self.heads = nn.ModuleList([ClassifierHead(
                self.shared.out_dim, genotype.head.num_layers,
                genotype.head.num_units, num_classes, dropout)])
        else:  # late
            self.blocks = nn.ModuleList([
                make_block(lt, d, b, dropout)
                for d, b in zip(feature_dims, genotype.branches)])
            self.shared = None
            self.heads = nn.ModuleList([
                ClassifierHead(block.out_dim, genotype.head.num_layers,
                               genotype.head.num_units, num_classes, dropout)
                for block in self.blocks])

    def forward(self, modalities: list[torch.Tensor]) -> torch.Tensor:
        if len(modalities) != self.num_modalities:
            raise ModelBuildError(
                f"expected {self.num_modalities} modality tensors, "
                f"got {len(modalities)}")
        if self.fusion in ("none", "early"):
            joint = modalities[0] if len(modalities) == 1 else torch.cat(modalities, dim=2)
            seq = self.blocks[0](joint)
            return self.heads[0](seq[:, -1, :])
        if self.fusion == "intermediate":
            reps = [block(x) for block, x in zip(self.blocks, modalities)]
            seq = self.shared(torch.cat(reps, dim=2))
            return self.heads[0](seq[:, -1, :])
        probs = [head(block(x)[:, -1, :])
                 for block, head, x in zip(self.blocks, self.heads, modalities)]
        return torch.stack(probs, dim=0).mean(dim=0)


def build_model(genotype: GenotypeSpec, feature_dims: list[int], num_classes: int,
                dropout: float = 0.3) -> SequenceClassifier:
    if num_classes < 2:
        raise ModelBuildError("need at least two classes")
    if not feature_dims or any(d < 1 for d in feature_dims):
        raise ModelBuildError(f"bad feature dims {feature_dims}")
    return SequenceClassifier(genotype, list(feature_dims), num_classes, dropout)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
