import numpy as np
import pytest

from archsearch.complexity import (
    InputShape,
    dense_flops,
    estimate_flops,
    tst_model_dim,
)
from archsearch.errors import ValidationError
from archsearch.space import (
    ClassificationHead,
    Genotype,
    IntRange,
    SearchSpaceDef,
    SequenceBlock,
    sample_uniform,
)
from flops_oracle import count_forward_flops

# Compact space so the instrumented scalar-level oracle stays fast.
ORACLE_SPACE = SearchSpaceDef(
    seq_layer_types=("LSTM", "TCN", "TST"),
    seq_num_layers=IntRange(1, 3),
    seq_num_units=IntRange(8, 32),
    head_num_layers=IntRange(1, 2),
    head_num_units=IntRange(8, 16),
    tst_ff_dim=IntRange(16, 32),
    tst_attention_heads=IntRange(2, 4),
)

ORACLE_FUSION_SPACE = SearchSpaceDef(
    seq_layer_types=("LSTM", "TCN", "TST"),
    seq_num_layers=IntRange(1, 2),
    seq_num_units=IntRange(8, 24),
    head_num_layers=IntRange(1, 2),
    head_num_units=IntRange(8, 16),
    fusion_modes=("early", "intermediate", "late"),
    num_modalities=2,
    tst_ff_dim=IntRange(16, 32),
    tst_attention_heads=IntRange(2, 4),
)


def lstm_g(layers=1, units=8):
    return Genotype("LSTM", "none", (SequenceBlock(layers, units),),
                    ClassificationHead(1, 8))


class TestPrimitives:
    def test_dense_map_example(self):
        assert dense_flops(8, 3) == 51  # (2*8 + 1) * 3

    def test_model_dim_rounds_up_to_heads(self):
        assert tst_model_dim(119, 16) == 128
        assert tst_model_dim(16, 4) == 16


class TestOracleAgreement:
    def test_fixed_lstm_matches_oracle(self):
        g = lstm_g(layers=1, units=8)
        shape = InputShape(seq_len=10, feature_dims=(3,), num_classes=3)
        assert estimate_flops(g, shape).total == count_forward_flops(g, shape)

    @pytest.mark.parametrize("layer_type", ["LSTM", "TCN", "TST"])
    def test_random_genotypes_per_layer_type(self, layer_type):
        rng = np.random.default_rng(hash(layer_type) % 2**32)
        checked = 0
        seed = 0
        while checked < 10:
            g = sample_uniform(ORACLE_SPACE, rng)
            if g.layer_type != layer_type:
                continue
            shape = InputShape(seq_len=int(rng.integers(6, 12)),
                               feature_dims=(int(rng.integers(2, 6)),),
                               num_classes=int(rng.integers(2, 5)))
            estimated = estimate_flops(g, shape).total
            counted = count_forward_flops(g, shape, seed=seed)
            assert estimated == counted, (g, shape)
            checked += 1
            seed += 1

    @pytest.mark.parametrize("fusion", ["early", "intermediate", "late"])
    def test_random_genotypes_per_fusion_mode(self, fusion):
        rng = np.random.default_rng(hash(fusion) % 2**32)
        checked = 0
        while checked < 10:
            g = sample_uniform(ORACLE_FUSION_SPACE, rng)
            if g.fusion != fusion:
                continue
            shape = InputShape(seq_len=int(rng.integers(5, 10)),
                               feature_dims=(int(rng.integers(2, 5)),
                                             int(rng.integers(2, 5))),
                               num_classes=3)
            assert estimate_flops(g, shape).total == count_forward_flops(g, shape), (g, shape)
            checked += 1


class TestStructure:
    def test_breakdown_sums_to_total(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            g = sample_uniform(ORACLE_FUSION_SPACE, rng)
            shape = InputShape(seq_len=8, feature_dims=(3, 4), num_classes=3)
            bd = estimate_flops(g, shape)
            assert bd.total == sum(v for _, v in bd.per_block)

    def test_doubling_units_never_decreases(self):
        shape = InputShape(seq_len=12, feature_dims=(5,), num_classes=3)
        rng = np.random.default_rng(9)
        for _ in range(100):
            g = sample_uniform(ORACLE_SPACE, rng)
            doubled = Genotype(
                g.layer_type, g.fusion,
                tuple(SequenceBlock(b.num_layers, b.num_units * 2, b.ff_dim,
                                    b.attention_heads) for b in g.branches),
                g.head)
            assert (estimate_flops(doubled, shape).total
                    >= estimate_flops(g, shape).total)

    def test_lstm_tcn_linear_in_seq_len(self):
        for layer_type in ("LSTM", "TCN"):
            g = Genotype(layer_type, "none", (SequenceBlock(2, 16),),
                         ClassificationHead(1, 8))
            counts = [estimate_flops(g, InputShape(L, (4,), 3)).total
                      for L in (8, 16, 32, 64)]
            diffs = np.diff(counts)
            seconds = np.diff(diffs / np.array([8, 16, 32]))  # per-step slope
            assert np.allclose(seconds, 0), counts

    def test_tst_quadratic_in_seq_len(self):
        g = Genotype("TST", "none", (SequenceBlock(2, 16, 16, 2),),
                     ClassificationHead(1, 8))
        lengths = np.array([8, 16, 32, 64], dtype=float)
        counts = np.array([estimate_flops(g, InputShape(int(L), (4,), 3)).total
                           for L in lengths], dtype=float)
        quad = np.polyfit(lengths, counts, 2)
        assert quad[0] > 0
        reconstructed = np.polyval(quad, lengths)
        assert np.allclose(reconstructed, counts, rtol=1e-12)
        linear_resid = counts - np.polyval(np.polyfit(lengths, counts, 1), lengths)
        assert np.abs(linear_resid).max() > 0

    def test_late_vs_early_fusion_against_oracle(self):
        block = SequenceBlock(1, 12)
        head = ClassificationHead(1, 8)
        shape = InputShape(seq_len=6, feature_dims=(3, 3), num_classes=3)
        late = Genotype("LSTM", "late", (block, block), head)
        early = Genotype("LSTM", "early", (block,), head)
        late_bd = estimate_flops(late, shape)
        assert late_bd.total == count_forward_flops(late, shape)
        assert estimate_flops(early, shape).total == count_forward_flops(early, shape)
        # late total = 2 * (branch + head) + averaging
        parts = dict(late_bd.per_block)
        assert late_bd.total == (parts["branch_0"] + parts["branch_1"]
                                 + parts["head_0"] + parts["head_1"]
                                 + parts["fusion_avg"])
        assert parts["fusion_avg"] == 3 * 3  # (M + 1) * classes


class TestErrors:
    def test_zero_feature_dims_rejected(self):
        with pytest.raises(ValidationError, match="feature_dims"):
            estimate_flops(lstm_g(), InputShape(10, (0,), 3))

    def test_modality_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="one modality"):
            estimate_flops(lstm_g(), InputShape(10, (3, 4), 3))

    def test_bad_classes_rejected(self):
        with pytest.raises(ValidationError, match="num_classes"):
            estimate_flops(lstm_g(), InputShape(10, (3,), 1))
